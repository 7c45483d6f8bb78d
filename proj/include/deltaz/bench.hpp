#pragma once

// Experiment harness: robots x seeded learning runs, per-run learning curves,
// per-robot summary statistics, and zero-shot transfer of learned means.

#include "deltaz/config.hpp"
#include "deltaz/device.hpp"
#include "deltaz/dial_env.hpp"
#include "deltaz/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace deltaz {

// --- seeds ----------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t run_seed(std::uint64_t seed_base, int robot, int run) {
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(robot)) << 32) |
                            static_cast<std::uint32_t>(run);
  return seed_base ^ splitmix64(key);
}

// --- episode execution ------------------------------------------------------------

/// Executes one skill episode on a robot and reports the outcome.
class EpisodeRunner {
 public:
  virtual ~EpisodeRunner() = default;
  virtual StepOutcome run(const SkillParams& s) = 0;
};

/// In-process robot: the host calls the simulated robot directly and reads
/// the true dial state (or the ADC, when reward_from_adc is set).
class DirectRunner final : public EpisodeRunner {
 public:
  DirectRunner(const ExperimentConfig& cfg, const RobotImperfection& imp, std::uint64_t noise_seed)
      : env_(cfg.env, cfg.workspace, noise_seed), robot_(cfg.geometry, imp, env_) {}

  StepOutcome run(const SkillParams& s) override {
    robot_.home();
    const SkillPath path = plan_skill(s, env_.config(), env_.workspace());
    execute(path);
    const int code = env_.read_adc();
    if (env_.config().reward_from_adc) return env_.outcome_from_adc(code);
    const double phi = env_.lever().angle;
    const auto& c = env_.config();
    return {phi, reward(phi, c.target_angle, c.success_tol), std::abs(phi - c.target_angle) < c.success_tol, code};
  }

  DialEnv& env() { return env_; }

 private:
  void execute(const SkillPath& path) {
    const auto& c = env_.config();
    (void)robot_.goto_xyz({path.first.x, path.first.y, quantize_mm(c.hover_z)});
    (void)robot_.goto_xyz(path.first);
    (void)robot_.goto_xyz(path.second);
  }

  DialEnv env_;
  SimulatedRobot robot_;
};

/// Host talking to the mock firmware through the text protocol. The only
/// observation available is the POT reading.
class ProtocolRunner final : public EpisodeRunner {
 public:
  ProtocolRunner(const ExperimentConfig& cfg, const RobotImperfection& imp, std::uint64_t noise_seed)
      : env_(cfg.env, cfg.workspace, noise_seed),
        robot_(cfg.geometry, imp, env_),
        firmware_(robot_),
        session_(firmware_),
        client_(session_) {}

  StepOutcome run(const SkillParams& s) override {
    expect_ok(client_.send(Home{}));
    const auto& c = env_.config();
    const SkillPath path = plan_skill(s, c, env_.workspace());
    // motion errors leave the robot where it was, exactly like the direct path
    (void)client_.send(GotoXYZ{path.first.x, path.first.y, quantize_mm(c.hover_z)});
    (void)client_.send(GotoXYZ{path.first.x, path.first.y, path.first.z});
    (void)client_.send(GotoXYZ{path.second.x, path.second.y, path.second.z});
    const Response r = client_.send(ReadPot{});
    const auto* pot = std::get_if<Pot>(&r);
    if (!pot) throw std::runtime_error("protocol: ReadPot did not return POT");
    return env_.outcome_from_adc(pot->value);
  }

 private:
  static void expect_ok(const Response& r) {
    if (!std::holds_alternative<Ok>(r)) throw std::runtime_error("protocol: expected OK, got " + encode_response(r));
  }

  DialEnv env_;
  SimulatedRobot robot_;
  MockFirmware firmware_;
  InMemorySession session_;
  DeviceClient client_;
};

inline std::unique_ptr<EpisodeRunner> make_runner(const ExperimentConfig& cfg, int robot, std::uint64_t noise_seed) {
  const RobotImperfection& imp = cfg.robots.at(static_cast<std::size_t>(robot));
  if (cfg.transport == Transport::Protocol) return std::make_unique<ProtocolRunner>(cfg, imp, noise_seed);
  return std::make_unique<DirectRunner>(cfg, imp, noise_seed);
}

// --- learning curves --------------------------------------------------------------

enum class RunStatus { Running, Converged, MaxUpdates, Failed };

inline const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxUpdates: return "max_updates";
    case RunStatus::Failed: return "failed";
  }
  return "failed";
}

inline RunStatus parse_status(const std::string& s) {
  if (s == "running") return RunStatus::Running;
  if (s == "converged") return RunStatus::Converged;
  if (s == "max_updates") return RunStatus::MaxUpdates;
  if (s == "failed") return RunStatus::Failed;
  throw std::runtime_error("unknown run status '" + s + "'");
}

struct CurvePoint {
  int update = 0;  // 0 = initial policy and its initial batch
  Vec4 mean = Vec4::Zero();
  Vec4 std = Vec4::Zero();
  double batch_reward_mean = 0.0;
  int successes = 0;
  int batch_size = 0;
  bool degenerate_update = false;
};

struct LearningCurve {
  int robot = 0;
  int run = 0;
  std::vector<CurvePoint> points;
  RunStatus status = RunStatus::Running;
  std::string error;  // set when status == Failed

  bool converged() const { return status == RunStatus::Converged; }
  /// Mean of the policy that produced the last batch.
  Vec4 final_mean() const { return points.empty() ? Vec4::Zero() : points.back().mean; }
  double final_batch_reward() const { return points.empty() ? 0.0 : points.back().batch_reward_mean; }
};

/// Average over reward_repeats executions of the same parameters.
inline EpisodeRecord evaluate_episode(EpisodeRunner& runner, const PolicySample& s, const RepsConfig& reps) {
  EpisodeRecord rec;
  rec.params = s.params;
  rec.draw = s.draw;
  double total = 0.0;
  for (int k = 0; k < reps.reward_repeats; ++k) {
    const StepOutcome o = runner.run(s.params);
    total += o.reward;
    rec.final_angle = o.final_angle;
    rec.success = o.success;
  }
  rec.reward = total / reps.reward_repeats;
  return rec;
}

inline CurvePoint summarize_batch(int update, const GaussianPolicy& policy, const std::vector<EpisodeRecord>& batch,
                                  bool degenerate) {
  CurvePoint p;
  p.update = update;
  p.mean = policy.mean;
  p.std = policy.covariance.diagonal().cwiseSqrt();
  double total = 0.0;
  for (const auto& r : batch) {
    total += r.reward;
    p.successes += r.success ? 1 : 0;
  }
  p.batch_size = static_cast<int>(batch.size());
  p.batch_reward_mean = total / static_cast<double>(batch.size());
  p.degenerate_update = degenerate;
  return p;
}

/// One full eREPS learning run against one robot.
inline LearningCurve run_experiment(const ExperimentConfig& cfg, int robot, int run) {
  LearningCurve curve;
  curve.robot = robot;
  curve.run = run;
  try {
    const std::uint64_t seed = run_seed(cfg.seed_base, robot, run);
    std::mt19937_64 rng(seed);
    auto runner = make_runner(cfg, robot, splitmix64(seed));
    const RepsConfig& reps = cfg.reps;

    GaussianPolicy policy = init_policy(reps);
    ReplayWindow replay(static_cast<std::size_t>(reps.replay_window));

    auto roll_out = [&](std::size_t n) {
      std::vector<EpisodeRecord> batch;
      for (const auto& s : sample(policy, rng, n)) {
        batch.push_back(evaluate_episode(*runner, s, reps));
        replay.push(batch.back());
      }
      return batch;
    };

    auto batch = roll_out(static_cast<std::size_t>(reps.init_batch));
    curve.points.push_back(summarize_batch(0, policy, batch, false));

    curve.status = RunStatus::MaxUpdates;
    for (int u = 1; u <= reps.max_updates; ++u) {
      const auto window = replay.snapshot();
      const UpdateResult upd = reps_update(policy, window, reps);
      policy = upd.policy;
      batch = roll_out(static_cast<std::size_t>(reps.batch));
      curve.points.push_back(summarize_batch(u, policy, batch, upd.degenerate));
      if (should_terminate(batch, reps)) {
        curve.status = RunStatus::Converged;
        break;
      }
    }
  } catch (const std::exception& e) {
    curve.status = RunStatus::Failed;
    curve.error = e.what();
  }
  return curve;
}

/// Deterministic execution of fixed parameters on one robot profile.
inline StepOutcome execute_params(const ExperimentConfig& cfg, int robot, const SkillParams& s,
                                  std::uint64_t noise_seed = 0) {
  auto runner = make_runner(cfg, robot, noise_seed);
  return runner->run(s);
}

// --- parallel execution -----------------------------------------------------------

inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BENCH_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Calls job(i) for i in [0, count) on a worker pool.
template <class Job>
void parallel_for(std::size_t count, unsigned workers, Job&& job) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

/// All learning runs in (robot, run) order.
inline std::vector<LearningCurve> run_all(const ExperimentConfig& cfg, unsigned workers = worker_count()) {
  const std::size_t runs = static_cast<std::size_t>(cfg.runs_per_robot);
  std::vector<LearningCurve> curves(cfg.robots.size() * runs);
  parallel_for(curves.size(), workers, [&](std::size_t i) {
    curves[i] = run_experiment(cfg, static_cast<int>(i / runs), static_cast<int>(i % runs));
  });
  return curves;
}

// --- summary ------------------------------------------------------------------------

struct RobotSummary {
  int robot = 0;
  int runs = 0;       // runs that finished (converged or max_updates)
  int converged = 0;
  int failed = 0;
  double convergence_rate = 0.0;
  double final_reward_mean = 0.0;
  double final_reward_sd = 0.0;  // sample sd, 0 for a single run
  double final_reward_se = 0.0;  // sd / sqrt(n), 0 for a single run
};

struct BenchSummary {
  std::vector<RobotSummary> robots;
  bool overlap = true;  // |m_i - m_j| <= 2 (SE_i + SE_j) for every pair
};

inline bool rewards_overlap(const RobotSummary& a, const RobotSummary& b) {
  return std::abs(a.final_reward_mean - b.final_reward_mean) <= 2.0 * (a.final_reward_se + b.final_reward_se);
}

inline BenchSummary summarize(const std::vector<LearningCurve>& curves, std::size_t robot_count) {
  BenchSummary s;
  s.robots.resize(robot_count);
  std::vector<std::vector<double>> finals(robot_count);
  for (std::size_t r = 0; r < robot_count; ++r) s.robots[r].robot = static_cast<int>(r);
  for (const auto& c : curves) {
    auto& rs = s.robots.at(static_cast<std::size_t>(c.robot));
    if (c.status == RunStatus::Failed || c.points.empty()) {
      ++rs.failed;
      continue;
    }
    ++rs.runs;
    rs.converged += c.converged() ? 1 : 0;
    finals[static_cast<std::size_t>(c.robot)].push_back(c.final_batch_reward());
  }
  for (std::size_t r = 0; r < robot_count; ++r) {
    auto& rs = s.robots[r];
    const auto& v = finals[r];
    const int total = rs.runs + rs.failed;
    rs.convergence_rate = total > 0 ? static_cast<double>(rs.converged) / total : 0.0;
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    rs.final_reward_mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - rs.final_reward_mean) * (x - rs.final_reward_mean);
      rs.final_reward_sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      rs.final_reward_se = rs.final_reward_sd / std::sqrt(static_cast<double>(v.size()));
    }
  }
  for (std::size_t i = 0; i < robot_count; ++i)
    for (std::size_t j = i + 1; j < robot_count; ++j)
      if (!rewards_overlap(s.robots[i], s.robots[j])) s.overlap = false;
  return s;
}

// --- zero-shot transfer -----------------------------------------------------------------

struct TransferResult {
  int source_robot = 0;
  int source_run = 0;
  int target_robot = 0;
  double final_angle = 0.0;
  bool success = false;
};

/// Executes each learned mean (clipped, no sampling) on every robot profile.
inline std::vector<TransferResult> zero_shot_transfer(const ExperimentConfig& cfg,
                                                      const std::vector<LearningCurve>& curves) {
  std::vector<TransferResult> out;
  for (const auto& c : curves) {
    if (!c.converged()) continue;
    const SkillParams s = clip_params(c.final_mean());
    for (int t = 0; t < static_cast<int>(cfg.robots.size()); ++t) {
      TransferResult r;
      r.source_robot = c.robot;
      r.source_run = c.run;
      r.target_robot = t;
      try {
        const StepOutcome o = execute_params(cfg, t, s);
        r.final_angle = o.final_angle;
        r.success = o.success;
      } catch (const std::exception&) {
        r.success = false;
      }
      out.push_back(r);
    }
  }
  return out;
}

/// matrix[i][j]: every converged run of robot i succeeded on robot j.
inline std::vector<std::vector<bool>> transfer_matrix(const std::vector<TransferResult>& results,
                                                      std::size_t robot_count) {
  std::vector<std::vector<bool>> m(robot_count, std::vector<bool>(robot_count, true));
  std::vector<bool> any(robot_count, false);
  for (const auto& r : results) {
    any[static_cast<std::size_t>(r.source_robot)] = true;
    if (!r.success) m[static_cast<std::size_t>(r.source_robot)][static_cast<std::size_t>(r.target_robot)] = false;
  }
  for (std::size_t i = 0; i < robot_count; ++i)
    if (!any[i]) std::fill(m[i].begin(), m[i].end(), false);
  return m;
}

// --- CSV ----------------------------------------------------------------------------------

inline const char* kCurveHeader =
    "robot,run,update,mean1,mean2,mean3,mean4,std1,std2,std3,std4,batch_reward_mean,successes,status";

inline std::string curve_csv(const LearningCurve& c) {
  using detail::num;
  std::ostringstream o;
  o << kCurveHeader << "\n";
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    const auto& p = c.points[k];
    const RunStatus st = k + 1 == c.points.size() ? c.status : RunStatus::Running;
    o << c.robot << "," << c.run << "," << p.update;
    for (int i = 0; i < kSkillDim; ++i) o << "," << num(p.mean[i]);
    for (int i = 0; i < kSkillDim; ++i) o << "," << num(p.std[i]);
    o << "," << num(p.batch_reward_mean) << "," << p.successes << "," << status_name(st) << "\n";
  }
  return o.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

inline LearningCurve parse_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) throw std::runtime_error("curve csv: bad header");
  LearningCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 14) throw std::runtime_error("curve csv: expected 14 columns");
    CurvePoint p;
    c.robot = std::stoi(f[0]);
    c.run = std::stoi(f[1]);
    p.update = std::stoi(f[2]);
    for (int i = 0; i < kSkillDim; ++i) p.mean[i] = detail::to_double("mean", f[3 + i]);
    for (int i = 0; i < kSkillDim; ++i) p.std[i] = detail::to_double("std", f[7 + i]);
    p.batch_reward_mean = detail::to_double("batch_reward_mean", f[11]);
    p.successes = std::stoi(f[12]);
    c.status = parse_status(f[13]);
    c.points.push_back(p);
  }
  return c;
}

inline const char* kSummaryHeader =
    "robot,runs,converged,failed,convergence_rate,final_reward_mean,final_reward_sd,final_reward_se,overlap";

inline std::string summary_csv(const BenchSummary& s) {
  using detail::num;
  std::ostringstream o;
  o << kSummaryHeader << "\n";
  for (const auto& r : s.robots)
    o << r.robot << "," << r.runs << "," << r.converged << "," << r.failed << "," << num(r.convergence_rate) << ","
      << num(r.final_reward_mean) << "," << num(r.final_reward_sd) << "," << num(r.final_reward_se) << ","
      << (s.overlap ? "true" : "false") << "\n";
  return o.str();
}

inline std::string transfer_csv(const std::vector<TransferResult>& results) {
  std::ostringstream o;
  o << "source_robot,source_run,target_robot,final_angle,success\n";
  for (const auto& r : results)
    o << r.source_robot << "," << r.source_run << "," << r.target_robot << "," << detail::num(r.final_angle) << ","
      << (r.success ? "true" : "false") << "\n";
  return o.str();
}

inline std::string curve_filename(int robot, int run) {
  return "robot" + std::to_string(robot) + "_run" + std::to_string(run) + ".csv";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

/// Curves listed in (robot, run) order from <dir>/curves.
inline std::vector<LearningCurve> read_curves(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  std::vector<LearningCurve> curves;
  for (int r = 0; r < static_cast<int>(cfg.robots.size()); ++r)
    for (int k = 0; k < cfg.runs_per_robot; ++k) {
      const auto path = dir / "curves" / curve_filename(r, k);
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
      curves.push_back(parse_curve_csv(in));
    }
  return curves;
}

}  // namespace deltaz
