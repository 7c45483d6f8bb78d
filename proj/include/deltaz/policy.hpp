#pragma once

// Episodic relative entropy policy search over the 4-D skill parameters.
//
// The policy is a Gaussian over normalized parameters in [-1, 1]^4. Each
// update reweights the most recent episodes by exp(R / eta), where the
// temperature eta minimizes the eREPS dual so that the reweighted sample
// distribution stays within a KL ball of size epsilon around the sampling one,
// then refits the Gaussian by weighted maximum likelihood.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltaz {

inline constexpr int kSkillDim = 4;

using Vec4 = Eigen::Matrix<double, kSkillDim, 1>;
using Mat4 = Eigen::Matrix<double, kSkillDim, kSkillDim>;

/// Normalized skill parameters (rho1, theta1, rho2, theta2), each in [-1, 1].
using SkillParams = std::array<double, kSkillDim>;

inline SkillParams to_params(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
inline Vec4 to_vec(const SkillParams& p) { return Vec4(p[0], p[1], p[2], p[3]); }

inline SkillParams clip_params(const Vec4& v) {
  SkillParams out;
  for (int i = 0; i < kSkillDim; ++i) out[i] = std::clamp(v[i], -1.0, 1.0);
  return out;
}

struct GaussianPolicy {
  Vec4 mean = Vec4::Zero();
  Mat4 covariance = Mat4::Identity();
};

struct EpisodeRecord {
  SkillParams params{};     // executed (clipped) action
  Vec4 draw = Vec4::Zero(); // unclipped Gaussian draw, used by the update
  double reward = 0.0;
  double final_angle = 0.0;  // deg
  bool success = false;
};

struct RepsConfig {
  double epsilon = 1.0;
  int init_batch = 20;
  int batch = 10;
  int replay_window = 20;
  int max_updates = 50;
  double cov_floor = 1e-6;
  double init_mean = 0.4;
  double init_var = 0.15;
  int reward_repeats = 1;

  void validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("reps: epsilon must be positive");
    if (batch < 1 || init_batch < batch) throw std::invalid_argument("reps: need init_batch >= batch >= 1");
    if (replay_window < batch) throw std::invalid_argument("reps: replay_window must be >= batch");
    if (max_updates < 0) throw std::invalid_argument("reps: max_updates must be >= 0");
    if (!(cov_floor > 0)) throw std::invalid_argument("reps: cov_floor must be positive");
    if (!(init_var > 0)) throw std::invalid_argument("reps: init_var must be positive");
    if (reward_repeats < 1) throw std::invalid_argument("reps: reward_repeats must be >= 1");
  }
};

class PolicyError : public std::runtime_error {
 public:
  enum class Code { CholeskyFailure, TooFewSamples, EmptyRewards };

  PolicyError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

inline GaussianPolicy init_policy(const RepsConfig& cfg) {
  GaussianPolicy p;
  p.mean = Vec4::Constant(cfg.init_mean);
  p.covariance = cfg.init_var * Mat4::Identity();
  return p;
}

struct PolicySample {
  SkillParams params;  // clipped into [-1, 1]
  Vec4 draw;           // raw draw
};

inline Mat4 cholesky_factor(const Mat4& cov) {
  Eigen::LLT<Mat4> llt(cov);
  if (llt.info() != Eigen::Success)
    throw PolicyError(PolicyError::Code::CholeskyFailure, "covariance is not positive definite");
  return llt.matrixL();
}

template <class Rng>
std::vector<PolicySample> sample(const GaussianPolicy& policy, Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  const Mat4 chol = cholesky_factor(policy.covariance);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PolicySample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec4 z;
    for (int i = 0; i < kSkillDim; ++i) z[i] = normal(rng);
    const Vec4 x = policy.mean + chol * z;
    out.push_back({clip_params(x), x});
  }
  return out;
}

// --- dual -------------------------------------------------------------------

namespace detail {

// Rewards shifted so their maximum is exactly zero.
inline std::vector<double> shift_to_max(std::span<const double> rewards) {
  const double top = *std::max_element(rewards.begin(), rewards.end());
  std::vector<double> s(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) s[i] = rewards[i] - top;
  return s;
}

inline double log_sum_exp_shifted(std::span<const double> shifted, double eta) {
  // every term is <= 1 and the max term is exactly 1
  double acc = 0.0;
  for (double s : shifted) acc += std::exp(s / eta);
  return std::log(acc);
}

// Sum_i w_i log(w_i N) of the exponential weights at temperature eta.
inline double weight_kl_shifted(std::span<const double> shifted, double eta) {
  const double lse = log_sum_exp_shifted(shifted, eta);
  const double log_n = std::log(static_cast<double>(shifted.size()));
  double kl = 0.0;
  for (double s : shifted) {
    const double log_w = s / eta - lse;
    kl += std::exp(log_w) * (log_w + log_n);
  }
  return kl;
}

}  // namespace detail

struct DualBracket {
  double lo;
  double hi;
};

inline DualBracket dual_bracket(std::span<const double> rewards) {
  const auto [mn, mx] = std::minmax_element(rewards.begin(), rewards.end());
  const double range = *mx - *mn;
  return {1e-6 * range + 1e-12, 1e6 * range + 1.0};
}

/// g(eta) = eta * eps + eta * log(mean(exp(R / eta))), evaluated with the max shift.
inline double dual_value(std::span<const double> rewards, double epsilon, double eta) {
  const auto shifted = detail::shift_to_max(rewards);
  const double top = *std::max_element(rewards.begin(), rewards.end());
  const double log_mean =
      detail::log_sum_exp_shifted(shifted, eta) - std::log(static_cast<double>(rewards.size()));
  return eta * epsilon + top + eta * log_mean;
}

struct DualSolution {
  double eta = 1.0;
  bool degenerate = false;  // all rewards equal; weights are uniform
};

inline constexpr double kDegenerateRewardSpread = 1e-12;

/// Temperature minimizing the eREPS dual.
///
/// g is convex in eta with g'(eta) = eps - KL(w(eta)), where KL(w) is the
/// sample-weight divergence from uniform, decreasing in eta. The minimizer is
/// found by bisection on the sign of g' in log(eta) over the bracket; when the
/// KL bound is never active the lower bracket end is returned.
inline DualSolution solve_dual(std::span<const double> rewards, double epsilon) {
  if (rewards.empty()) throw PolicyError(PolicyError::Code::EmptyRewards, "solve_dual: no rewards");
  if (!(epsilon > 0)) throw std::invalid_argument("solve_dual: epsilon must be positive");

  const DualBracket br = dual_bracket(rewards);
  const auto [mn, mx] = std::minmax_element(rewards.begin(), rewards.end());
  if (*mx - *mn <= kDegenerateRewardSpread) return {br.hi, true};

  const auto shifted = detail::shift_to_max(rewards);
  auto slope_positive = [&](double eta) { return epsilon - detail::weight_kl_shifted(shifted, eta) >= 0.0; };

  if (slope_positive(br.lo)) return {br.lo, false};
  if (!slope_positive(br.hi)) return {br.hi, false};

  double lo = std::log(br.lo);
  double hi = std::log(br.hi);
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (slope_positive(std::exp(mid)))
      hi = mid;
    else
      lo = mid;
  }
  // the upper end always satisfies the KL bound
  return {std::exp(hi), false};
}

inline std::vector<double> weights_from(std::span<const double> rewards, double eta) {
  if (!(eta > 0)) throw std::invalid_argument("weights_from: eta must be positive");
  const auto shifted = detail::shift_to_max(rewards);
  std::vector<double> w(shifted.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(shifted[i] / eta);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

/// Sum_i w_i log(w_i N); zero weights contribute nothing.
inline double sample_kl(std::span<const double> weights) {
  const double n = static_cast<double>(weights.size());
  double kl = 0.0;
  for (double w : weights)
    if (w > 0.0) kl += w * std::log(w * n);
  return kl;
}

// --- M-step -----------------------------------------------------------------

inline Mat4 floor_eigenvalues(const Mat4& cov, double floor) {
  const Mat4 sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat4> eig(sym);
  if (eig.info() != Eigen::Success)
    throw PolicyError(PolicyError::Code::CholeskyFailure, "eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Vec4 clamped = eig.eigenvalues().cwiseMax(floor);
  const Mat4 out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

inline GaussianPolicy weighted_ml_update(std::span<const Vec4> samples, std::span<const double> weights,
                                         const RepsConfig& cfg) {
  if (samples.size() < 2) throw PolicyError(PolicyError::Code::TooFewSamples, "weighted_ml_update: need >= 2 samples");
  if (samples.size() != weights.size()) throw std::invalid_argument("weighted_ml_update: size mismatch");

  GaussianPolicy out;
  out.mean.setZero();
  for (std::size_t i = 0; i < samples.size(); ++i) out.mean += weights[i] * samples[i];
  Mat4 cov = Mat4::Zero();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vec4 d = samples[i] - out.mean;
    cov += weights[i] * d * d.transpose();
  }
  out.covariance = floor_eigenvalues(cov, cfg.cov_floor);
  return out;
}

struct UpdateResult {
  GaussianPolicy policy;
  double eta = 0.0;
  std::vector<double> weights;  // one per replay record, in replay order
  double kl = 0.0;              // sample-weight KL of the reweighting
  bool degenerate = false;      // rewards carried no information; policy kept
};

inline UpdateResult reps_update(const GaussianPolicy& policy, std::span<const EpisodeRecord> replay,
                                const RepsConfig& cfg) {
  if (replay.size() < static_cast<std::size_t>(cfg.batch))
    throw PolicyError(PolicyError::Code::TooFewSamples, "reps_update: replay shorter than one batch");

  std::vector<double> rewards;
  std::vector<Vec4> draws;
  rewards.reserve(replay.size());
  draws.reserve(replay.size());
  for (const auto& r : replay) {
    rewards.push_back(r.reward);
    draws.push_back(r.draw);
  }

  UpdateResult res;
  const DualSolution dual = solve_dual(rewards, cfg.epsilon);
  res.eta = dual.eta;
  res.weights = weights_from(rewards, dual.eta);
  res.kl = sample_kl(res.weights);
  if (dual.degenerate) {
    res.degenerate = true;
    res.policy = policy;
    return res;
  }
  res.policy = weighted_ml_update(draws, res.weights, cfg);
  return res;
}

inline bool should_terminate(std::span<const EpisodeRecord> last_batch, const RepsConfig& cfg) {
  if (last_batch.empty() || last_batch.size() != static_cast<std::size_t>(cfg.batch)) return false;
  return std::all_of(last_batch.begin(), last_batch.end(), [](const EpisodeRecord& r) { return r.success; });
}

/// KL(p || q) between two Gaussians, in nats.
inline double gaussian_kl(const GaussianPolicy& p, const GaussianPolicy& q) {
  Eigen::LLT<Mat4> lp(p.covariance);
  Eigen::LLT<Mat4> lq(q.covariance);
  if (lp.info() != Eigen::Success || lq.info() != Eigen::Success)
    throw PolicyError(PolicyError::Code::CholeskyFailure, "gaussian_kl: covariance is not positive definite");
  const Mat4 q_inv_p = lq.solve(p.covariance);
  const Vec4 dm = q.mean - p.mean;
  const double maha = dm.dot(lq.solve(dm));
  const double log_det_p = 2.0 * lp.matrixLLT().diagonal().array().log().sum();
  const double log_det_q = 2.0 * lq.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (q_inv_p.trace() + maha - kSkillDim + log_det_q - log_det_p);
}

/// FIFO of the most recent episodes, regardless of which policy produced them.
class ReplayWindow {
 public:
  explicit ReplayWindow(std::size_t capacity) : capacity_(capacity) {}

  void push(const EpisodeRecord& r) {
    records_.push_back(r);
    while (records_.size() > capacity_) records_.pop_front();
  }
  std::vector<EpisodeRecord> snapshot() const { return {records_.begin(), records_.end()}; }
  std::size_t size() const { return records_.size(); }

 private:
  std::size_t capacity_;
  std::deque<EpisodeRecord> records_;
};

}  // namespace deltaz
