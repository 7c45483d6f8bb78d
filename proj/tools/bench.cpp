// bench: learning runs, zero-shot transfer and plots from the command line.
//
//   bench run --config <file> --out <dir> [--seed N] [--transport direct|protocol] [--robots N] [--runs N]
//   bench transfer --in <dir>
//   bench plot --in <dir>
//
// Exit codes: 0 success, 1 a run (or transfer) failed, 2 bad configuration.

#include "deltaz/plots.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace deltaz;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kConfigError = 2;

void print_summary(const BenchSummary& s) {
  for (const auto& r : s.robots)
    std::printf("robot %d: %d/%d converged, %d failed, final reward %.6g +- %.3g (SE)\n", r.robot, r.converged,
                r.runs + r.failed, r.failed, r.final_reward_mean, r.final_reward_se);
  std::printf("overlap: %s\n", s.overlap ? "yes" : "no");
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> transport;
  std::optional<int> robots;
  std::optional<int> runs;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(a.config);
    if (a.seed) cfg.seed_base = *a.seed;
    if (a.transport) cfg.transport = parse_transport(*a.transport);
    if (a.robots) resize_robots(cfg, *a.robots);
    if (a.runs) {
      if (*a.runs < 1) throw ConfigError("--runs must be >= 1");
      cfg.runs_per_robot = *a.runs;
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kConfigError;
  }
  const BenchmarkResult res = run_benchmark(cfg, a.out);
  for (const auto& c : res.curves)
    if (c.status == RunStatus::Failed)
      std::cerr << "bench: robot " << c.robot << " run " << c.run << " failed: " << c.error << "\n";
  print_summary(res.summary);
  std::printf("wrote %s\n", a.out.c_str());
  return res.all_ok ? kOk : kRunFailed;
}

struct Loaded {
  ExperimentConfig cfg;
  std::vector<LearningCurve> curves;
};

std::optional<Loaded> load_results(const fs::path& dir, int& code) {
  Loaded l;
  try {
    l.cfg = load_config((dir / "config.ini").string());
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    code = kConfigError;
    return std::nullopt;
  }
  try {
    l.curves = read_curves(dir, l.cfg);
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    code = kRunFailed;
    return std::nullopt;
  }
  return l;
}

int cmd_transfer(const fs::path& dir) {
  int code = kOk;
  const auto l = load_results(dir, code);
  if (!l) return code;
  const auto results = zero_shot_transfer(l->cfg, l->curves);
  write_text(dir / "transfer.csv", transfer_csv(results));
  const auto m = transfer_matrix(results, l->cfg.robots.size());
  std::printf("source \\ target");
  for (std::size_t j = 0; j < m.size(); ++j) std::printf(" %zu", j);
  std::printf("\n");
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::printf("robot %zu       ", i);
    for (std::size_t j = 0; j < m.size(); ++j) std::printf(" %c", m[i][j] ? 'Y' : 'n');
    std::printf("\n");
  }
  bool all = true;
  for (const auto& r : results) all = all && r.success;
  std::printf("%zu transfers, %s\n", results.size(), all ? "all succeeded" : "some failed");
  return all ? kOk : kRunFailed;
}

int cmd_plot(const fs::path& dir) {
  int code = kOk;
  const auto l = load_results(dir, code);
  if (!l) return code;
  const BenchSummary s = summarize(l->curves, l->cfg.robots.size());
  write_text(dir / "summary.csv", summary_csv(s));
  emit_plots(l->curves, s, dir);
  print_summary(s);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dial-turning benchmark on simulated delta robots"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "learning runs for every robot profile");
  run_cmd->add_option("--config", run.config, "INI configuration")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "output directory")->required();
  run_cmd->add_option("--seed", run.seed, "seed base override");
  run_cmd->add_option("--transport", run.transport, "direct or protocol");
  run_cmd->add_option("--robots", run.robots, "number of robot profiles");
  run_cmd->add_option("--runs", run.runs, "runs per robot");

  std::string transfer_in;
  auto* transfer_cmd = app.add_subcommand("transfer", "run learned means on every robot profile");
  transfer_cmd->add_option("--in", transfer_in, "output directory of a previous run")->required();

  std::string plot_in;
  auto* plot_cmd = app.add_subcommand("plot", "regenerate summary and SVG plots");
  plot_cmd->add_option("--in", plot_in, "output directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*transfer_cmd) return cmd_transfer(transfer_in);
    if (*plot_cmd) return cmd_plot(plot_in);
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kRunFailed;
  }
  return kOk;
}
