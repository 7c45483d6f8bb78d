// firmware: serves the robot line protocol on stdin/stdout.
//
//   firmware [--config <file>] [--robot N]
//
// Commands: "G x y z", "A a b c", "P", "H". Replies: "OK", "ERR <code>", "POT <n>".

#include "deltaz/bench.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

using namespace deltaz;

int main(int argc, char** argv) {
  CLI::App app{"Mock delta-robot firmware on stdin/stdout"};
  std::string config_path;
  int robot = 0;
  app.add_option("--config", config_path, "INI configuration (default: built-in)")->check(CLI::ExistingFile);
  app.add_option("--robot", robot, "robot profile index");
  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg = default_config();
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (robot < 0 || robot >= static_cast<int>(cfg.robots.size())) throw ConfigError("--robot out of range");
  } catch (const std::exception& e) {
    std::cerr << "firmware: " << e.what() << "\n";
    return 2;
  }

  DialEnv env(cfg.env, cfg.workspace, splitmix64(cfg.seed_base));
  (void)env.reset();
  SimulatedRobot sim(cfg.geometry, cfg.robots[static_cast<std::size_t>(robot)], env);
  MockFirmware fw(sim);
  fw.serve(std::cin, std::cout);
  return 0;
}
