#pragma once

// Benchmark configuration: an INI file with one section per component.
//
//   [experiment]  runs_per_robot, robots, seed_base, transport
//   [reps]        RepsConfig fields
//   [geometry]    RobotGeometry fields plus servo_min / servo_max
//   [workspace]   diameter, height, optional z_top (default: home plane)
//   [env]         DialEnvConfig fields
//   [robot_<i>]   seed, and optionally geometry_scale / servo_quantum / angle_bias
//
// Unknown sections or keys are rejected.

#include "deltaz/device.hpp"
#include "deltaz/dial_env.hpp"
#include "deltaz/kinematics.hpp"
#include "deltaz/policy.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltaz {

enum class Transport { Direct, Protocol };

struct ExperimentConfig {
  RepsConfig reps;
  DialEnvConfig env;
  RobotGeometry geometry;
  WorkspaceCylinder workspace{60.0, 40.0, 0.0};
  std::vector<RobotImperfection> robots;
  int runs_per_robot = 7;
  std::uint64_t seed_base = 0;
  Transport transport = Transport::Direct;

  void validate() const {
    reps.validate();
    env.validate();
    geometry.validate();
    if (!(workspace.diameter > 0 && workspace.height > 0))
      throw std::invalid_argument("workspace: diameter and height must be positive");
    if (robots.empty()) throw std::invalid_argument("experiment: need at least one robot");
    if (runs_per_robot < 1) throw std::invalid_argument("experiment: runs_per_robot must be >= 1");
    for (const auto& r : robots) r.validate();
    const CartesianPoint probe{0.0, 0.0, env.push_z};
    if (!in_workspace(probe, workspace)) throw std::invalid_argument("env: push_z lies outside the workspace");
    if (!in_workspace({0.0, 0.0, env.hover_z}, workspace))
      throw std::invalid_argument("env: hover_z lies outside the workspace");
  }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultRobotSeeds[3] = {101, 202, 303};

/// Shipped defaults: three robot profiles, seven runs each.
inline ExperimentConfig default_config() {
  ExperimentConfig c;
  c.workspace = default_workspace(c.geometry);
  for (std::uint64_t s : kDefaultRobotSeeds) c.robots.push_back(RobotImperfection::from_seed(s));
  return c;
}

/// Truncates the profile list, or extends it with seeded profiles 1000 + i.
inline void resize_robots(ExperimentConfig& c, int count) {
  if (count < 1) throw ConfigError("config: robot count must be >= 1");
  while (static_cast<int>(c.robots.size()) < count)
    c.robots.push_back(RobotImperfection::from_seed(1000 + c.robots.size()));
  c.robots.resize(static_cast<std::size_t>(count));
}

namespace detail {

// shortest text that reads back to the same double
inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string triple(const std::array<double, 3>& v) { return num(v[0]) + " " + num(v[1]) + " " + num(v[2]); }

inline double to_double(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  double v = 0.0;
  in >> v;
  std::string rest;
  if (!in || (in >> rest)) throw ConfigError("config: '" + key + "' is not a number: '" + s + "'");
  return v;
}

inline long long to_int(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  long long v = 0;
  in >> v;
  std::string rest;
  if (!in || (in >> rest)) throw ConfigError("config: '" + key + "' is not an integer: '" + s + "'");
  return v;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& s) {
  const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
  std::uint64_t v = 0;
  const char* first = b == std::string::npos ? s.data() : s.data() + b;
  const char* last = b == std::string::npos ? s.data() : s.data() + e + 1;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (first == last || ec != std::errc{} || ptr != last)
    throw ConfigError("config: '" + key + "' is not an unsigned 64-bit integer: '" + s + "'");
  return v;
}

inline std::array<double, 3> to_triple(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  std::array<double, 3> v{};
  for (double& x : v) in >> x;
  std::string rest;
  if (!in || (in >> rest)) throw ConfigError("config: '" + key + "' needs three numbers: '" + s + "'");
  return v;
}

inline bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: '" + key + "' is not a boolean: '" + s + "'");
}

}  // namespace detail

inline std::string transport_name(Transport t) { return t == Transport::Direct ? "direct" : "protocol"; }

inline Transport parse_transport(const std::string& s) {
  if (s == "direct") return Transport::Direct;
  if (s == "protocol") return Transport::Protocol;
  throw ConfigError("config: transport must be 'direct' or 'protocol', got '" + s + "'");
}

/// Parse INI text on top of the shipped defaults.
inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  ExperimentConfig c = default_config();
  std::optional<double> z_top;
  int robot_count = -1;
  std::map<int, RobotImperfection> robots;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = detail::to_double(k, v); };
  };
  auto integer = [](int& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = static_cast<int>(detail::to_int(k, v)); };
  };
  auto flag = [](bool& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = detail::to_bool(k, v); };
  };

  const std::map<std::string, std::map<std::string, Setter>> fields{
      {"experiment",
       {{"runs_per_robot", integer(c.runs_per_robot)},
        {"robots", integer(robot_count)},
        {"seed_base", [&](const std::string& k, const std::string& v) {
           c.seed_base = detail::to_u64(k, v);
         }},
        {"transport", [&](const std::string&, const std::string& v) { c.transport = parse_transport(v); }}}},
      {"reps",
       {{"epsilon", num(c.reps.epsilon)},
        {"init_batch", integer(c.reps.init_batch)},
        {"batch", integer(c.reps.batch)},
        {"replay_window", integer(c.reps.replay_window)},
        {"max_updates", integer(c.reps.max_updates)},
        {"cov_floor", num(c.reps.cov_floor)},
        {"init_mean", num(c.reps.init_mean)},
        {"init_var", num(c.reps.init_var)},
        {"reward_repeats", integer(c.reps.reward_repeats)}}},
      {"geometry",
       {{"base_radius", num(c.geometry.base_radius)},
        {"effector_radius", num(c.geometry.effector_radius)},
        {"upper_arm", num(c.geometry.upper_arm)},
        {"forearm", num(c.geometry.forearm)},
        {"hinge_offset", num(c.geometry.hinge_offset)},
        {"servo_min", num(c.geometry.servo.min_deg)},
        {"servo_max", num(c.geometry.servo.max_deg)}}},
      {"workspace",
       {{"diameter", num(c.workspace.diameter)},
        {"height", num(c.workspace.height)},
        {"z_top", [&](const std::string& k, const std::string& v) { z_top = detail::to_double(k, v); }}}},
      {"env",
       {{"pivot_x", num(c.env.pivot_x)},
        {"pivot_y", num(c.env.pivot_y)},
        {"lever_length", num(c.env.lever_length)},
        {"lever_width", num(c.env.lever_width)},
        {"effector_radius_contact", num(c.env.effector_radius_contact)},
        {"push_z", num(c.env.push_z)},
        {"hover_z", num(c.env.hover_z)},
        {"start_angle", num(c.env.start_angle)},
        {"target_angle", num(c.env.target_angle)},
        {"pot_range", num(c.env.pot_range)},
        {"pot_zero_azimuth", num(c.env.pot_zero_azimuth)},
        {"axle_radius", num(c.env.axle_radius)},
        {"adc_noise_sd", num(c.env.adc_noise_sd)},
        {"success_tol", num(c.env.success_tol)},
        {"step_len", num(c.env.step_len)},
        {"reset_mode",
         [&](const std::string&, const std::string& v) {
           if (v == "kinematic")
             c.env.reset_mode = ResetMode::Kinematic;
           else if (v == "simulated")
             c.env.reset_mode = ResetMode::Simulated;
           else
             throw ConfigError("config: reset_mode must be 'kinematic' or 'simulated'");
         }},
        {"reward_from_adc", flag(c.env.reward_from_adc)}}},
  };

  for (const auto& [section, body] : tree) {
    if (section.rfind("robot_", 0) == 0) {
      const int idx = static_cast<int>(detail::to_int(section, section.substr(6)));
      if (idx < 0) throw ConfigError("config: negative robot index in [" + section + "]");
      const auto seed_str = body.get_optional<std::string>("seed");
      RobotImperfection r =
          seed_str ? RobotImperfection::from_seed(detail::to_u64(section + ".seed", *seed_str)) : RobotImperfection{};
      for (const auto& [key, val] : body) {
        const std::string full = section + "." + key;
        const std::string v = val.data();
        if (key == "seed") continue;
        if (key == "geometry_scale")
          r.geometry_scale = detail::to_triple(full, v);
        else if (key == "servo_quantum")
          r.servo_quantum = detail::to_double(full, v);
        else if (key == "angle_bias")
          r.angle_bias = detail::to_triple(full, v);
        else
          throw ConfigError("config: unknown key '" + full + "'");
      }
      robots[idx] = r;
      continue;
    }
    const auto sec = fields.find(section);
    if (sec == fields.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, val] : body) {
      const auto f = sec->second.find(key);
      if (f == sec->second.end()) throw ConfigError("config: unknown key '" + section + "." + key + "'");
      f->second(section + "." + key, val.data());
    }
  }

  c.workspace.z_top = z_top ? *z_top : [&] {
    try {
      return home_position(c.geometry).z;
    } catch (const KinematicsError& e) {
      throw ConfigError(std::string("config: geometry has no home pose: ") + e.what());
    }
  }();

  if (!robots.empty()) {
    c.robots.clear();
    int expect = 0;
    for (const auto& [idx, r] : robots) {
      if (idx != expect++) throw ConfigError("config: robot sections must be numbered 0, 1, 2, ...");
      c.robots.push_back(r);
    }
  }
  if (robot_count >= 0) {
    if (robot_count < 1) throw ConfigError("config: experiment.robots must be >= 1");
    resize_robots(c, robot_count);
  }

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in);
}

/// Fully explicit INI text; parse_config(write_config(c)) reproduces c exactly.
inline std::string write_config(const ExperimentConfig& c) {
  using detail::num;
  std::ostringstream o;
  o << "[experiment]\n"
    << "runs_per_robot = " << c.runs_per_robot << "\n"
    << "robots = " << c.robots.size() << "\n"
    << "seed_base = " << c.seed_base << "\n"
    << "transport = " << transport_name(c.transport) << "\n\n";
  o << "[reps]\n"
    << "epsilon = " << num(c.reps.epsilon) << "\n"
    << "init_batch = " << c.reps.init_batch << "\n"
    << "batch = " << c.reps.batch << "\n"
    << "replay_window = " << c.reps.replay_window << "\n"
    << "max_updates = " << c.reps.max_updates << "\n"
    << "cov_floor = " << num(c.reps.cov_floor) << "\n"
    << "init_mean = " << num(c.reps.init_mean) << "\n"
    << "init_var = " << num(c.reps.init_var) << "\n"
    << "reward_repeats = " << c.reps.reward_repeats << "\n\n";
  o << "[geometry]\n"
    << "base_radius = " << num(c.geometry.base_radius) << "\n"
    << "effector_radius = " << num(c.geometry.effector_radius) << "\n"
    << "upper_arm = " << num(c.geometry.upper_arm) << "\n"
    << "forearm = " << num(c.geometry.forearm) << "\n"
    << "hinge_offset = " << num(c.geometry.hinge_offset) << "\n"
    << "servo_min = " << num(c.geometry.servo.min_deg) << "\n"
    << "servo_max = " << num(c.geometry.servo.max_deg) << "\n\n";
  o << "[workspace]\n"
    << "diameter = " << num(c.workspace.diameter) << "\n"
    << "height = " << num(c.workspace.height) << "\n"
    << "z_top = " << num(c.workspace.z_top) << "\n\n";
  const auto& e = c.env;
  o << "[env]\n"
    << "pivot_x = " << num(e.pivot_x) << "\n"
    << "pivot_y = " << num(e.pivot_y) << "\n"
    << "lever_length = " << num(e.lever_length) << "\n"
    << "lever_width = " << num(e.lever_width) << "\n"
    << "effector_radius_contact = " << num(e.effector_radius_contact) << "\n"
    << "push_z = " << num(e.push_z) << "\n"
    << "hover_z = " << num(e.hover_z) << "\n"
    << "start_angle = " << num(e.start_angle) << "\n"
    << "target_angle = " << num(e.target_angle) << "\n"
    << "pot_range = " << num(e.pot_range) << "\n"
    << "pot_zero_azimuth = " << num(e.pot_zero_azimuth) << "\n"
    << "axle_radius = " << num(e.axle_radius) << "\n"
    << "adc_noise_sd = " << num(e.adc_noise_sd) << "\n"
    << "success_tol = " << num(e.success_tol) << "\n"
    << "step_len = " << num(e.step_len) << "\n"
    << "reset_mode = " << (e.reset_mode == ResetMode::Kinematic ? "kinematic" : "simulated") << "\n"
    << "reward_from_adc = " << (e.reward_from_adc ? "true" : "false") << "\n";
  for (std::size_t i = 0; i < c.robots.size(); ++i) {
    const auto& r = c.robots[i];
    o << "\n[robot_" << i << "]\n"
      << "seed = " << r.seed << "\n"
      << "geometry_scale = " << detail::triple(r.geometry_scale) << "\n"
      << "servo_quantum = " << num(r.servo_quantum) << "\n"
      << "angle_bias = " << detail::triple(r.angle_bias) << "\n";
  }
  return o.str();
}

}  // namespace deltaz
