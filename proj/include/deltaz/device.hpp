#pragma once

// Line protocol of the robot controller and a mock firmware serving it.
//
//   host -> robot                     robot -> host
//   G <x> <y> <z>\n   go to point     OK\n
//   A <a> <b> <c>\n   set angles      ERR <UNREACHABLE|OUT_OF_WORKSPACE|BAD_CMD>\n
//   P\n               read pot        POT <0..1023>\n
//   H\n               home + reset
//
// Numbers are ASCII decimals written with exactly two fractional digits.

#include "deltaz/dial_env.hpp"
#include "deltaz/kinematics.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace deltaz {

struct GotoXYZ {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const GotoXYZ&, const GotoXYZ&) = default;
};
struct SetAngles {
  double a = 0.0, b = 0.0, c = 0.0;
  friend bool operator==(const SetAngles&, const SetAngles&) = default;
};
struct ReadPot {
  friend bool operator==(const ReadPot&, const ReadPot&) = default;
};
struct Home {
  friend bool operator==(const Home&, const Home&) = default;
};

using Command = std::variant<GotoXYZ, SetAngles, ReadPot, Home>;

enum class ErrCode { Unreachable, OutOfWorkspace, BadCmd };

struct Ok {
  friend bool operator==(const Ok&, const Ok&) = default;
};
struct Err {
  ErrCode code = ErrCode::BadCmd;
  friend bool operator==(const Err&, const Err&) = default;
};
struct Pot {
  int value = 0;
  friend bool operator==(const Pot&, const Pot&) = default;
};

using Response = std::variant<Ok, Err, Pot>;

class ProtocolError : public std::runtime_error {
 public:
  enum class Code { BadCommand, BadResponse };

  ProtocolError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

// --- codec ------------------------------------------------------------------

namespace detail {

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    const std::size_t start = i;
    while (i < line.size() && !(line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view tok) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline const char* err_name(ErrCode c) {
  switch (c) {
    case ErrCode::Unreachable: return "UNREACHABLE";
    case ErrCode::OutOfWorkspace: return "OUT_OF_WORKSPACE";
    case ErrCode::BadCmd: return "BAD_CMD";
  }
  return "BAD_CMD";
}

}  // namespace detail

inline std::string encode_command(const Command& c) {
  struct Visitor {
    std::string operator()(const GotoXYZ& g) const {
      return "G " + detail::fixed2(g.x) + " " + detail::fixed2(g.y) + " " + detail::fixed2(g.z) + "\n";
    }
    std::string operator()(const SetAngles& s) const {
      return "A " + detail::fixed2(s.a) + " " + detail::fixed2(s.b) + " " + detail::fixed2(s.c) + "\n";
    }
    std::string operator()(const ReadPot&) const { return "P\n"; }
    std::string operator()(const Home&) const { return "H\n"; }
  };
  return std::visit(Visitor{}, c);
}

inline Command parse_command(std::string_view line) {
  const auto tok = detail::split_ws(line);
  auto bad = [&](const char* why) {
    return ProtocolError(ProtocolError::Code::BadCommand, std::string("bad command '") + std::string(line) + "': " + why);
  };
  if (tok.empty()) throw bad("empty line");
  auto numbers = [&]() {
    if (tok.size() != 4) throw bad("expected 3 numeric fields");
    std::array<double, 3> v{};
    for (int i = 0; i < 3; ++i) {
      const auto n = detail::parse_number(tok[i + 1]);
      if (!n) throw bad("non-numeric field");
      v[i] = *n;
    }
    return v;
  };
  const std::string_view op = tok[0];
  if (op == "G") {
    const auto v = numbers();
    return GotoXYZ{v[0], v[1], v[2]};
  }
  if (op == "A") {
    const auto v = numbers();
    return SetAngles{v[0], v[1], v[2]};
  }
  if (op == "P" || op == "H") {
    if (tok.size() != 1) throw bad("unexpected arguments");
    if (op == "P") return ReadPot{};
    return Home{};
  }
  throw bad("unknown opcode");
}

inline std::string encode_response(const Response& r) {
  struct Visitor {
    std::string operator()(const Ok&) const { return "OK\n"; }
    std::string operator()(const Err& e) const { return std::string("ERR ") + detail::err_name(e.code) + "\n"; }
    std::string operator()(const Pot& p) const { return "POT " + std::to_string(p.value) + "\n"; }
  };
  return std::visit(Visitor{}, r);
}

inline Response parse_response(std::string_view line) {
  const auto tok = detail::split_ws(line);
  auto bad = [&](const char* why) {
    return ProtocolError(ProtocolError::Code::BadResponse, std::string("bad response '") + std::string(line) + "': " + why);
  };
  if (tok.empty()) throw bad("empty line");
  if (tok[0] == "OK") {
    if (tok.size() != 1) throw bad("unexpected fields");
    return Ok{};
  }
  if (tok[0] == "ERR") {
    if (tok.size() != 2) throw bad("expected one error code");
    for (ErrCode c : {ErrCode::Unreachable, ErrCode::OutOfWorkspace, ErrCode::BadCmd})
      if (tok[1] == detail::err_name(c)) return Err{c};
    throw bad("unknown error code");
  }
  if (tok[0] == "POT") {
    if (tok.size() != 2) throw bad("expected one value");
    const auto v = detail::parse_int(tok[1]);
    if (!v) throw bad("non-integer value");
    if (*v < 0 || *v > kAdcMax) throw bad("value outside 0..1023");
    return Pot{*v};
  }
  throw bad("unknown response");
}

// --- simulated robot ----------------------------------------------------------

/// Per-robot deviations from the nominal build.
struct RobotImperfection {
  // multiplicative factors on base_radius, upper_arm, forearm of the firmware's model
  std::array<double, 3> geometry_scale{1.0, 1.0, 1.0};
  double servo_quantum = 0.0;                   // deg
  std::array<double, 3> angle_bias{0.0, 0.0, 0.0};  // deg
  std::uint64_t seed = 0;

  bool is_identity() const {
    return geometry_scale == std::array<double, 3>{1.0, 1.0, 1.0} && servo_quantum == 0.0 &&
           angle_bias == std::array<double, 3>{0.0, 0.0, 0.0};
  }

  void validate() const {
    for (double s : geometry_scale)
      if (!(s >= 0.9 && s <= 1.1)) throw std::invalid_argument("imperfection: geometry_scale outside [0.9, 1.1]");
    if (!(servo_quantum >= 0)) throw std::invalid_argument("imperfection: servo_quantum must be >= 0");
  }

  /// Reproducible profile: scales within +-2%, 1 deg servo resolution, biases within +-1 deg.
  static RobotImperfection from_seed(std::uint64_t seed) {
    RobotImperfection p;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.98, 1.02);
    std::uniform_real_distribution<double> bias(-1.0, 1.0);
    for (double& s : p.geometry_scale) s = scale(rng);
    p.servo_quantum = 1.0;
    for (double& b : p.angle_bias) b = bias(rng);
    return p;
  }
};

inline RobotGeometry scaled_geometry(const RobotGeometry& g, const RobotImperfection& imp) {
  RobotGeometry out = g;
  out.base_radius *= imp.geometry_scale[0];
  out.upper_arm *= imp.geometry_scale[1];
  out.forearm *= imp.geometry_scale[2];
  return out;
}

/// The physical robot behind the serial port: a dial environment driven by a
/// delta arm whose firmware uses a slightly wrong kinematic model and whose
/// servos quantize and bias the commanded angles.
///
/// Horizontal moves whose start and end were both commanded at push height are
/// fed to the dial as straight sweeps between the realized positions; any move
/// with a height change is treated as free of contact.
class SimulatedRobot {
 public:
  SimulatedRobot(RobotGeometry geom, RobotImperfection imp, DialEnv& env)
      : geom_(geom), model_(scaled_geometry(geom, imp)), imp_(imp), env_(env) {
    position_ = home_position(geom_);
    commanded_z_ = position_.z;
  }

  DialEnv& env() { return env_; }
  const CartesianPoint& position() const { return position_; }

  Response goto_xyz(const CartesianPoint& p) {
    if (!in_workspace(p, env_.workspace())) return Err{ErrCode::OutOfWorkspace};
    if (imp_.is_identity()) {
      try {
        (void)inverse_kinematics(p, geom_);
      } catch (const KinematicsError&) {
        return Err{ErrCode::Unreachable};
      }
      move_to(p, p.z);
      return Ok{};
    }
    JointAngles cmd;
    try {
      cmd = inverse_kinematics(p, model_);
    } catch (const KinematicsError&) {
      return Err{ErrCode::Unreachable};
    }
    return actuate(cmd, p.z);
  }

  Response set_angles(const JointAngles& a) {
    CartesianPoint nominal;
    try {
      nominal = forward_kinematics(a, geom_);
    } catch (const KinematicsError&) {
      return Err{ErrCode::Unreachable};
    }
    for (int i = 0; i < 3; ++i)
      if (!geom_.servo.contains(a[i])) return Err{ErrCode::Unreachable};
    if (!in_workspace(nominal, env_.workspace())) return Err{ErrCode::OutOfWorkspace};
    if (imp_.is_identity()) {
      move_to(nominal, nominal.z);
      return Ok{};
    }
    return actuate(a, nominal.z);
  }

  Response read_pot() { return Pot{env_.read_adc()}; }

  Response home() {
    const CartesianPoint target = home_position(geom_);
    if (imp_.is_identity())
      move_to(target, target.z);
    else
      (void)actuate(JointAngles{}, target.z);
    env_.reset();
    return Ok{};
  }

  /// Where the effector actually ends up for commanded shoulder angles.
  std::optional<CartesianPoint> realize(const JointAngles& cmd) const {
    JointAngles real = cmd;
    for (int i = 0; i < 3; ++i) {
      double a = cmd[i];
      if (imp_.servo_quantum > 0.0) a = std::round(a / imp_.servo_quantum) * imp_.servo_quantum;
      a += imp_.angle_bias[i];
      real[i] = std::clamp(a, geom_.servo.min_deg, geom_.servo.max_deg);
    }
    try {
      return forward_kinematics(real, geom_);
    } catch (const KinematicsError&) {
      return std::nullopt;
    }
  }

 private:
  Response actuate(const JointAngles& cmd, double commanded_z) {
    const auto real = realize(cmd);
    if (!real) return Err{ErrCode::Unreachable};
    move_to(*real, commanded_z);
    return Ok{};
  }

  void move_to(const CartesianPoint& realized, double commanded_z) {
    const double push = env_.config().push_z;
    const bool contact = std::abs(commanded_z_ - push) < 1e-9 && std::abs(commanded_z - push) < 1e-9;
    if (contact)
      env_.sweep({position_.x, position_.y, push}, {realized.x, realized.y, push});
    position_ = realized;
    commanded_z_ = commanded_z;
  }

  RobotGeometry geom_;
  RobotGeometry model_;
  RobotImperfection imp_;
  DialEnv& env_;
  CartesianPoint position_;
  double commanded_z_;
};

/// Serves the line protocol on top of a simulated robot.
class MockFirmware {
 public:
  explicit MockFirmware(SimulatedRobot& robot) : robot_(robot) {}

  Response handle(const Command& c) {
    struct Visitor {
      SimulatedRobot& r;
      Response operator()(const GotoXYZ& g) const { return r.goto_xyz({g.x, g.y, g.z}); }
      Response operator()(const SetAngles& s) const { return r.set_angles(JointAngles{{s.a, s.b, s.c}}); }
      Response operator()(const ReadPot&) const { return r.read_pot(); }
      Response operator()(const Home&) const { return r.home(); }
    };
    return std::visit(Visitor{robot_}, c);
  }

  std::string handle_line(std::string_view line) {
    try {
      return encode_response(handle(parse_command(line)));
    } catch (const ProtocolError&) {
      return encode_response(Err{ErrCode::BadCmd});
    }
  }

  /// Answer one response line per request line until the input stream closes.
  void serve(std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
      out << handle_line(line);
      out.flush();
      if (!out) return;
    }
  }

 private:
  SimulatedRobot& robot_;
};

/// Host side of a line-oriented session.
class LineSession {
 public:
  virtual ~LineSession() = default;
  virtual std::string transact(std::string_view request_line) = 0;
};

/// Session wired straight into a firmware instance in the same process.
class InMemorySession final : public LineSession {
 public:
  explicit InMemorySession(MockFirmware& fw) : fw_(fw) {}
  std::string transact(std::string_view request_line) override { return fw_.handle_line(request_line); }

 private:
  MockFirmware& fw_;
};

/// Typed client over any session.
class DeviceClient {
 public:
  explicit DeviceClient(LineSession& session) : session_(session) {}

  Response send(const Command& c) { return parse_response(session_.transact(encode_command(c))); }

 private:
  LineSession& session_;
};

}  // namespace deltaz
