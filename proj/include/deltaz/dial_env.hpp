#pragma once

// Simulated potentiometer dial. A lever of given length and width is fixed to
// the potentiometer axle; the robot's effector is a vertical cylinder that
// pushes the lever while sweeping horizontally at a fixed height. Contact is
// quasi-static and friction-free: at every small step the lever rotates by the
// minimal angle that removes penetration, and it holds its angle once contact
// is lost.
//
// Angles: the lever angle phi lives in the potentiometer frame, 0 at the
// minimum-resistance end stop. Its world bearing is pot_zero_azimuth + phi,
// counter-clockwise positive.

#include "deltaz/kinematics.hpp"
#include "deltaz/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace deltaz {

enum class ResetMode { Kinematic, Simulated };

struct DialEnvConfig {
  double pivot_x = 0.0;   // mm, potentiometer axis in the base frame
  double pivot_y = -12.3;
  double lever_length = 18.0;             // mm
  double lever_width = 2.3;               // mm
  double effector_radius_contact = 5.9;   // mm
  double push_z = -59.65;                 // mm
  double hover_z = -49.65;                // mm, approach height above waypoint 1
  double start_angle = 56.5;              // deg
  double target_angle = 95.0;             // deg
  double pot_range = 270.0;               // deg
  double pot_zero_azimuth = 56.5;         // deg, world bearing of phi = 0
  double axle_radius = 1.4;               // mm, rigid shaft the effector cannot pass over
  double adc_noise_sd = 0.0;              // ADC counts
  double success_tol = 15.0;              // deg
  double step_len = 0.05;                 // mm
  ResetMode reset_mode = ResetMode::Kinematic;
  bool reward_from_adc = false;

  double contact_radius() const { return effector_radius_contact + 0.5 * lever_width; }
  /// Closest approach of the effector center to the pivot before it jams on the axle.
  double stall_radius() const { return effector_radius_contact + axle_radius; }

  void validate() const {
    if (!(pot_range > 0)) throw std::invalid_argument("dial env: pot_range must be positive");
    if (!(start_angle >= 0 && start_angle <= pot_range && target_angle >= 0 && target_angle <= pot_range))
      throw std::invalid_argument("dial env: start and target angles must lie in [0, pot_range]");
    if (!(effector_radius_contact >= 0 && lever_length > effector_radius_contact))
      throw std::invalid_argument("dial env: need lever_length > effector_radius_contact >= 0");
    if (!(lever_width >= 0)) throw std::invalid_argument("dial env: lever_width must be >= 0");
    if (!(axle_radius > 0.5 * lever_width))
      throw std::invalid_argument("dial env: axle_radius must exceed half the lever width");
    if (!(step_len > 0)) throw std::invalid_argument("dial env: step_len must be positive");
    if (!(success_tol > 0)) throw std::invalid_argument("dial env: success_tol must be positive");
    if (!(adc_noise_sd >= 0)) throw std::invalid_argument("dial env: adc_noise_sd must be >= 0");
  }
};

struct LeverState {
  double angle = 0.0;  // deg, pot frame
  friend bool operator==(const LeverState&, const LeverState&) = default;
};

struct StepOutcome {
  double final_angle = 0.0;  // deg
  double reward = 0.0;
  bool success = false;
  int adc = 0;
};

class DialEnvError : public std::runtime_error {
 public:
  enum class Code { ResetFailed, NotReset, OutOfRange };

  DialEnvError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

inline constexpr int kAdcMax = 1023;

/// 100 inside the success band (strict), minus a small quadratic angle cost.
inline double reward(double phi_deg, double target_deg, double tol_deg = 15.0) {
  const double err = phi_deg - target_deg;
  return (std::abs(err) < tol_deg ? 100.0 : 0.0) - 1e-5 * err * err;
}

/// Noise-free 10-bit reading, rounded half up.
inline int adc_from_angle(double phi_deg, const DialEnvConfig& cfg) {
  const double scaled = phi_deg / cfg.pot_range * kAdcMax;
  return std::clamp(static_cast<int>(std::floor(scaled + 0.5)), 0, kAdcMax);
}

inline double angle_from_adc(int code, const DialEnvConfig& cfg) {
  if (code < 0 || code > kAdcMax)
    throw DialEnvError(DialEnvError::Code::OutOfRange, "angle_from_adc: code " + std::to_string(code) + " out of range");
  return static_cast<double>(code) / kAdcMax * cfg.pot_range;
}

template <class Rng>
int noisy_adc(double phi_deg, const DialEnvConfig& cfg, Rng& rng) {
  const int exact = adc_from_angle(phi_deg, cfg);
  if (cfg.adc_noise_sd <= 0.0) return exact;
  std::normal_distribution<double> noise(0.0, cfg.adc_noise_sd);
  const double v = exact + noise(rng);
  return std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, kAdcMax);
}

namespace detail {

// Wrap to (-180, 180].
inline double wrap_deg(double a) {
  double r = std::remainder(a, 360.0);
  if (r <= -180.0) r += 360.0;
  return r;
}

}  // namespace detail

/// Half-width (deg) of the cone of lever angles that overlap a disc whose center
/// lies rho mm from the pivot; 0 when no lever angle can touch it. The lever is
/// a capsule of radius contact_radius() around the pivot-to-tip segment.
inline double contact_half_angle(double rho, const DialEnvConfig& cfg) {
  const double rc = cfg.contact_radius();
  const double len = cfg.lever_length;
  if (rho >= len + rc) return 0.0;
  if (rho * rho <= len * len + rc * rc) return std::asin(rc / rho) * detail::kRadToDeg;
  const double c = (len * len + rho * rho - rc * rc) / (2.0 * len * rho);
  return std::acos(std::clamp(c, -1.0, 1.0)) * detail::kRadToDeg;
}

/// Resolve contact for an effector centered at (x, y) moving along (dx, dy).
/// The lever turns the way the disc circles the pivot, by the smallest angle
/// that clears it. Returns the new lever angle.
inline double resolve_contact(double angle, double x, double y, double dx, double dy, const DialEnvConfig& cfg) {
  const double rx = x - cfg.pivot_x;
  const double ry = y - cfg.pivot_y;
  const double rho = std::hypot(rx, ry);
  // the disc covers the axle itself; nothing to push against
  if (rho <= cfg.contact_radius()) return angle;
  const double h = contact_half_angle(rho, cfg);
  if (h <= 0.0) return angle;

  const double bearing = std::atan2(ry, rx) * detail::kRadToDeg - cfg.pot_zero_azimuth;
  const double delta = detail::wrap_deg(angle - bearing);
  if (std::abs(delta) >= h) return angle;

  const double turn = rx * dy - ry * dx;
  double side;
  if (turn > 0.0)
    side = 1.0;
  else if (turn < 0.0)
    side = -1.0;
  else
    side = delta >= 0.0 ? 1.0 : -1.0;  // purely radial motion: nearest face
  const double moved = angle + (side * h - delta);
  return std::clamp(moved, 0.0, cfg.pot_range);
}

/// Fraction of a -> b travelled before the effector jams on the axle (1 if never).
inline double stall_fraction(const CartesianPoint& a, const CartesianPoint& b, const DialEnvConfig& cfg) {
  const double ax = a.x - cfg.pivot_x, ay = a.y - cfg.pivot_y;
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double rs = cfg.stall_radius();
  const double c = ax * ax + ay * ay - rs * rs;
  if (c <= 0.0) return 0.0;
  const double qa = vx * vx + vy * vy;
  const double qb = ax * vx + ay * vy;
  if (qa == 0.0 || qb >= 0.0) return 1.0;
  const double disc = qb * qb - qa * c;
  if (disc < 0.0) return 1.0;
  const double t = c / (-qb + std::sqrt(disc));  // smaller root, written to avoid cancellation
  return std::min(t, 1.0);
}

/// Sweep the effector along the straight segment a -> b (both at push height),
/// in equal steps no longer than step_len. Motion ends early if the effector
/// runs into the axle.
inline LeverState simulate_sweep(const CartesianPoint& a, const CartesianPoint& b, LeverState lever,
                                 const DialEnvConfig& cfg, double step_len) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len = std::hypot(dx, dy);

  // quick reject: the whole segment stays out of reach of the lever
  {
    const double px = cfg.pivot_x - a.x;
    const double py = cfg.pivot_y - a.y;
    double t = len > 0.0 ? (px * dx + py * dy) / (len * len) : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dist = std::hypot(a.x + t * dx - cfg.pivot_x, a.y + t * dy - cfg.pivot_y);
    if (dist >= cfg.lever_length + cfg.contact_radius()) return lever;
  }

  const double t_end = stall_fraction(a, b, cfg);
  if (t_end <= 0.0) return lever;  // set down on the axle, cannot move
  const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t_end * len / step_len)));
  const double sx = dx * t_end / static_cast<double>(steps);
  const double sy = dy * t_end / static_cast<double>(steps);
  lever.angle = resolve_contact(lever.angle, a.x, a.y, dx, dy, cfg);
  for (std::int64_t k = 1; k <= steps; ++k) {
    const double t = t_end * static_cast<double>(k) / static_cast<double>(steps);
    lever.angle = resolve_contact(lever.angle, a.x + t * dx, a.y + t * dy, sx, sy, cfg);
  }
  return lever;
}

inline LeverState simulate_sweep(const CartesianPoint& a, const CartesianPoint& b, LeverState lever,
                                 const DialEnvConfig& cfg) {
  return simulate_sweep(a, b, lever, cfg, cfg.step_len);
}

/// Command resolution of the controller: coordinates truncated toward zero to 0.01 mm.
inline double quantize_mm(double v) { return std::trunc(v * 100.0) / 100.0; }

struct SkillPath {
  CartesianPoint first;   // waypoint 1 at push height
  CartesianPoint second;  // waypoint 2 at push height
};

/// Waypoints for normalized skill parameters: clipped, denormalized, clamped
/// radially into the workspace and quantized to the command resolution.
inline SkillPath plan_skill(const SkillParams& s, const DialEnvConfig& cfg, const WorkspaceCylinder& ws) {
  const PhysicalSkill phys = denormalize_params(s);
  auto place = [&](double rho, double theta) {
    CartesianPoint p = polar_to_cartesian(std::min(rho, ws.radius()), theta, cfg.push_z);
    p.x = quantize_mm(p.x);
    p.y = quantize_mm(p.y);
    p.z = quantize_mm(p.z);
    return p;
  };
  return {place(phys.rho1_mm, phys.theta1_deg), place(phys.rho2_mm, phys.theta2_deg)};
}

/// Gym-style episodic environment: reset() then step(), repeatedly.
class DialEnv {
 public:
  DialEnv(DialEnvConfig cfg, WorkspaceCylinder ws, std::uint64_t noise_seed = 0)
      : cfg_(std::move(cfg)), ws_(ws), rng_(noise_seed) {
    cfg_.validate();
    lever_.angle = cfg_.start_angle;
  }

  const DialEnvConfig& config() const { return cfg_; }
  const WorkspaceCylinder& workspace() const { return ws_; }
  LeverState lever() const { return lever_; }
  bool needs_reset() const { return needs_reset_; }

  // Test hook: place the lever directly.
  void set_lever(LeverState s) { lever_.angle = std::clamp(s.angle, 0.0, cfg_.pot_range); }

  StepOutcome reset() {
    if (cfg_.reset_mode == ResetMode::Kinematic) {
      lever_.angle = cfg_.start_angle;
    } else {
      simulated_reset();
      if (std::abs(lever_.angle - cfg_.start_angle) > 1.0)
        throw DialEnvError(DialEnvError::Code::ResetFailed,
                           "reset sweep left the lever at " + std::to_string(lever_.angle) + " deg");
    }
    needs_reset_ = false;
    StepOutcome obs = observe();
    obs.reward = 0.0;
    return obs;
  }

  StepOutcome step(const SkillParams& s) {
    if (needs_reset_) throw DialEnvError(DialEnvError::Code::NotReset, "step called without reset");
    const SkillPath path = plan_skill(s, cfg_, ws_);
    lever_ = simulate_sweep(path.first, path.second, lever_, cfg_);
    needs_reset_ = true;
    return observe();
  }

  /// Horizontal effector motion at push height; used by the mock firmware.
  void sweep(const CartesianPoint& a, const CartesianPoint& b) { lever_ = simulate_sweep(a, b, lever_, cfg_); }

  int read_adc() { return noisy_adc(lever_.angle, cfg_, rng_); }

  /// Outcome as computed by a client that only sees the ADC reading.
  StepOutcome outcome_from_adc(int code) const {
    StepOutcome o;
    o.adc = code;
    o.final_angle = angle_from_adc(code, cfg_);
    o.reward = reward(o.final_angle, cfg_.target_angle, cfg_.success_tol);
    o.success = std::abs(o.final_angle - cfg_.target_angle) < cfg_.success_tol;
    return o;
  }

 private:
  StepOutcome observe() {
    const int code = read_adc();
    if (cfg_.reward_from_adc) return outcome_from_adc(code);
    StepOutcome o;
    o.adc = code;
    o.final_angle = lever_.angle;
    o.reward = reward(lever_.angle, cfg_.target_angle, cfg_.success_tol);
    o.success = std::abs(lever_.angle - cfg_.target_angle) < cfg_.success_tol;
    return o;
  }

  CartesianPoint on_arc(double radius, double pot_bearing_deg) const {
    const double world = (pot_bearing_deg + cfg_.pot_zero_azimuth) * detail::kDegToRad;
    return {cfg_.pivot_x + radius * std::cos(world), cfg_.pivot_y + radius * std::sin(world), cfg_.push_z};
  }

  // Descend beside the lever on the side away from the start angle, then
  // sweep along an arc around the pivot until the lever sits at start_angle.
  void simulated_reset() {
    const double radius = 0.5 * (cfg_.lever_length + cfg_.contact_radius());
    const double h = contact_half_angle(radius, cfg_);
    const double side = lever_.angle >= cfg_.start_angle ? 1.0 : -1.0;
    const double from = lever_.angle + side * (h + 5.0);
    const double to = cfg_.start_angle + side * h;
    const int chords = std::max(1, static_cast<int>(std::ceil(std::abs(from - to) / 1.0)));
    CartesianPoint prev = on_arc(radius, from);
    for (int k = 1; k <= chords; ++k) {
      const CartesianPoint next = on_arc(radius, from + (to - from) * k / chords);
      lever_ = simulate_sweep(prev, next, lever_, cfg_);
      prev = next;
    }
  }

  DialEnvConfig cfg_;
  WorkspaceCylinder ws_;
  LeverState lever_;
  bool needs_reset_ = true;
  std::mt19937_64 rng_;
};

}  // namespace deltaz
