#pragma once

// Rigid-link kinematics of a rotational (servo-driven) delta robot.
//
// Base frame: origin at the center of the motor plane, z pointing up, so the
// effector always sits at negative z. Arm i has its shoulder axis at azimuth
// 0/120/240 deg, a distance base_radius from the center. A shoulder angle of
// 0 deg means a horizontal upper arm pointing outward; positive angles swing
// the arm downward. All public angles are in degrees.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace deltaz {

struct CartesianPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const CartesianPoint&, const CartesianPoint&) = default;
};

inline CartesianPoint operator+(const CartesianPoint& a, const CartesianPoint& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline CartesianPoint operator-(const CartesianPoint& a, const CartesianPoint& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
inline CartesianPoint operator*(double s, const CartesianPoint& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const CartesianPoint& a, const CartesianPoint& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const CartesianPoint& a) { return std::sqrt(dot(a, a)); }
inline CartesianPoint cross(const CartesianPoint& a, const CartesianPoint& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct JointAngles {
  std::array<double, 3> deg{0.0, 0.0, 0.0};

  double& operator[](std::size_t i) { return deg[i]; }
  double operator[](std::size_t i) const { return deg[i]; }
  friend bool operator==(const JointAngles&, const JointAngles&) = default;
};

struct ServoRange {
  double min_deg = -60.0;
  double max_deg = 90.0;

  bool contains(double a) const { return a >= min_deg && a <= max_deg; }
};

struct RobotGeometry {
  double base_radius = 15.0;      // mm, center to shoulder axis
  double effector_radius = 30.0;  // mm, effector center to wrist joint
  double upper_arm = 45.0;        // mm, shoulder to elbow
  double forearm = 37.0;          // mm, parallelogram length L
  double hinge_offset = 5.25;     // mm, k; metadata only, the rigid model ignores it
  std::array<double, 3> arm_azimuths_deg{0.0, 120.0, 240.0};
  ServoRange servo{};

  // Throws std::invalid_argument when the geometry admits no pose.
  void validate() const {
    if (!(base_radius > 0 && effector_radius > 0 && upper_arm > 0 && forearm > 0))
      throw std::invalid_argument("robot geometry: all lengths must be positive");
    if (!(forearm > std::abs(base_radius - effector_radius)))
      throw std::invalid_argument("robot geometry: forearm must exceed |base_radius - effector_radius|");
    for (int i = 0; i < 3; ++i) {
      if (std::abs(arm_azimuths_deg[i] - 120.0 * i) > 1e-12)
        throw std::invalid_argument("robot geometry: arm azimuths must be 0, 120, 240 deg");
    }
    if (!(servo.min_deg < servo.max_deg))
      throw std::invalid_argument("robot geometry: empty servo range");
  }
};

struct WorkspaceCylinder {
  double diameter = 60.0;  // mm
  double height = 40.0;    // mm
  double z_top = 0.0;      // mm, top plane in the base frame

  double radius() const { return 0.5 * diameter; }
  double z_bottom() const { return z_top - height; }
};

class KinematicsError : public std::runtime_error {
 public:
  enum class Code { Unreachable, OutOfServoRange, NoIntersection, NegativeRadius };

  KinematicsError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

namespace detail {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

inline double cos_deg(double deg) { return std::cos(deg * kDegToRad); }
inline double sin_deg(double deg) { return std::sin(deg * kDegToRad); }

// Elbow position of arm i in the base frame.
inline CartesianPoint elbow(const RobotGeometry& g, int arm, double theta_deg) {
  const double radial = g.base_radius + g.upper_arm * cos_deg(theta_deg);
  const double ca = cos_deg(g.arm_azimuths_deg[arm]);
  const double sa = sin_deg(g.arm_azimuths_deg[arm]);
  return {radial * ca, radial * sa, -g.upper_arm * sin_deg(theta_deg)};
}

// Derivative of the elbow position with respect to the shoulder angle, per degree.
inline CartesianPoint elbow_rate(const RobotGeometry& g, int arm, double theta_deg) {
  const double ca = cos_deg(g.arm_azimuths_deg[arm]);
  const double sa = sin_deg(g.arm_azimuths_deg[arm]);
  const double dr = -g.upper_arm * sin_deg(theta_deg) * kDegToRad;
  return {dr * ca, dr * sa, -g.upper_arm * cos_deg(theta_deg) * kDegToRad};
}

// The parallelogram keeps the effector plate level, so each forearm acts as a
// rigid link between the elbow and the point effector_center + r * u_i.
inline CartesianPoint wrist_offset(const RobotGeometry& g, int arm) {
  return {g.effector_radius * cos_deg(g.arm_azimuths_deg[arm]),
          g.effector_radius * sin_deg(g.arm_azimuths_deg[arm]), 0.0};
}

}  // namespace detail

/// Shoulder angles placing the effector center at p.
///
/// Each arm is solved independently in its own vertical plane; the forearm
/// constraint reduces to A cos(t) + B sin(t) = C, whose two roots are the
/// elbow-out and elbow-in configurations. The elbow-out root (elbow farther
/// from the z axis) is always returned.
inline JointAngles inverse_kinematics(const CartesianPoint& p, const RobotGeometry& g) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
    throw KinematicsError(KinematicsError::Code::Unreachable, "inverse kinematics: non-finite target");

  JointAngles out;
  for (int arm = 0; arm < 3; ++arm) {
    const double ca = detail::cos_deg(g.arm_azimuths_deg[arm]);
    const double sa = detail::sin_deg(g.arm_azimuths_deg[arm]);
    // target in the arm frame (x radial, y tangential)
    const double xl = ca * p.x + sa * p.y;
    const double yl = -sa * p.x + ca * p.y;
    const double d = g.base_radius - (xl + g.effector_radius);
    const double a = g.upper_arm;

    const double A = 2.0 * a * d;
    const double B = 2.0 * a * p.z;
    const double C = g.forearm * g.forearm - yl * yl - d * d - a * a - p.z * p.z;
    const double r2 = A * A + B * B;
    const double disc = r2 - C * C;
    if (disc < 0.0 || r2 == 0.0)
      throw KinematicsError(KinematicsError::Code::Unreachable,
                            "inverse kinematics: target out of reach of arm " + std::to_string(arm));

    const double phase = std::atan2(B, A);
    const double spread = std::atan2(std::sqrt(disc), C);
    const double t1 = phase + spread;
    const double t2 = phase - spread;
    double t = std::cos(t1) >= std::cos(t2) ? t1 : t2;
    t = std::remainder(t, 2.0 * std::numbers::pi);
    const double deg = t * detail::kRadToDeg;
    if (!g.servo.contains(deg))
      throw KinematicsError(KinematicsError::Code::OutOfServoRange,
                            "inverse kinematics: arm " + std::to_string(arm) + " needs " + std::to_string(deg) +
                                " deg, outside the servo range");
    out[arm] = deg;
  }
  return out;
}

/// Effector center for the given shoulder angles.
///
/// The three forearm spheres (radius L around each elbow shifted inward by the
/// effector radius) are intersected by trilateration; the lower of the two
/// intersections is returned.
inline CartesianPoint forward_kinematics(const JointAngles& angles, const RobotGeometry& g) {
  std::array<CartesianPoint, 3> c;
  for (int arm = 0; arm < 3; ++arm) c[arm] = detail::elbow(g, arm, angles[arm]) - detail::wrist_offset(g, arm);

  const CartesianPoint d21 = c[1] - c[0];
  const CartesianPoint d31 = c[2] - c[0];
  const double d = norm(d21);
  if (d == 0.0) throw KinematicsError(KinematicsError::Code::NoIntersection, "forward kinematics: coincident spheres");
  const CartesianPoint ex = (1.0 / d) * d21;
  const double i = dot(ex, d31);
  const CartesianPoint ey_raw = d31 - i * ex;
  const double j = norm(ey_raw);
  if (j == 0.0) throw KinematicsError(KinematicsError::Code::NoIntersection, "forward kinematics: collinear spheres");
  const CartesianPoint ey = (1.0 / j) * ey_raw;
  CartesianPoint ez = cross(ex, ey);

  // equal radii: the radical planes simplify
  const double x = 0.5 * d;
  const double y = (i * i + j * j - 2.0 * i * x) / (2.0 * j);
  const double h2 = g.forearm * g.forearm - x * x - y * y;
  if (h2 < 0.0) throw KinematicsError(KinematicsError::Code::NoIntersection, "forward kinematics: spheres do not meet");
  const double h = std::sqrt(h2);
  if (ez.z > 0.0) ez = -1.0 * ez;
  return c[0] + x * ex + y * ey + h * ez;
}

/// d(effector)/d(angles) in mm per degree; column k is the effect of arm k.
inline std::array<CartesianPoint, 3> fk_jacobian(const JointAngles& angles, const RobotGeometry& g) {
  const CartesianPoint p = forward_kinematics(angles, g);
  // Constraint F_i = |p + w_i - e_i|^2 - L^2 = 0, so
  // J = -(dF/dp)^-1 dF/dtheta with dF/dp row i = 2 v_i, dF_i/dtheta_i = -2 v_i . de_i.
  std::array<CartesianPoint, 3> v;
  std::array<double, 3> rhs;
  for (int arm = 0; arm < 3; ++arm) {
    v[arm] = p + detail::wrist_offset(g, arm) - detail::elbow(g, arm, angles[arm]);
    rhs[arm] = dot(v[arm], detail::elbow_rate(g, arm, angles[arm]));
  }
  // columns of M^-1 where M has rows v_i: (v1 x v2, v2 x v0, v0 x v1) / det
  const double det = dot(v[0], cross(v[1], v[2]));
  if (det == 0.0) throw KinematicsError(KinematicsError::Code::NoIntersection, "fk_jacobian: singular configuration");
  const std::array<CartesianPoint, 3> inv_cols{cross(v[1], v[2]), cross(v[2], v[0]), cross(v[0], v[1])};
  std::array<CartesianPoint, 3> jac;
  for (int arm = 0; arm < 3; ++arm) jac[arm] = (rhs[arm] / det) * inv_cols[arm];
  return jac;
}

inline bool in_workspace(const CartesianPoint& p, const WorkspaceCylinder& ws) {
  const double r = ws.radius();
  return p.x * p.x + p.y * p.y <= r * r && p.z >= ws.z_top - ws.height && p.z <= ws.z_top;
}

inline CartesianPoint polar_to_cartesian(double rho_mm, double theta_deg, double z_mm) {
  if (rho_mm < 0.0) throw KinematicsError(KinematicsError::Code::NegativeRadius, "polar_to_cartesian: negative radius");
  return {rho_mm * detail::cos_deg(theta_deg), rho_mm * detail::sin_deg(theta_deg), z_mm};
}

inline CartesianPoint home_position(const RobotGeometry& g) { return forward_kinematics(JointAngles{}, g); }

/// Workspace cylinder hanging from the home plane.
inline WorkspaceCylinder default_workspace(const RobotGeometry& g, double diameter = 60.0, double height = 40.0) {
  return {diameter, height, home_position(g).z};
}

/// Two polar waypoints in physical units.
struct PhysicalSkill {
  double rho1_mm = 0.0;
  double theta1_deg = 0.0;
  double rho2_mm = 0.0;
  double theta2_deg = 0.0;
};

inline constexpr double kMaxSkillRadius = 30.0;

/// Affine map from [-1, 1]^4 to radii in [0, 30] mm and bearings in [-180, 180] deg.
/// Inputs are clipped into [-1, 1] first.
inline PhysicalSkill denormalize_params(const std::array<double, 4>& s) {
  auto clip = [](double v) { return std::clamp(v, -1.0, 1.0); };
  auto rho = [&](double v) { return 0.5 * kMaxSkillRadius * (clip(v) + 1.0); };
  auto theta = [&](double v) { return 180.0 * clip(v); };
  return {rho(s[0]), theta(s[1]), rho(s[2]), theta(s[3])};
}

}  // namespace deltaz
