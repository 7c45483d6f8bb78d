#include "deltaz/dial_env.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace deltaz;

namespace {

WorkspaceCylinder workspace() { return default_workspace(RobotGeometry{}); }

CartesianPoint at_push(const DialEnvConfig& c, double x, double y) { return {x, y, c.push_z}; }

// Point at distance r from the pivot along pot-frame bearing b.
CartesianPoint around_pivot(const DialEnvConfig& c, double r, double b) {
  const double w = (b + c.pot_zero_azimuth) * std::numbers::pi / 180.0;
  return at_push(c, c.pivot_x + r * std::cos(w), c.pivot_y + r * std::sin(w));
}

}  // namespace

TEST(Reward, Formula) {
  const double t = 102.5;
  EXPECT_NEAR(reward(t, t), 100.0, 1e-12);
  EXPECT_NEAR(reward(t + 10.0, t), 99.999, 1e-12);
  EXPECT_NEAR(reward(t - 10.0, t), 99.999, 1e-12);
  EXPECT_NEAR(reward(t + 15.0, t), -0.00225, 1e-12);
  EXPECT_NEAR(reward(t - 15.0, t), -0.00225, 1e-12);
  EXPECT_NEAR(reward(t + 100.0, t), -0.1, 1e-12);
}

TEST(Reward, BandIsOpen) {
  EXPECT_GT(reward(14.999999, 0.0), 99.0);
  EXPECT_LT(reward(15.0, 0.0), 0.0);
  // continuous away from the band edges
  for (double e : {-40.0, -20.0, 0.0, 7.0, 30.0})
    EXPECT_NEAR(reward(e + 1e-9, 0.0), reward(e, 0.0), 1e-12);
}

TEST(Adc, Endpoints) {
  DialEnvConfig c;
  EXPECT_EQ(adc_from_angle(0.0, c), 0);
  EXPECT_EQ(adc_from_angle(c.pot_range, c), 1023);
  EXPECT_EQ(adc_from_angle(c.pot_range / 2.0, c), 512);
  EXPECT_DOUBLE_EQ(angle_from_adc(0, c), 0.0);
  EXPECT_DOUBLE_EQ(angle_from_adc(1023, c), c.pot_range);
}

TEST(Adc, ExhaustiveRoundTrip) {
  DialEnvConfig c;
  double worst = 0.0;
  for (int code = 0; code <= 1023; ++code) {
    const double phi = angle_from_adc(code, c);
    EXPECT_EQ(adc_from_angle(phi, c), code);
    for (double f : {-0.49, 0.0, 0.49}) {
      const double p = std::clamp((code + f) * c.pot_range / 1023.0, 0.0, c.pot_range);
      worst = std::max(worst, std::abs(angle_from_adc(adc_from_angle(p, c), c) - p));
    }
  }
  EXPECT_LE(worst, c.pot_range / 2046.0 + 1e-12);
}

TEST(Adc, OutOfRangeCode) {
  DialEnvConfig c;
  EXPECT_THROW((void)angle_from_adc(-1, c), DialEnvError);
  EXPECT_THROW((void)angle_from_adc(1024, c), DialEnvError);
}

TEST(Adc, NoiseStaysInRange) {
  DialEnvConfig c;
  c.adc_noise_sd = 50.0;
  std::mt19937_64 rng(1);
  int differs = 0;
  for (int k = 0; k < 2000; ++k) {
    const double phi = (k % 3 == 0) ? 0.0 : (k % 3 == 1 ? c.pot_range : 100.0);
    const int v = noisy_adc(phi, c, rng);
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1023);
    differs += v != adc_from_angle(phi, c);
  }
  EXPECT_GT(differs, 1000);
}

TEST(Contact, HalfAngleMatchesClearanceBoundary) {
  DialEnvConfig c;
  const double rc = c.contact_radius();
  for (double rho = rc + 0.05; rho < c.lever_length + rc; rho += 0.37) {
    const double h = contact_half_angle(rho, c);
    ASSERT_GT(h, 0.0);
    const CartesianPoint p = around_pivot(c, rho, 90.0);
    EXPECT_NEAR(oracle::lever_distance(90.0 + h, p.x, p.y, c), rc, 1e-9) << "rho " << rho;
    EXPECT_LT(oracle::lever_distance(90.0 + 0.999 * h, p.x, p.y, c), rc);
  }
  EXPECT_EQ(contact_half_angle(c.lever_length + rc, c), 0.0);
  EXPECT_EQ(contact_half_angle(c.lever_length + rc + 1.0, c), 0.0);
}

TEST(Sweep, FarSegmentLeavesLeverAlone) {
  DialEnvConfig c;
  const double reach = c.lever_length + c.contact_radius();
  const CartesianPoint a = at_push(c, c.pivot_x + reach + 0.01, c.pivot_y - 20.0);
  const CartesianPoint b = at_push(c, c.pivot_x + reach + 0.01, c.pivot_y + 20.0);
  for (double phi : {0.0, 10.0, 60.0, 200.0, 270.0})
    EXPECT_EQ(simulate_sweep(a, b, LeverState{phi}, c).angle, phi);
}

TEST(Sweep, TangentialPushAcrossTipMatchesFineOracle) {
  DialEnvConfig c;
  // a chord passing the lever near its tip, moving counter-clockwise
  const CartesianPoint a = around_pivot(c, c.lever_length, c.start_angle - 30.0);
  const CartesianPoint b = around_pivot(c, c.lever_length, c.start_angle + 40.0);
  const double fast = simulate_sweep(a, b, LeverState{c.start_angle}, c).angle;
  const double fine = oracle::sweep(a, b, c.start_angle, c);
  EXPECT_GT(fast, c.start_angle + 5.0);
  EXPECT_NEAR(fast, fine, 0.1);
}

TEST(Sweep, RandomSegmentsMatchFineOracle) {
  DialEnvConfig c;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> r(0.0, c.lever_length + c.contact_radius() + 4.0);
  std::uniform_real_distribution<double> b(-180.0, 180.0);
  int moved = 0;
  for (int k = 0; k < 40; ++k) {
    const CartesianPoint p = around_pivot(c, r(rng), b(rng));
    const CartesianPoint q = around_pivot(c, r(rng), b(rng));
    const double fast = simulate_sweep(p, q, LeverState{c.start_angle}, c).angle;
    const double fine = oracle::sweep(p, q, c.start_angle, c);
    EXPECT_NEAR(fast, fine, 0.1) << "segment " << k;
    moved += std::abs(fast - c.start_angle) > 1.0;
  }
  EXPECT_GT(moved, 10);
}

TEST(Sweep, EndStopClampsExactly) {
  DialEnvConfig c;
  c.pot_zero_azimuth = 0.0;
  c.start_angle = 250.0;
  // sweep a full half circle counter-clockwise around the pivot
  CartesianPoint prev = around_pivot(c, 0.6 * c.lever_length, 230.0);
  LeverState s{c.start_angle};
  for (int k = 1; k <= 90; ++k) {
    const CartesianPoint next = around_pivot(c, 0.6 * c.lever_length, 230.0 + 2.0 * k);
    s = simulate_sweep(prev, next, s, c);
    prev = next;
  }
  EXPECT_EQ(s.angle, c.pot_range);

  LeverState low{5.0};
  prev = around_pivot(c, 0.6 * c.lever_length, 30.0);
  for (int k = 1; k <= 60; ++k) {
    const CartesianPoint next = around_pivot(c, 0.6 * c.lever_length, 30.0 - 2.0 * k);
    low = simulate_sweep(prev, next, low, c);
    prev = next;
  }
  EXPECT_EQ(low.angle, 0.0);
}

TEST(Sweep, ReversingAClockwisePushDoesNotPushFurther) {
  DialEnvConfig c;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> r(0.0, c.lever_length + c.contact_radius());
  std::uniform_real_distribution<double> b(-180.0, 180.0);
  int checked = 0;
  for (int k = 0; k < 400 && checked < 30; ++k) {
    const CartesianPoint p = around_pivot(c, r(rng), b(rng));
    const CartesianPoint q = around_pivot(c, r(rng), b(rng));
    const double after = simulate_sweep(p, q, LeverState{c.start_angle}, c).angle;
    if (after >= c.start_angle - 1.0) continue;
    ++checked;
    EXPECT_GE(simulate_sweep(q, p, LeverState{after}, c).angle, after);
  }
  EXPECT_GE(checked, 30);
}

TEST(Sweep, StallsOnTheAxle) {
  DialEnvConfig c;
  // a line passing 2 mm from the pivot, well inside the stall radius
  const CartesianPoint a = around_pivot(c, c.lever_length + 2.0, c.start_angle + 40.0);
  const double w = (c.start_angle + 40.0 + c.pot_zero_azimuth) * std::numbers::pi / 180.0;
  const CartesianPoint b = at_push(c, c.pivot_x - 2.0 * std::sin(w) - 10.0 * std::cos(w),
                                   c.pivot_y + 2.0 * std::cos(w) - 10.0 * std::sin(w));
  const double t = stall_fraction(a, b, c);
  ASSERT_GT(t, 0.0);
  ASSERT_LT(t, 1.0);
  const CartesianPoint s = a + t * (b - a);
  EXPECT_NEAR(std::hypot(s.x - c.pivot_x, s.y - c.pivot_y), c.stall_radius(), 1e-9);
  for (double phi : {c.start_angle, c.start_angle + 20.0, c.start_angle + 60.0})
    EXPECT_NEAR(simulate_sweep(a, b, LeverState{phi}, c).angle, simulate_sweep(a, s, LeverState{phi}, c).angle, 1e-9);
  EXPECT_NEAR(simulate_sweep(a, b, LeverState{c.start_angle}, c).angle, oracle::sweep(a, b, c.start_angle, c), 0.1);
  // set down over the axle: nothing moves
  const CartesianPoint on_axle = at_push(c, c.pivot_x + 1.0, c.pivot_y);
  EXPECT_EQ(stall_fraction(on_axle, b, c), 0.0);
  EXPECT_EQ(simulate_sweep(on_axle, a, LeverState{c.start_angle}, c).angle, c.start_angle);
  // moving away never stalls
  EXPECT_EQ(stall_fraction(a, at_push(c, 2.0 * a.x, 2.0 * a.y + c.pivot_y), c), 1.0);
}

TEST(Sweep, TurnsWithTheDiscAroundThePivot) {
  DialEnvConfig c;
  // same chord through the lever, travelled both ways
  const CartesianPoint p = around_pivot(c, 0.8 * c.lever_length, c.start_angle - 25.0);
  const CartesianPoint q = around_pivot(c, 0.8 * c.lever_length, c.start_angle + 25.0);
  const double ccw = simulate_sweep(p, q, LeverState{c.start_angle}, c).angle;
  const double cw = simulate_sweep(q, p, LeverState{c.start_angle}, c).angle;
  EXPECT_GT(ccw, c.start_angle + 10.0);
  EXPECT_LT(cw, c.start_angle - 10.0);
}

TEST(Sweep, DiscOverPivotIsInert) {
  DialEnvConfig c;
  const CartesianPoint p = at_push(c, c.pivot_x, c.pivot_y);
  EXPECT_EQ(resolve_contact(33.0, p.x, p.y, 1.0, 0.0, c), 33.0);
}

TEST(PlanSkill, ClampsRadiallyAndQuantizes) {
  DialEnvConfig c;
  WorkspaceCylinder ws = workspace();
  ws.diameter = 40.0;
  const SkillPath s = plan_skill({1.0, 0.0, 0.5, 0.5}, c, ws);
  EXPECT_DOUBLE_EQ(s.first.x, 20.0);
  EXPECT_DOUBLE_EQ(s.first.y, 0.0);
  EXPECT_DOUBLE_EQ(s.first.z, quantize_mm(c.push_z));
  // rho = 22.5 at 90 deg
  EXPECT_NEAR(s.second.x, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.second.y, 20.0);
  const SkillPath t = plan_skill({0.123, 0.377, -0.5, -0.25}, c, workspace());
  for (double v : {t.first.x, t.first.y, t.second.x, t.second.y}) EXPECT_EQ(v, quantize_mm(v));
  EXPECT_EQ(quantize_mm(1.239), 1.23);
  EXPECT_EQ(quantize_mm(-1.239), -1.23);
}

TEST(Env, StepWithoutResetThrows) {
  DialEnv env(DialEnvConfig{}, workspace());
  EXPECT_THROW((void)env.step({0, 0, 0, 0}), DialEnvError);
  (void)env.reset();
  (void)env.step({0, 0, 0, 0});
  try {
    (void)env.step({0, 0, 0, 0});
    FAIL();
  } catch (const DialEnvError& e) {
    EXPECT_EQ(e.code(), DialEnvError::Code::NotReset);
  }
}

TEST(Env, KinematicResetIsIdempotent) {
  DialEnv env(DialEnvConfig{}, workspace());
  env.set_lever({200.0});
  const StepOutcome a = env.reset();
  const StepOutcome b = env.reset();
  EXPECT_EQ(a.final_angle, env.config().start_angle);
  EXPECT_EQ(a.final_angle, b.final_angle);
  EXPECT_EQ(a.adc, b.adc);
  EXPECT_EQ(a.reward, 0.0);
}

TEST(Env, SimulatedResetRestoresStart) {
  DialEnvConfig c;
  c.reset_mode = ResetMode::Simulated;
  DialEnv env(c, workspace());
  for (double off : {90.0, 30.0, -40.0, 2.0}) {
    env.set_lever({c.start_angle + off});
    (void)env.reset();
    EXPECT_NEAR(env.lever().angle, c.start_angle, 1.0) << "offset " << off;
  }
}

TEST(Env, NoContactEpisodeKeepsStart) {
  DialEnvConfig c;
  DialEnv env(c, workspace());
  (void)env.reset();
  // both waypoints on the far side of the workspace
  const double away = std::atan2(-c.pivot_y, -c.pivot_x) * 180.0 / std::numbers::pi;
  const StepOutcome o = env.step({1.0, (away - 20.0) / 180.0, 1.0, (away + 20.0) / 180.0});
  const double e = c.start_angle - c.target_angle;
  EXPECT_EQ(o.final_angle, c.start_angle);
  EXPECT_DOUBLE_EQ(o.reward, (std::abs(e) < 15.0 ? 100.0 : 0.0) - 1e-5 * e * e);
  EXPECT_FALSE(o.success);
  EXPECT_EQ(o.adc, adc_from_angle(c.start_angle, c));
}

TEST(Env, OracleGuidedParamsHitTarget) {
  DialEnvConfig c;
  const auto ws = workspace();
  // grid search with the oracle at a coarse step, best candidate rechecked at 1 um
  SkillParams best{};
  double best_err = 1e9;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 12; ++j)
      for (int k = 0; k < 7; ++k)
        for (int l = 0; l < 12; ++l) {
          const SkillParams s{-1.0 + 2.0 * i / 6.0, -1.0 + 2.0 * j / 12.0, -1.0 + 2.0 * k / 6.0, -1.0 + 2.0 * l / 12.0};
          const SkillPath p = plan_skill(s, c, ws);
          const double err = std::abs(oracle::sweep(p.first, p.second, c.start_angle, c, 5e-2) - c.target_angle);
          if (err < best_err) best_err = err, best = s;
        }
  const SkillPath p = plan_skill(best, c, ws);
  const double fine = oracle::sweep(p.first, p.second, c.start_angle, c);
  ASSERT_LT(std::abs(fine - c.target_angle), 3.0);
  DialEnv env(c, ws);
  (void)env.reset();
  const StepOutcome o = env.step(best);
  EXPECT_NEAR(o.final_angle, fine, 0.1);
  EXPECT_TRUE(o.success);
  EXPECT_NEAR(o.reward, 100.0, 1e-3);
}

TEST(Env, DeterministicAndInRange) {
  DialEnvConfig c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DialEnv a(c, workspace()), b(c, workspace());
  for (int k = 0; k < 200; ++k) {
    const SkillParams s{u(rng), u(rng), u(rng), u(rng)};
    (void)a.reset();
    (void)b.reset();
    const StepOutcome x = a.step(s), y = b.step(s);
    EXPECT_EQ(x.final_angle, y.final_angle);
    EXPECT_EQ(x.reward, y.reward);
    EXPECT_GE(x.final_angle, 0.0);
    EXPECT_LE(x.final_angle, c.pot_range);
    EXPECT_EQ(x.success, std::abs(x.final_angle - c.target_angle) < c.success_tol);
  }
}

TEST(Env, RewardFromAdc) {
  DialEnvConfig c;
  c.reward_from_adc = true;
  DialEnv env(c, workspace());
  env.set_lever({c.target_angle + 3.3});
  (void)env.reset();
  env.set_lever({c.target_angle + 3.3});
  const int code = env.read_adc();
  const StepOutcome o = env.outcome_from_adc(code);
  EXPECT_DOUBLE_EQ(o.final_angle, angle_from_adc(code, c));
  EXPECT_DOUBLE_EQ(o.reward, reward(angle_from_adc(code, c), c.target_angle));
}

TEST(Config, RejectsBadValues) {
  DialEnvConfig c;
  c.start_angle = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DialEnvConfig{};
  c.step_len = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DialEnvConfig{};
  c.lever_length = c.effector_radius_contact;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = DialEnvConfig{};
  c.axle_radius = 0.5 * c.lever_width;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
