#include "deltaz/bench.hpp"
#include "deltaz/device.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace deltaz;

namespace {

std::vector<Command> command_corpus() {
  std::vector<Command> out{ReadPot{}, Home{}};
  // every 0.01 step in [-300, 300] on each field, the other fields fixed
  for (int k = -30000; k <= 30000; ++k) {
    const double v = k / 100.0;
    out.push_back(GotoXYZ{v, 1.25, -55.5});
    out.push_back(GotoXYZ{-3.5, v, 0.0});
    out.push_back(GotoXYZ{0.01, -0.01, v});
    out.push_back(SetAngles{v, 0.0, 12.34});
    out.push_back(SetAngles{-90.0, v, 0.5});
    out.push_back(SetAngles{7.77, 90.0, v});
  }
  return out;
}

std::vector<Response> response_corpus() {
  std::vector<Response> out{Ok{}, Err{ErrCode::Unreachable}, Err{ErrCode::OutOfWorkspace}, Err{ErrCode::BadCmd}};
  for (int v = 0; v <= kAdcMax; ++v) out.push_back(Pot{v});
  return out;
}

ExperimentConfig identity_config() {
  ExperimentConfig c = default_config();
  c.robots = {RobotImperfection{}};
  c.env.reward_from_adc = true;
  return c;
}

}  // namespace

TEST(Codec, CommandCorpusRoundTrip) {
  for (const Command& c : command_corpus()) {
    const std::string line = encode_command(c);
    ASSERT_EQ(line.back(), '\n');
    const Command back = parse_command(line);
    ASSERT_EQ(back, c) << line;
    ASSERT_EQ(encode_command(back), line);
  }
}

TEST(Codec, ResponseCorpusRoundTrip) {
  for (const Response& r : response_corpus()) {
    const std::string line = encode_response(r);
    const Response back = parse_response(line);
    ASSERT_EQ(back, r) << line;
    ASSERT_EQ(encode_response(back), line);
  }
}

TEST(Codec, WireFormat) {
  EXPECT_EQ(encode_command(GotoXYZ{1.0, -2.5, -60.0}), "G 1.00 -2.50 -60.00\n");
  EXPECT_EQ(encode_command(SetAngles{0.0, 10.126, -3.0}), "A 0.00 10.13 -3.00\n");
  EXPECT_EQ(encode_command(ReadPot{}), "P\n");
  EXPECT_EQ(encode_command(Home{}), "H\n");
  EXPECT_EQ(encode_response(Ok{}), "OK\n");
  EXPECT_EQ(encode_response(Err{ErrCode::OutOfWorkspace}), "ERR OUT_OF_WORKSPACE\n");
  EXPECT_EQ(encode_response(Pot{517}), "POT 517\n");
}

TEST(Codec, WhitespaceTolerance) {
  EXPECT_EQ(parse_command("  G\t1.5   2 -50 \r\n"), Command(GotoXYZ{1.5, 2.0, -50.0}));
  EXPECT_EQ(parse_command("P\r"), Command(ReadPot{}));
  EXPECT_EQ(parse_response(" POT  12 \r\n"), Response(Pot{12}));
  EXPECT_EQ(parse_response("ERR\tUNREACHABLE"), Response(Err{ErrCode::Unreachable}));
}

TEST(Codec, MalformedCommands) {
  for (const char* line : {"", "   ", "X 1 2 3", "G 1 2", "G 1 2 3 4", "G a b c", "G 1 2 nan", "G 1 2 inf",
                           "A 1 2 3x", "P 1", "H now", "g 1 2 3"}) {
    try {
      (void)parse_command(line);
      ADD_FAILURE() << "accepted '" << line << "'";
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.code(), ProtocolError::Code::BadCommand);
    }
  }
}

TEST(Codec, MalformedResponses) {
  for (const char* line : {"", "OK 1", "ERR", "ERR NOPE", "POT", "POT -1", "POT 1024", "POT 3.5", "POT 1 2", "YES"}) {
    try {
      (void)parse_response(line);
      ADD_FAILURE() << "accepted '" << line << "'";
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.code(), ProtocolError::Code::BadResponse);
    }
  }
}

TEST(Imperfection, FromSeedRanges) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const RobotImperfection p = RobotImperfection::from_seed(s);
    EXPECT_EQ(p.seed, s);
    EXPECT_EQ(p.servo_quantum, 1.0);
    for (double v : p.geometry_scale) EXPECT_TRUE(v >= 0.98 && v <= 1.02);
    for (double v : p.angle_bias) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
    EXPECT_NO_THROW(p.validate());
    EXPECT_FALSE(p.is_identity());
  }
  const auto a = RobotImperfection::from_seed(101), b = RobotImperfection::from_seed(101);
  EXPECT_EQ(a.geometry_scale, b.geometry_scale);
  EXPECT_EQ(a.angle_bias, b.angle_bias);
  EXPECT_TRUE(RobotImperfection{}.is_identity());
  RobotImperfection bad;
  bad.geometry_scale[1] = 0.85;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Imperfection, RealizedPositionErrorIsBounded) {
  const RobotGeometry g;
  const WorkspaceCylinder ws = default_workspace(g);
  DialEnv env(DialEnvConfig{}, ws);
  SimulatedRobot ideal(g, RobotImperfection{}, env);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t s : {101u, 202u, 303u}) {
    const RobotImperfection imp = RobotImperfection::from_seed(s);
    SimulatedRobot robot(g, imp, env);
    double worst = 0.0, total = 0.0;
    for (int k = 0; k < 300; ++k) {
      const double r = 30.0 * std::sqrt(std::abs(u(rng))), t = 180.0 * u(rng);
      CartesianPoint p = polar_to_cartesian(r, t, ws.z_top - 5.0 - 30.0 * std::abs(u(rng)));
      const auto real = robot.realize(inverse_kinematics(p, scaled_geometry(g, imp)));
      ASSERT_TRUE(real.has_value());
      const double d = norm(*real - p);
      worst = std::max(worst, d);
      total += d;
      const auto exact = ideal.realize(inverse_kinematics(p, g));
      ASSERT_TRUE(exact.has_value());
      EXPECT_LT(norm(*exact - p), 1e-9);
    }
    EXPECT_GT(total / 300.0, 0.05) << "profile " << s;
    EXPECT_LT(worst, 6.0) << "profile " << s;
  }
}

TEST(SimulatedRobotTest, MotionErrors) {
  const RobotGeometry g;
  DialEnv env(DialEnvConfig{}, default_workspace(g));
  SimulatedRobot robot(g, RobotImperfection{}, env);
  MockFirmware fw(robot);
  const double z = env.config().push_z;
  EXPECT_EQ(fw.handle(GotoXYZ{40.0, 0.0, z}), Response(Err{ErrCode::OutOfWorkspace}));
  EXPECT_EQ(fw.handle(GotoXYZ{0.0, 0.0, z - 100.0}), Response(Err{ErrCode::OutOfWorkspace}));
  EXPECT_EQ(fw.handle(SetAngles{g.servo.max_deg + 1.0, 0.0, 0.0}), Response(Err{ErrCode::Unreachable}));
  EXPECT_EQ(fw.handle(GotoXYZ{3.0, -4.0, z}), Response(Ok{}));
  EXPECT_NEAR(robot.position().x, 3.0, 1e-12);
  // a failed move leaves the effector where it was
  (void)fw.handle(GotoXYZ{40.0, 0.0, z});
  EXPECT_NEAR(robot.position().y, -4.0, 1e-12);
  EXPECT_EQ(fw.handle(Home{}), Response(Ok{}));
  EXPECT_NEAR(robot.position().z, home_position(g).z, 1e-12);
}

TEST(SimulatedRobotTest, SetAnglesLandsOnForwardKinematics) {
  const RobotGeometry g;
  DialEnv env(DialEnvConfig{}, default_workspace(g));
  SimulatedRobot robot(g, RobotImperfection{}, env);
  const JointAngles a{{20.0, 25.0, 30.0}};
  ASSERT_EQ(robot.set_angles(a), Response(Ok{}));
  EXPECT_LT(norm(robot.position() - forward_kinematics(a, g)), 1e-12);
}

TEST(SimulatedRobotTest, OnlyPushHeightMovesTouchTheLever) {
  const RobotGeometry g;
  DialEnv env(DialEnvConfig{}, default_workspace(g));
  (void)env.reset();
  SimulatedRobot robot(g, RobotImperfection{}, env);
  const auto& c = env.config();
  const double w = (c.start_angle + c.pot_zero_azimuth) * std::numbers::pi / 180.0;
  const double mx = c.pivot_x + 0.7 * c.lever_length * std::cos(w), my = c.pivot_y + 0.7 * c.lever_length * std::sin(w);
  // descending right onto the lever does nothing; only horizontal push moves count
  ASSERT_EQ(robot.goto_xyz({mx, my, c.hover_z}), Response(Ok{}));
  ASSERT_EQ(robot.goto_xyz({mx, my, c.push_z}), Response(Ok{}));
  EXPECT_EQ(env.lever().angle, c.start_angle);
  ASSERT_EQ(robot.goto_xyz({mx + 1.0, my, c.push_z}), Response(Ok{}));
  EXPECT_NE(env.lever().angle, c.start_angle);
}

TEST(Firmware, HandleLineAndServe) {
  const RobotGeometry g;
  DialEnv env(DialEnvConfig{}, default_workspace(g));
  (void)env.reset();
  SimulatedRobot robot(g, RobotImperfection{}, env);
  MockFirmware fw(robot);
  EXPECT_EQ(fw.handle_line("bogus"), "ERR BAD_CMD\n");
  EXPECT_EQ(fw.handle_line("G 1 2"), "ERR BAD_CMD\n");
  EXPECT_EQ(fw.handle_line("P"), "POT " + std::to_string(adc_from_angle(env.config().start_angle, env.config())) + "\n");

  std::istringstream in("H\nG 0 0 -50\nG 90 0 -50\nP\nnope\n");
  std::ostringstream out;
  fw.serve(in, out);
  const std::string expect =
      "OK\nOK\nERR OUT_OF_WORKSPACE\nPOT " + std::to_string(adc_from_angle(env.config().start_angle, env.config())) +
      "\nERR BAD_CMD\n";
  EXPECT_EQ(out.str(), expect);
}

TEST(Client, TypedRoundTripThroughSession) {
  const RobotGeometry g;
  DialEnv env(DialEnvConfig{}, default_workspace(g));
  SimulatedRobot robot(g, RobotImperfection{}, env);
  MockFirmware fw(robot);
  InMemorySession session(fw);
  DeviceClient client(session);
  EXPECT_EQ(client.send(Home{}), Response(Ok{}));
  EXPECT_EQ(client.send(ReadPot{}), Response(Pot{adc_from_angle(env.config().start_angle, env.config())}));
}

TEST(Transport, IdentityProtocolMatchesDirect) {
  const ExperimentConfig cfg = identity_config();
  DirectRunner direct(cfg, cfg.robots[0], 5);
  ProtocolRunner proto(cfg, cfg.robots[0], 5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int moved = 0;
  for (int k = 0; k < 300; ++k) {
    const SkillParams s{u(rng), u(rng), u(rng), u(rng)};
    const StepOutcome a = direct.run(s), b = proto.run(s);
    ASSERT_EQ(a.adc, b.adc);
    ASSERT_EQ(a.final_angle, b.final_angle);
    ASSERT_EQ(a.reward, b.reward);
    ASSERT_EQ(a.success, b.success);
    moved += a.adc != adc_from_angle(cfg.env.start_angle, cfg.env);
  }
  EXPECT_GT(moved, 30);
}

TEST(Transport, ImperfectProtocolMatchesDirectAdc) {
  ExperimentConfig cfg = default_config();
  cfg.env.reward_from_adc = true;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int r = 0; r < 3; ++r) {
    DirectRunner direct(cfg, cfg.robots[r], 1);
    ProtocolRunner proto(cfg, cfg.robots[r], 1);
    for (int k = 0; k < 50; ++k) {
      const SkillParams s{u(rng), u(rng), u(rng), u(rng)};
      ASSERT_EQ(direct.run(s).adc, proto.run(s).adc);
    }
  }
}
