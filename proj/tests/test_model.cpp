#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <random>

#include "coopgait/fixtures.hpp"
#include "coopgait/gait.hpp"
#include "coopgait/kinematics.hpp"

using namespace coopgait;

namespace {

Vec random_q(const RobotModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  Vec q(m.dof());
  for (int i = 0; i < m.dof(); ++i) q[i] = u(rng);
  return q;
}

std::string expect_model_error(const std::string& text) {
  try {
    load_model(text);
  } catch (const ModelError& e) {
    return e.path();
  }
  ADD_FAILURE() << "no ModelError";
  return "";
}

}  // namespace

TEST(Model, FixtureDimensions) {
  const RobotModel planar = fixtures::planar_quadruped();
  EXPECT_EQ(planar.dof(), 11);
  EXPECT_EQ(planar.num_inputs(), 8);
  EXPECT_EQ(planar.horizontal_coordinates(), std::vector<int>{0});
  EXPECT_EQ(planar.pitch_coordinate(), 2);
  EXPECT_EQ(planar.roll_coordinate(), -1);

  const RobotModel arm = fixtures::quadruped_arm();
  EXPECT_EQ(arm.dof(), 24);
  EXPECT_EQ(arm.num_inputs(), 18);
  EXPECT_EQ(arm.horizontal_coordinates().size(), 2u);
  EXPECT_EQ(arm.input_matrix().rows(), 24);
  EXPECT_EQ(arm.input_matrix().cols(), 18);
}

TEST(Model, RoundTripsThroughJson) {
  const RobotModel a = fixtures::quadruped_arm();
  const RobotModel b = load_model(fixtures::quadruped_arm_json());
  EXPECT_TRUE(a.structurally_equal(b));
  EXPECT_FALSE(a.structurally_equal(fixtures::planar_quadruped()));
}

TEST(Model, ErrorsNameTheOffendingPath) {
  using json = nlohmann::json;
  json doc = json::parse(fixtures::pendulum_json(2));
  doc["bodies"][1]["mass"] = -1.0;
  EXPECT_EQ(expect_model_error(doc.dump()), "bodies[1].mass");

  doc = json::parse(fixtures::pendulum_json(2));
  doc["bodies"][1]["joint"]["parent"] = "nowhere";
  EXPECT_EQ(expect_model_error(doc.dump()), "bodies[1].joint.parent");

  doc = json::parse(fixtures::pendulum_json(2));
  doc["bodies"][0]["inertia"] = json::array({json::array({1, 2, 0}), json::array({0, 1, 0}), json::array({0, 0, 1})});
  EXPECT_EQ(expect_model_error(doc.dump()), "bodies[0].inertia");

  doc = json::parse(fixtures::pendulum_json(2));
  doc["version"] = 7;
  EXPECT_EQ(expect_model_error(doc.dump()), "version");

  EXPECT_EQ(expect_model_error("{not json"), "$");
}

TEST(Kinematics, PendulumTipClosedForm) {
  const RobotModel m = fixtures::pendulum(2);
  Vec q(2);
  q << 0.3, -0.5;
  const Vec3 tip = point_position(m, q, "tip");
  EXPECT_NEAR(tip.x(), 1.0 * std::sin(0.3) + 0.8 * std::sin(-0.2), 1e-14);
  EXPECT_NEAR(tip.y(), -1.0 * std::cos(0.3) - 0.8 * std::cos(-0.2), 1e-14);
}

TEST(Kinematics, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (const RobotModel& m : {fixtures::planar_quadruped(), fixtures::quadruped_arm()}) {
    const Vec q = random_q(m, rng);
    for (const auto& c : m.contacts()) {
      const Mat j = point_jacobian(m, q, c);
      for (int i = 0; i < m.dof(); ++i) {
        Vec qp = q, qm = q;
        qp[i] += 1e-6;
        qm[i] -= 1e-6;
        const Vec3 fd = (point_position(m, qp, c) - point_position(m, qm, c)) / 2e-6;
        EXPECT_LT((j.col(i) - fd).cwiseAbs().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(Kinematics, JdotVMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (const RobotModel& m : {fixtures::planar_quadruped(), fixtures::quadruped_arm()}) {
    const Vec q = random_q(m, rng), v = random_q(m, rng);
    const BodyPoint& p = m.has_end_effector() ? m.end_effector() : m.contacts().front();
    const double h = 1e-6;
    const Vec3 fd = (point_jacobian(m, q + h * v, p) * v - point_jacobian(m, q - h * v, p) * v) / (2 * h);
    EXPECT_LT((jdot_v(m, q, v, p) - fd).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Kinematics, TranslateMovesOnlyHorizontalBase) {
  const RobotModel m = fixtures::quadruped_arm();
  std::mt19937_64 rng(4);
  const AgentState x{random_q(m, rng), random_q(m, rng)};
  const AgentState y = translate(m, x, Vec2(0.4, -1.5));
  const Vec3 shift = point_position(m, y.q, "end_effector") - point_position(m, x.q, "end_effector");
  EXPECT_NEAR(shift.x(), 0.4, 1e-14);
  EXPECT_NEAR(shift.y(), -1.5, 1e-14);
  EXPECT_NEAR(shift.z(), 0.0, 1e-14);
  EXPECT_EQ(x.v, y.v);
  const RobotModel planar = fixtures::planar_quadruped();
  const AgentState z{Vec::Zero(11), Vec::Zero(11)};
  EXPECT_THROW(translate(planar, z, Vec2(0.0, 1.0)), std::invalid_argument);
}
