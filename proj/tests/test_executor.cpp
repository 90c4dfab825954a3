#include <gtest/gtest.h>

#include <cmath>

#include "coopgait/analysis.hpp"
#include "coopgait/executor.hpp"
#include "coopgait/fixtures.hpp"
#include "coopgait/kinematics.hpp"

using namespace coopgait;

namespace {

// Flight until foot_LH touches the ground, then a stance domain.
HybridSpec drop_spec() {
  DomainSpec flight{"flight", {}, {}};
  flight.guard.kind = GuardKind::kSwingPointHeight;
  flight.guard.point = "foot_LH";
  DomainSpec stance{"stance", {"foot_LH"}, {}};
  HybridSpec spec;
  spec.graph = GaitGraph::cycle({flight, stance}, {ResetKind::kImpact, ResetKind::kIdentity});
  spec.durations = {10.0, 1.0};
  return spec;
}

double drop_event_time(double dt) {
  const RobotModel m = fixtures::planar_quadruped();
  ExecutorConfig cfg;
  cfg.dt = dt;
  cfg.section_domain = 1;
  cfg.record = false;
  AgentState x{Vec::Zero(m.dof()), Vec::Zero(m.dof())};
  x.q[1] = 1.0;
  const SingleController zero = [&](const Phase&, const AgentState&) { return Vec(Vec::Zero(m.num_inputs())); };
  const TrajectoryLog log = step_hybrid(cfg, m, drop_spec(), zero, SingleStart{x});
  EXPECT_TRUE(log.reached_section) << log.message;
  EXPECT_EQ(log.events.size(), 1u);
  return log.events.empty() ? NAN : log.events.front().t;
}

}  // namespace

TEST(Events, FreeFallTouchdownTime) {
  // Zero torques and zero velocity: the whole body translates in free fall.
  const double exact = std::sqrt(2.0 * 0.5 / 9.81);
  for (double dt : {1e-2, 3e-3, 1e-3}) EXPECT_NEAR(drop_event_time(dt), exact, 1e-10) << "dt=" << dt;
}

TEST(Integration, FourthOrderOnSmoothSegment) {
  const RobotModel m = fixtures::planar_quadruped();
  const Gait g = fixtures::planar_gait(m);
  AgentState x = g.x0;
  x.v[2] += 0.2;
  x.v = impact_map(m, g.contacts(m, 0), x).v_plus;
  auto final_state = [&](double dt) {
    ExecutorConfig cfg;
    cfg.dt = dt;
    cfg.t_max = 0.09;
    cfg.record = false;
    const TrajectoryLog log = step_hybrid(cfg, m, hybrid_spec(g), nominal_single_factory(m, g, {})(), SingleStart{x});
    Vec z(2 * m.dof());
    z << log.final_state[0].q, log.final_state[0].v;
    return z;
  };
  const Vec a = final_state(0.01), b = final_state(0.005), c = final_state(0.0025);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  EXPECT_GE(order, 3.5);
}

TEST(Rollout, SingleAgentReturnsToStart) {
  const RobotModel m = fixtures::planar_quadruped();
  const Gait g = fixtures::planar_gait(m);
  const SingleReturnMap map(m, hybrid_spec(g), nominal_single_factory(m, g, {}), g.x0);
  const Vec z = map.project(g.x0);
  EXPECT_LT((map.apply(z) - z).cwiseAbs().maxCoeff(), 1e-5);
  const TrajectoryLog log = map.rollout(g.x0, true);
  EXPECT_EQ(log.events.size(), 8u);
  EXPECT_EQ(log_csv(log, m).rfind("# coopgait trajectory v1\nt,domain,q_base/x", 0), 0u);
}

TEST(Rollout, HorizontalShiftDoesNotChangeReturn) {
  const RobotModel m = fixtures::planar_quadruped();
  const Gait g = fixtures::planar_gait(m);
  const SingleReturnMap map(m, hybrid_spec(g), nominal_single_factory(m, g, {}), g.x0);
  AgentState x = g.x0;
  x.v[3] += 0.05;
  const TrajectoryLog a = map.rollout(x, false);
  const TrajectoryLog b = map.rollout(translate(m, x, Vec2(3.7, 0.0)), false);
  EXPECT_LT((map.project(a.final_state[0]) - map.project(b.final_state[0])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rollout, TimeoutIsFlagged) {
  const RobotModel m = fixtures::planar_quadruped();
  const Gait g = fixtures::planar_gait(m);
  ExecutorConfig cfg;
  cfg.t_max = 0.5;
  cfg.section_domain = 0;
  cfg.section_hits = 1;
  const TrajectoryLog log = step_hybrid(cfg, m, hybrid_spec(g), nominal_single_factory(m, g, {})(), SingleStart{g.x0});
  EXPECT_FALSE(log.reached_section);
}
