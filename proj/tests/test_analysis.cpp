#include <gtest/gtest.h>

#include <json.hpp>

#include "coopgait/analysis.hpp"
#include "coopgait/fixtures.hpp"

using namespace coopgait;

namespace {

struct Planar {
  RobotModel model = fixtures::planar_quadruped();
  Gait gait = fixtures::planar_gait(model);
};

const Planar& planar() {
  static const Planar p;
  return p;
}

}  // namespace

TEST(Stability, SingleAgentNominalGaitIsStable) {
  const auto& [m, g] = planar();
  const SingleReturnMap map(m, hybrid_spec(g), nominal_single_factory(m, g, {}), g.x0);
  const PoincareResult r = stability_report(map, map.project(g.x0));
  EXPECT_EQ(r.jacobian.rows(), map.dim());
  EXPECT_EQ(r.removed, std::vector<std::string>{"base/x"});
  EXPECT_LT(r.spectral_radius, 1.0);
  EXPECT_DOUBLE_EQ(r.spectral_radius, r.moduli.front());
  const auto doc = nlohmann::json::parse(stability_json(r));
  EXPECT_EQ(doc.at("eigen_moduli").size(), static_cast<size_t>(map.dim()));
}

TEST(Stability, RejectsPointsOffTheCycle) {
  const auto& [m, g] = planar();
  const SingleReturnMap map(m, hybrid_spec(g), nominal_single_factory(m, g, {}), g.x0);
  Vec z = map.project(g.x0);
  z[0] += 0.01;
  EXPECT_THROW(stability_report(map, z), PoincareError);
}

TEST(Refine, PeriodicSeedNeedsNoSteps) {
  const auto& [m, g] = planar();
  const RefineResult r = refine_periodic(m, g, nominal_single_factory(m, g, {}), g.x0);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_LT(r.residual, 1e-8);
}

TEST(Refine, ConvergesFromPerturbedVelocity) {
  const auto& [m, g] = planar();
  AgentState guess = g.x0;
  guess.v *= 1.01;
  const RefineResult r = refine_periodic(m, g, nominal_single_factory(m, g, {}), guess);
  EXPECT_GT(r.iterations, 0);
  EXPECT_LT(r.residual, 1e-8);
  EXPECT_LT((r.x_star.v - g.x0.v).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Audits, CoupledOrbitKeepsConstraints) {
  const auto& [m, g] = planar();
  const Vec2 d = fixtures::planar_offset();
  const LiftedOrbit lo = lift_orbit(m, g, d);
  ExecutorConfig cfg;
  cfg.t_max = 10 * g.period();
  const BarConstraint bar{lo.bar_length()};
  const auto factory = nominal_agent_factory(m, g, {});
  CoupledStart start;
  start.x = lo.at(0.0);
  const TrajectoryLog log = step_hybrid(cfg, m, m, hybrid_spec(g), bar, factory(0), factory(1), start);
  const AuditReport a = audits(log, m, bar.length, &g);
  EXPECT_LT(a.max_bar_drift, 1e-4);
  EXPECT_LT(a.max_contact_drift, 1e-6);
  EXPECT_LT(a.max_lambda_e_ratio, 1e-6);
  ASSERT_FALSE(a.output_norm_per_stride.empty());
  for (double n : a.output_norm_per_stride) EXPECT_LT(n, 1e-6);
}
