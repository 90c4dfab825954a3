#include <gtest/gtest.h>

#include <random>

#include "coopgait/qp.hpp"
#include "oracles.hpp"

using namespace coopgait;

namespace {

QpProblem unbounded(const Mat& q, const Vec& c) {
  QpProblem p;
  p.q = q;
  p.c = c;
  p.a_eq = Mat(0, c.size());
  p.b_eq = Vec(0);
  p.lo = Vec::Constant(c.size(), -std::numeric_limits<double>::infinity());
  p.hi = Vec::Constant(c.size(), std::numeric_limits<double>::infinity());
  return p;
}

}  // namespace

TEST(Qp, UnconstrainedMinimizer) {
  Mat q(2, 2);
  q << 5, 2, 2, 1;
  const Vec c = Vec::Ones(2);
  const QpSolution s = solve_qp(unbounded(q, c));
  EXPECT_LT((s.x - q.ldlt().solve(-c)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(s.x[0], 1.0, 1e-12);
  EXPECT_NEAR(s.x[1], -3.0, 1e-12);
}

TEST(Qp, MatchesEnumerationOnRandomInstances) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = static_cast<int>(rng() % std::min(n, 3));
    const QpProblem p = oracle::random_qp(rng, n, m);
    const QpSolution s = solve_qp(p);
    const auto ref = oracle::enumerate_qp(p);
    ASSERT_TRUE(ref.feasible);
    const KktResiduals r = kkt_residuals(p, s);
    EXPECT_LT(r.stationarity, 1e-9);
    EXPECT_LT(r.primal, 1e-9);
    EXPECT_LT(r.complementarity, 1e-9);
    EXPECT_LT(r.dual_sign, 1e-9);
    EXPECT_LT(std::abs(s.objective - ref.objective), 1e-9);
  }
}

TEST(Qp, WarmStartReachesSameOptimum) {
  std::mt19937_64 rng(8);
  const QpProblem p = oracle::random_qp(rng, 6, 2);
  const QpSolution cold = solve_qp(p);
  const QpSolution warm = solve_qp(p, cold.active);
  EXPECT_LT((cold.x - warm.x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(warm.warm_started);
  const QpSolution junk = solve_qp(p, {{0, BoundSide::kUpper}, {1, BoundSide::kLower}});
  EXPECT_LT((cold.x - junk.x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Qp, InfeasibleEqualityIsReported) {
  QpProblem p = unbounded(Mat::Identity(2, 2), Vec::Zero(2));
  p.lo.setConstant(-1.0);
  p.hi.setConstant(1.0);
  p.a_eq = Mat::Ones(1, 2);
  p.b_eq = Vec::Constant(1, 5.0);
  try {
    solve_qp(p);
    FAIL() << "expected QpInfeasible";
  } catch (const QpInfeasible& e) {
    EXPECT_FALSE(std::string(e.what()).empty());
  }
}

TEST(ControllerQp, FeasibleNominalIsOptimal) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = u(rng);
  Vec u_nom(5);
  for (int j = 0; j < 5; ++j) u_nom[j] = u(rng);
  const Vec e = Vec::Constant(3, 0.3);
  const Vec b = -a * u_nom - e;
  const QpProblem p = build_controller_qp(u_nom, a, b, e, 1e4, {});
  EXPECT_EQ(p.size(), 8);
  const QpSolution s = solve_qp(p);
  EXPECT_LT((s.x.head(5) - u_nom).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(s.x.tail(3).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ControllerQp, HigherWeightNeverGrowsDefect) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
  Vec b(4), e(4);
  for (int i = 0; i < 4; ++i) {
    b[i] = 5 * u(rng);
    e[i] = u(rng);
  }
  QpBounds bounds;
  bounds.u_min = -2.0;
  bounds.u_max = 2.0;
  double last = std::numeric_limits<double>::infinity();
  for (double w = 1e-2; w <= 1e6; w *= 10) {
    const QpProblem p = build_controller_qp(Vec::Zero(3), a, b, e, w, bounds);
    const QpSolution s = solve_qp(p);
    const double defect = s.x.tail(4).norm();
    EXPECT_LE(defect, last + 1e-12);
    last = defect;
    EXPECT_LT((p.a_eq * s.x - p.b_eq).cwiseAbs().maxCoeff(), 1e-9);
  }
}
