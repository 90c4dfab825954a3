#pragma once
// Independent reference computations used by the unit and acceptance tests.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "coopgait/analysis.hpp"
#include "coopgait/dynamics.hpp"
#include "coopgait/fixtures.hpp"
#include "coopgait/kinematics.hpp"
#include "coopgait/qp.hpp"

namespace oracle {

using coopgait::Mat;
using coopgait::Vec;

// ---------------------------------------------------------------------------
// Planar pendulum chains in closed form. Link k (1-based) has absolute angle
// phi_k = q_1 + ... + q_k and its mass at the distal end,
//   p_k = sum_{i<=k} l_i (sin phi_i, -cos phi_i),
// so T = 1/2 sum_k (m_k |dp_k|^2 + I_k dphi_k^2) and V = sum_k m_k g p_k.y.

struct Chain {
  std::vector<double> len, mass, inertia;
  double g = 9.81;
};

inline Chain pendulum_chain(int links) {
  Chain c;
  const double len[] = {1.0, 0.8, 0.6};
  const double mass[] = {1.0, 0.7, 0.4};
  for (int k = 0; k < links; ++k) {
    c.len.push_back(len[k]);
    c.mass.push_back(mass[k]);
    c.inertia.push_back(0.01 * (k + 1));
  }
  return c;
}

inline std::vector<double> absolute_angles(const Vec& q) {
  std::vector<double> phi(static_cast<size_t>(q.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) phi[static_cast<size_t>(i)] = acc += q[i];
  return phi;
}

// Velocity Jacobian (2 x n) of mass k.
inline Mat mass_jacobian(const Chain& c, const Vec& q, int k) {
  const auto phi = absolute_angles(q);
  const int n = static_cast<int>(q.size());
  Mat j = Mat::Zero(2, n);
  for (int col = 0; col <= k; ++col)
    for (int i = col; i <= k; ++i) {
      j(0, col) += c.len[i] * std::cos(phi[i]);
      j(1, col) += c.len[i] * std::sin(phi[i]);
    }
  return j;
}

inline Mat lagrangian_mass_matrix(const Chain& c, const Vec& q) {
  const int n = static_cast<int>(q.size());
  Mat d = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const Mat j = mass_jacobian(c, q, k);
    Vec e = Vec::Zero(n);
    e.head(k + 1).setOnes();
    d += c.mass[k] * j.transpose() * j + c.inertia[k] * e * e.transpose();
  }
  return d;
}

// Coriolis, centrifugal and gravity terms: sum_k m_k J_k' (Jdot_k qdot + g e_y).
inline Vec lagrangian_bias(const Chain& c, const Vec& q, const Vec& v) {
  const int n = static_cast<int>(q.size());
  const auto phi = absolute_angles(q);
  const auto rate = absolute_angles(v);
  Vec h = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    Eigen::Vector2d acc(0.0, c.g);
    for (int i = 0; i <= k; ++i)
      acc += c.len[i] * rate[i] * rate[i] * Eigen::Vector2d(-std::sin(phi[i]), std::cos(phi[i]));
    h += c.mass[k] * mass_jacobian(c, q, k).transpose() * acc;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Null-space projection solvers. With J N = 0 and the contact forces in the
// range of J', projecting D qdd + H = B u + J' lambda onto N removes lambda.

inline Mat null_space(const Mat& j) {
  Eigen::JacobiSVD<Mat> svd(j, Eigen::ComputeFullV);
  const Eigen::Index r = svd.rank();
  return svd.matrixV().rightCols(j.cols() - r);
}

struct Projected {
  Vec qdd;
  Vec lambda;
};

inline Projected nullspace_fd(const Mat& d, const Vec& h, const Vec& bu, const Mat& j, const Vec& jdv) {
  const Mat n = null_space(j);
  const Vec a_p = j.completeOrthogonalDecomposition().solve(-jdv);
  const Mat nd = n.transpose() * d;
  const Vec z = (nd * n).ldlt().solve(n.transpose() * (bu - h) - nd * a_p);
  Projected out;
  out.qdd = a_p + n * z;
  out.lambda = (j * j.transpose()).ldlt().solve(j * (d * out.qdd + h - bu));
  return out;
}

struct ProjectedImpact {
  Vec v_plus;
  Vec impulse;
};

inline ProjectedImpact nullspace_impact(const Mat& d, const Mat& j, const Vec& v_minus) {
  const Mat n = null_space(j);
  const Mat nd = n.transpose() * d;
  ProjectedImpact out;
  out.v_plus = n * (nd * n).ldlt().solve(nd * v_minus);
  out.impulse = (j * j.transpose()).ldlt().solve(j * d * (out.v_plus - v_minus));
  return out;
}

inline Mat block_diag(const Mat& a, const Mat& b) {
  Mat m = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  m.topLeftCorner(a.rows(), a.cols()) = a;
  m.bottomRightCorner(b.rows(), b.cols()) = b;
  return m;
}

inline Vec stack(const Vec& a, const Vec& b) {
  Vec v(a.size() + b.size());
  v << a, b;
  return v;
}

// Stacked constraint rows of two agents and the bar |p1 - p2|^2 / 2, with
// their acceleration offsets (Jdot qdot terms).
struct CoupledRows {
  Mat j;
  Vec jdv;
};

inline CoupledRows coupled_rows(const coopgait::RobotModel& m, const coopgait::ContactSet& c1,
                                const coopgait::ContactSet& c2, const coopgait::AugmentedState& xa, bool bar) {
  using namespace coopgait;
  const Mat j1 = contact_jacobian(m, c1, xa.agent1.q);
  const Mat j2 = contact_jacobian(m, c2, xa.agent2.q);
  const int n = m.dof();
  const int rows = static_cast<int>(j1.rows() + j2.rows()) + (bar ? 1 : 0);
  CoupledRows out;
  out.j = Mat::Zero(rows, 2 * n);
  out.jdv = Vec::Zero(rows);
  out.j.block(0, 0, j1.rows(), n) = j1;
  out.j.block(j1.rows(), n, j2.rows(), n) = j2;
  out.jdv.head(j1.rows()) = contact_jdot_v(m, c1, xa.agent1.q, xa.agent1.v);
  out.jdv.segment(j1.rows(), j2.rows()) = contact_jdot_v(m, c2, xa.agent2.q, xa.agent2.v);
  if (bar) {
    const Vec3 p1 = point_position(m, xa.agent1.q, m.end_effector());
    const Vec3 p2 = point_position(m, xa.agent2.q, m.end_effector());
    const Mat e1 = point_jacobian(m, xa.agent1.q, m.end_effector());
    const Mat e2 = point_jacobian(m, xa.agent2.q, m.end_effector());
    const Vec3 delta = p1 - p2;
    const Vec3 rate = e1 * xa.agent1.v - e2 * xa.agent2.v;
    out.j.block(rows - 1, 0, 1, n) = delta.transpose() * e1;
    out.j.block(rows - 1, n, 1, n) = -delta.transpose() * e2;
    out.jdv[rows - 1] = rate.squaredNorm() + delta.dot(jdot_v(m, xa.agent1.q, xa.agent1.v, m.end_effector()) -
                                                       jdot_v(m, xa.agent2.q, xa.agent2.v, m.end_effector()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// QP by enumeration of bound patterns. Every candidate pattern fixes some
// variables at a bound and solves the remaining equality-constrained QP;
// the best primal-feasible candidate is the global optimum.

struct Enumerated {
  bool feasible = false;
  Vec x;
  double objective = std::numeric_limits<double>::infinity();
};

inline Enumerated enumerate_qp(const coopgait::QpProblem& p) {
  const int n = p.size();
  const int m = static_cast<int>(p.a_eq.rows());
  Enumerated best;
  std::vector<int> state(static_cast<size_t>(n), 0);  // 0 free, 1 lower, 2 upper
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      state[static_cast<size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
    }
    std::vector<int> free;
    Vec x = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      const int s = state[static_cast<size_t>(i)];
      if (s == 0) free.push_back(i);
      if (s == 1) x[i] = p.lo[i];
      if (s == 2) x[i] = p.hi[i];
      if (s != 0 && !std::isfinite(x[i])) goto next;
    }
    {
      const int f = static_cast<int>(free.size());
      Mat kkt = Mat::Zero(f + m, f + m);
      Vec rhs = Vec::Zero(f + m);
      const Vec qx = p.q * x;
      for (int a = 0; a < f; ++a) {
        for (int b = 0; b < f; ++b) kkt(a, b) = p.q(free[a], free[b]);
        for (int r = 0; r < m; ++r) {
          kkt(a, f + r) = p.a_eq(r, free[a]);
          kkt(f + r, a) = p.a_eq(r, free[a]);
        }
        rhs[a] = -p.c[free[a]] - qx[free[a]];
      }
      if (m > 0) rhs.tail(m) = p.b_eq - p.a_eq * x;
      const Eigen::FullPivLU<Mat> lu(kkt);
      const Vec sol = lu.solve(rhs);
      if ((kkt * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
      for (int a = 0; a < f; ++a) x[free[a]] = sol[a];
      for (int i = 0; i < n; ++i)
        if (x[i] < p.lo[i] - 1e-12 || x[i] > p.hi[i] + 1e-12) goto next;
      if (m > 0 && (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff() > 1e-9) continue;
      const double obj = coopgait::qp_objective(p, x);
      if (obj < best.objective) {
        best.feasible = true;
        best.objective = obj;
        best.x = x;
      }
    }
  next:;
  }
  return best;
}

inline coopgait::QpProblem random_qp(std::mt19937_64& rng, int n, int m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  coopgait::QpProblem p;
  Mat r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = u(rng);
  p.q = r.transpose() * r + 0.1 * Mat::Identity(n, n);
  p.c.resize(n);
  for (int i = 0; i < n; ++i) p.c[i] = 3.0 * u(rng);
  p.lo.resize(n);
  p.hi.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    p.lo[i] = std::min(a, b) - 0.2;
    p.hi[i] = std::max(a, b) + 0.2;
  }
  // Equalities through an interior point keep the instance feasible.
  Vec x0(n);
  for (int i = 0; i < n; ++i) x0[i] = 0.5 * (p.lo[i] + p.hi[i]);
  p.a_eq.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.a_eq(i, j) = u(rng);
  p.b_eq = p.a_eq * x0;
  return p;
}

// ---------------------------------------------------------------------------
// Strong product straight from the definition: (v,w) -> (v',w') when each
// coordinate stays or follows an edge, and not both stay.

inline std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> brute_product_edges(
    const coopgait::GaitGraph& g) {
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;
  const int n = g.size();
  for (int v = 0; v < n; ++v)
    for (int w = 0; w < n; ++w)
      for (int v2 = 0; v2 < n; ++v2)
        for (int w2 = 0; w2 < n; ++w2) {
          const bool sv = v2 == v, sw = w2 == w;
          const bool ev = g.has_edge(v, v2), ew = g.has_edge(w, w2);
          if ((sv || ev) && (sw || ew) && !(sv && sw)) edges.insert({{v, w}, {v2, w2}});
        }
  return edges;
}

}  // namespace oracle
