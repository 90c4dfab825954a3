#include "coopgait/qp.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>

namespace coopgait {

namespace {

struct Constraint {
  int index;
  BoundSide side;
};

// Normal and offset of a bound written as n'x >= b.
double bound_sign(BoundSide s) { return s == BoundSide::kLower ? 1.0 : -1.0; }

double bound_offset(const QpProblem& p, const Constraint& c) {
  return c.side == BoundSide::kLower ? p.lo[c.index] : -p.hi[c.index];
}

double slack(const QpProblem& p, const Vec& x, const Constraint& c) {
  return bound_sign(c.side) * x[c.index] - bound_offset(p, c);
}

// Solves [Q -N; N' 0] [z; r] = [top; bottom] where N holds the equality rows
// followed by the active bound normals.
struct Kkt {
  Vec z;
  Vec r;
  bool ok = true;
};

Kkt solve_kkt(const QpProblem& p, const std::vector<Constraint>& active, const Vec& top, const Vec& bottom) {
  const int n = p.size();
  const int me = static_cast<int>(p.a_eq.rows());
  const int m = me + static_cast<int>(active.size());
  Mat nmat = Mat::Zero(n, m);
  if (me > 0) nmat.leftCols(me) = p.a_eq.transpose();
  for (size_t k = 0; k < active.size(); ++k)
    nmat(active[k].index, me + static_cast<int>(k)) = bound_sign(active[k].side);
  Mat kkt = Mat::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = p.q;
  kkt.topRightCorner(n, m) = -nmat;
  kkt.bottomLeftCorner(m, n) = nmat.transpose();
  Vec rhs(n + m);
  rhs << top, bottom;
  Eigen::FullPivLU<Mat> lu(kkt);
  Kkt out;
  if (!lu.isInvertible()) {
    out.ok = false;
    return out;
  }
  const Vec sol = lu.solve(rhs);
  out.z = sol.head(n);
  out.r = sol.tail(m);
  return out;
}

std::string describe(const Constraint& c) {
  std::ostringstream os;
  os << (c.side == BoundSide::kLower ? "lower" : "upper") << " bound on x[" << c.index << "]";
  return os.str();
}

QpSolution finish(const QpProblem& p, const Vec& x, const std::vector<Constraint>& active, const Vec& mult,
                  int iterations) {
  QpSolution s;
  const int me = static_cast<int>(p.a_eq.rows());
  s.x = x;
  s.y = mult.head(me);
  s.z_lo = Vec::Zero(p.size());
  s.z_hi = Vec::Zero(p.size());
  for (size_t k = 0; k < active.size(); ++k) {
    const double u = mult[me + static_cast<int>(k)];
    if (active[k].side == BoundSide::kLower)
      s.z_lo[active[k].index] = u;
    else
      s.z_hi[active[k].index] = u;
    s.active.push_back({active[k].index, active[k].side});
  }
  s.iterations = iterations;
  s.objective = qp_objective(p, x);
  return s;
}

double tolerance(const QpProblem& p) {
  double scale = 1.0;
  for (int i = 0; i < p.size(); ++i) {
    if (std::isfinite(p.lo[i])) scale = std::max(scale, std::abs(p.lo[i]));
    if (std::isfinite(p.hi[i])) scale = std::max(scale, std::abs(p.hi[i]));
  }
  return 1e-12 * scale;
}

bool try_warm(const QpProblem& p, const std::vector<ActiveBound>& warm, QpSolution* out) {
  std::vector<Constraint> active;
  for (const auto& a : warm) {
    if (a.index < 0 || a.index >= p.size()) return false;
    active.push_back({a.index, a.side});
  }
  Vec bottom(p.a_eq.rows() + static_cast<Eigen::Index>(active.size()));
  bottom.head(p.a_eq.rows()) = p.b_eq;
  for (size_t k = 0; k < active.size(); ++k) bottom[p.a_eq.rows() + static_cast<Eigen::Index>(k)] = bound_offset(p, active[k]);
  const Kkt k = solve_kkt(p, active, -p.c, bottom);
  if (!k.ok) return false;
  const double tol = tolerance(p);
  for (int i = 0; i < p.size(); ++i)
    if (k.z[i] < p.lo[i] - tol || k.z[i] > p.hi[i] + tol) return false;
  for (size_t j = 0; j < active.size(); ++j)
    if (k.r[p.a_eq.rows() + static_cast<Eigen::Index>(j)] < -1e-12) return false;
  *out = finish(p, k.z, active, k.r, 0);
  out->warm_started = true;
  return true;
}

}  // namespace

double qp_objective(const QpProblem& p, const Vec& x) { return 0.5 * x.dot(p.q * x) + p.c.dot(x); }

QpSolution solve_qp(const QpProblem& p, const std::vector<ActiveBound>& warm) {
  const int n = p.size();
  const int me = static_cast<int>(p.a_eq.rows());
  if (p.q.rows() != n || p.q.cols() != n || p.lo.size() != n || p.hi.size() != n ||
      (me > 0 && p.a_eq.cols() != n) || p.b_eq.size() != me)
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  for (int i = 0; i < n; ++i)
    if (p.lo[i] > p.hi[i]) throw QpInfeasible("empty box on x[" + std::to_string(i) + "]", p.lo[i] - p.hi[i]);

  QpSolution ws;
  if (!warm.empty() && try_warm(p, warm, &ws)) return ws;

  std::vector<Constraint> active;
  Kkt k = solve_kkt(p, active, -p.c, p.b_eq);
  if (!k.ok) throw QpInfeasible("equality constraints are rank deficient", 0.0);
  Vec x = k.z;
  Vec mult = k.r;  // equality multipliers then active-bound multipliers
  const double tol = tolerance(p);
  const int max_iter = 10 * std::max(n, 1);
  int iter = 0;

  while (true) {
    // Most violated bound; ties go to the lowest index, lower before upper.
    Constraint worst{-1, BoundSide::kLower};
    double worst_slack = -tol;
    for (int i = 0; i < n; ++i) {
      for (BoundSide side : {BoundSide::kLower, BoundSide::kUpper}) {
        const Constraint c{i, side};
        if (!std::isfinite(bound_offset(p, c))) continue;
        bool is_active = false;
        for (const auto& a : active) is_active = is_active || (a.index == i && a.side == side);
        if (is_active) continue;
        const double s = slack(p, x, c);
        if (s < worst_slack) {
          worst_slack = s;
          worst = c;
        }
      }
    }
    if (worst.index < 0) return finish(p, x, active, mult, iter);

    double u_p = 0.0;
    while (true) {
      if (++iter > max_iter) throw QpIterationLimit("solve_qp: iteration limit exceeded");
      Vec np = Vec::Zero(n);
      np[worst.index] = bound_sign(worst.side);
      const Kkt dir = solve_kkt(p, active, np, Vec::Zero(me + static_cast<Eigen::Index>(active.size())));
      if (!dir.ok) throw QpInfeasible("singular working set at " + describe(worst), -slack(p, x, worst));
      // Partial step: first active bound multiplier that would turn negative.
      double t1 = std::numeric_limits<double>::infinity();
      int block = -1;
      for (size_t j = 0; j < active.size(); ++j) {
        const double rj = dir.r[me + static_cast<Eigen::Index>(j)];
        if (rj < -1e-14) {
          const double t = -mult[me + static_cast<Eigen::Index>(j)] / rj;
          if (t < t1) {
            t1 = t;
            block = static_cast<int>(j);
          }
        }
      }
      const double curvature = np.dot(dir.z);
      const double s = slack(p, x, worst);
      const double t2 = curvature > 1e-14 ? -s / curvature : std::numeric_limits<double>::infinity();
      if (!std::isfinite(t1) && !std::isfinite(t2))
        throw QpInfeasible("cannot satisfy " + describe(worst) + " together with the equalities", -s);
      const double t = std::min(t1, t2);
      x += t * dir.z;
      mult += t * dir.r;
      u_p += t;
      if (t2 <= t1) {
        active.push_back(worst);
        mult.conservativeResize(mult.size() + 1);
        mult[mult.size() - 1] = u_p;
        break;
      }
      active.erase(active.begin() + block);
      Vec m2(mult.size() - 1);
      m2.head(me + block) = mult.head(me + block);
      m2.tail(m2.size() - me - block) = mult.tail(mult.size() - me - block - 1);
      mult = m2;
    }
  }
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  Vec grad = p.q * s.x + p.c - s.z_lo + s.z_hi;
  if (p.a_eq.rows() > 0) grad -= p.a_eq.transpose() * s.y;
  r.stationarity = grad.cwiseAbs().maxCoeff();
  double primal = p.a_eq.rows() > 0 ? (p.a_eq * s.x - p.b_eq).cwiseAbs().maxCoeff() : 0.0;
  double comp = 0.0, sign = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    primal = std::max({primal, p.lo[i] - s.x[i], s.x[i] - p.hi[i]});
    if (s.z_lo[i] != 0.0) comp = std::max(comp, std::abs(s.z_lo[i] * (s.x[i] - p.lo[i])));
    if (s.z_hi[i] != 0.0) comp = std::max(comp, std::abs(s.z_hi[i] * (p.hi[i] - s.x[i])));
    sign = std::max({sign, -s.z_lo[i], -s.z_hi[i]});
  }
  r.primal = primal;
  r.complementarity = comp;
  r.dual_sign = sign;
  return r;
}

QpProblem build_controller_qp(const Vec& u_nom, const Mat& a, const Vec& b, const Vec& e, double qp_weight,
                              const QpBounds& bounds) {
  const int m = static_cast<int>(u_nom.size());
  const int r = static_cast<int>(a.rows());
  QpProblem p;
  p.q = Mat::Zero(m + r, m + r);
  p.q.topLeftCorner(m, m).setIdentity();
  p.q.bottomRightCorner(r, r) = qp_weight * Mat::Identity(r, r);
  p.c = Vec::Zero(m + r);
  p.c.head(m) = -u_nom;
  p.a_eq = Mat::Zero(r, m + r);
  p.a_eq.leftCols(m) = a;
  p.a_eq.rightCols(r).setIdentity();
  p.b_eq = -(b + e);
  p.lo.resize(m + r);
  p.hi.resize(m + r);
  p.lo.head(m).setConstant(bounds.u_min);
  p.hi.head(m).setConstant(bounds.u_max);
  p.lo.tail(r).setConstant(bounds.delta_min);
  p.hi.tail(r).setConstant(bounds.delta_max);
  return p;
}

}  // namespace coopgait
