#include "coopgait/dynamics.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace coopgait {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return s;
}

// Plucker transform for a frame rotated by E (child <- parent) located at r
// (parent coordinates).
Mat6 plucker(const Mat3& e, const Vec3& r) {
  Mat6 x = Mat6::Zero();
  x.topLeftCorner<3, 3>() = e;
  x.bottomRightCorner<3, 3>() = e;
  x.bottomLeftCorner<3, 3>() = -e * skew(r);
  return x;
}

Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec6 out;
  const Vec3 w = v.head<3>(), lin = v.tail<3>();
  out.head<3>() = w.cross(m.head<3>());
  out.tail<3>() = w.cross(m.tail<3>()) + lin.cross(m.head<3>());
  return out;
}

Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  const Vec3 w = v.head<3>(), lin = v.tail<3>();
  out.head<3>() = w.cross(f.head<3>()) + lin.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

Mat6 spatial_inertia(const Link& l) {
  Mat6 i = Mat6::Zero();
  const Mat3 c = skew(l.com);
  i.topLeftCorner<3, 3>() = l.inertia + l.mass * c * c.transpose();
  i.topRightCorner<3, 3>() = l.mass * c;
  i.bottomLeftCorner<3, 3>() = l.mass * c.transpose();
  i.bottomRightCorner<3, 3>() = l.mass * Mat3::Identity();
  return i;
}

Vec6 motion_subspace(const Link& l) {
  Vec6 s = Vec6::Zero();
  if (l.type == JointType::kRevolute) s.head<3>() = l.axis;
  if (l.type == JointType::kPrismatic) s.tail<3>() = l.axis;
  return s;
}

struct TreeTransforms {
  std::vector<Mat6> xup;
  std::vector<Vec6> s;
};

TreeTransforms tree_transforms(const RobotModel& model, const Vec& q) {
  const auto& links = model.links();
  TreeTransforms t;
  t.xup.resize(links.size());
  t.s.resize(links.size());
  for (size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    Mat3 rot = Mat3::Identity();
    Vec3 r = l.origin;
    if (l.type == JointType::kRevolute) rot = Eigen::AngleAxisd(q[l.q_index], l.axis).toRotationMatrix();
    if (l.type == JointType::kPrismatic) r += l.axis * q[l.q_index];
    t.xup[i] = plucker(rot.transpose(), r);
    t.s[i] = motion_subspace(l);
  }
  return t;
}

Vec rnea(const RobotModel& model, const Vec& q, const Vec& v, const Vec& qdd, bool gravity) {
  const auto& links = model.links();
  const size_t nl = links.size();
  const TreeTransforms t = tree_transforms(model, q);
  std::vector<Vec6> vel(nl), acc(nl), f(nl);
  Vec6 a0 = Vec6::Zero();
  if (gravity) a0.tail<3>() = -model.gravity();
  for (size_t i = 0; i < nl; ++i) {
    const Link& l = links[i];
    const double qd = l.q_index >= 0 ? v[l.q_index] : 0.0;
    const double qa = l.q_index >= 0 ? qdd[l.q_index] : 0.0;
    const Vec6 vp = l.parent < 0 ? Vec6::Zero() : vel[l.parent];
    const Vec6 ap = l.parent < 0 ? a0 : acc[l.parent];
    const Vec6 vj = t.s[i] * qd;
    vel[i] = t.xup[i] * vp + vj;
    acc[i] = t.xup[i] * ap + t.s[i] * qa + cross_motion(vel[i], vj);
    const Mat6 inertia = spatial_inertia(l);
    f[i] = inertia * acc[i] + cross_force(vel[i], inertia * vel[i]);
  }
  Vec tau = Vec::Zero(model.dof());
  for (size_t k = nl; k-- > 0;) {
    const Link& l = links[k];
    if (l.q_index >= 0) tau[l.q_index] = t.s[k].dot(f[k]);
    if (l.parent >= 0) f[l.parent] += t.xup[k].transpose() * f[k];
  }
  return tau;
}

Vec3 point_rows_select(const RobotModel&, const Vec3& v) { return v; }

// Smallest |R_ii| of a column-pivoted QR of a^T: a cheap rank-revealing
// estimate of the smallest singular value of a wide matrix.
double min_singular_value(const Mat& a) {
  if (a.rows() == 0) return 1.0;
  const Eigen::ColPivHouseholderQR<Mat> qr(a.transpose());
  const Eigen::Index k = std::min(a.rows(), a.cols());
  double smin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) smin = std::min(smin, std::abs(qr.matrixR()(i, i)));
  return a.rows() > a.cols() ? 0.0 : smin;
}

// Solves [D -G^T; G 0] [x; mult] = [top; bottom].
std::pair<Vec, Vec> solve_kkt(const Mat& d, const Mat& g, const Vec& top, const Vec& bottom,
                              const std::string& what) {
  const Eigen::Index n = d.rows(), m = g.rows();
  if (m > 0) {
    const double smin = min_singular_value(g);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if (smin < 1e-8 * scale) {
      std::ostringstream os;
      os << "singular KKT system: constraint Jacobian is rank deficient (rank estimate " << smin
         << ") for " << what;
      throw DynamicsError(os.str());
    }
  }
  Mat k = Mat::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = d;
  k.topRightCorner(n, m) = -g.transpose();
  k.bottomLeftCorner(m, n) = g;
  Vec rhs(n + m);
  rhs << top, bottom;
  const Vec sol = k.partialPivLu().solve(rhs);
  return {sol.head(n), sol.tail(m)};
}

}  // namespace

std::string ContactSet::describe(const RobotModel& model) const {
  std::string s = "contacts {";
  for (size_t i = 0; i < points.size(); ++i) {
    if (i) s += ", ";
    s += model.contacts().at(static_cast<size_t>(points[i])).name;
  }
  return s + "}";
}

ContactSet make_contact_set(const RobotModel& model, const std::vector<std::string>& names) {
  ContactSet c;
  for (const auto& n : names) c.points.push_back(model.contact_index(n));
  return c;
}

Mat contact_jacobian(const RobotModel& model, const ContactSet& contacts, const Vec& q) {
  const int r = model.point_rows();
  Mat jac(r * static_cast<int>(contacts.points.size()), model.dof());
  for (size_t i = 0; i < contacts.points.size(); ++i)
    jac.middleRows(r * static_cast<int>(i), r) =
        point_jacobian(model, q, model.contacts()[contacts.points[i]]).topRows(r);
  return jac;
}

Vec contact_jdot_v(const RobotModel& model, const ContactSet& contacts, const Vec& q, const Vec& v) {
  const int r = model.point_rows();
  Vec out(r * static_cast<int>(contacts.points.size()));
  for (size_t i = 0; i < contacts.points.size(); ++i)
    out.segment(r * static_cast<int>(i), r) = jdot_v(model, q, v, model.contacts()[contacts.points[i]]).head(r);
  return out;
}

Vec contact_positions(const RobotModel& model, const ContactSet& contacts, const Vec& q) {
  const int r = model.point_rows();
  Vec out(r * static_cast<int>(contacts.points.size()));
  for (size_t i = 0; i < contacts.points.size(); ++i)
    out.segment(r * static_cast<int>(i), r) =
        point_rows_select(model, point_position(model, q, model.contacts()[contacts.points[i]])).head(r);
  return out;
}

Mat mass_matrix(const RobotModel& model, const Vec& q) {
  // Composite-rigid-body algorithm.
  const auto& links = model.links();
  const size_t nl = links.size();
  const TreeTransforms t = tree_transforms(model, q);
  std::vector<Mat6> ic(nl);
  for (size_t i = 0; i < nl; ++i) ic[i] = spatial_inertia(links[i]);
  for (size_t k = nl; k-- > 0;)
    if (links[k].parent >= 0) ic[links[k].parent] += t.xup[k].transpose() * ic[k] * t.xup[k];

  Mat d = Mat::Zero(model.dof(), model.dof());
  for (size_t i = 0; i < nl; ++i) {
    if (links[i].q_index < 0) continue;
    Vec6 f = ic[i] * t.s[i];
    const int qi = links[i].q_index;
    d(qi, qi) = t.s[i].dot(f);
    int j = static_cast<int>(i);
    while (links[j].parent >= 0) {
      f = t.xup[j].transpose() * f;
      j = links[j].parent;
      if (links[j].q_index < 0) continue;
      const int qj = links[j].q_index;
      d(qi, qj) = t.s[j].dot(f);
      d(qj, qi) = d(qi, qj);
    }
  }
  return d;
}

Vec bias_vector(const RobotModel& model, const Vec& q, const Vec& v) {
  return rnea(model, q, v, Vec::Zero(model.dof()), true);
}

Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& v, const Vec& qdd) {
  return rnea(model, q, v, qdd, true);
}

DynamicsTerms dynamics_terms(const RobotModel& model, const Vec& q, const Vec& v) {
  return {mass_matrix(model, q), bias_vector(model, q, v), model.input_matrix()};
}

double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& v) {
  return 0.5 * v.dot(mass_matrix(model, q) * v);
}

double potential_energy(const RobotModel& model, const Vec& q) {
  const LinkFrames f = forward_kinematics(model, q);
  double pe = 0.0;
  const auto& links = model.links();
  for (size_t i = 0; i < links.size(); ++i) {
    if (links[i].mass == 0.0) continue;
    const Vec3 com = f.origin[i] + f.rotation[i] * links[i].com;
    pe -= links[i].mass * model.gravity().dot(com);
  }
  return pe;
}

namespace {

Vec stabilized_contact_rhs(const RobotModel& model, const ContactSet& c, const AgentState& x, const Mat& jc,
                           const Baumgarte& stab) {
  Vec rhs = -contact_jdot_v(model, c, x.q, x.v);
  if (!stab.enabled || c.empty()) return rhs;
  rhs -= 2.0 * stab.zeta * stab.omega * (jc * x.v);
  if (c.anchors.size() == c.points.size()) {
    const int r = model.point_rows();
    const Vec pos = contact_positions(model, c, x.q);
    for (size_t i = 0; i < c.points.size(); ++i)
      rhs.segment(r * static_cast<int>(i), r) -=
          stab.omega * stab.omega * (pos.segment(r * static_cast<int>(i), r) - c.anchors[i].head(r));
  }
  return rhs;
}

}  // namespace

ConstrainedAccel constrained_fd(const RobotModel& model, const ContactSet& contacts, const AgentState& x,
                                const Vec& u, const Baumgarte& stab) {
  const Mat d = mass_matrix(model, x.q);
  const Vec h = bias_vector(model, x.q, x.v);
  const Mat jc = contact_jacobian(model, contacts, x.q);
  const Vec top = model.input_matrix() * u - h;
  const Vec bottom = stabilized_contact_rhs(model, contacts, x, jc, stab);
  auto [qdd, lambda] = solve_kkt(d, jc, top, bottom, contacts.describe(model));
  return {qdd, lambda};
}

AffineAccel affine_decomposition(const RobotModel& model, const ContactSet& contacts, const AgentState& x,
                                 const Baumgarte& stab) {
  const Mat d = mass_matrix(model, x.q);
  const Vec h = bias_vector(model, x.q, x.v);
  const Mat jc = contact_jacobian(model, contacts, x.q);
  const Vec bottom = stabilized_contact_rhs(model, contacts, x, jc, stab);
  const int n = model.dof();
  const int m = model.num_inputs();
  const int k = static_cast<int>(jc.rows());
  // One factorization, m + 1 right-hand sides.
  const std::string what = contacts.describe(model);
  if (k > 0) {
    const double smin = min_singular_value(jc);
    if (smin < 1e-8 * std::max(1.0, jc.cwiseAbs().maxCoeff()))
      throw DynamicsError("singular KKT system: constraint Jacobian is rank deficient for " + what);
  }
  Mat kkt = Mat::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = d;
  kkt.topRightCorner(n, k) = -jc.transpose();
  kkt.bottomLeftCorner(k, n) = jc;
  Mat rhs = Mat::Zero(n + k, m + 1);
  rhs.col(0).head(n) = -h;
  rhs.col(0).tail(k) = bottom;
  rhs.bottomRightCorner(n + k, m).topRows(n) = model.input_matrix();
  const Mat sol = kkt.partialPivLu().solve(rhs);
  return {sol.col(0).head(n), sol.block(0, 1, n, m)};
}

ImpactResult impact_map(const RobotModel& model, const ContactSet& new_contacts, const AgentState& x_minus) {
  const Mat d = mass_matrix(model, x_minus.q);
  const Mat jc = contact_jacobian(model, new_contacts, x_minus.q);
  auto [v_plus, impulse] = solve_kkt(d, jc, d * x_minus.v, Vec::Zero(jc.rows()), new_contacts.describe(model));
  return {v_plus, impulse};
}

BarGeometry bar_geometry(const RobotModel& m1, const RobotModel& m2, const AugmentedState& xa) {
  BarGeometry g;
  const auto& e1 = m1.end_effector();
  const auto& e2 = m2.end_effector();
  g.j1 = point_jacobian(m1, xa.agent1.q, e1);
  g.j2 = point_jacobian(m2, xa.agent2.q, e2);
  g.delta = point_position(m1, xa.agent1.q, e1) - point_position(m2, xa.agent2.q, e2);
  g.delta_dot = g.j1 * xa.agent1.v - g.j2 * xa.agent2.v;
  g.jdv1 = jdot_v(m1, xa.agent1.q, xa.agent1.v, e1);
  g.jdv2 = jdot_v(m2, xa.agent2.q, xa.agent2.v, e2);
  return g;
}

namespace {

struct CoupledSystem {
  Mat d;     // block diagonal mass matrix
  Mat g;     // stacked constraint Jacobian
  int n1 = 0, n2 = 0, k1 = 0, k2 = 0;
  bool has_bar = false;
  BarGeometry bar;
  std::string what;
};

CoupledSystem assemble_coupled(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1,
                               const ContactSet& c2, const AugmentedState& xa,
                               const std::optional<BarConstraint>& bar) {
  CoupledSystem s;
  s.n1 = m1.dof();
  s.n2 = m2.dof();
  const Mat j1 = contact_jacobian(m1, c1, xa.agent1.q);
  const Mat j2 = contact_jacobian(m2, c2, xa.agent2.q);
  s.k1 = static_cast<int>(j1.rows());
  s.k2 = static_cast<int>(j2.rows());
  s.has_bar = bar.has_value();
  const int rows = s.k1 + s.k2 + (s.has_bar ? 1 : 0);
  s.d = Mat::Zero(s.n1 + s.n2, s.n1 + s.n2);
  s.d.topLeftCorner(s.n1, s.n1) = mass_matrix(m1, xa.agent1.q);
  s.d.bottomRightCorner(s.n2, s.n2) = mass_matrix(m2, xa.agent2.q);
  s.g = Mat::Zero(rows, s.n1 + s.n2);
  s.g.topLeftCorner(s.k1, s.n1) = j1;
  s.g.block(s.k1, s.n1, s.k2, s.n2) = j2;
  s.what = "agent 1 " + c1.describe(m1) + ", agent 2 " + c2.describe(m2);
  if (s.has_bar) {
    s.bar = bar_geometry(m1, m2, xa);
    if (s.bar.delta.norm() < 1e-9) throw DynamicsError("degenerate bar: end effectors coincide");
    s.g.block(rows - 1, 0, 1, s.n1) = s.bar.delta.transpose() * s.bar.j1;
    s.g.block(rows - 1, s.n1, 1, s.n2) = -s.bar.delta.transpose() * s.bar.j2;
    s.what += ", bar";
  }
  return s;
}

}  // namespace

CoupledAccel coupled_fd(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1, const ContactSet& c2,
                        const AugmentedState& xa, const Vec& u1, const Vec& u2,
                        const std::optional<BarConstraint>& bar, const Baumgarte& stab) {
  const CoupledSystem s = assemble_coupled(m1, m2, c1, c2, xa, bar);
  Vec top(s.n1 + s.n2);
  top.head(s.n1) = m1.input_matrix() * u1 - bias_vector(m1, xa.agent1.q, xa.agent1.v);
  top.tail(s.n2) = m2.input_matrix() * u2 - bias_vector(m2, xa.agent2.q, xa.agent2.v);
  Vec bottom(s.g.rows());
  const Mat jc1 = s.g.topLeftCorner(s.k1, s.n1);
  const Mat jc2 = s.g.block(s.k1, s.n1, s.k2, s.n2);
  bottom.head(s.k1) = stabilized_contact_rhs(m1, c1, xa.agent1, jc1, stab);
  bottom.segment(s.k1, s.k2) = stabilized_contact_rhs(m2, c2, xa.agent2, jc2, stab);
  if (s.has_bar) {
    const auto& b = s.bar;
    double rhs = -b.delta_dot.squaredNorm() - b.delta.dot(b.jdv1 - b.jdv2);
    if (stab.enabled) {
      const double phi = 0.5 * (b.delta.squaredNorm() - bar->length * bar->length);
      const double phidot = b.delta.dot(b.delta_dot);
      rhs -= 2.0 * stab.zeta * stab.omega * phidot + stab.omega * stab.omega * phi;
    }
    bottom[s.g.rows() - 1] = rhs;
  }
  auto [qdd, mult] = solve_kkt(s.d, s.g, top, bottom, s.what);
  CoupledAccel out;
  out.qdd1 = qdd.head(s.n1);
  out.qdd2 = qdd.tail(s.n2);
  out.lambda1 = mult.head(s.k1);
  out.lambda2 = mult.segment(s.k1, s.k2);
  out.lambda_e = s.has_bar ? mult[mult.size() - 1] : 0.0;
  return out;
}

CoupledAffine coupled_affine(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1, const ContactSet& c2,
                             const AugmentedState& xa, const std::optional<BarConstraint>& bar,
                             const Baumgarte& stab) {
  const int nu1 = m1.num_inputs();
  const int nu2 = m2.num_inputs();
  const Vec base = coupled_fd(m1, m2, c1, c2, xa, Vec::Zero(nu1), Vec::Zero(nu2), bar, stab).qdd1;
  // The solve is linear in the inputs; probe it with unit inputs.
  CoupledAffine out;
  out.f1 = base;
  out.g11.resize(m1.dof(), nu1);
  out.g12.resize(m1.dof(), nu2);
  const CoupledSystem s = assemble_coupled(m1, m2, c1, c2, xa, bar);
  const Eigen::Index n = s.n1 + s.n2, m = s.g.rows();
  Mat kkt = Mat::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = s.d;
  kkt.topRightCorner(n, m) = -s.g.transpose();
  kkt.bottomLeftCorner(m, n) = s.g;
  Mat rhs = Mat::Zero(n + m, nu1 + nu2);
  rhs.block(0, 0, s.n1, nu1) = m1.input_matrix();
  rhs.block(s.n1, nu1, s.n2, nu2) = m2.input_matrix();
  const Mat sol = kkt.partialPivLu().solve(rhs);
  out.g11 = sol.block(0, 0, s.n1, nu1);
  out.g12 = sol.block(0, nu1, s.n1, nu2);
  return out;
}

CoupledImpact coupled_impact(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1_hat,
                             const ContactSet& c2_hat, const AugmentedState& xa_minus,
                             const std::optional<BarConstraint>& bar) {
  const CoupledSystem s = assemble_coupled(m1, m2, c1_hat, c2_hat, xa_minus, bar);
  Vec vminus(s.n1 + s.n2);
  vminus << xa_minus.agent1.v, xa_minus.agent2.v;
  auto [vplus, mult] = solve_kkt(s.d, s.g, s.d * vminus, Vec::Zero(s.g.rows()), s.what);
  CoupledImpact out;
  out.v1_plus = vplus.head(s.n1);
  out.v2_plus = vplus.tail(s.n2);
  out.impulse1 = mult.head(s.k1);
  out.impulse2 = mult.segment(s.k1, s.k2);
  out.impulse_e = s.has_bar ? mult[mult.size() - 1] : 0.0;
  return out;
}

}  // namespace coopgait
