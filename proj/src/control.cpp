#include "coopgait/control.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "coopgait/kinematics.hpp"

namespace coopgait {

Phase make_phase(int domain, double t_entry, double t, double duration) {
  Phase p;
  p.domain = domain;
  const double raw = (t - t_entry) / duration;
  p.tau = std::clamp(raw, 0.0, 1.0);
  // Slack for event localization, which may overshoot the guard slightly.
  p.held = raw > 1.0 + 1e-8;
  return p;
}

double forward_speed(const RobotModel& model, const AgentState& x) {
  return point_jacobian(model, x.q, model.speed_point()).row(0).dot(x.v);
}

OutputValues virtual_constraints(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x) {
  const auto& dom = gait.domains.at(static_cast<size_t>(ph.domain));
  const Mat& c = gait.outputs.matrix(ph.domain);
  OutputValues y;
  const Vec dq = ph.held ? Vec(Vec::Zero(model.dof())) : Vec(dom.q_star.derivative(ph.tau) / dom.duration);
  y.y_h = c * (x.q - dom.q_star.value(ph.tau));
  y.dy_h = c * (x.v - dq);
  y.y_nh = forward_speed(model, x) - dom.s_star.value(ph.tau)[0];
  return y;
}

std::array<double, 3> ControllerParams::xi_at(int v, int w) const {
  auto it = xi_table.find({v, w});
  return it == xi_table.end() ? xi : it->second;
}

namespace {

Vec pd_term(const OutputValues& y, const ControllerParams& params) {
  Vec e(1 + y.y_h.size());
  e[0] = params.kp * y.y_nh;
  e.tail(y.y_h.size()) = params.kp * y.y_h + params.kd * y.dy_h;
  return e;
}

}  // namespace

IoTerms io_terms(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                 const AffineAccel& acc, const ControllerParams& params) {
  const auto& dom = gait.domains.at(static_cast<size_t>(ph.domain));
  const Mat& c = gait.outputs.matrix(ph.domain);
  const double T = dom.duration;
  const Eigen::RowVectorXd jsp = point_jacobian(model, x.q, model.speed_point()).row(0);
  const double jdv = jdot_v(model, x.q, x.v, model.speed_point()).x();
  const double ds = ph.held ? 0.0 : dom.s_star.derivative(ph.tau)[0] / T;
  const Vec ddq = ph.held ? Vec(Vec::Zero(model.dof())) : Vec(dom.q_star.second_derivative(ph.tau) / (T * T));
  const Eigen::Index r = c.rows();
  IoTerms io;
  io.a.resize(1 + r, acc.g_acc.cols());
  io.a.row(0) = jsp * acc.g_acc;
  io.a.bottomRows(r) = c * acc.g_acc;
  io.b.resize(1 + r);
  io.b[0] = jsp.dot(acc.f_acc) + jdv - ds;
  io.b.tail(r) = c * (acc.f_acc - ddq);
  io.y = virtual_constraints(gait, model, ph, x);
  io.e = pd_term(io.y, params);
  return io;
}

IoTerms io_terms(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                 const ControllerParams& params) {
  return io_terms(gait, model, ph, x, affine_decomposition(model, gait.contacts(model, ph.domain), x), params);
}

Vec solve_min_norm(const Mat& a, const Vec& rhs) {
  double smin = 0.0;
  if (a.rows() <= a.cols()) {
    const Eigen::ColPivHouseholderQR<Mat> qr(a.transpose());
    smin = qr.matrixR().diagonal().head(a.rows()).cwiseAbs().minCoeff();
  }
  if (a.rows() > a.cols() || smin < 1e-8) {
    std::ostringstream os;
    os << "decoupling matrix is rank deficient (rank estimate " << smin << ")";
    throw std::runtime_error(os.str());
  }
  const Mat aat = a * a.transpose();
  return -a.transpose() * aat.ldlt().solve(rhs);
}

Vec nominal_controller(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                       const ControllerParams& params) {
  const IoTerms io = io_terms(gait, model, ph, x, params);
  return solve_min_norm(io.a, io.b + io.e);
}

AgentGlobals measure_agent(const RobotModel& model, const AgentState& x) {
  AgentGlobals g;
  g.speed = forward_speed(model, x);
  if (model.pitch_coordinate() >= 0) {
    g.pitch = x.q[model.pitch_coordinate()];
    g.pitch_rate = x.v[model.pitch_coordinate()];
  }
  if (model.roll_coordinate() >= 0) {
    g.roll = x.q[model.roll_coordinate()];
    g.roll_rate = x.v[model.roll_coordinate()];
  }
  return g;
}

MeasurableGlobals measure_globals(const RobotModel& m1, const RobotModel& m2, const AugmentedState& xa, int v, int w) {
  MeasurableGlobals g;
  g.agent[0] = measure_agent(m1, xa.agent1);
  g.agent[1] = measure_agent(m2, xa.agent2);
  g.domain[0] = v;
  g.domain[1] = w;
  return g;
}

Phase other_agent_phase(const GaitGraph& g, const Phase& own, int w) {
  if (w == own.domain) return own;
  const int n = g.size();
  const int ahead = ((g.cycle_position(w) - g.cycle_position(own.domain)) % n + n) % n;
  Phase p;
  p.domain = w;
  if (2 * ahead <= n) {
    p.tau = 0.0;
  } else {
    p.tau = 1.0;
    p.held = true;
  }
  return p;
}

OutputValues modified_outputs(const Gait& gait, const RobotModel& model, const ControllerParams& params,
                              const Phase& own, const Phase& other, const AgentState& x, const AgentGlobals& theta_j) {
  OutputValues y = virtual_constraints(gait, model, own, x);
  const auto [alpha, beta, gamma] = params.xi_at(own.domain, other.domain);
  const auto& dw = gait.domains.at(static_cast<size_t>(other.domain));
  const Vec qw = dw.q_star.value(other.tau);
  const Vec dqw = other.held ? Vec(Vec::Zero(model.dof())) : Vec(dw.q_star.derivative(other.tau) / dw.duration);
  y.y_nh -= alpha * (theta_j.speed - dw.s_star.value(other.tau)[0]);
  const int pc = model.pitch_coordinate();
  const int rc = model.roll_coordinate();
  if (pc >= 0) {
    const Vec cp = gait.outputs.pitch_column_of(own.domain);
    y.y_h -= gamma * cp * (theta_j.pitch - qw[pc]);
    y.dy_h -= gamma * cp * (theta_j.pitch_rate - dqw[pc]);
  }
  if (rc >= 0) {
    const Vec cr = gait.outputs.roll_column_of(own.domain);
    y.y_h -= beta * cr * (theta_j.roll - qw[rc]);
    y.dy_h -= beta * cr * (theta_j.roll_rate - dqw[rc]);
  }
  return y;
}

AgentState recenter(const RobotModel& model, const AgentState& x) {
  AgentState out = x;
  for (int h : model.horizontal_coordinates()) out.q[h] = 0.0;
  return out;
}

ApproxCoupled approx_coupled_dynamics(const RobotModel& model, const OrbitSampler& orbit, const Phase& own,
                                      const Phase& other, const AgentState& x_i, const Vec2& d_ij,
                                      const std::optional<BarConstraint>& bar, const ControllerParams& params,
                                      OrbitMemo* memo) {
  const Gait& gait = orbit.gait();
  const auto& h = model.horizontal_coordinates();
  ApproxCoupled out;
  const OrbitMemo::Key key{own.domain, own.tau, other.domain, other.tau, other.held};
  AgentState xj;
  const auto found = memo ? memo->entries.find(key) : decltype(memo->entries)::iterator{};
  if (memo && found != memo->entries.end()) {
    xj = found->second.first;
    out.u_j_star = found->second.second;
  } else {
    xj = orbit.state(other.domain, other.tau);
    if (other.domain == own.domain && other.tau == own.tau) {
      xj = translate(model, xj, Vec2(-xj.q[h[0]], h.size() > 1 ? -xj.q[h[1]] : 0.0));
    } else {
      // Keep the orbit's own spacing between the two phases.
      const AgentState ref = orbit.state(own.domain, own.tau);
      const int pv = gait.graph.cycle_position(own.domain);
      const int pw = gait.graph.cycle_position(other.domain);
      const bool ahead = other.tau == 0.0 && !other.held;
      double wrap = 0.0;
      if (ahead && pw < pv) wrap = orbit.stride();
      if (!ahead && pw > pv) wrap = -orbit.stride();
      Vec2 shift(wrap - ref.q[h[0]], 0.0);
      if (h.size() > 1) shift[1] = -ref.q[h[1]];
      xj = translate(model, xj, shift);
    }
    out.u_j_star = nominal_controller(gait, model, other, xj, params);
    if (memo) memo->entries.emplace(key, std::make_pair(xj, out.u_j_star));
  }
  Vec2 base(x_i.q[h[0]], h.size() > 1 ? x_i.q[h[1]] : 0.0);
  xj = translate(model, xj, base + d_ij);
  out.x_j_star = xj;
  out.d = mass_matrix(model, x_i.q);
  const ContactSet ci = gait.contacts(model, own.domain);
  if (!bar) {
    out.acc = affine_decomposition(model, ci, x_i);
    out.b_ii = out.d * out.acc.g_acc;
    out.b_ij = Mat::Zero(model.dof(), model.num_inputs());
    out.h_hat = -out.d * out.acc.f_acc;
    return out;
  }
  const CoupledAffine ca = coupled_affine(model, model, ci, gait.contacts(model, other.domain), {x_i, xj}, bar);
  out.acc.f_acc = ca.f1 + ca.g12 * out.u_j_star;
  out.acc.g_acc = ca.g11;
  out.b_ii = out.d * ca.g11;
  out.b_ij = out.d * ca.g12;
  out.h_hat = -out.d * ca.f1;
  return out;
}

DistributedController::DistributedController(const RobotModel& model, const Gait& gait, ControllerParams params,
                                             Vec2 d_ij, std::optional<BarConstraint> bar,
                                             std::shared_ptr<OrbitMemo> memo)
    : model_(model),
      gait_(gait),
      orbit_(model, gait),
      params_(std::move(params)),
      d_ij_(d_ij),
      bar_(bar),
      memo_(memo ? std::move(memo) : std::make_shared<OrbitMemo>()) {}

DistributedController::Result DistributedController::evaluate(const Phase& own, int w, const AgentState& x_i,
                                                              const AgentGlobals& theta_j) {
  const AgentState x = recenter(model_, x_i);
  Result r;
  r.u_nom = nominal_controller(gait_, model_, own, x, params_);
  const Phase other = other_agent_phase(gait_.graph, own, w);
  const ApproxCoupled approx = approx_coupled_dynamics(model_, orbit_, own, other, x, d_ij_, bar_, params_, memo_.get());
  IoTerms io = io_terms(gait_, model_, own, x, approx.acc, params_);
  io.y = modified_outputs(gait_, model_, params_, own, other, x, theta_j);
  io.e = pd_term(io.y, params_);
  const QpProblem qp = build_controller_qp(r.u_nom, io.a, io.b, io.e, params_.qp_weight, params_.bounds);
  r.qp = solve_qp(qp, warm_);
  warm_ = r.qp.active;
  const int m = model_.num_inputs();
  r.u = r.qp.x.head(m);
  r.delta = r.qp.x.tail(qp.size() - m);
  return r;
}

// ---------------------------------------------------------------------------

ControllerParams load_params(const std::string& text) {
  using json = nlohmann::json;
  const json doc = json::parse(text);
  if (doc.contains("version") && doc.at("version") != 1) throw std::invalid_argument("params: unsupported version");
  ControllerParams p;
  p.xi = {doc.value("alpha", 0.0), doc.value("beta", 0.0), doc.value("gamma", 0.0)};
  if (doc.contains("xi_table")) {
    for (const auto& row : doc.at("xi_table"))
      p.xi_table[{row.at("v").get<int>(), row.at("w").get<int>()}] = {row.value("alpha", p.xi[0]),
                                                                      row.value("beta", p.xi[1]),
                                                                      row.value("gamma", p.xi[2])};
  }
  p.kp = doc.value("kp", p.kp);
  p.kd = doc.value("kd", p.kd);
  p.qp_weight = doc.value("qp_weight", p.qp_weight);
  p.bounds.u_min = doc.value("u_min", p.bounds.u_min);
  p.bounds.u_max = doc.value("u_max", p.bounds.u_max);
  p.bounds.delta_min = doc.value("delta_min", p.bounds.delta_min);
  p.bounds.delta_max = doc.value("delta_max", p.bounds.delta_max);
  if (!(p.kp > 0) || !(p.kd > 0)) throw std::invalid_argument("params: gains must be positive");
  if (!(p.qp_weight > 0)) throw std::invalid_argument("params: qp_weight must be positive");
  if (!(p.bounds.u_min < p.bounds.u_max) || !(p.bounds.delta_min < p.bounds.delta_max))
    throw std::invalid_argument("params: empty bounds");
  return p;
}

ControllerParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_params(ss.str());
}

std::string save_params(const ControllerParams& p) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["alpha"] = p.xi[0];
  doc["beta"] = p.xi[1];
  doc["gamma"] = p.xi[2];
  if (!p.xi_table.empty()) {
    auto rows = nlohmann::json::array();
    for (const auto& [k, xi] : p.xi_table)
      rows.push_back({{"v", k.first}, {"w", k.second}, {"alpha", xi[0]}, {"beta", xi[1]}, {"gamma", xi[2]}});
    doc["xi_table"] = rows;
  }
  doc["kp"] = p.kp;
  doc["kd"] = p.kd;
  doc["qp_weight"] = p.qp_weight;
  doc["u_min"] = p.bounds.u_min;
  doc["u_max"] = p.bounds.u_max;
  doc["delta_min"] = p.bounds.delta_min;
  doc["delta_max"] = p.bounds.delta_max;
  return doc.dump(1);
}

}  // namespace coopgait
