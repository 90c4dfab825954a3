#include "coopgait/gait.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "coopgait/kinematics.hpp"

namespace coopgait {

Vec OutputSpec::pitch_column_of(int v) const {
  const Mat& m = matrix(v);
  return pitch_column >= 0 ? Vec(m.col(pitch_column)) : Vec(Vec::Zero(m.rows()));
}

Vec OutputSpec::roll_column_of(int v) const {
  const Mat& m = matrix(v);
  return roll_column >= 0 ? Vec(m.col(roll_column)) : Vec(Vec::Zero(m.rows()));
}

std::vector<int> OutputSpec::selected_coordinates(int v) const {
  const Mat& m = matrix(v);
  std::vector<int> sel;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index col = 0;
    const double mx = m.row(r).cwiseAbs().maxCoeff(&col);
    if (mx != 1.0 || m(r, col) != 1.0 || m.row(r).cwiseAbs().sum() != 1.0)
      throw std::invalid_argument("output row " + std::to_string(r) + " of domain " + std::to_string(v) +
                                  " is not a coordinate selection");
    sel.push_back(static_cast<int>(col));
  }
  return sel;
}

double Gait::period() const {
  double t = 0.0;
  for (const auto& d : domains) t += d.duration;
  return t;
}

double Gait::entry_time(int v) const {
  double t = 0.0;
  int u = 0;
  while (u != v) {
    t += domains.at(static_cast<size_t>(u)).duration;
    u = graph.next_domain(u);
  }
  return t;
}

ContactSet Gait::contacts(const RobotModel& model, int v) const {
  return make_contact_set(model, graph.domain(v).contacts);
}

double phase(double t_entry, double t, double duration) {
  return std::clamp((t - t_entry) / duration, 0.0, 1.0);
}

AgentState translate(const RobotModel& model, const AgentState& x, const Vec2& d) {
  const auto& h = model.horizontal_coordinates();
  if (h.empty()) throw std::invalid_argument("translate: model has no floating base");
  AgentState out = x;
  out.q[h[0]] += d[0];
  if (h.size() > 1) {
    out.q[h[1]] += d[1];
  } else if (d[1] != 0.0) {
    throw std::invalid_argument("translate: planar model cannot move out of its plane");
  }
  return out;
}

AgentState complete_state(const RobotModel& model, const ContactSet& contacts,
                          const std::vector<Vec3>& footholds, const std::vector<int>& output_coords,
                          const Vec& q_out, const Vec& v_out, double speed_x, double speed, const Vec& q_guess) {
  const int n = model.dof();
  const int r = model.point_rows();
  std::vector<bool> is_out(static_cast<size_t>(n), false);
  for (int c : output_coords) is_out[static_cast<size_t>(c)] = true;
  std::vector<int> dep;
  for (int i = 0; i < n; ++i)
    if (!is_out[static_cast<size_t>(i)]) dep.push_back(i);
  const int rows = r * static_cast<int>(contacts.points.size()) + 1;
  if (rows != static_cast<int>(dep.size()))
    throw std::invalid_argument("complete_state: " + std::to_string(dep.size()) + " free coordinates but " +
                                std::to_string(rows) + " conditions");

  Vec q = q_guess;
  for (size_t k = 0; k < output_coords.size(); ++k) q[output_coords[k]] = q_out[static_cast<Eigen::Index>(k)];
  const BodyPoint& sp = model.speed_point();

  auto residual = [&](const Vec& qq) {
    Vec f(rows);
    for (size_t i = 0; i < contacts.points.size(); ++i)
      f.segment(r * static_cast<int>(i), r) =
          (point_position(model, qq, model.contacts()[contacts.points[i]]) - footholds[i]).head(r);
    f[rows - 1] = point_position(model, qq, sp).x() - speed_x;
    return f;
  };
  auto jacobian = [&](const Vec& qq) {
    Mat g(rows, n);
    g.topRows(rows - 1) = contact_jacobian(model, contacts, qq);
    g.row(rows - 1) = point_jacobian(model, qq, sp).row(0);
    return g;
  };

  Vec f = residual(q);
  for (int it = 0; it < 60 && f.cwiseAbs().maxCoeff() > 1e-15; ++it) {
    const Mat g = jacobian(q);
    Mat gd(rows, rows);
    for (int k = 0; k < rows; ++k) gd.col(k) = g.col(dep[static_cast<size_t>(k)]);
    const Vec step = gd.fullPivLu().solve(-f);
    for (int k = 0; k < rows; ++k) q[dep[static_cast<size_t>(k)]] += step[k];
    const Vec fn = residual(q);
    if (step.cwiseAbs().maxCoeff() < 1e-16) {
      f = fn;
      break;
    }
    f = fn;
  }
  if (!(f.cwiseAbs().maxCoeff() < 1e-10)) throw std::runtime_error("complete_state: configuration solve failed");

  const Mat g = jacobian(q);
  Mat gd(rows, rows), go(rows, static_cast<Eigen::Index>(output_coords.size()));
  for (int k = 0; k < rows; ++k) gd.col(k) = g.col(dep[static_cast<size_t>(k)]);
  for (size_t k = 0; k < output_coords.size(); ++k) go.col(static_cast<Eigen::Index>(k)) = g.col(output_coords[k]);
  Vec rhs = -go * v_out;
  rhs[rows - 1] += speed;
  const Vec vd = gd.fullPivLu().solve(rhs);
  Vec v = Vec::Zero(n);
  for (size_t k = 0; k < output_coords.size(); ++k) v[output_coords[k]] = v_out[static_cast<Eigen::Index>(k)];
  for (int k = 0; k < rows; ++k) v[dep[static_cast<size_t>(k)]] = vd[k];
  return {q, v};
}

OrbitSampler::OrbitSampler(const RobotModel& model, const Gait& gait) : model_(model), gait_(gait) {
  const int nd = gait_.size();
  entry_.assign(static_cast<size_t>(nd), {});
  exit_.assign(static_cast<size_t>(nd), {});
  footholds_.assign(static_cast<size_t>(nd), {});
  speed_x0_.assign(static_cast<size_t>(nd), 0.0);
  const int h = model_.horizontal_coordinates().empty() ? -1 : model_.horizontal_coordinates()[0];
  if (h < 0) throw std::invalid_argument("orbit sampler needs a floating-base model");

  std::map<std::string, Vec3> hold;
  for (const auto& c : gait_.graph.domain(0).contacts) hold[c] = point_position(model_, gait_.x0.q, c);
  entry_[0] = gait_.x0;
  AgentState last;
  int v = 0;
  for (int k = 0; k < nd; ++k) {
    auto& fh = footholds_[static_cast<size_t>(v)];
    for (const auto& c : gait_.graph.domain(v).contacts) {
      auto it = hold.find(c);
      if (it == hold.end()) throw std::invalid_argument("gait: contact '" + c + "' enters without a touchdown");
      fh.push_back(it->second);
    }
    speed_x0_[static_cast<size_t>(v)] = point_position(model_, entry_[static_cast<size_t>(v)].q, model_.speed_point()).x();
    const AgentState end = state(v, 1.0);
    const int next = gait_.graph.next_domain(v);
    AgentState after = end;
    std::map<std::string, Vec3> next_hold;
    for (const auto& c : gait_.graph.domain(next).contacts) {
      auto it = hold.find(c);
      next_hold[c] = it != hold.end() ? it->second : point_position(model_, end.q, c);
    }
    if (gait_.graph.reset(v) == ResetKind::kImpact)
      after.v = impact_map(model_, gait_.contacts(model_, next), end).v_plus;
    hold = next_hold;
    exit_[static_cast<size_t>(v)] = after;
    if (next != 0) entry_[static_cast<size_t>(next)] = after;
    if (next == 0) last = after;
    v = next;
  }
  stride_ = last.q[h] - gait_.x0.q[h];
  const AgentState back = translate(model_, last, Vec2(-stride_, 0.0));
  closure_error_ = std::max((back.q - gait_.x0.q).cwiseAbs().maxCoeff(), (back.v - gait_.x0.v).cwiseAbs().maxCoeff());
}

AgentState OrbitSampler::state(int v, double tau) const {
  const auto& dom = gait_.domains.at(static_cast<size_t>(v));
  const double T = dom.duration;
  const std::vector<int> sel = gait_.outputs.selected_coordinates(v);
  const Vec qs = dom.q_star.value(tau);
  const Vec dqs = dom.q_star.derivative(tau);
  Vec q_out(static_cast<Eigen::Index>(sel.size())), v_out(static_cast<Eigen::Index>(sel.size()));
  for (size_t k = 0; k < sel.size(); ++k) {
    q_out[static_cast<Eigen::Index>(k)] = qs[sel[k]];
    v_out[static_cast<Eigen::Index>(k)] = dqs[sel[k]] / T;
  }
  const double sx = speed_x0_[static_cast<size_t>(v)] + T * dom.s_star.integral(tau)[0];
  const double s = dom.s_star.value(tau)[0];
  return complete_state(model_, gait_.contacts(model_, v), footholds_[static_cast<size_t>(v)], sel, q_out, v_out, sx, s,
                        entry_[static_cast<size_t>(v)].q);
}

int OrbitSampler::domain_at_time(double t, double* tau) const {
  const double period = gait_.period();
  double r = t - std::floor(t / period) * period;
  int v = 0;
  for (int k = 0; k < gait_.size(); ++k) {
    const double T = gait_.domains[static_cast<size_t>(v)].duration;
    if (r < T || k + 1 == gait_.size()) {
      if (tau) *tau = std::clamp(r / T, 0.0, 1.0);
      return v;
    }
    r -= T;
    v = gait_.graph.next_domain(v);
  }
  return v;
}

AgentState OrbitSampler::state_at_time(double t) const {
  const double period = gait_.period();
  const double k = std::floor(t / period);
  double tau = 0.0;
  const int v = domain_at_time(t, &tau);
  AgentState x = state(v, tau);
  x.q[model_.horizontal_coordinates()[0]] += k * stride_;
  return x;
}

LiftedOrbit::LiftedOrbit(const RobotModel& model, const Gait& gait, const Vec2& d) : sampler_(model, gait), d_(d) {
  if (d.norm() == 0.0) throw std::invalid_argument("lift_orbit: d must be nonzero");
  translate(model, gait.x0, d);  // rejects offsets the model cannot represent
}

AugmentedState LiftedOrbit::at(double t) const {
  const AgentState a = sampler_.state_at_time(t);
  return {a, translate(sampler_.model(), a, d_)};
}

AugmentedState LiftedOrbit::at(int v, double tau) const {
  const AgentState a = sampler_.state(v, tau);
  return {a, translate(sampler_.model(), a, d_)};
}

double LiftedOrbit::bar_length() const {
  const AugmentedState xa = at(0.0);
  const auto& m = sampler_.model();
  return (point_position(m, xa.agent1.q, m.end_effector()) - point_position(m, xa.agent2.q, m.end_effector())).norm();
}

LiftedOrbit lift_orbit(const RobotModel& model, const Gait& gait, const Vec2& d) { return LiftedOrbit(model, gait, d); }

// ---------------------------------------------------------------------------
// Gait documents

namespace {

using json = nlohmann::json;

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Mat matrix_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw std::invalid_argument(what + ": expected a matrix");
  Mat m(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw std::invalid_argument(what + ": ragged matrix");
    for (size_t c = 0; c < j[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

Vec vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected a list");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

const char* guard_name(GuardKind k) {
  switch (k) {
    case GuardKind::kPhaseComplete: return "phase-complete";
    case GuardKind::kSwingPointHeight: return "swing-point-height";
    case GuardKind::kNormalForceZero: return "normal-force-zero";
  }
  return "";
}

GuardKind guard_kind(const std::string& s) {
  if (s == "phase-complete") return GuardKind::kPhaseComplete;
  if (s == "swing-point-height") return GuardKind::kSwingPointHeight;
  if (s == "normal-force-zero") return GuardKind::kNormalForceZero;
  throw std::invalid_argument("unknown guard type '" + s + "'");
}

}  // namespace

std::string save_gait(const Gait& gait, const RobotModel& model) {
  json doc;
  doc["version"] = 1;
  doc["model"] = gait.model_name;
  doc["provenance"] = gait.provenance;
  json domains = json::array();
  for (int v = 0; v < gait.size(); ++v) {
    const auto& spec = gait.graph.domain(v);
    const auto& tr = gait.domains[static_cast<size_t>(v)];
    json d;
    d["name"] = spec.name;
    d["contacts"] = spec.contacts;
    json g;
    g["type"] = guard_name(spec.guard.kind);
    if (!spec.guard.point.empty()) g["point"] = spec.guard.point;
    g["scale"] = spec.guard.scale;
    g["armed_from"] = spec.guard.armed_from;
    d["guard"] = g;
    d["next"] = gait.graph.next_domain(v);
    d["reset"] = gait.graph.reset(v) == ResetKind::kImpact ? "impact" : "identity";
    json rows = json::array();
    const Mat& c = gait.outputs.matrix(v);
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      Eigen::Index col = 0;
      const bool unit = c.row(r).cwiseAbs().sum() == 1.0 && c.row(r).maxCoeff(&col) == 1.0;
      if (unit)
        rows.push_back(model.coordinate_names()[static_cast<size_t>(col)]);
      else
        rows.push_back(vector_json(c.row(r).transpose()));
    }
    d["outputs"] = rows;
    d["duration"] = tr.duration;
    d["tau"] = vector_json(tr.q_star.knots());
    d["q_star"] = matrix_json(tr.q_star.values());
    d["q_star_slopes"] = matrix_json(tr.q_star.slopes());
    d["s_star"] = vector_json(tr.s_star.values().col(0));
    d["s_star_slopes"] = vector_json(tr.s_star.slopes().col(0));
    d["u_star"] = matrix_json(tr.u_star.values());
    d["u_star_slopes"] = matrix_json(tr.u_star.slopes());
    domains.push_back(d);
  }
  doc["domains"] = domains;
  doc["x0"] = {{"q", vector_json(gait.x0.q)}, {"v", vector_json(gait.x0.v)}};
  return doc.dump(1);
}

Gait load_gait(const std::string& text, const RobotModel& model) {
  json doc = json::parse(text);
  if (doc.contains("version") && doc.at("version") != 1) throw std::invalid_argument("gait: unsupported version");
  Gait gait;
  gait.model_name = doc.value("model", std::string());
  gait.provenance = doc.value("provenance", std::string());
  const auto& dj = doc.at("domains");
  std::vector<DomainSpec> specs;
  std::vector<int> succ;
  std::vector<ResetKind> resets;
  gait.outputs.pitch_column = model.pitch_coordinate();
  gait.outputs.roll_column = model.roll_coordinate();
  for (size_t v = 0; v < dj.size(); ++v) {
    const auto& d = dj[v];
    const std::string where = "domains[" + std::to_string(v) + "]";
    DomainSpec spec;
    spec.name = d.value("name", "D" + std::to_string(v + 1));
    spec.contacts = d.value("contacts", std::vector<std::string>{});
    if (d.contains("guard")) {
      const auto& g = d.at("guard");
      spec.guard.kind = guard_kind(g.value("type", std::string("phase-complete")));
      spec.guard.point = g.value("point", std::string());
      spec.guard.scale = g.value("scale", 1.0);
      spec.guard.armed_from = g.value("armed_from", 0.0);
    }
    specs.push_back(spec);
    succ.push_back(d.value("next", static_cast<int>((v + 1) % dj.size())));
    resets.push_back(d.value("reset", std::string("identity")) == "impact" ? ResetKind::kImpact : ResetKind::kIdentity);

    const auto& rows = d.at("outputs");
    Mat c = Mat::Zero(static_cast<Eigen::Index>(rows.size()), model.dof());
    std::vector<std::string> labels;
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].is_string()) {
        const std::string name = rows[r].get<std::string>();
        c(static_cast<Eigen::Index>(r), model.coordinate_index(name)) = 1.0;
        labels.push_back(name);
      } else {
        const Vec row = vector_from(rows[r], where + ".outputs");
        if (row.size() != model.dof()) throw std::invalid_argument(where + ".outputs: row length must equal n");
        c.row(static_cast<Eigen::Index>(r)) = row.transpose();
        labels.push_back("row" + std::to_string(r));
      }
    }
    gait.outputs.c.push_back(c);
    gait.outputs.labels.push_back(labels);

    DomainTrajectory tr;
    tr.duration = d.at("duration").get<double>();
    if (!(tr.duration > 0)) throw std::invalid_argument(where + ".duration: must be positive");
    const Mat q = matrix_from(d.at("q_star"), where + ".q_star");
    const Vec tau = d.contains("tau") ? vector_from(d.at("tau"), where + ".tau") : uniform_knots(static_cast<int>(q.rows()));
    tr.q_star = ClampedSpline(tau, q, matrix_from(d.at("q_star_slopes"), where + ".q_star_slopes"));
    Mat s(tau.size(), 1), ss(2, 1);
    s.col(0) = vector_from(d.at("s_star"), where + ".s_star");
    ss.col(0) = vector_from(d.at("s_star_slopes"), where + ".s_star_slopes");
    tr.s_star = ClampedSpline(tau, s, ss);
    const Mat u = matrix_from(d.at("u_star"), where + ".u_star");
    Mat us = d.contains("u_star_slopes") ? matrix_from(d.at("u_star_slopes"), where + ".u_star_slopes")
                                         : Mat::Zero(2, u.cols());
    tr.u_star = ClampedSpline(tau, u, us);
    gait.domains.push_back(tr);
  }
  gait.graph = GaitGraph(specs, succ, resets);
  gait.x0.q = vector_from(doc.at("x0").at("q"), "x0.q");
  gait.x0.v = vector_from(doc.at("x0").at("v"), "x0.v");
  validate_state(model, gait.x0);
  return gait;
}

Gait load_gait_file(const std::string& path, const RobotModel& model) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_gait(ss.str(), model);
}

}  // namespace coopgait
