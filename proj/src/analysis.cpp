#include "coopgait/analysis.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>
#include <tuple>
#include <sstream>

#include "coopgait/kinematics.hpp"
#include "coopgait/log.hpp"

namespace coopgait {

namespace {

std::vector<int> kept_coordinates(const RobotModel& model) {
  std::vector<int> keep;
  const auto& h = model.horizontal_coordinates();
  for (int i = 0; i < model.dof(); ++i)
    if (std::find(h.begin(), h.end(), i) == h.end()) keep.push_back(i);
  return keep;
}

Vec project_agent(const RobotModel& model, const AgentState& x) {
  const std::vector<int> keep = kept_coordinates(model);
  Vec z(static_cast<Eigen::Index>(keep.size()) + model.dof());
  for (size_t k = 0; k < keep.size(); ++k) z[static_cast<Eigen::Index>(k)] = x.q[keep[k]];
  z.tail(model.dof()) = x.v;
  return z;
}

AgentState lift_agent(const RobotModel& model, const Vec& z, const AgentState& tmpl) {
  const std::vector<int> keep = kept_coordinates(model);
  AgentState x = tmpl;
  for (size_t k = 0; k < keep.size(); ++k) x.q[keep[k]] = z[static_cast<Eigen::Index>(k)];
  x.v = z.tail(model.dof());
  return x;
}

std::vector<std::string> agent_labels(const RobotModel& model, const std::string& prefix) {
  std::vector<std::string> out;
  for (int i : kept_coordinates(model)) out.push_back(prefix + "q_" + model.coordinate_names()[static_cast<size_t>(i)]);
  for (const auto& c : model.coordinate_names()) out.push_back(prefix + "v_" + c);
  return out;
}

double period_of(const HybridSpec& spec) {
  double t = 0.0;
  for (double d : spec.durations) t += d;
  return t;
}

std::string sequence_text(const TrajectoryLog& log) {
  std::ostringstream os;
  for (size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (i) os << ' ';
    if (log.coupled)
      os << '(' << e.to.v + 1 << ',' << e.to.w + 1 << ')';
    else
      os << e.to.v + 1;
  }
  return os.str();
}

void check_cycle(const HybridSpec& spec, const TrajectoryLog& log) {
  if (!log.reached_section)
    throw PoincareError("return map: section not reached (" + log.message + "); observed " + sequence_text(log));
  int v = 0;
  for (const auto& e : log.events) {
    const int next = spec.graph.next_domain(v);
    const bool ok = log.coupled ? (e.from.v == v && e.from.w == v && e.to.v == next && e.to.w == next)
                                : (e.from.v == v && e.to.v == next);
    if (!ok) throw PoincareError("return map: domain sequence deviates from the cycle; observed " + sequence_text(log));
    v = next;
  }
  if (v != 0) throw PoincareError("return map: incomplete cycle; observed " + sequence_text(log));
}

ExecutorConfig section_config(ExecutorConfig cfg, const HybridSpec& spec, bool record) {
  cfg.section_domain = 0;
  cfg.section_hits = 1;
  cfg.t_max = 3.0 * period_of(spec);
  cfg.record = record;
  return cfg;
}

}  // namespace

SingleControllerFactory nominal_single_factory(const RobotModel& model, const Gait& gait,
                                               const ControllerParams& params) {
  auto ctx = std::make_shared<const std::tuple<RobotModel, Gait, ControllerParams>>(model, gait, params);
  return [ctx] {
    return SingleController([ctx](const Phase& ph, const AgentState& x) {
      const auto& [m, g, p] = *ctx;
      return nominal_controller(g, m, ph, x, p);
    });
  };
}

AgentControllerFactory nominal_agent_factory(const RobotModel& model, const Gait& gait, const ControllerParams& params) {
  auto ctx = std::make_shared<const std::tuple<RobotModel, Gait, ControllerParams>>(model, gait, params);
  return [ctx](int) {
    return AgentController([ctx](const Phase& ph, int, const AgentState& x, const AgentGlobals&) {
      const auto& [m, g, p] = *ctx;
      return nominal_controller(g, m, ph, x, p);
    });
  };
}

AgentControllerFactory distributed_factory(const RobotModel& model, const Gait& gait, const ControllerParams& params,
                                           const Vec2& d, const std::optional<BarConstraint>& bar) {
  auto memo = std::make_shared<OrbitMemo>();
  return [=](int agent) {
    auto c = std::make_shared<DistributedController>(model, gait, params, agent == 0 ? d : Vec2(-d), bar, memo);
    return AgentController([c](const Phase& ph, int w, const AgentState& x, const AgentGlobals& other) {
      return (*c)(ph, w, x, other);
    });
  };
}

// ---------------------------------------------------------------------------

SingleReturnMap::SingleReturnMap(const RobotModel& model, HybridSpec spec, SingleControllerFactory factory,
                                 AgentState tmpl, ExecutorConfig cfg)
    : model_(model), spec_(std::move(spec)), factory_(std::move(factory)), tmpl_(std::move(tmpl)), cfg_(cfg) {}

int SingleReturnMap::dim() const { return static_cast<int>(kept_coordinates(model_).size()) + model_.dof(); }

Vec SingleReturnMap::project(const AgentState& x) const { return project_agent(model_, x); }

AgentState SingleReturnMap::lift(const Vec& z) const { return lift_agent(model_, z, tmpl_); }

TrajectoryLog SingleReturnMap::rollout(const AgentState& x, bool record) const {
  return step_hybrid(section_config(cfg_, spec_, record), model_, spec_, factory_(), SingleStart{x, 0, 0.0, 0.0});
}

Vec SingleReturnMap::apply(const Vec& z) const {
  const TrajectoryLog log = rollout(lift(z), false);
  check_cycle(spec_, log);
  return project(log.final_state[0]);
}

std::vector<std::string> SingleReturnMap::removed() const {
  std::vector<std::string> out;
  for (int h : model_.horizontal_coordinates()) out.push_back(model_.coordinate_names()[static_cast<size_t>(h)]);
  return out;
}

std::vector<std::string> SingleReturnMap::section_labels() const { return agent_labels(model_, ""); }

CoupledReturnMap::CoupledReturnMap(const RobotModel& model, HybridSpec spec, AgentControllerFactory factory,
                                   AugmentedState tmpl, bool with_bar, ExecutorConfig cfg)
    : model_(model),
      spec_(std::move(spec)),
      factory_(std::move(factory)),
      tmpl_(std::move(tmpl)),
      with_bar_(with_bar),
      cfg_(cfg) {}

int CoupledReturnMap::dim() const { return 2 * (static_cast<int>(kept_coordinates(model_).size()) + model_.dof()); }

Vec CoupledReturnMap::project(const AugmentedState& x) const {
  const Vec a = project_agent(model_, x.agent1);
  const Vec b = project_agent(model_, x.agent2);
  Vec z(a.size() + b.size());
  z << a, b;
  return z;
}

AugmentedState CoupledReturnMap::lift(const Vec& z) const {
  const Eigen::Index half = z.size() / 2;
  return {lift_agent(model_, z.head(half), tmpl_.agent1), lift_agent(model_, z.tail(half), tmpl_.agent2)};
}

std::optional<BarConstraint> CoupledReturnMap::bar_for(const AugmentedState& x) const {
  if (!with_bar_) return std::nullopt;
  const double len = (point_position(model_, x.agent1.q, model_.end_effector()) -
                      point_position(model_, x.agent2.q, model_.end_effector()))
                         .norm();
  return BarConstraint{len};
}

TrajectoryLog CoupledReturnMap::rollout(const AugmentedState& x, bool record) const {
  CoupledStart start;
  start.x = x;
  return step_hybrid(section_config(cfg_, spec_, record), model_, model_, spec_, bar_for(x), factory_(0), factory_(1),
                     start);
}

Vec CoupledReturnMap::apply(const Vec& z) const {
  const TrajectoryLog log = rollout(lift(z), false);
  check_cycle(spec_, log);
  return project({log.final_state[0], log.final_state[1]});
}

std::vector<std::string> CoupledReturnMap::removed() const {
  std::vector<std::string> out;
  for (int a = 1; a <= 2; ++a)
    for (int h : model_.horizontal_coordinates())
      out.push_back("agent" + std::to_string(a) + "." + model_.coordinate_names()[static_cast<size_t>(h)]);
  return out;
}

std::vector<std::string> CoupledReturnMap::section_labels() const {
  auto a = agent_labels(model_, "agent1.");
  auto b = agent_labels(model_, "agent2.");
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------------------

PoincareResult stability_report(const ReturnMap& map, const Vec& z_star, double rel_step, double residual_tol,
                                const std::string& section) {
  PoincareResult r;
  r.section = section;
  r.removed = map.removed();
  r.fixed_point = z_star;
  const Vec p0 = map.apply(z_star);
  r.fixed_point_residual = (p0 - z_star).cwiseAbs().maxCoeff();
  if (r.fixed_point_residual > residual_tol) {
    std::ostringstream os;
    os << "stability_report: fixed-point residual " << r.fixed_point_residual << " exceeds " << residual_tol;
    throw PoincareError(os.str());
  }
  const int n = map.dim();
  r.jacobian.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(z_star[i]));
    r.steps.push_back(h);
    Vec zp = z_star, zm = z_star;
    zp[i] += h;
    zm[i] -= h;
    r.jacobian.col(i) = (map.apply(zp) - map.apply(zm)) / (2.0 * h);
    log_line(LogLevel::kInfo, "jacobian column " + std::to_string(i + 1) + "/" + std::to_string(n));
  }
  Eigen::EigenSolver<Mat> es(r.jacobian, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    r.eigenvalues.push_back(es.eigenvalues()[i]);
    r.moduli.push_back(std::abs(es.eigenvalues()[i]));
  }
  std::sort(r.moduli.begin(), r.moduli.end(), std::greater<>());
  r.spectral_radius = r.moduli.empty() ? 0.0 : r.moduli.front();
  return r;
}

std::string stability_json(const PoincareResult& r, const std::string& metadata_json) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["metadata"] = nlohmann::json::parse(metadata_json);
  doc["section"] = r.section;
  doc["quotient_removed"] = r.removed;
  doc["dimension"] = r.jacobian.rows();
  doc["fixed_point_residual"] = r.fixed_point_residual;
  doc["spectral_radius"] = r.spectral_radius;
  doc["eigen_moduli"] = r.moduli;
  doc["perturbation_steps"] = r.steps;
  return doc.dump(1);
}

// ---------------------------------------------------------------------------

namespace {

// State at time t from recorded rows (cubic Hermite in q, linear in v and u).
struct Sample {
  AgentState x;
  Vec u;
};

Sample interpolate(const std::vector<const LogRow*>& rows, double t) {
  size_t k = 0;
  while (k + 2 < rows.size() && rows[k + 1]->t <= t) ++k;
  const LogRow& a = *rows[k];
  const LogRow& b = *rows[std::min(k + 1, rows.size() - 1)];
  const double h = b.t - a.t;
  Sample s;
  if (h <= 0.0) {
    s.x = a.x[0];
    s.u = a.u[0];
    return s;
  }
  const double r = std::clamp((t - a.t) / h, 0.0, 1.0);
  const double h00 = 2 * r * r * r - 3 * r * r + 1, h10 = r * r * r - 2 * r * r + r;
  const double h01 = -2 * r * r * r + 3 * r * r, h11 = r * r * r - r * r;
  s.x.q = h00 * a.x[0].q + h10 * h * a.x[0].v + h01 * b.x[0].q + h11 * h * b.x[0].v;
  s.x.v = (1 - r) * a.x[0].v + r * b.x[0].v;
  s.u = (1 - r) * a.u[0] + r * b.u[0];
  return s;
}

}  // namespace

Gait resample_gait(const RobotModel& model, const Gait& seed, const TrajectoryLog& cycle) {
  Gait g = seed;
  if (cycle.events.empty()) throw std::invalid_argument("resample_gait: empty cycle");
  double t_entry = cycle.rows.front().t;
  size_t ev = 0;
  int v = 0;
  for (int k = 0; k < seed.size(); ++k, ++ev) {
    if (ev >= cycle.events.size()) throw std::invalid_argument("resample_gait: cycle is incomplete");
    const double t_exit = cycle.events[ev].t;
    std::vector<const LogRow*> rows;
    for (const auto& r : cycle.rows)
      if (r.domain[0] == v && r.t >= t_entry && r.t <= t_exit) rows.push_back(&r);
    auto& dom = g.domains[static_cast<size_t>(v)];
    const Vec tau = dom.q_star.knots();
    const double T = t_exit - t_entry;
    Mat q(tau.size(), model.dof()), u(tau.size(), model.num_inputs()), s(tau.size(), 1);
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
      const Sample smp = interpolate(rows, t_entry + tau[i] * T);
      q.row(i) = smp.x.q.transpose();
      u.row(i) = smp.u.transpose();
      s(i, 0) = forward_speed(model, smp.x);
    }
    const double eps = std::min(1e-3, 0.01 * T);
    auto speed_at = [&](double t) { return forward_speed(model, interpolate(rows, t).x); };
    Mat qs(2, model.dof()), ss(2, 1), us(2, model.num_inputs());
    qs.row(0) = rows.front()->x[0].v.transpose() * T;
    qs.row(1) = rows.back()->x[0].v.transpose() * T;
    ss(0, 0) = (speed_at(t_entry + eps) - s(0, 0)) / eps * T;
    ss(1, 0) = (s(tau.size() - 1, 0) - speed_at(t_exit - eps)) / eps * T;
    us.row(0) = (u.row(1) - u.row(0)) / (tau[1] - tau[0]);
    us.row(1) = (u.row(tau.size() - 1) - u.row(tau.size() - 2)) / (tau[tau.size() - 1] - tau[tau.size() - 2]);
    dom.q_star = ClampedSpline(tau, q, qs);
    dom.s_star = ClampedSpline(tau, s, ss);
    dom.u_star = ClampedSpline(tau, u, us);
    t_entry = t_exit;
    v = seed.graph.next_domain(v);
  }
  g.x0 = cycle.rows.front().x[0];
  return g;
}

RefineResult refine_periodic(const RobotModel& model, const Gait& seed, const SingleControllerFactory& factory,
                             const AgentState& x_guess, double tol, int max_iter, const ExecutorConfig& cfg) {
  const SingleReturnMap map(model, hybrid_spec(seed), factory, x_guess, cfg);
  Vec z = map.project(x_guess);
  RefineResult out;
  Vec f = map.apply(z) - z;
  const int n = map.dim();
  while (f.cwiseAbs().maxCoeff() >= tol) {
    if (out.iterations >= max_iter) throw PoincareError("refine_periodic: shooting diverged after " +
                                                        std::to_string(max_iter) + " iterations");
    Mat jac(n, n);
    for (int i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[i]));
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      jac.col(i) = (map.apply(zp) - zp - map.apply(zm) + zm) / (2.0 * h);
    }
    Eigen::FullPivLU<Mat> lu(jac);
    if (!lu.isInvertible()) throw PoincareError("refine_periodic: shooting Jacobian is singular");
    z -= lu.solve(f);
    f = map.apply(z) - z;
    ++out.iterations;
    log_line(LogLevel::kInfo, "refine iteration " + std::to_string(out.iterations) + " residual " +
                                  std::to_string(f.cwiseAbs().maxCoeff()));
  }
  out.residual = f.cwiseAbs().maxCoeff();
  out.x_star = map.lift(z);
  const TrajectoryLog cycle = map.rollout(out.x_star, true);
  out.gait = resample_gait(model, seed, cycle);
  out.gait.x0 = out.x_star;
  out.gait.provenance = seed.provenance + "; refined by single shooting";
  return out;
}

// ---------------------------------------------------------------------------

AuditReport audits(const TrajectoryLog& log, const RobotModel& model, const std::optional<double>& bar_length,
                   const Gait* gait) {
  AuditReport r;
  r.contact_force_flags = log.contact_force_flags;
  if (log.rows.empty()) return r;
  const int agents = log.coupled ? 2 : 1;
  const double weight = model.total_mass() * model.gravity().norm();
  std::map<std::pair<int, int>, Vec3> anchor;  // (agent, contact) -> position at touchdown
  int dom[2] = {-1, -1};
  double entry[2] = {0.0, 0.0};
  bool impacts = false;
  double work = 0.0;
  double energy0 = 0.0;
  int stride = 0;
  double stride_norm = 0.0;
  for (size_t k = 0; k < log.rows.size(); ++k) {
    const LogRow& row = log.rows[k];
    for (int i = 0; i < agents; ++i) {
      if (row.domain[i] != dom[i]) {
        if (gait && row.domain[i] == 0 && dom[i] >= 0 && i == 0) {
          r.output_norm_per_stride.push_back(stride_norm);
          stride_norm = 0.0;
          ++stride;
        }
        dom[i] = row.domain[i];
        entry[i] = row.t;
        for (auto it = anchor.begin(); it != anchor.end();)
          it = it->first.first == i ? anchor.erase(it) : std::next(it);
      }
      if (gait) {
        const auto& names = gait->graph.domain(dom[i]).contacts;
        for (const auto& c : names) {
          const int ci = model.contact_index(c);
          const Vec3 p = point_position(model, row.x[i].q, c);
          auto [it, inserted] = anchor.try_emplace({i, ci}, p);
          if (!inserted) r.max_contact_drift = std::max(r.max_contact_drift, (p - it->second).norm());
        }
        const Phase ph = make_phase(dom[i], entry[i], row.t, gait->domains[static_cast<size_t>(dom[i])].duration);
        const OutputValues y = virtual_constraints(*gait, model, ph, row.x[i]);
        const double norm = std::max({std::abs(y.y_nh), y.y_h.cwiseAbs().maxCoeff(), y.dy_h.cwiseAbs().maxCoeff()});
        stride_norm = std::max(stride_norm, norm);
      }
    }
    if (log.coupled) {
      const Vec3 dp = point_position(model, row.x[0].q, model.end_effector()) -
                      point_position(model, row.x[1].q, model.end_effector());
      if (bar_length) r.max_bar_drift = std::max(r.max_bar_drift, std::abs(dp.norm() - *bar_length));
      r.max_lambda_e_ratio = std::max(r.max_lambda_e_ratio, std::abs(row.lambda_e) * dp.norm() / weight);
    }
    if (row.event) impacts = true;
    double energy = 0.0, power = 0.0;
    for (int i = 0; i < agents; ++i) {
      energy += kinetic_energy(model, row.x[i].q, row.x[i].v) + potential_energy(model, row.x[i].q);
      power += row.x[i].v.dot(model.input_matrix() * row.u[i]);
    }
    if (k == 0) {
      energy0 = energy;
    } else {
      const LogRow& prev = log.rows[k - 1];
      double prev_power = 0.0;
      for (int i = 0; i < agents; ++i) prev_power += prev.x[i].v.dot(model.input_matrix() * prev.u[i]);
      work += 0.5 * (power + prev_power) * (row.t - prev.t);
    }
    if (!impacts) r.energy_residual = std::abs(energy - energy0 - work);
  }
  if (gait) r.output_norm_per_stride.push_back(stride_norm);
  return r;
}

std::string audit_json(const AuditReport& r) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["max_contact_drift"] = r.max_contact_drift;
  doc["max_bar_drift"] = r.max_bar_drift;
  doc["energy_residual"] = r.energy_residual;
  doc["max_lambda_e_ratio"] = r.max_lambda_e_ratio;
  doc["contact_force_flags"] = r.contact_force_flags;
  doc["output_norm_per_stride"] = r.output_norm_per_stride;
  return doc.dump(1);
}

}  // namespace coopgait
