#include "coopgait/executor.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "coopgait/kinematics.hpp"
#include "coopgait/log.hpp"

namespace coopgait {

HybridSpec hybrid_spec(const Gait& gait) {
  HybridSpec s;
  s.graph = gait.graph;
  for (const auto& d : gait.domains) {
    s.durations.push_back(d.duration);
    std::vector<double> b;
    const Vec& k = d.q_star.knots();
    for (Eigen::Index i = 1; i < k.size(); ++i) b.push_back(k[i]);
    s.breaks.push_back(b);
  }
  return s;
}

namespace {

// Per-agent bookkeeping shared by the single and coupled loops.
struct AgentTrack {
  const RobotModel* model = nullptr;
  int domain = 0;
  double t_entry = 0.0;
  ContactSet contacts;
};

ContactSet domain_contacts(const RobotModel& model, const HybridSpec& spec, int v, const AgentState& x,
                           const Baumgarte& stab) {
  ContactSet c = make_contact_set(model, spec.graph.domain(v).contacts);
  if (stab.enabled)
    for (int p : c.points) c.anchors.push_back(point_position(model, x.q, model.contacts()[p]));
  return c;
}

Vec full_lambda(const RobotModel& model, const ContactSet& c, const Vec& lambda) {
  const int r = model.point_rows();
  Vec out = Vec::Zero(r * static_cast<int>(model.contacts().size()));
  for (size_t i = 0; i < c.points.size(); ++i)
    out.segment(r * c.points[i], r) = lambda.segment(r * static_cast<int>(i), r);
  return out;
}

int contact_flags(const RobotModel& model, const ContactSet& c, const Vec& lambda, double mu) {
  const int r = model.point_rows();
  const int up = model.planar() ? 1 : 2;
  int flags = 0;
  for (size_t i = 0; i < c.points.size(); ++i) {
    const Vec f = lambda.segment(r * static_cast<int>(i), r);
    const double normal = f[up];
    double tangential = 0.0;
    for (int k = 0; k < r; ++k)
      if (k != up) tangential += f[k] * f[k];
    if (normal < 0.0 || std::sqrt(tangential) > mu * normal) ++flags;
  }
  return flags;
}

// Earliest knot time of the agent's domain strictly after t.
double next_break(const HybridSpec& spec, const AgentTrack& a, double t) {
  if (spec.breaks.empty()) return std::numeric_limits<double>::infinity();
  const double T = spec.durations.at(static_cast<size_t>(a.domain));
  for (double tau : spec.breaks.at(static_cast<size_t>(a.domain))) {
    const double tb = a.t_entry + tau * T;
    if (tb > t + 1e-12) return tb;
  }
  return std::numeric_limits<double>::infinity();
}

bool guard_needs_state(const HybridSpec& spec, int v) {
  return spec.graph.domain(v).guard.kind != GuardKind::kPhaseComplete;
}

bool guard_needs_forces(const HybridSpec& spec, int v) {
  return spec.graph.domain(v).guard.kind == GuardKind::kNormalForceZero;
}

double guard_value(const RobotModel& model, const HybridSpec& spec, const AgentTrack& a, double t,
                   const AgentState& x, const Vec& lambda) {
  const Guard& g = spec.graph.domain(a.domain).guard;
  const double T = spec.durations.at(static_cast<size_t>(a.domain));
  const double tau = (t - a.t_entry) / T;
  switch (g.kind) {
    case GuardKind::kPhaseComplete:
      return 1.0 - tau;
    case GuardKind::kSwingPointHeight: {
      if (tau < g.armed_from) return 1.0;
      const Vec3 p = point_position(model, x.q, g.point);
      return (model.planar() ? p.y() : p.z()) / g.scale;
    }
    case GuardKind::kNormalForceZero: {
      if (tau < g.armed_from) return 1.0;
      const ContactSet c = make_contact_set(model, spec.graph.domain(a.domain).contacts);
      const int r = model.point_rows();
      for (size_t i = 0; i < c.points.size(); ++i)
        if (model.contacts()[c.points[i]].name == g.point)
          return lambda[r * static_cast<int>(i) + (model.planar() ? 1 : 2)] / g.scale;
      return 1.0;
    }
  }
  return 1.0;
}

Vec pack(const AgentState& x) {
  Vec y(x.q.size() + x.v.size());
  y << x.q, x.v;
  return y;
}

AgentState unpack(const Vec& y, int offset, int n) { return {y.segment(offset, n), y.segment(offset + n, n)}; }

template <typename Deriv>
Vec rk4(const Deriv& f, double t, const Vec& y, double h, const Vec& k1) {
  const Vec k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  const Vec k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  const Vec k4 = f(t + h, y + h * k3);
  return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Finds the smallest step s in (0, h] (to tolerance) with guard(s) <= 0,
// given guard(h) <= 0 < guard(0).
template <typename GuardAt>
double localize(const GuardAt& guard_at, double h, double tol) {
  double lo = 0.0, hi = h;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (guard_at(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

class ZenoWatch {
 public:
  bool event(double t) {
    if (last_ >= 0.0 && t - last_ < 1e-8)
      ++close_;
    else
      close_ = 0;
    last_ = t;
    return close_ >= 2;
  }

 private:
  double last_ = -1.0;
  int close_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Single agent

TrajectoryLog step_hybrid(const ExecutorConfig& cfg, const RobotModel& model, const HybridSpec& spec,
                          const SingleController& controller, const SingleStart& start) {
  TrajectoryLog log;
  const int n = model.dof();
  validate_state(model, start.x);
  AgentTrack a{&model, start.domain, start.t_entry, domain_contacts(model, spec, start.domain, start.x, cfg.stab)};
  double t = start.t0;
  Vec y = pack(start.x);
  ZenoWatch zeno;
  int hits = 0;

  struct Eval {
    Vec ydot, u, lambda;
  };
  auto evaluate = [&](double tt, const Vec& yy) {
    const AgentState x = unpack(yy, 0, n);
    const Phase ph = make_phase(a.domain, a.t_entry, tt, spec.durations[static_cast<size_t>(a.domain)]);
    Eval e;
    e.u = controller(ph, x);
    const ConstrainedAccel acc = constrained_fd(model, a.contacts, x, e.u, cfg.stab);
    e.ydot.resize(2 * n);
    e.ydot << x.v, acc.qdd;
    e.lambda = acc.lambda;
    return e;
  };
  auto deriv = [&](double tt, const Vec& yy) { return evaluate(tt, yy).ydot; };
  auto record = [&](double tt, const Vec& yy, const Eval& e, bool event) {
    log.contact_force_flags += contact_flags(model, a.contacts, e.lambda, cfg.friction_mu);
    if (!cfg.record) return;
    LogRow row;
    row.t = tt;
    row.domain[0] = a.domain;
    row.x[0] = unpack(yy, 0, n);
    row.u[0] = e.u;
    row.lambda[0] = full_lambda(model, a.contacts, e.lambda);
    row.event = event;
    log.rows.push_back(std::move(row));
  };

  try {
    while (true) {
      const Eval e0 = evaluate(t, y);
      record(t, y, e0, false);
      if (t >= cfg.t_max - 1e-12) {
        log.timeout = cfg.section_domain >= 0;
        break;
      }
      const double h = std::min({cfg.dt, cfg.t_max - t, next_break(spec, a, t) - t});
      const double g0 = guard_value(model, spec, a, t, unpack(y, 0, n), e0.lambda);
      const Vec y1 = rk4(deriv, t, y, h, e0.ydot);
      if (!y1.allFinite()) {
        log.inadmissible = true;
        log.message = "state became non-finite at t=" + std::to_string(t + h);
        break;
      }
      auto guard_after = [&](double s, Vec* out) {
        if (!out && !guard_needs_state(spec, a.domain)) return guard_value(model, spec, a, t + s, AgentState{}, Vec());
        const Vec ys = s == h ? y1 : rk4(deriv, t, y, s, e0.ydot);
        if (out) *out = ys;
        const Vec lam = guard_needs_forces(spec, a.domain) ? evaluate(t + s, ys).lambda : Vec();
        return guard_value(model, spec, a, t + s, unpack(ys, 0, n), lam);
      };
      const double g1 = guard_after(h, nullptr);
      if (!(g0 > 0.0 && g1 <= 0.0)) {
        t += h;
        y = y1;
        continue;
      }
      const double s = localize([&](double ss) { return guard_after(ss, nullptr); }, h, cfg.event_tol);
      Vec ys;
      guard_after(s, &ys);
      const double te = t + s;
      record(te, ys, evaluate(te, ys), true);
      const int from = a.domain;
      const int to = spec.graph.next_domain(from);
      AgentState x = unpack(ys, 0, n);
      const bool impact = spec.graph.reset(from) == ResetKind::kImpact;
      if (impact) x.v = impact_map(model, make_contact_set(model, spec.graph.domain(to).contacts), x).v_plus;
      a.domain = to;
      a.t_entry = te;
      a.contacts = domain_contacts(model, spec, to, x, cfg.stab);
      log.events.push_back({te, 1, {from, 0}, {to, 0}, 0, impact});
      log_line(LogLevel::kDebug, "event t=" + std::to_string(te) + " " + std::to_string(from + 1) + "->" +
                                     std::to_string(to + 1));
      t = te;
      y = pack(x);
      if (zeno.event(te)) {
        log.zeno = true;
        log.message = "Zeno behaviour: repeated events within 1e-8 s";
        break;
      }
      if (to == cfg.section_domain && ++hits >= cfg.section_hits) {
        log.reached_section = true;
        if (cfg.record) {
          const Eval ep = evaluate(t, y);
          record(t, y, ep, true);
        }
        break;
      }
    }
  } catch (const std::exception& ex) {
    log.inadmissible = true;
    log.message = ex.what();
  }
  log.t_final = t;
  log.final_state[0] = unpack(y, 0, n);
  log.final_domain[0] = a.domain;
  log.final_entry[0] = a.t_entry;
  if (log.timeout && log.message.empty()) log.message = "section not reached before t_max";
  return log;
}

// ---------------------------------------------------------------------------
// Two agents

TrajectoryLog step_hybrid(const ExecutorConfig& cfg, const RobotModel& m1, const RobotModel& m2,
                          const HybridSpec& spec, const std::optional<BarConstraint>& bar,
                          const AgentController& c1, const AgentController& c2, const CoupledStart& start) {
  TrajectoryLog log;
  log.coupled = true;
  const int n1 = m1.dof(), n2 = m2.dof();
  validate_state(m1, start.x.agent1);
  validate_state(m2, start.x.agent2);
  const RobotModel* models[2] = {&m1, &m2};
  const AgentController* ctrl[2] = {&c1, &c2};
  AgentTrack a[2];
  a[0] = {&m1, start.domain[0], start.t_entry[0], domain_contacts(m1, spec, start.domain[0], start.x.agent1, cfg.stab)};
  a[1] = {&m2, start.domain[1], start.t_entry[1], domain_contacts(m2, spec, start.domain[1], start.x.agent2, cfg.stab)};
  double t = start.t0;
  Vec y(2 * n1 + 2 * n2);
  y << pack(start.x.agent1), pack(start.x.agent2);
  ZenoWatch zeno;
  int hits = 0;

  auto split = [&](const Vec& yy) { return AugmentedState{unpack(yy, 0, n1), unpack(yy, 2 * n1, n2)}; };
  struct Eval {
    Vec ydot, u[2], lambda[2];
    double lambda_e = 0.0;
  };
  auto evaluate = [&](double tt, const Vec& yy) {
    const AugmentedState xa = split(yy);
    const MeasurableGlobals theta = measure_globals(m1, m2, xa, a[0].domain, a[1].domain);
    const AgentState* xs[2] = {&xa.agent1, &xa.agent2};
    Eval e;
    for (int i = 0; i < 2; ++i) {
      const Phase ph = make_phase(a[i].domain, a[i].t_entry, tt, spec.durations[static_cast<size_t>(a[i].domain)]);
      e.u[i] = (*ctrl[i])(ph, a[1 - i].domain, *xs[i], theta.agent[1 - i]);
    }
    const CoupledAccel acc = coupled_fd(m1, m2, a[0].contacts, a[1].contacts, xa, e.u[0], e.u[1], bar, cfg.stab);
    e.ydot.resize(y.size());
    e.ydot << xa.agent1.v, acc.qdd1, xa.agent2.v, acc.qdd2;
    e.lambda[0] = acc.lambda1;
    e.lambda[1] = acc.lambda2;
    e.lambda_e = acc.lambda_e;
    return e;
  };
  auto deriv = [&](double tt, const Vec& yy) { return evaluate(tt, yy).ydot; };
  auto record = [&](double tt, const Vec& yy, const Eval& e, bool event) {
    for (int i = 0; i < 2; ++i)
      log.contact_force_flags += contact_flags(*models[i], a[i].contacts, e.lambda[i], cfg.friction_mu);
    if (!cfg.record) return;
    const AugmentedState xa = split(yy);
    LogRow row;
    row.t = tt;
    row.x[0] = xa.agent1;
    row.x[1] = xa.agent2;
    for (int i = 0; i < 2; ++i) {
      row.domain[i] = a[i].domain;
      row.u[i] = e.u[i];
      row.lambda[i] = full_lambda(*models[i], a[i].contacts, e.lambda[i]);
    }
    row.lambda_e = e.lambda_e;
    row.event = event;
    log.rows.push_back(std::move(row));
  };
  auto guards = [&](double tt, const Vec& yy, const Eval* e, double out[2]) {
    const AugmentedState xa = split(yy);
    Eval fresh;
    if (!e && (guard_needs_forces(spec, a[0].domain) || guard_needs_forces(spec, a[1].domain))) {
      fresh = evaluate(tt, yy);
      e = &fresh;
    }
    const Vec none;
    out[0] = guard_value(m1, spec, a[0], tt, xa.agent1, e ? e->lambda[0] : none);
    out[1] = guard_value(m2, spec, a[1], tt, xa.agent2, e ? e->lambda[1] : none);
  };

  try {
    while (true) {
      const Eval e0 = evaluate(t, y);
      record(t, y, e0, false);
      if (t >= cfg.t_max - 1e-12) {
        log.timeout = cfg.section_domain >= 0;
        break;
      }
      const double h =
          std::min({cfg.dt, cfg.t_max - t, next_break(spec, a[0], t) - t, next_break(spec, a[1], t) - t});
      double g0[2];
      guards(t, y, &e0, g0);
      const Vec y1 = rk4(deriv, t, y, h, e0.ydot);
      if (!y1.allFinite()) {
        log.inadmissible = true;
        log.message = "state became non-finite at t=" + std::to_string(t + h);
        break;
      }
      auto guards_after = [&](double s, double out[2], Vec* ys_out) {
        if (!ys_out && !guard_needs_state(spec, a[0].domain) && !guard_needs_state(spec, a[1].domain)) {
          out[0] = guard_value(m1, spec, a[0], t + s, AgentState{}, Vec());
          out[1] = guard_value(m2, spec, a[1], t + s, AgentState{}, Vec());
          return;
        }
        const Vec ys = s == h ? y1 : rk4(deriv, t, y, s, e0.ydot);
        if (ys_out) *ys_out = ys;
        guards(t + s, ys, nullptr, out);
      };
      double g1[2];
      guards_after(h, g1, nullptr);
      const bool cross[2] = {g0[0] > 0.0 && g1[0] <= 0.0, g0[1] > 0.0 && g1[1] <= 0.0};
      if (!cross[0] && !cross[1]) {
        t += h;
        y = y1;
        continue;
      }
      double s_evt[2] = {h, h};
      for (int i = 0; i < 2; ++i) {
        if (!cross[i]) continue;
        s_evt[i] = localize(
            [&](double ss) {
              double g[2];
              guards_after(ss, g, nullptr);
              return g[i];
            },
            h, cfg.event_tol);
      }
      int mask = 0;
      double s = h;
      if (cross[0] && cross[1] && std::abs(s_evt[0] - s_evt[1]) <= cfg.event_tol) {
        mask = 3;
        s = std::max(s_evt[0], s_evt[1]);
      } else if (cross[0] && (!cross[1] || s_evt[0] < s_evt[1])) {
        mask = 1;
        s = s_evt[0];
      } else {
        mask = 2;
        s = s_evt[1];
      }
      Vec ys;
      double gs[2];
      guards_after(s, gs, &ys);
      const double te = t + s;
      record(te, ys, evaluate(te, ys), true);

      AugmentedState xa = split(ys);
      const ProductVertex from{a[0].domain, a[1].domain};
      ProductVertex to = from;
      bool impact = false;
      ContactSet hat[2];
      for (int i = 0; i < 2; ++i) {
        const bool moves = (mask >> i) & 1;
        const int nd = moves ? spec.graph.next_domain(a[i].domain) : a[i].domain;
        if (moves) impact = impact || spec.graph.reset(a[i].domain) == ResetKind::kImpact;
        (i == 0 ? to.v : to.w) = nd;
        hat[i] = make_contact_set(*models[i], spec.graph.domain(nd).contacts);
      }
      if (impact) {
        if (bar) {
          const CoupledImpact ci = coupled_impact(m1, m2, hat[0], hat[1], xa, bar);
          xa.agent1.v = ci.v1_plus;
          xa.agent2.v = ci.v2_plus;
        } else {
          for (int i = 0; i < 2; ++i) {
            if (!((mask >> i) & 1) || spec.graph.reset(a[i].domain) != ResetKind::kImpact) continue;
            AgentState& xi = i == 0 ? xa.agent1 : xa.agent2;
            xi.v = impact_map(*models[i], hat[i], xi).v_plus;
          }
        }
      }
      const int cond = classify_edge(spec.graph, from, to);
      for (int i = 0; i < 2; ++i) {
        if (!((mask >> i) & 1)) continue;
        a[i].domain = i == 0 ? to.v : to.w;
        a[i].t_entry = te;
        a[i].contacts = domain_contacts(*models[i], spec, a[i].domain, i == 0 ? xa.agent1 : xa.agent2, cfg.stab);
      }
      log.events.push_back({te, mask, from, to, cond, impact});
      log_line(LogLevel::kDebug, "event t=" + std::to_string(te) + " (" + std::to_string(from.v + 1) + "," +
                                     std::to_string(from.w + 1) + ")->(" + std::to_string(to.v + 1) + "," +
                                     std::to_string(to.w + 1) + ")");
      t = te;
      y << pack(xa.agent1), pack(xa.agent2);
      if (zeno.event(te)) {
        log.zeno = true;
        log.message = "Zeno behaviour: repeated events within 1e-8 s";
        break;
      }
      if (to.v == cfg.section_domain && to.w == cfg.section_domain && ++hits >= cfg.section_hits) {
        log.reached_section = true;
        if (cfg.record) record(t, y, evaluate(t, y), true);
        break;
      }
    }
  } catch (const std::exception& ex) {
    log.inadmissible = true;
    log.message = ex.what();
  }
  const AugmentedState xf = split(y);
  log.t_final = t;
  log.final_state[0] = xf.agent1;
  log.final_state[1] = xf.agent2;
  for (int i = 0; i < 2; ++i) {
    log.final_domain[i] = a[i].domain;
    log.final_entry[i] = a[i].t_entry;
  }
  if (log.timeout && log.message.empty()) log.message = "section not reached before t_max";
  return log;
}

// ---------------------------------------------------------------------------
// Export

namespace {

void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void header_agent(std::string& out, const RobotModel& m, const std::string& tag) {
  for (const auto& c : m.coordinate_names()) out += ",q" + tag + "_" + c;
  for (const auto& c : m.coordinate_names()) out += ",v" + tag + "_" + c;
  for (int i = 0; i < m.num_inputs(); ++i) out += ",u" + tag + "_" + m.coordinate_names()[static_cast<size_t>(m.actuated_coordinates()[static_cast<size_t>(i)])];
  const char* axes[3] = {"x", "y", "z"};
  for (const auto& c : m.contacts())
    for (int k = 0; k < m.point_rows(); ++k) out += ",lambda" + tag + "_" + c.name + "_" + axes[k];
}

void row_agent(std::string& out, const LogRow& r, int i) {
  for (const Vec* v : {&r.x[i].q, &r.x[i].v, &r.u[i], &r.lambda[i]})
    for (Eigen::Index k = 0; k < v->size(); ++k) {
      out += ',';
      put(out, (*v)[k]);
    }
}

}  // namespace

std::string log_csv(const TrajectoryLog& log, const RobotModel& m1, const RobotModel* m2) {
  std::string out = "# coopgait trajectory v1\n";
  out += log.coupled ? "t,domain1,domain2" : "t,domain";
  header_agent(out, m1, log.coupled ? "1" : "");
  if (log.coupled) {
    header_agent(out, m2 ? *m2 : m1, "2");
    out += ",lambda_e";
  }
  out += ",event\n";
  for (const auto& r : log.rows) {
    put(out, r.t);
    out += ',' + std::to_string(r.domain[0] + 1);
    if (log.coupled) out += ',' + std::to_string(r.domain[1] + 1);
    row_agent(out, r, 0);
    if (log.coupled) {
      row_agent(out, r, 1);
      out += ',';
      put(out, r.lambda_e);
    }
    out += r.event ? ",1\n" : ",0\n";
  }
  return out;
}

std::string log_json(const TrajectoryLog& log, const std::string& metadata_json) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["metadata"] = nlohmann::json::parse(metadata_json);
  auto events = nlohmann::json::array();
  for (const auto& e : log.events) {
    nlohmann::json j;
    j["t"] = e.t;
    j["agents"] = e.agents;
    j["from"] = log.coupled ? nlohmann::json::array({e.from.v + 1, e.from.w + 1}) : nlohmann::json(e.from.v + 1);
    j["to"] = log.coupled ? nlohmann::json::array({e.to.v + 1, e.to.w + 1}) : nlohmann::json(e.to.v + 1);
    if (log.coupled) j["condition"] = e.condition;
    j["reset"] = e.impact ? "impact" : "identity";
    events.push_back(j);
  }
  doc["events"] = events;
  doc["timeout"] = log.timeout;
  doc["inadmissible"] = log.inadmissible;
  doc["zeno"] = log.zeno;
  doc["contact_force_flags"] = log.contact_force_flags;
  doc["t_final"] = log.t_final;
  if (!log.message.empty()) doc["message"] = log.message;
  return doc.dump(1);
}

}  // namespace coopgait
