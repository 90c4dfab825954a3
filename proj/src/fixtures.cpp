#include "coopgait/fixtures.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "coopgait/kinematics.hpp"

namespace coopgait::fixtures {

namespace {

using json = nlohmann::json;

constexpr double kThigh = 0.25;
constexpr double kShank = 0.25;
constexpr double kHipX = 0.3;
const char* const kLegs[] = {"LH", "LF", "RH", "RF"};

double leg_hip_x(const std::string& leg) { return leg[1] == 'H' ? -kHipX : kHipX; }

json body(const std::string& name, double mass, json com, json inertia, json joint) {
  return {{"name", name}, {"mass", mass}, {"com", com}, {"inertia", inertia}, {"joint", joint}};
}

json revolute(const std::string& name, const std::string& parent, json origin, json axis) {
  return {{"type", "revolute"}, {"name", name}, {"parent", parent}, {"origin", origin}, {"axis", axis}};
}

}  // namespace

std::string planar_quadruped_json(const PlanarQuadrupedOptions& opt) {
  json bodies = json::array();
  bodies.push_back(body("torso", opt.torso_mass, {0, 0, 0}, opt.torso_inertia,
                        {{"type", "floating-base-planar"}, {"name", "base"}}));
  json contacts = json::array();
  json actuated = json::array();
  for (const char* leg : kLegs) {
    const std::string l = leg;
    bodies.push_back(body(l + "_thigh", 1.0, {0, -kThigh / 2, 0}, kThigh * kThigh / 12.0,
                          revolute(l + "_hip", "torso", {leg_hip_x(l), 0, 0}, {0, 0, 1})));
    bodies.push_back(body(l + "_shank", 0.5, {0, -kShank / 2, 0}, 0.5 * kShank * kShank / 12.0,
                          revolute(l + "_knee", l + "_thigh", {0, -kThigh, 0}, {0, 0, 1})));
    contacts.push_back({{"name", "foot_" + l}, {"body", l + "_shank"}, {"offset", {0, -kShank, 0}}});
    actuated.push_back(l + "_hip");
    actuated.push_back(l + "_knee");
  }
  json doc = {{"version", 1},
              {"name", "planar_quadruped"},
              {"planar", true},
              {"bodies", bodies},
              {"contacts", contacts},
              {"end_effector", {{"body", "torso"}, {"offset", {0, opt.mount_height, 0}}}},
              {"speed_point", {{"body", "torso"}, {"offset", {0, opt.speed_point_height, 0}}}},
              {"actuated", actuated}};
  return doc.dump(1);
}

RobotModel planar_quadruped(const PlanarQuadrupedOptions& opt) { return load_model(planar_quadruped_json(opt)); }

std::string quadruped_arm_json() {
  json bodies = json::array();
  bodies.push_back(body("torso", 30.0, {0, 0, 0}, {{0.5, 0, 0}, {0, 1.5, 0}, {0, 0, 1.7}},
                        {{"type", "floating-base-spatial"}, {"name", "base"}}));
  json contacts = json::array();
  json actuated = json::array();
  for (const char* leg : kLegs) {
    const std::string l = leg;
    const double x = leg[1] == 'H' ? -0.35 : 0.35;
    const double y = leg[0] == 'L' ? 0.12 : -0.12;
    bodies.push_back(body(l + "_hip", 1.0, {0, 0, 0}, 0.002, revolute(l + "_abduction", "torso", {x, y, 0}, {1, 0, 0})));
    bodies.push_back(body(l + "_thigh", 1.5, {0, 0, -0.15}, 0.012, revolute(l + "_hip", l + "_hip", {0, 0, 0}, {0, 1, 0})));
    bodies.push_back(
        body(l + "_shank", 0.4, {0, 0, -0.15}, 0.003, revolute(l + "_knee", l + "_thigh", {0, 0, -0.3}, {0, 1, 0})));
    contacts.push_back({{"name", "foot_" + l}, {"body", l + "_shank"}, {"offset", {0, 0, -0.3}}});
    for (const char* j : {"_abduction", "_hip", "_knee"}) actuated.push_back(l + j);
  }
  const char* axes[] = {"z", "y", "y", "x", "y", "x"};
  std::string parent = "torso";
  for (int k = 1; k <= 6; ++k) {
    const std::string name = "arm" + std::to_string(k);
    json axis = axes[k - 1][0] == 'x' ? json{1, 0, 0} : axes[k - 1][0] == 'y' ? json{0, 1, 0} : json{0, 0, 1};
    json origin = k == 1 ? json{0.2, 0, 0.1} : k == 3 ? json{0.3, 0, 0} : k == 4 ? json{0.25, 0, 0} : json{0, 0, 0.05};
    bodies.push_back(body(name, 0.5, {0.05, 0, 0}, 0.001, revolute(name + "_joint", parent, origin, axis)));
    actuated.push_back(name + "_joint");
    parent = name;
  }
  json doc = {{"version", 1},
              {"name", "quadruped_arm_placeholder"},
              {"bodies", bodies},
              {"contacts", contacts},
              {"end_effector", {{"body", "arm6"}, {"offset", {0.1, 0, 0}}}},
              {"actuated", actuated}};
  return doc.dump(1);
}

RobotModel quadruped_arm() { return load_model(quadruped_arm_json()); }

std::string pendulum_json(int links) {
  if (links < 1 || links > 3) throw std::invalid_argument("pendulum: 1 to 3 links");
  const double len[] = {1.0, 0.8, 0.6};
  const double mass[] = {1.0, 0.7, 0.4};
  json bodies = json::array();
  for (int k = 0; k < links; ++k) {
    const std::string name = "link" + std::to_string(k + 1);
    json joint = {{"type", "revolute"}, {"name", "q" + std::to_string(k + 1)}, {"axis", {0, 0, 1}}};
    if (k > 0) {
      joint["parent"] = "link" + std::to_string(k);
      joint["origin"] = {0, -len[k - 1], 0};
    }
    bodies.push_back(body(name, mass[k], {0, -len[k], 0}, 0.01 * (k + 1), joint));
  }
  json doc = {{"version", 1},
              {"name", "pendulum" + std::to_string(links)},
              {"planar", true},
              {"bodies", bodies},
              {"contacts", json::array({{{"name", "tip"}, {"body", "link" + std::to_string(links)}, {"offset", {0, -len[links - 1], 0}}}})}};
  return doc.dump(1);
}

RobotModel pendulum(int links) { return load_model(pendulum_json(links)); }

// ---------------------------------------------------------------------------
// Gait construction

namespace {

struct DomainPlan {
  std::string name;
  std::vector<std::string> contacts;
  std::string swing;  // empty for four-contact domains
  double duration;
};

std::vector<DomainPlan> plan(const GaitOptions& opt) {
  std::vector<DomainPlan> out;
  const std::vector<std::string> all = {"foot_LH", "foot_LF", "foot_RH", "foot_RF"};
  for (const char* leg : kLegs) {
    out.push_back({"stance" + std::to_string(out.size() / 2 + 1), all, "", opt.stance_duration});
    std::vector<std::string> c;
    for (const auto& f : all)
      if (f != std::string("foot_") + leg) c.push_back(f);
    out.push_back({std::string("swing_") + leg, c, leg, opt.swing_duration});
  }
  return out;
}

// Cubic Hermite on [0, 1] with end values and end slopes.
double hermite(double p0, double m0, double p1, double m1, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * m1;
}

double hermite_slope(double p0, double m0, double p1, double m1, double t) {
  const double t2 = t * t;
  return (6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * p1 + (3 * t2 - 2 * t) * m1;
}

double bump(double t) { return 16.0 * t * t * (1 - t) * (1 - t); }

// Two-link leg in the sagittal plane, angles relative to the torso at zero pitch.
Vec2 leg_foot(double a, double b) {
  return Vec2(kThigh * std::sin(a) + kShank * std::sin(a + b), -kThigh * std::cos(a) - kShank * std::cos(a + b));
}

Eigen::Matrix2d leg_jacobian(double a, double b) {
  Eigen::Matrix2d j;
  j << kThigh * std::cos(a) + kShank * std::cos(a + b), kShank * std::cos(a + b),
      kThigh * std::sin(a) + kShank * std::sin(a + b), kShank * std::sin(a + b);
  return j;
}

Vec2 leg_ik(const Vec2& d) {
  const double c = d.norm() / (2.0 * kThigh);
  if (c >= 1.0) throw std::runtime_error("planar_gait: touchdown point out of reach");
  const double b = -2.0 * std::acos(c);
  const double a = std::atan2(d.x(), -d.y()) - b / 2.0;
  return Vec2(a, b);
}

struct Pass {
  std::vector<DomainTrajectory> domains;
  AgentState x_end;  // after the last reset
};

Pass one_cycle(const RobotModel& model, const GaitOptions& opt, const std::vector<DomainPlan>& doms,
               const AgentState& x_start, const Vec& knots) {
  const int n = model.dof();
  const int iy = model.coordinate_index("base/y");
  const int ip = model.pitch_coordinate();
  const double y0 = -leg_foot(opt.hip, opt.knee).y();
  const Vec3 sp_off = model.speed_point().offset;
  const int K = static_cast<int>(knots.size());

  std::map<std::string, Vec3> hold;
  for (const auto& c : doms[0].contacts) hold[c] = point_position(model, x_start.q, c);

  Pass out;
  AgentState xs = x_start;
  for (size_t v = 0; v < doms.size(); ++v) {
    const DomainPlan& d = doms[v];
    const double T = d.duration;
    std::vector<int> sel = {iy, ip};
    if (!d.swing.empty()) {
      sel.push_back(model.coordinate_index(d.swing + "_hip"));
      sel.push_back(model.coordinate_index(d.swing + "_knee"));
    }

    // Speed output: smooth blend from the entry speed to the nominal one.
    const double s0 = forward_speed(model, xs);
    Mat sv(K, 1), ss = Mat::Zero(2, 1);
    for (int k = 0; k < K; ++k) sv(k, 0) = hermite(s0, 0.0, opt.speed, 0.0, knots[k]);
    DomainTrajectory tr;
    tr.duration = T;
    tr.s_star = ClampedSpline(knots, sv, ss);
    const double sx0 = point_position(model, xs.q, model.speed_point()).x();
    const double sx1 = sx0 + T * tr.s_star.integral(1.0)[0];

    // End targets of the selected coordinates.
    Vec q1(static_cast<Eigen::Index>(sel.size())), v1 = Vec::Zero(static_cast<Eigen::Index>(sel.size()));
    q1[0] = y0;
    q1[1] = 0.0;
    if (!d.swing.empty()) {
      const double base_x = sx1 - sp_off.x();
      const double hip_x = base_x + leg_hip_x(d.swing);
      const Vec2 target(hip_x + opt.step_ahead, 0.0);
      const Vec2 ang = leg_ik(target - Vec2(hip_x, y0));
      const Vec2 rate = leg_jacobian(ang[0], ang[1]).inverse() * Vec2(-opt.speed, -opt.touchdown_speed);
      q1[2] = ang[0];
      q1[3] = ang[1];
      v1[2] = rate[0];
      v1[3] = rate[1];
    }

    Mat qv(K, n), qs(2, n);
    Mat qsel(K, static_cast<Eigen::Index>(sel.size()));
    Vec m0(static_cast<Eigen::Index>(sel.size())), m1(static_cast<Eigen::Index>(sel.size()));
    for (size_t j = 0; j < sel.size(); ++j) {
      const double p0 = xs.q[sel[j]], p1 = q1[static_cast<Eigen::Index>(j)];
      const double d0 = xs.v[sel[j]] * T, d1 = v1[static_cast<Eigen::Index>(j)] * T;
      const double amp = j == 2 ? 0.3 : j == 3 ? -0.6 : 0.0;
      for (int k = 0; k < K; ++k)
        qsel(k, static_cast<Eigen::Index>(j)) = hermite(p0, d0, p1, d1, knots[k]) + amp * bump(knots[k]);
      m0[static_cast<Eigen::Index>(j)] = hermite_slope(p0, d0, p1, d1, 0.0);
      m1[static_cast<Eigen::Index>(j)] = hermite_slope(p0, d0, p1, d1, 1.0);
    }
    Mat sl(2, static_cast<Eigen::Index>(sel.size()));
    sl.row(0) = m0.transpose();
    sl.row(1) = m1.transpose();
    const ClampedSpline out_spline(knots, qsel, sl);

    std::vector<Vec3> footholds;
    for (const auto& c : d.contacts) footholds.push_back(hold.at(c));
    const ContactSet cs = make_contact_set(model, d.contacts);
    Vec guess = xs.q;
    AgentState end;
    for (int k = 0; k < K; ++k) {
      const double tau = knots[k];
      const AgentState x = complete_state(model, cs, footholds, sel, out_spline.value(tau),
                                          out_spline.derivative(tau) / T, sx0 + T * tr.s_star.integral(tau)[0],
                                          tr.s_star.value(tau)[0], guess);
      guess = x.q;
      qv.row(k) = x.q.transpose();
      if (k == 0) qs.row(0) = x.v.transpose() * T;
      if (k == K - 1) {
        qs.row(1) = x.v.transpose() * T;
        end = x;
      }
    }
    tr.q_star = ClampedSpline(knots, qv, qs);
    tr.u_star = ClampedSpline(knots, Mat::Zero(K, model.num_inputs()), Mat::Zero(2, model.num_inputs()));
    out.domains.push_back(tr);

    // Reset into the next domain.
    const DomainPlan& next = doms[(v + 1) % doms.size()];
    if (!d.swing.empty()) {
      const std::string foot = "foot_" + d.swing;
      hold[foot] = point_position(model, end.q, foot);
      end.v = impact_map(model, make_contact_set(model, next.contacts), end).v_plus;
    }
    xs = end;
  }
  out.x_end = xs;
  return out;
}

}  // namespace

Gait planar_gait(const RobotModel& model, const GaitOptions& opt, const ControllerParams& params) {
  const auto doms = plan(opt);
  const Vec knots = uniform_knots(opt.knots);
  const int ix = model.coordinate_index("base/x");
  const int n = model.dof();

  // Nominal four-contact start moving at the nominal speed.
  Vec q = Vec::Zero(n);
  q[model.coordinate_index("base/y")] = -leg_foot(opt.hip, opt.knee).y();
  const double slot = opt.stance_duration + opt.swing_duration;
  for (int k = 0; k < 4; ++k) {
    // Foot placed where the periodic gait leaves it: landed ahead, carried back since.
    const double behind = opt.speed * (4 - (k + 1)) * slot;
    const Vec2 ang = leg_ik(Vec2(opt.step_ahead - behind, -q[model.coordinate_index("base/y")]));
    q[model.coordinate_index(std::string(kLegs[k]) + "_hip")] = ang[0];
    q[model.coordinate_index(std::string(kLegs[k]) + "_knee")] = ang[1];
  }
  std::vector<Vec3> feet;
  for (const auto& c : doms[0].contacts) feet.push_back(point_position(model, q, c));
  const std::vector<int> sel = {model.coordinate_index("base/y"), model.pitch_coordinate()};
  AgentState x = complete_state(model, make_contact_set(model, doms[0].contacts), feet, sel,
                                Vec2(q[sel[0]], 0.0), Vec2::Zero(),
                                point_position(model, q, model.speed_point()).x(), opt.speed, q);

  // Fixed-point iteration on the cycle start; footholds are renewed every cycle.
  Pass pass;
  for (int it = 0; it < 30; ++it) {
    pass = one_cycle(model, opt, doms, x, knots);
    AgentState back = pass.x_end;
    back.q[ix] -= pass.x_end.q[ix] - x.q[ix];
    const double err = std::max((back.q - x.q).cwiseAbs().maxCoeff(), (back.v - x.v).cwiseAbs().maxCoeff());
    back.q[ix] = 0.0;
    x = back;
    if (err < 1e-13) break;
  }
  pass = one_cycle(model, opt, doms, x, knots);

  Gait g;
  g.model_name = model.name();
  g.provenance = "planar_gait fixture builder";
  std::vector<DomainSpec> specs;
  std::vector<ResetKind> resets;
  for (const auto& d : doms) {
    DomainSpec s;
    s.name = d.name;
    s.contacts = d.contacts;
    s.guard.kind = GuardKind::kPhaseComplete;
    specs.push_back(s);
    resets.push_back(d.swing.empty() ? ResetKind::kIdentity : ResetKind::kImpact);

    std::vector<std::string> labels = {"base/y", "base/pitch"};
    if (!d.swing.empty()) {
      labels.push_back(d.swing + "_hip");
      labels.push_back(d.swing + "_knee");
    }
    Mat c = Mat::Zero(static_cast<Eigen::Index>(labels.size()), n);
    for (size_t r = 0; r < labels.size(); ++r) c(static_cast<Eigen::Index>(r), model.coordinate_index(labels[r])) = 1.0;
    g.outputs.c.push_back(c);
    g.outputs.labels.push_back(labels);
  }
  g.outputs.pitch_column = model.pitch_coordinate();
  g.outputs.roll_column = model.roll_coordinate();
  g.graph = GaitGraph::cycle(specs, resets);
  g.domains = pass.domains;
  g.x0 = x;

  // Feedforward inputs along the orbit.
  const OrbitSampler orbit(model, g);
  const double h = 1e-6;
  for (int v = 0; v < g.size(); ++v) {
    auto u_at = [&](double tau) { return nominal_controller(g, model, {v, tau, false}, orbit.state(v, tau), params); };
    Mat u(knots.size(), model.num_inputs()), us(2, model.num_inputs());
    for (Eigen::Index k = 0; k < knots.size(); ++k) u.row(k) = u_at(knots[k]).transpose();
    us.row(0) = (u_at(h) - u.row(0).transpose()).transpose() / h;
    us.row(1) = (u.row(knots.size() - 1).transpose() - u_at(1.0 - h)).transpose() / h;
    g.domains[static_cast<size_t>(v)].u_star = ClampedSpline(knots, u, us);
  }
  return g;
}

ControllerParams tuned_params() {
  ControllerParams p;
  p.xi = {0.5, 0.5, -2.0};
  return p;
}

Vec2 planar_offset() { return Vec2(1.0, 0.0); }

}  // namespace coopgait::fixtures
