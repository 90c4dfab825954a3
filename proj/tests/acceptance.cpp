// Acceptance checks: one PASS/FAIL line per criterion.
#include <json.hpp>

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "coopgait/analysis.hpp"
#include "coopgait/fixtures.hpp"
#include "coopgait/kinematics.hpp"
#include "oracles.hpp"

using namespace coopgait;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Planar {
  RobotModel model = fixtures::planar_quadruped();
  Gait gait = fixtures::planar_gait(model);
  Vec2 d = fixtures::planar_offset();
  LiftedOrbit lifted = lift_orbit(model, gait, d);
  BarConstraint bar{lifted.bar_length()};
};

const Planar& planar() {
  static const Planar p;
  return p;
}

AgentState random_state(const RobotModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  AgentState x{Vec(m.dof()), Vec(m.dof())};
  for (int i = 0; i < m.dof(); ++i) {
    x.q[i] = u(rng);
    x.v[i] = u(rng);
  }
  return x;
}

ContactSet random_contacts(const RobotModel& m, std::mt19937_64& rng) {
  std::vector<std::string> names;
  for (const auto& c : m.contacts())
    if (rng() % 4 != 0) names.push_back(c.name);
  if (names.empty()) names.push_back(m.contacts().front().name);
  return make_contact_set(m, names);
}

Phase phase_of(int v, double tau) {
  Phase p;
  p.domain = v;
  p.tau = tau;
  return p;
}

// ---------------------------------------------------------------------------

Outcome product_graph() {
  const auto t0 = std::chrono::steady_clock::now();
  const ProductGraph g8 = strong_product(plain_cycle(8));
  const GaitGraph c2 = plain_cycle(2);
  const ProductGraph g2 = strong_product(c2);
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> got;
  for (const auto& e : g2.edges) got.insert({{e.from.v, e.from.w}, {e.to.v, e.to.w}});
  const bool brute = got == oracle::brute_product_edges(c2);
  const double t = seconds_since(t0);
  return {g8.vertices.size() == 64 && g8.edges.size() == 192 && g2.vertices.size() == 4 && g2.edges.size() == 12 &&
              brute && t < 1.0,
          fmt("8-cycle %zu vertices %zu edges; 2-cycle %zu/%zu, brute force %s; %.3f s", g8.vertices.size(),
              g8.edges.size(), g2.vertices.size(), g2.edges.size(), brute ? "agrees" : "differs", t)};
}

Outcome dimensions() {
  const RobotModel a = fixtures::quadruped_arm();
  const RobotModel b = load_model(fixtures::quadruped_arm_json());
  const int states = 2 * a.dof() + 2 * b.dof();
  const int inputs = a.num_inputs() + b.num_inputs();
  return {states == 96 && inputs == 36, fmt("%d-DOF agents: %d states, %d inputs", a.dof(), states, inputs)};
}

Outcome dynamics_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double mass_err = 0.0;
  for (int links = 2; links <= 3; ++links) {
    const RobotModel m = fixtures::pendulum(links);
    const auto chain = oracle::pendulum_chain(links);
    for (int k = 0; k < 50; ++k) {
      const Vec q = random_state(m, rng).q * 4.0;
      mass_err = std::max(mass_err, (mass_matrix(m, q) - oracle::lagrangian_mass_matrix(chain, q)).cwiseAbs().maxCoeff());
    }
  }
  const RobotModel planar_m = fixtures::planar_quadruped();
  const RobotModel arm = fixtures::quadruped_arm();
  double fd_err = 0.0, imp_err = 0.0, cimp_err = 0.0;
  bool dissipative = true;
  std::uniform_real_distribution<double> uu(-20.0, 20.0);
  for (int k = 0; k < 100; ++k) {
    const RobotModel& m = k % 2 ? arm : planar_m;
    const AgentState x = random_state(m, rng);
    const ContactSet c = random_contacts(m, rng);
    Vec u(m.num_inputs());
    for (int i = 0; i < u.size(); ++i) u[i] = uu(rng);
    const Mat d = mass_matrix(m, x.q);
    const Mat j = contact_jacobian(m, c, x.q);
    const ConstrainedAccel got = constrained_fd(m, c, x, u);
    const auto ref = oracle::nullspace_fd(d, bias_vector(m, x.q, x.v), m.input_matrix() * u, j,
                                          contact_jdot_v(m, c, x.q, x.v));
    fd_err = std::max({fd_err, (got.qdd - ref.qdd).cwiseAbs().maxCoeff(), (got.lambda - ref.lambda).cwiseAbs().maxCoeff()});
    const ImpactResult imp = impact_map(m, c, x);
    const auto iref = oracle::nullspace_impact(d, j, x.v);
    imp_err = std::max(imp_err, (imp.v_plus - iref.v_plus).cwiseAbs().maxCoeff());
    dissipative = dissipative && kinetic_energy(m, x.q, imp.v_plus) <= kinetic_energy(m, x.q, x.v) + 1e-12;

    AugmentedState xa{random_state(planar_m, rng), random_state(planar_m, rng)};
    xa.agent2.q[0] += 1.0;
    const ContactSet c1 = random_contacts(planar_m, rng), c2 = random_contacts(planar_m, rng);
    const CoupledImpact ci = coupled_impact(planar_m, planar_m, c1, c2, xa, BarConstraint{1.0});
    const auto rows = oracle::coupled_rows(planar_m, c1, c2, xa, true);
    const Mat dd = oracle::block_diag(mass_matrix(planar_m, xa.agent1.q), mass_matrix(planar_m, xa.agent2.q));
    const auto cref = oracle::nullspace_impact(dd, rows.j, oracle::stack(xa.agent1.v, xa.agent2.v));
    cimp_err = std::max(cimp_err, (oracle::stack(ci.v1_plus, ci.v2_plus) - cref.v_plus).cwiseAbs().maxCoeff());
    const double tm = kinetic_energy(planar_m, xa.agent1.q, xa.agent1.v) + kinetic_energy(planar_m, xa.agent2.q, xa.agent2.v);
    const double tp = kinetic_energy(planar_m, xa.agent1.q, ci.v1_plus) + kinetic_energy(planar_m, xa.agent2.q, ci.v2_plus);
    dissipative = dissipative && tp <= tm + 1e-12;
  }
  const double t = seconds_since(t0);
  return {mass_err < 1e-10 && fd_err < 1e-8 && imp_err < 1e-8 && cimp_err < 1e-8 && dissipative && t < 30.0,
          fmt("mass %.1e; forward dynamics %.1e; impact %.1e; coupled impact %.1e; T+ <= T- %s; %.1f s", mass_err,
              fd_err, imp_err, cimp_err, dissipative ? "always" : "violated", t)};
}

Outcome orbit_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& s = planar();
  const CoupledReturnMap map(s.model, hybrid_spec(s.gait),
                             distributed_factory(s.model, s.gait, fixtures::tuned_params(), s.d, s.bar),
                             s.lifted.at(0.0), true);
  const AugmentedState x0 = s.lifted.at(0.0);
  const TrajectoryLog log = map.rollout(x0, true);
  const Vec z0 = map.project(x0);
  const double err = log.reached_section
                         ? (map.project({log.final_state[0], log.final_state[1]}) - z0).cwiseAbs().maxCoeff()
                         : INFINITY;
  const AuditReport audit = audits(log, s.model, s.bar.length, &s.gait);
  const double t = seconds_since(t0);
  return {err < 1e-5 && audit.max_lambda_e_ratio < 1e-6 && log.events.size() == 8 && t < 60.0,
          fmt("%zu diagonal transitions; return error %.1e; lambda_e / weight %.1e; %.1f s", log.events.size(), err,
              audit.max_lambda_e_ratio, t)};
}

Outcome on_orbit_reduction() {
  const auto& s = planar();
  const ControllerParams p = fixtures::tuned_params();
  DistributedController c1(s.model, s.gait, p, s.d, s.bar), c2(s.model, s.gait, p, -s.d, s.bar);
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int v = static_cast<int>(rng() % 8);
    const double tau = u01(rng);
    const AugmentedState xa = s.lifted.at(v, tau);
    const MeasurableGlobals th = measure_globals(s.model, s.model, xa, v, v);
    const Phase ph = phase_of(v, tau);
    worst = std::max(worst, (c1(ph, v, xa.agent1, th.agent[1]) -
                             nominal_controller(s.gait, s.model, ph, xa.agent1, p)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (c2(ph, v, xa.agent2, th.agent[0]) -
                             nominal_controller(s.gait, s.model, ph, xa.agent2, p)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-7, fmt("max |u_qp - u_nom| over 50 phases and both agents %.1e", worst)};
}

Outcome dichotomy() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& s = planar();
  const HybridSpec spec = hybrid_spec(s.gait);
  const AugmentedState x0 = s.lifted.at(0.0);
  ControllerParams zero;
  const CoupledReturnMap nominal(s.model, spec, nominal_agent_factory(s.model, s.gait, zero), x0, true);
  const double rho0 = stability_report(nominal, nominal.project(x0)).spectral_radius;
  const ControllerParams tuned = fixtures::tuned_params();
  const CoupledReturnMap distributed(s.model, spec, distributed_factory(s.model, s.gait, tuned, s.d, s.bar), x0, true);
  const double rho1 = stability_report(distributed, distributed.project(x0)).spectral_radius;
  const double t = seconds_since(t0);
  return {rho0 >= 1.0 && rho1 < 1.0 && t < 600.0,
          fmt("nominal rho %.4f; tuned (alpha, beta, gamma) = (%g, %g, %g) rho %.4f; %.0f s", rho0, tuned.xi[0],
              tuned.xi[1], tuned.xi[2], rho1, t)};
}

Outcome qp_solver() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  double kkt = 0.0, gap = 0.0;
  bool feasible = true;
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = static_cast<int>(rng() % std::min(n, 3));
    const QpProblem p = oracle::random_qp(rng, n, m);
    const QpSolution sol = solve_qp(p);
    const KktResiduals r = kkt_residuals(p, sol);
    kkt = std::max({kkt, r.stationarity, r.primal, r.complementarity, r.dual_sign});
    const auto ref = oracle::enumerate_qp(p);
    feasible = feasible && ref.feasible;
    gap = std::max(gap, std::abs(sol.objective - ref.objective));
  }
  const double t = seconds_since(t0);
  return {kkt < 1e-9 && gap < 1e-9 && feasible && t < 5.0,
          fmt("max KKT residual %.1e; objective gap %.1e; %.2f s", kkt, gap, t)};
}

double drop_event_time(double dt) {
  const RobotModel m = fixtures::planar_quadruped();
  DomainSpec flight{"flight", {}, {}};
  flight.guard.kind = GuardKind::kSwingPointHeight;
  flight.guard.point = "foot_LH";
  DomainSpec stance{"stance", {"foot_LH"}, {}};
  HybridSpec spec;
  spec.graph = GaitGraph::cycle({flight, stance}, {ResetKind::kImpact, ResetKind::kIdentity});
  spec.durations = {10.0, 1.0};
  ExecutorConfig cfg;
  cfg.dt = dt;
  cfg.section_domain = 1;
  cfg.record = false;
  AgentState x{Vec::Zero(m.dof()), Vec::Zero(m.dof())};
  x.q[1] = 1.0;
  const SingleController zero = [&](const Phase&, const AgentState&) { return Vec(Vec::Zero(m.num_inputs())); };
  const TrajectoryLog log = step_hybrid(cfg, m, spec, zero, SingleStart{x});
  return log.events.size() == 1 ? log.events.front().t : INFINITY;
}

Outcome integration_order() {
  const auto& s = planar();
  AgentState x = s.gait.x0;
  x.v[2] += 0.2;
  x.v = impact_map(s.model, s.gait.contacts(s.model, 0), x).v_plus;
  auto final_state = [&](double dt) {
    ExecutorConfig cfg;
    cfg.dt = dt;
    cfg.t_max = 0.09;
    cfg.record = false;
    const TrajectoryLog log = step_hybrid(cfg, s.model, hybrid_spec(s.gait),
                                          nominal_single_factory(s.model, s.gait, {})(), SingleStart{x});
    Vec z(2 * s.model.dof());
    z << log.final_state[0].q, log.final_state[0].v;
    return z;
  };
  const Vec a = final_state(0.01), b = final_state(0.005), c = final_state(0.0025);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  // Free fall of the whole body: the foot reaches the ground at sqrt(2 h / g).
  const double exact = std::sqrt(2.0 * 0.5 / 9.81);
  double event_err = 0.0;
  for (double dt : {1e-2, 1e-3}) event_err = std::max(event_err, std::abs(drop_event_time(dt) - exact));
  return {order >= 3.5 && event_err < 1e-10,
          fmt("observed order %.2f; touchdown time error %.1e s", order, event_err)};
}

Outcome translation_invariance() {
  const auto& s = planar();
  const ControllerParams p = fixtures::tuned_params();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> shift(-10.0, 10.0), small(-0.02, 0.02);
  AugmentedState xa = s.lifted.at(4, 0.35);
  for (Eigen::Index i = 1; i < xa.agent1.q.size(); ++i) {
    xa.agent1.q[i] += small(rng);
    xa.agent2.q[i] += small(rng);
    xa.agent1.v[i] += small(rng);
    xa.agent2.v[i] += small(rng);
  }
  const Phase ph = phase_of(4, 0.35);
  auto outputs = [&](const AugmentedState& x) {
    DistributedController c1(s.model, s.gait, p, s.d, s.bar), c2(s.model, s.gait, p, -s.d, s.bar);
    const MeasurableGlobals th = measure_globals(s.model, s.model, x, 4, 4);
    return oracle::stack(c1(ph, 4, x.agent1, th.agent[1]), c2(ph, 4, x.agent2, th.agent[0]));
  };
  const Vec u0 = outputs(xa);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Vec2 dp(shift(rng), 0.0);
    worst = std::max(worst, (outputs({translate(s.model, xa.agent1, dp), translate(s.model, xa.agent2, dp)}) - u0)
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {worst < 1e-12, fmt("max output change over 10 shifts %.1e", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "coopgait_acceptance";
  fs::remove_all(root);
  const std::string runs[] = {"--mode single --strides 2 --perturb random:0.01 --seed 5",
                              "--mode coupled --strides 1 --skip-stability --perturb v.base/pitch:0.02 --seed 5"};
  int compared = 0;
  bool same = true;
  for (int r = 0; r < 2; ++r) {
    for (const char* tag : {"a", "b"}) {
      const std::string cmd = std::string(COOPGAIT_CLI) + " " + runs[r] + " --out " +
                              (root / (std::to_string(r) + tag)).string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + runs[r]};
    }
    for (const char* f : {"trajectory.csv", "events.json", "audit.json"}) {
      const std::string a = slurp(root / (std::to_string(r) + "a") / f);
      same = same && !a.empty() && a == slurp(root / (std::to_string(r) + "b") / f);
      ++compared;
    }
  }
  return {same, fmt("%d output files compared across repeated runs: %s", compared, same ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"strong-product counts", product_graph},
      {"dimension audit", dimensions},
      {"dynamics oracles", dynamics_oracles},
      {"orbit invariance", orbit_invariance},
      {"on-orbit reduction", on_orbit_reduction},
      {"stability dichotomy", dichotomy},
      {"QP solver", qp_solver},
      {"integration order", integration_order},
      {"translation invariance", translation_invariance},
      {"determinism", determinism},
  };
  int failed = 0;
  int k = 0;
  for (const auto& [name, check] : criteria) {
    ++k;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
