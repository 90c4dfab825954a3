// Scenario runner for single-agent and coupled rollouts, shooting refinement,
// stability reports and product-graph counts.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "coopgait/analysis.hpp"
#include "coopgait/fixtures.hpp"
#include "coopgait/kinematics.hpp"
#include "coopgait/log.hpp"

namespace {

using namespace coopgait;
using json = nlohmann::json;

constexpr const char* kVersion = "coopgait 1.0";

enum Exit { kOk = 0, kUsage = 2, kInput = 3, kSimulation = 4, kNumeric = 5 };

/// Raised for errors that carry their own diagnostic kind and exit code.
struct CliError : std::runtime_error {
  CliError(std::string k, int c, const std::string& what) : std::runtime_error(what), kind(std::move(k)), code(c) {}
  std::string kind;
  int code;
};

struct Scenario {
  std::string mode = "single";
  std::string model_path, model2_path, gait_path, params_path;
  std::string d_text;
  std::optional<double> bar_length;
  int strides = 2;
  double dt = 1e-3;
  std::string perturb;
  std::optional<double> alpha, beta, gamma, qp_weight;
  std::string controller = "distributed";
  std::string out = "out";
  unsigned long long seed = 0;
  int cycle = 8;
  bool skip_stability = false;
  double noise = 0.0;
};

int diagnostic(const std::string& kind, const std::string& message, int code) {
  json d = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << d.dump() << '\n';
  return code;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("file", kInput, path.string() + ": cannot open for writing");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

Vec2 parse_d(const std::string& text) {
  double x = 0.0, y = 0.0;
  char comma = 0, extra = 0;
  std::istringstream in(text);
  if (!(in >> x >> comma >> y) || comma != ',' || (in >> extra))
    throw CliError("usage", kUsage, "--d: expected x,y but got '" + text + "'");
  return Vec2(x, y);
}

struct Perturbation {
  std::string coord;  // coordinate name, "v.<name>" for a velocity or "random"
  double magnitude = 0.0;
};

std::optional<Perturbation> parse_perturb(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0)
    throw CliError("usage", kUsage, "--perturb: expected coord:mag but got '" + text + "'");
  Perturbation p;
  p.coord = text.substr(0, colon);
  try {
    size_t used = 0;
    p.magnitude = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw CliError("usage", kUsage, "--perturb: bad magnitude in '" + text + "'");
  }
  return p;
}

/// Applies the perturbation, then projects the velocity onto the active
/// contact constraints so the start state is consistent.
AgentState perturbed(const RobotModel& model, const Gait& gait, AgentState x, const std::optional<Perturbation>& p,
                     std::mt19937_64& rng) {
  if (!p) return x;
  if (p->coord == "random") {
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec dir(2 * model.dof());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = n01(rng);
    for (int h : model.horizontal_coordinates()) dir[h] = 0.0;
    dir *= p->magnitude / dir.norm();
    x.q += dir.head(model.dof());
    x.v += dir.tail(model.dof());
  } else {
    const bool vel = p->coord.rfind("v.", 0) == 0;
    const std::string name = vel ? p->coord.substr(2) : p->coord;
    const auto& names = model.coordinate_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw CliError("usage", kUsage, "--perturb: unknown coordinate '" + name + "'");
    const auto i = static_cast<Eigen::Index>(it - names.begin());
    (vel ? x.v : x.q)[i] += p->magnitude;
  }
  const ContactSet c = gait.contacts(model, 0);
  if (!c.empty()) x.v = impact_map(model, c, x).v_plus;
  return x;
}

RobotModel load_model_arg(const std::string& path) {
  return path.empty() ? fixtures::planar_quadruped() : load_model_file(path);
}

ControllerParams scenario_params(const Scenario& s) {
  ControllerParams p = s.params_path.empty() ? fixtures::tuned_params() : load_params_file(s.params_path);
  if (s.alpha) p.xi[0] = *s.alpha;
  if (s.beta) p.xi[1] = *s.beta;
  if (s.gamma) p.xi[2] = *s.gamma;
  if (s.qp_weight) {
    if (!(*s.qp_weight > 0)) throw CliError("usage", kUsage, "--qp-weight must be positive");
    p.qp_weight = *s.qp_weight;
  }
  return p;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json base_metadata(const Scenario& s, const RobotModel& model, const Gait& gait, const ControllerParams& p) {
  return {{"generator", kVersion},
          {"mode", s.mode},
          {"model", model.name()},
          {"gait", gait.provenance},
          {"params", json::parse(save_params(p))},
          {"strides", s.strides},
          {"dt", s.dt},
          {"perturb", s.perturb},
          {"seed", s.seed},
          {"noise", s.noise}};
}

void check_log(const TrajectoryLog& log) {
  if (log.ok()) return;
  std::string kind = log.timeout ? "timeout" : log.zeno ? "zeno" : "inadmissible";
  throw CliError(kind, kSimulation, "simulation stopped at t=" + std::to_string(log.t_final) + ": " + log.message);
}

std::filesystem::path out_dir(const Scenario& s) {
  std::filesystem::path dir(s.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CliError("file", kInput, s.out + ": " + ec.message());
  return dir;
}

void write_run(const std::filesystem::path& dir, const TrajectoryLog& log, const RobotModel& model,
               const json& meta, const AuditReport& audit) {
  write_file(dir / "trajectory.csv", log_csv(log, model, log.coupled ? &model : nullptr));
  write_file(dir / "events.json", log_json(log, meta.dump()));
  write_file(dir / "audit.json", audit_json(audit));
}

int run_product_graph(const Scenario& s) {
  if (s.cycle < 1) throw CliError("usage", kUsage, "--cycle must be at least 1");
  const ProductGraph pg = strong_product(plain_cycle(s.cycle));
  std::cout << pg.vertices.size() << " vertices, " << pg.edges.size() << " edges\n";
  return kOk;
}

int run_single(const Scenario& s) {
  const RobotModel model = load_model_arg(s.model_path);
  const ControllerParams params = scenario_params(s);
  const Gait gait = s.gait_path.empty() ? fixtures::planar_gait(model) : load_gait_file(s.gait_path, model);
  std::mt19937_64 rng(s.seed);
  const AgentState x0 = perturbed(model, gait, gait.x0, parse_perturb(s.perturb), rng);
  ExecutorConfig cfg;
  cfg.dt = s.dt;
  cfg.t_max = s.strides * gait.period();
  const TrajectoryLog log =
      step_hybrid(cfg, model, hybrid_spec(gait), nominal_single_factory(model, gait, params)(), SingleStart{x0});
  check_log(log);
  const auto dir = out_dir(s);
  const AuditReport audit = audits(log, model, std::nullopt, &gait);
  write_run(dir, log, model, base_metadata(s, model, gait, params), audit);
  std::cout << "single: " << log.events.size() << " events, final t " << log.t_final << '\n';
  return kOk;
}

int run_stability(const Scenario& s) {
  const RobotModel model = load_model_arg(s.model_path);
  const ControllerParams params = scenario_params(s);
  const Gait gait = s.gait_path.empty() ? fixtures::planar_gait(model) : load_gait_file(s.gait_path, model);
  ExecutorConfig cfg;
  cfg.dt = s.dt;
  const SingleReturnMap map(model, hybrid_spec(gait), nominal_single_factory(model, gait, params), gait.x0, cfg);
  const PoincareResult r = stability_report(map, map.project(gait.x0));
  json meta = base_metadata(s, model, gait, params);
  meta["controller"] = "nominal";
  const auto dir = out_dir(s);
  write_file(dir / "stability.json", stability_json(r, meta.dump()));
  std::printf("spectral radius %.6f\n", r.spectral_radius);
  return kOk;
}

int run_refine(const Scenario& s) {
  const RobotModel model = load_model_arg(s.model_path);
  const ControllerParams params = scenario_params(s);
  const Gait gait = s.gait_path.empty() ? fixtures::planar_gait(model) : load_gait_file(s.gait_path, model);
  std::mt19937_64 rng(s.seed);
  const AgentState guess = perturbed(model, gait, gait.x0, parse_perturb(s.perturb), rng);
  ExecutorConfig cfg;
  cfg.dt = s.dt;
  const RefineResult r = refine_periodic(model, gait, nominal_single_factory(model, gait, params), guess, 1e-8, 50, cfg);
  const auto dir = out_dir(s);
  write_file(dir / "gait_refined.json", save_gait(r.gait, model));
  json report = base_metadata(s, model, gait, params);
  report["iterations"] = r.iterations;
  report["residual"] = r.residual;
  report["x_star"] = {{"q", vec_json(r.x_star.q)}, {"v", vec_json(r.x_star.v)}};
  write_file(dir / "refine.json", report.dump(1));
  std::printf("refine: %d iterations, residual %.3e\n", r.iterations, r.residual);
  return kOk;
}

/// Wraps an agent controller so the other agent's globals arrive with
/// seeded Gaussian noise.
AgentControllerFactory with_noise(AgentControllerFactory inner, double sigma, unsigned long long seed) {
  if (sigma <= 0.0) return inner;
  return [=](int agent) {
    auto rng = std::make_shared<std::mt19937_64>(seed + 1 + static_cast<unsigned long long>(agent));
    AgentController c = inner(agent);
    return AgentController([=](const Phase& ph, int w, const AgentState& x, const AgentGlobals& g) {
      std::normal_distribution<double> n(0.0, sigma);
      AgentGlobals noisy = g;
      noisy.speed += n(*rng);
      noisy.pitch += n(*rng);
      noisy.pitch_rate += n(*rng);
      noisy.roll += n(*rng);
      noisy.roll_rate += n(*rng);
      return c(ph, w, x, noisy);
    });
  };
}

int run_coupled(const Scenario& s) {
  const RobotModel model = load_model_arg(s.model_path);
  if (!s.model2_path.empty() && !load_model_file(s.model2_path).structurally_equal(model))
    throw CliError("model", kInput, "--model2: coupled scenarios need two identical agents");
  const ControllerParams params = scenario_params(s);
  const Gait gait = s.gait_path.empty() ? fixtures::planar_gait(model) : load_gait_file(s.gait_path, model);
  const Vec2 d = s.d_text.empty() ? fixtures::planar_offset() : parse_d(s.d_text);
  if (d.norm() == 0.0) throw CliError("usage", kUsage, "--d must be nonzero in coupled mode");
  if (model.planar() && d.y() != 0.0)
    throw CliError("usage", kUsage, "--d: planar models can only be offset along x");
  if (!model.has_end_effector()) throw CliError("model", kInput, "coupled mode needs an end effector");
  const LiftedOrbit lifted = lift_orbit(model, gait, d);
  const double geometric = lifted.bar_length();
  const double length = s.bar_length.value_or(geometric);
  if (std::abs(length - geometric) > 1e-6)
    log_line(LogLevel::kWarn, "bar length " + std::to_string(length) + " differs from the orbit geometry (" +
                                  std::to_string(geometric) + ")");
  const BarConstraint bar{length};

  std::mt19937_64 rng(s.seed);
  AugmentedState x0 = lifted.at(0.0);
  x0.agent1 = perturbed(model, gait, x0.agent1, parse_perturb(s.perturb), rng);

  AgentControllerFactory factory;
  if (s.controller == "nominal")
    factory = nominal_agent_factory(model, gait, params);
  else if (s.controller == "distributed")
    factory = with_noise(distributed_factory(model, gait, params, d, bar), s.noise, s.seed);
  else
    throw CliError("usage", kUsage, "--controller must be nominal or distributed");

  const HybridSpec spec = hybrid_spec(gait);
  ExecutorConfig cfg;
  cfg.dt = s.dt;
  cfg.t_max = s.strides * gait.period();
  CoupledStart start;
  start.x = x0;
  const TrajectoryLog log = step_hybrid(cfg, model, model, spec, bar, factory(0), factory(1), start);
  check_log(log);

  json meta = base_metadata(s, model, gait, params);
  meta["controller"] = s.controller;
  meta["d"] = {d.x(), d.y()};
  meta["bar_length"] = length;
  const auto dir = out_dir(s);
  const AuditReport audit = audits(log, model, length, &gait);
  write_run(dir, log, model, meta, audit);
  std::printf("coupled: %zu events, final t %g, max bar drift %.3e\n", log.events.size(), log.t_final,
              audit.max_bar_drift);

  if (!s.skip_stability) {
    ExecutorConfig scfg;
    scfg.dt = s.dt;
    const AugmentedState on_orbit = lifted.at(0.0);
    const CoupledReturnMap map(model, spec, factory, on_orbit, true, scfg);
    const PoincareResult r = stability_report(map, map.project(on_orbit), 1e-6, 1e-6, "entry of product vertex (1,1)");
    write_file(dir / "stability.json", stability_json(r, meta.dump()));
    std::printf("spectral radius %.6f\n", r.spectral_radius);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Scenario s;
  CLI::App app{"Cooperative locomotion scenarios"};
  app.set_version_flag("--version", kVersion);
  app.add_option("--mode", s.mode, "single, coupled, refine, stability or product-graph")
      ->check(CLI::IsMember({"single", "coupled", "refine", "stability", "product-graph"}));
  app.add_option("--model", s.model_path, "model JSON (default: built-in planar quadruped)");
  app.add_option("--model2", s.model2_path, "model JSON of agent 2 (must equal --model)");
  app.add_option("--gait", s.gait_path, "gait JSON (default: built-in gait of the planar quadruped)");
  app.add_option("--params", s.params_path, "controller parameter JSON (default: tuned parameters)");
  app.add_option("--d", s.d_text, "offset of agent 2 from agent 1 as x,y");
  app.add_option("--bar-length", s.bar_length, "bar length [m] (default: from the orbit geometry)");
  app.add_option("--strides", s.strides, "number of gait periods to simulate")->check(CLI::PositiveNumber);
  app.add_option("--dt", s.dt, "integration step [s]")->check(CLI::PositiveNumber);
  app.add_option("--perturb", s.perturb, "initial perturbation coord:mag (coord, v.coord or random)");
  app.add_option("--alpha", s.alpha, "speed coupling");
  app.add_option("--beta", s.beta, "roll coupling");
  app.add_option("--gamma", s.gamma, "pitch coupling");
  app.add_option("--qp-weight", s.qp_weight, "weight of the defect variable");
  app.add_option("--controller", s.controller, "nominal or distributed (coupled mode)");
  app.add_option("--out", s.out, "output directory");
  app.add_option("--seed", s.seed, "seed for perturbation sampling and noise");
  app.add_option("--cycle", s.cycle, "cycle length for product-graph mode");
  app.add_flag("--skip-stability", s.skip_stability, "coupled mode: skip the stability report");
  app.add_option("--noise", s.noise, "std. dev. of noise on the shared signals (coupled mode)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return diagnostic("usage", e.what(), kUsage);
  }

  try {
    if (s.mode == "product-graph") return run_product_graph(s);
    if (s.mode == "single") return run_single(s);
    if (s.mode == "stability") return run_stability(s);
    if (s.mode == "refine") return run_refine(s);
    return run_coupled(s);
  } catch (const CliError& e) {
    return diagnostic(e.kind, e.what(), e.code);
  } catch (const ModelError& e) {
    return diagnostic("model", e.what(), kInput);
  } catch (const nlohmann::json::exception& e) {
    return diagnostic("parse", e.what(), kInput);
  } catch (const PoincareError& e) {
    return diagnostic("poincare", e.what(), kNumeric);
  } catch (const DynamicsError& e) {
    return diagnostic("dynamics", e.what(), kNumeric);
  } catch (const QpInfeasible& e) {
    return diagnostic("qp_infeasible", e.what(), kNumeric);
  } catch (const std::exception& e) {
    return diagnostic("error", e.what(), kInput);
  }
}
