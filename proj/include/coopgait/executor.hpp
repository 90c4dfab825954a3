#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coopgait/control.hpp"
#include "coopgait/dynamics.hpp"
#include "coopgait/graph.hpp"

namespace coopgait {

struct ExecutorConfig {
  double dt = 1e-3;
  double event_tol = 1e-10;
  double t_max = 10.0;
  /// Stop on the `section_hits`-th entry into this domain (single agent) or
  /// into the product vertex (section_domain, section_domain). Off when < 0.
  int section_domain = -1;
  int section_hits = 1;
  bool record = true;
  Baumgarte stab;
  double friction_mu = 0.6;
};

/// Domain cycle plus nominal durations (used by phase-based guards).
struct HybridSpec {
  GaitGraph graph;
  std::vector<double> durations;
  /// Phases per domain where the closed-loop vector field is only piecewise
  /// smooth (spline knots). Integration steps end exactly on them.
  std::vector<std::vector<double>> breaks;
};

HybridSpec hybrid_spec(const Gait& gait);

using SingleController = std::function<Vec(const Phase&, const AgentState&)>;
using AgentController =
    std::function<Vec(const Phase& own, int other_domain, const AgentState& x, const AgentGlobals& other)>;

struct HybridEvent {
  double t = 0.0;
  int agents = 0;  // bit 0: agent 1, bit 1: agent 2
  ProductVertex from, to;
  int condition = 0;  // product-graph condition, 0 for single-agent runs
  bool impact = false;
};

struct LogRow {
  double t = 0.0;
  int domain[2] = {0, 0};
  AgentState x[2];
  Vec u[2];
  Vec lambda[2];  // per model contact, zero when inactive
  double lambda_e = 0.0;
  bool event = false;
};

struct TrajectoryLog {
  bool coupled = false;
  std::vector<LogRow> rows;
  std::vector<HybridEvent> events;
  bool timeout = false;
  bool inadmissible = false;
  bool zeno = false;
  bool reached_section = false;
  std::string message;
  int contact_force_flags = 0;  // samples with negative normal force or outside the friction cone
  double t_final = 0.0;
  AgentState final_state[2];
  int final_domain[2] = {0, 0};
  double final_entry[2] = {0.0, 0.0};

  bool ok() const { return !timeout && !inadmissible && !zeno; }
};

struct SingleStart {
  AgentState x;
  int domain = 0;
  double t0 = 0.0;
  double t_entry = 0.0;
};

struct CoupledStart {
  AugmentedState x;
  int domain[2] = {0, 0};
  double t0 = 0.0;
  double t_entry[2] = {0.0, 0.0};
};

TrajectoryLog step_hybrid(const ExecutorConfig& cfg, const RobotModel& model, const HybridSpec& spec,
                          const SingleController& controller, const SingleStart& start);

TrajectoryLog step_hybrid(const ExecutorConfig& cfg, const RobotModel& m1, const RobotModel& m2,
                          const HybridSpec& spec, const std::optional<BarConstraint>& bar,
                          const AgentController& c1, const AgentController& c2, const CoupledStart& start);

/// CSV export; the first line is a versioned header comment.
std::string log_csv(const TrajectoryLog& log, const RobotModel& m1, const RobotModel* m2 = nullptr);
/// Event timeline and run metadata.
std::string log_json(const TrajectoryLog& log, const std::string& metadata_json = "{}");

}  // namespace coopgait
