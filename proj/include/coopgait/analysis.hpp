#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopgait/executor.hpp"
#include "coopgait/gait.hpp"

namespace coopgait {

class PoincareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SingleControllerFactory = std::function<SingleController()>;
using AgentControllerFactory = std::function<AgentController(int agent)>;

SingleControllerFactory nominal_single_factory(const RobotModel& model, const Gait& gait,
                                               const ControllerParams& params);
/// Uncoupled nominal controllers for both agents (no QP, no coupling terms).
AgentControllerFactory nominal_agent_factory(const RobotModel& model, const Gait& gait, const ControllerParams& params);
/// Distributed QP controllers; agent 0 expects the other at +d, agent 1 at -d.
/// All controllers made by one factory share an orbit memo.
AgentControllerFactory distributed_factory(const RobotModel& model, const Gait& gait, const ControllerParams& params,
                                           const Vec2& d, const std::optional<BarConstraint>& bar);

/// First-return map to the entry of domain 0 (single agent) or of the
/// product vertex (0, 0), in quotient coordinates: horizontal base positions
/// are removed and restored from a template state when lifting.
class ReturnMap {
 public:
  virtual ~ReturnMap() = default;
  virtual int dim() const = 0;
  virtual Vec apply(const Vec& z) const = 0;
  /// Names of the coordinates removed by the quotient.
  virtual std::vector<std::string> removed() const = 0;
  virtual std::vector<std::string> section_labels() const = 0;
};

class SingleReturnMap : public ReturnMap {
 public:
  SingleReturnMap(const RobotModel& model, HybridSpec spec, SingleControllerFactory factory, AgentState tmpl,
                  ExecutorConfig cfg = {});
  int dim() const override;
  Vec apply(const Vec& z) const override;
  std::vector<std::string> removed() const override;
  std::vector<std::string> section_labels() const override;

  Vec project(const AgentState& x) const;
  AgentState lift(const Vec& z) const;
  /// Full rollout from a section state, with logging as configured.
  TrajectoryLog rollout(const AgentState& x, bool record) const;

 private:
  RobotModel model_;
  HybridSpec spec_;
  SingleControllerFactory factory_;
  AgentState tmpl_;
  ExecutorConfig cfg_;
};

class CoupledReturnMap : public ReturnMap {
 public:
  CoupledReturnMap(const RobotModel& model, HybridSpec spec, AgentControllerFactory factory, AugmentedState tmpl,
                   bool with_bar, ExecutorConfig cfg = {});
  int dim() const override;
  Vec apply(const Vec& z) const override;
  std::vector<std::string> removed() const override;
  std::vector<std::string> section_labels() const override;

  Vec project(const AugmentedState& x) const;
  AugmentedState lift(const Vec& z) const;
  TrajectoryLog rollout(const AugmentedState& x, bool record) const;
  std::optional<BarConstraint> bar_for(const AugmentedState& x) const;

 private:
  RobotModel model_;
  HybridSpec spec_;
  AgentControllerFactory factory_;
  AugmentedState tmpl_;
  bool with_bar_;
  ExecutorConfig cfg_;
};

struct PoincareResult {
  Vec fixed_point;
  double fixed_point_residual = 0.0;
  Mat jacobian;
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> moduli;  // descending
  double spectral_radius = 0.0;
  std::string section;
  std::vector<std::string> removed;
  std::vector<double> steps;
};

/// Central-difference Jacobian of the return map at a fixed point, with
/// per-coordinate step `rel_step * max(1, |z_i|)`.
PoincareResult stability_report(const ReturnMap& map, const Vec& z_star, double rel_step = 1e-6,
                                double residual_tol = 1e-6, const std::string& section = "entry of domain 1");

std::string stability_json(const PoincareResult& r, const std::string& metadata_json = "{}");

struct RefineResult {
  Gait gait;
  AgentState x_star;
  int iterations = 0;
  double residual = 0.0;
};

/// Single shooting on the quotient section coordinates, then resampling of
/// the gait splines along the converged cycle.
RefineResult refine_periodic(const RobotModel& model, const Gait& seed, const SingleControllerFactory& factory,
                             const AgentState& x_guess, double tol = 1e-8, int max_iter = 50,
                             const ExecutorConfig& cfg = {});

/// Rebuilds the gait knots from a recorded cycle starting at entry of domain 0.
Gait resample_gait(const RobotModel& model, const Gait& seed, const TrajectoryLog& cycle);

struct AuditReport {
  double max_contact_drift = 0.0;  // stance foot displacement since touchdown
  double max_bar_drift = 0.0;      // | |p1 - p2| - L |
  double energy_residual = 0.0;    // |E(T) - E(0) - work of the inputs|, no impacts
  double max_lambda_e_ratio = 0.0; // |lambda_e| |p1 - p2| / agent weight
  int contact_force_flags = 0;
  std::vector<double> output_norm_per_stride;
};

AuditReport audits(const TrajectoryLog& log, const RobotModel& model, const std::optional<double>& bar_length,
                   const Gait* gait = nullptr);

std::string audit_json(const AuditReport& r);

}  // namespace coopgait
