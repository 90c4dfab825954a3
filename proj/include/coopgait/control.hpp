#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "coopgait/dynamics.hpp"
#include "coopgait/gait.hpp"
#include "coopgait/qp.hpp"

namespace coopgait {

/// Phase within a domain. `held` is set once the nominal duration has
/// elapsed; desired values then hold and their rates vanish.
struct Phase {
  int domain = 0;
  double tau = 0.0;
  bool held = false;
};

Phase make_phase(int domain, double t_entry, double t, double duration);

struct OutputValues {
  double y_nh = 0.0;
  Vec y_h;
  Vec dy_h;
};

/// Speed output: forward velocity of the model's speed point.
double forward_speed(const RobotModel& model, const AgentState& x);

OutputValues virtual_constraints(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x);

struct IoTerms {
  Mat a;  // decoupling matrix
  Vec b;  // drift
  Vec e;  // PD stabilization
  OutputValues y;
};

struct ControllerParams {
  std::array<double, 3> xi{0.0, 0.0, 0.0};  // alpha, beta, gamma
  /// Per product-vertex overrides of xi, keyed by (v, w).
  std::map<std::pair<int, int>, std::array<double, 3>> xi_table;
  double kp = 100.0;
  double kd = 20.0;
  double qp_weight = 1e4;
  QpBounds bounds;

  std::array<double, 3> xi_at(int v, int w) const;
};

ControllerParams load_params(const std::string& text);
ControllerParams load_params_file(const std::string& path);
std::string save_params(const ControllerParams& p);

/// Output derivative terms of one domain given constrained accelerations
/// qdd = f_acc + g_acc u: ydot_nh and yddot_h equal A u + b.
IoTerms io_terms(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                 const AffineAccel& acc, const ControllerParams& params);
IoTerms io_terms(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                 const ControllerParams& params);

/// u = -A'(AA')^{-1}(b + e). Throws std::runtime_error if A loses rank.
Vec solve_min_norm(const Mat& a, const Vec& rhs);
Vec nominal_controller(const Gait& gait, const RobotModel& model, const Phase& ph, const AgentState& x,
                       const ControllerParams& params);

/// Signals shared between the agents.
struct AgentGlobals {
  double speed = 0.0;
  double pitch = 0.0;
  double pitch_rate = 0.0;
  double roll = 0.0;
  double roll_rate = 0.0;
};

struct MeasurableGlobals {
  AgentGlobals agent[2];
  int domain[2] = {0, 0};
};

AgentGlobals measure_agent(const RobotModel& model, const AgentState& x);
MeasurableGlobals measure_globals(const RobotModel& m1, const RobotModel& m2, const AugmentedState& xa, int v, int w);

/// Phase assumed for the other agent from domain indices alone: its own
/// phase when both share a domain, 0 when it is ahead, 1 when it is behind.
Phase other_agent_phase(const GaitGraph& g, const Phase& own, int w);

OutputValues modified_outputs(const Gait& gait, const RobotModel& model, const ControllerParams& params,
                              const Phase& own, const Phase& other, const AgentState& x, const AgentGlobals& theta_j);

struct ApproxCoupled {
  Mat d;      // D(q_i)
  Vec h_hat;  // bias including constraint forces at zero input
  Mat b_ii;
  Mat b_ij;
  Vec u_j_star;
  AgentState x_j_star;
  AffineAccel acc;  // qdd_i = f_acc + g_acc u_i with u_j = u_j_star
};

/// Desired state (horizontally re-centered) and feedforward input of the
/// other agent, memoized by (own phase, other phase). Entries depend only on
/// the gait, so controllers of one gait may share a memo.
struct OrbitMemo {
  using Key = std::tuple<int, double, int, double, bool>;
  std::map<Key, std::pair<AgentState, Vec>> entries;
};

/// Agent-i rows of the coupled dynamics with the other agent replaced by its
/// desired state (placed at offset d_ij from agent i) and feedforward input.
ApproxCoupled approx_coupled_dynamics(const RobotModel& model, const OrbitSampler& orbit, const Phase& own,
                                      const Phase& other, const AgentState& x_i, const Vec2& d_ij,
                                      const std::optional<BarConstraint>& bar, const ControllerParams& params,
                                      OrbitMemo* memo = nullptr);

/// Local controller of one agent. Keeps the QP warm-start cache.
class DistributedController {
 public:
  /// d_ij is the nominal position of the other agent relative to this one.
  DistributedController(const RobotModel& model, const Gait& gait, ControllerParams params, Vec2 d_ij,
                        std::optional<BarConstraint> bar, std::shared_ptr<OrbitMemo> memo = nullptr);

  struct Result {
    Vec u;
    Vec u_nom;
    Vec delta;
    QpSolution qp;
  };

  Result evaluate(const Phase& own, int w, const AgentState& x_i, const AgentGlobals& theta_j);
  Vec operator()(const Phase& own, int w, const AgentState& x_i, const AgentGlobals& theta_j) {
    return evaluate(own, w, x_i, theta_j).u;
  }
  const ControllerParams& params() const { return params_; }
  const OrbitSampler& orbit() const { return orbit_; }

 private:
  RobotModel model_;
  Gait gait_;
  OrbitSampler orbit_;
  ControllerParams params_;
  Vec2 d_ij_;
  std::optional<BarConstraint> bar_;
  std::vector<ActiveBound> warm_;
  std::shared_ptr<OrbitMemo> memo_;
};

/// Moves the horizontal base position to the origin.
AgentState recenter(const RobotModel& model, const AgentState& x);

}  // namespace coopgait
