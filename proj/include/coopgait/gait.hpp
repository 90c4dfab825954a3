#pragma once

#include <map>
#include <string>
#include <vector>

#include "coopgait/dynamics.hpp"
#include "coopgait/graph.hpp"
#include "coopgait/model.hpp"
#include "coopgait/spline.hpp"

namespace coopgait {

using Vec2 = Eigen::Vector2d;

/// Holonomic output matrices C_v per domain, with the speed output taken at
/// the model's speed point.
struct OutputSpec {
  std::vector<Mat> c;                            // rows_v x n
  std::vector<std::vector<std::string>> labels;  // one label per row
  int pitch_column = -1;
  int roll_column = -1;

  const Mat& matrix(int v) const { return c.at(static_cast<size_t>(v)); }
  /// Columns of C_v multiplying the base pitch and roll coordinates (zero
  /// vectors when the model has no such coordinate).
  Vec pitch_column_of(int v) const;
  Vec roll_column_of(int v) const;
  /// Coordinates selected by C_v when every row is a unit row; throws
  /// otherwise.
  std::vector<int> selected_coordinates(int v) const;
};

struct DomainTrajectory {
  double duration = 1.0;
  ClampedSpline q_star;  // K x n, in tau
  ClampedSpline s_star;  // K x 1, in tau
  ClampedSpline u_star;  // K x m, in tau (recorded feedforward)
};

struct Gait {
  std::string model_name;
  std::string provenance;
  GaitGraph graph;
  OutputSpec outputs;
  std::vector<DomainTrajectory> domains;
  AgentState x0;  // state at entry of domain 0

  int size() const { return graph.size(); }
  double period() const;
  /// Time from entry of domain 0 to entry of v along the cycle.
  double entry_time(int v) const;
  ContactSet contacts(const RobotModel& model, int v) const;
};

/// Scaled time within a domain, clamped to [0, 1].
double phase(double t_entry, double t, double duration);

/// Shifts the horizontal base position by d. Planar models move along x only
/// and reject a nonzero d[1].
AgentState translate(const RobotModel& model, const AgentState& x, const Vec2& d);

Gait load_gait(const std::string& text, const RobotModel& model);
Gait load_gait_file(const std::string& path, const RobotModel& model);
std::string save_gait(const Gait& gait, const RobotModel& model);

/// Fills in the coordinates not fixed by the outputs: stance legs hold the
/// footholds and the speed point sits at `speed_x` moving at `speed`.
AgentState complete_state(const RobotModel& model, const ContactSet& contacts,
                          const std::vector<Vec3>& footholds, const std::vector<int>& output_coords,
                          const Vec& q_out, const Vec& v_out, double speed_x, double speed, const Vec& q_guess);

/// Exact evaluation of the periodic orbit encoded by a gait: outputs follow
/// their splines, the speed point integrates s*, stance legs stay on their
/// footholds and touchdowns pass through the impact map.
class OrbitSampler {
 public:
  OrbitSampler(const RobotModel& model, const Gait& gait);

  AgentState state(int v, double tau) const;
  /// Periodic extension over all t; domain 0 is entered at t = 0.
  AgentState state_at_time(double t) const;
  int domain_at_time(double t, double* tau) const;
  const AgentState& entry_state(int v) const { return entry_.at(static_cast<size_t>(v)); }
  /// Horizontal base displacement per period.
  double stride() const { return stride_; }
  /// Mismatch between the state after one period (minus the stride) and x0.
  double closure_error() const { return closure_error_; }
  /// State reached at the end of domain v, after its outgoing reset.
  const AgentState& exit_state(int v) const { return exit_.at(static_cast<size_t>(v)); }
  const std::vector<Vec3>& footholds(int v) const { return footholds_.at(static_cast<size_t>(v)); }
  const RobotModel& model() const { return model_; }
  const Gait& gait() const { return gait_; }

 private:
  RobotModel model_;
  Gait gait_;
  std::vector<AgentState> entry_;
  std::vector<AgentState> exit_;
  std::vector<std::vector<Vec3>> footholds_;
  std::vector<double> speed_x0_;
  double stride_ = 0.0;
  double closure_error_ = 0.0;
};

/// Two-agent orbit: agent 1 on the gait, agent 2 its translate by d.
class LiftedOrbit {
 public:
  LiftedOrbit(const RobotModel& model, const Gait& gait, const Vec2& d);
  AugmentedState at(double t) const;
  AugmentedState at(int v, double tau) const;
  const OrbitSampler& sampler() const { return sampler_; }
  const Vec2& d() const { return d_; }
  /// End-effector distance implied by d and the end-effector geometry.
  double bar_length() const;

 private:
  OrbitSampler sampler_;
  Vec2 d_;
};

LiftedOrbit lift_orbit(const RobotModel& model, const Gait& gait, const Vec2& d);

}  // namespace coopgait
