#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coopgait {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised for malformed model documents. The message starts with the
/// offending document path, e.g. "bodies[2].mass: must be positive".
class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class JointType { kFixed, kRevolute, kPrismatic, kFloatingPlanar, kFloatingSpatial };

/// Number of generalized coordinates contributed by a joint type.
int joint_dof(JointType type);

/// One single-DOF (or fixed) link of the internal kinematic tree. Multi-DOF
/// floating joints are expanded into chains of massless virtual links; only
/// the last link of a chain carries the body's inertia.
struct Link {
  std::string name;
  int parent = -1;  // -1 = world
  JointType type = JointType::kFixed;
  Vec3 origin = Vec3::Zero();  // joint location in the parent link frame
  Vec3 axis = Vec3::UnitZ();   // joint axis in the link frame
  int q_index = -1;            // -1 for fixed links
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // rotational inertia about the COM
};

struct BodyPoint {
  std::string name;
  int link = -1;  // index into RobotModel::links()
  Vec3 offset = Vec3::Zero();
};

struct BodySpec {
  std::string name;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
  std::string joint_name;
  JointType joint = JointType::kFixed;
  std::string parent;  // empty = world
  Vec3 origin = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
};

/// Kinematic tree with inertial data, named body-fixed points and the
/// actuation map. Immutable after construction.
class RobotModel {
 public:
  RobotModel() = default;

  /// Builds and validates a model. Throws ModelError on any violation.
  RobotModel(std::string name, Vec3 gravity, bool planar, const std::vector<BodySpec>& bodies,
             const std::vector<std::pair<std::string, std::pair<std::string, Vec3>>>& contacts,
             std::optional<std::pair<std::string, Vec3>> end_effector,
             std::optional<std::pair<std::string, Vec3>> speed_point,
             const std::vector<std::string>& actuated);

  const std::string& name() const { return name_; }
  const Vec3& gravity() const { return gravity_; }
  bool planar() const { return planar_; }
  int dof() const { return dof_; }
  int num_inputs() const { return static_cast<int>(actuated_q_.size()); }
  /// Rows per point constraint: 2 for planar models, 3 for spatial ones.
  int point_rows() const { return planar_ ? 2 : 3; }

  const std::vector<Link>& links() const { return links_; }
  const std::vector<BodyPoint>& contacts() const { return contacts_; }
  const BodyPoint& contact(const std::string& name) const;
  int contact_index(const std::string& name) const;
  bool has_end_effector() const { return end_effector_.has_value(); }
  const BodyPoint& end_effector() const;
  /// Point whose forward velocity is the speed output. Defaults to the
  /// origin of the first body.
  const BodyPoint& speed_point() const { return speed_point_; }
  /// Resolves a point id: a contact name, "end_effector" or "speed_point".
  const BodyPoint& point(const std::string& id) const;

  /// Input distribution matrix B (n x m), one unit column per actuated joint.
  const Mat& input_matrix() const { return input_matrix_; }
  const std::vector<int>& actuated_coordinates() const { return actuated_q_; }
  int coordinate_index(const std::string& joint_name) const;
  const std::vector<std::string>& coordinate_names() const { return coord_names_; }

  /// Indices of the base coordinates that translate along the walking
  /// surface (x for planar models, x and y for spatial ones). Empty for
  /// fixed-base models.
  const std::vector<int>& horizontal_coordinates() const { return horizontal_; }
  /// Index of the base pitch coordinate, or -1.
  int pitch_coordinate() const { return pitch_; }
  /// Index of the base roll coordinate, or -1 (planar models have none).
  int roll_coordinate() const { return roll_; }
  bool has_floating_base() const { return !horizontal_.empty(); }

  double total_mass() const;

  /// True when both models have identical structure and parameters.
  bool structurally_equal(const RobotModel& other) const;

 private:
  std::string name_;
  Vec3 gravity_ = Vec3::Zero();
  bool planar_ = false;
  int dof_ = 0;
  std::vector<Link> links_;
  std::map<std::string, int> body_link_;
  std::vector<BodyPoint> contacts_;
  std::optional<BodyPoint> end_effector_;
  BodyPoint speed_point_;
  std::vector<int> actuated_q_;
  Mat input_matrix_;
  std::vector<std::string> coord_names_;
  std::vector<int> horizontal_;
  int pitch_ = -1;
  int roll_ = -1;
};

/// Configuration and velocity of one agent.
struct AgentState {
  Vec q;
  Vec v;
};

struct AugmentedState {
  AgentState agent1;
  AgentState agent2;
};

/// Parses a model document (JSON, schema version 1). Throws ModelError with
/// the offending path on any schema or validity violation.
RobotModel load_model(const std::string& text);
RobotModel load_model_file(const std::string& path);

/// Checks dimensions, finiteness and the Euler-angle singularity.
void validate_state(const RobotModel& model, const AgentState& x);

}  // namespace coopgait
