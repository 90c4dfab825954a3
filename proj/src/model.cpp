#include "coopgait/model.hpp"

#include <cmath>
#include <set>

namespace coopgait {

int joint_dof(JointType type) {
  switch (type) {
    case JointType::kFixed:
      return 0;
    case JointType::kRevolute:
    case JointType::kPrismatic:
      return 1;
    case JointType::kFloatingPlanar:
      return 3;
    case JointType::kFloatingSpatial:
      return 6;
  }
  return 0;
}

namespace {

std::string body_path(size_t i) { return "bodies[" + std::to_string(i) + "]"; }

void check_inertia(const Mat3& inertia, const std::string& path) {
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ModelError(path + ".inertia", "must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (eig.eigenvalues().minCoeff() < -1e-12)
    throw ModelError(path + ".inertia", "must be positive semidefinite");
}

}  // namespace

RobotModel::RobotModel(std::string name, Vec3 gravity, bool planar,
                       const std::vector<BodySpec>& bodies,
                       const std::vector<std::pair<std::string, std::pair<std::string, Vec3>>>& contacts,
                       std::optional<std::pair<std::string, Vec3>> end_effector,
                       std::optional<std::pair<std::string, Vec3>> speed_point,
                       const std::vector<std::string>& actuated)
    : name_(std::move(name)), gravity_(gravity), planar_(planar) {
  if (bodies.empty()) throw ModelError("bodies", "at least one body is required");

  std::map<std::string, size_t> by_name;
  for (size_t i = 0; i < bodies.size(); ++i) {
    const auto& b = bodies[i];
    if (b.name.empty()) throw ModelError(body_path(i) + ".name", "must not be empty");
    if (!by_name.emplace(b.name, i).second)
      throw ModelError(body_path(i) + ".name", "duplicate body '" + b.name + "'");
    if (!(b.mass > 0.0) || !std::isfinite(b.mass))
      throw ModelError(body_path(i) + ".mass", "nonpositive mass");
    check_inertia(b.inertia, body_path(i));
    if ((b.joint == JointType::kRevolute || b.joint == JointType::kPrismatic) &&
        std::abs(b.axis.norm() - 1.0) > 1e-9)
      throw ModelError(body_path(i) + ".joint.axis", "must be a unit vector");
  }

  // Parent resolution and cycle detection.
  std::vector<int> parent(bodies.size(), -1);
  for (size_t i = 0; i < bodies.size(); ++i) {
    const auto& p = bodies[i].parent;
    if (p.empty()) continue;
    auto it = by_name.find(p);
    if (it == by_name.end())
      throw ModelError(body_path(i) + ".joint.parent", "unknown parent '" + p + "'");
    parent[i] = static_cast<int>(it->second);
  }
  for (size_t i = 0; i < bodies.size(); ++i) {
    std::set<int> seen;
    int cur = static_cast<int>(i);
    while (cur != -1) {
      if (!seen.insert(cur).second) throw ModelError(body_path(i) + ".joint.parent", "cyclic tree");
      cur = parent[cur];
    }
  }
  for (size_t i = 0; i < bodies.size(); ++i) {
    const bool floating = bodies[i].joint == JointType::kFloatingPlanar ||
                          bodies[i].joint == JointType::kFloatingSpatial;
    if (floating && parent[i] != -1)
      throw ModelError(body_path(i) + ".joint", "floating joints must attach to the world");
    if (floating && (bodies[i].joint == JointType::kFloatingPlanar) != planar_)
      throw ModelError(body_path(i) + ".joint.type", "base type does not match model planarity");
  }

  // Topological order: parents first, otherwise document order.
  std::vector<size_t> order;
  std::vector<bool> placed(bodies.size(), false);
  while (order.size() < bodies.size()) {
    for (size_t i = 0; i < bodies.size(); ++i) {
      if (placed[i]) continue;
      if (parent[i] == -1 || placed[parent[i]]) {
        order.push_back(i);
        placed[i] = true;
      }
    }
  }

  // Expand bodies into single-DOF links.
  int q = 0;
  for (size_t i : order) {
    const auto& b = bodies[i];
    const int parent_link = parent[i] == -1 ? -1 : body_link_.at(bodies[parent[i]].name);
    const std::string jname = b.joint_name.empty() ? b.name : b.joint_name;
    auto add_link = [&](const std::string& lname, int plink, JointType type, const Vec3& origin,
                        const Vec3& axis, bool carries_body) {
      Link link;
      link.name = lname;
      link.parent = plink;
      link.type = type;
      link.origin = origin;
      link.axis = axis;
      if (type != JointType::kFixed) {
        link.q_index = q++;
        coord_names_.push_back(lname);
      }
      if (carries_body) {
        link.mass = b.mass;
        link.com = b.com;
        link.inertia = b.inertia;
      }
      links_.push_back(link);
      return static_cast<int>(links_.size()) - 1;
    };

    int last = -1;
    switch (b.joint) {
      case JointType::kFloatingPlanar: {
        const int base_q = q;
        int l = add_link(jname + "/x", -1, JointType::kPrismatic, b.origin, Vec3::UnitX(), false);
        l = add_link(jname + "/y", l, JointType::kPrismatic, Vec3::Zero(), Vec3::UnitY(), false);
        last = add_link(jname + "/pitch", l, JointType::kRevolute, Vec3::Zero(), Vec3::UnitZ(), true);
        horizontal_ = {base_q};
        pitch_ = base_q + 2;
        break;
      }
      case JointType::kFloatingSpatial: {
        // q order: x, y, z, roll, pitch, yaw; the chain applies yaw, pitch, roll.
        const int base_q = q;
        int l = add_link(jname + "/x", -1, JointType::kPrismatic, b.origin, Vec3::UnitX(), false);
        l = add_link(jname + "/y", l, JointType::kPrismatic, Vec3::Zero(), Vec3::UnitY(), false);
        l = add_link(jname + "/z", l, JointType::kPrismatic, Vec3::Zero(), Vec3::UnitZ(), false);
        q += 3;  // reserve roll, pitch, yaw
        l = add_link(jname + "/yaw", l, JointType::kFixed, Vec3::Zero(), Vec3::UnitZ(), false);
        links_[l].type = JointType::kRevolute;
        links_[l].q_index = base_q + 5;
        l = add_link(jname + "/pitch", l, JointType::kFixed, Vec3::Zero(), Vec3::UnitY(), false);
        links_[l].type = JointType::kRevolute;
        links_[l].q_index = base_q + 4;
        last = add_link(jname + "/roll", l, JointType::kFixed, Vec3::Zero(), Vec3::UnitX(), true);
        links_[last].type = JointType::kRevolute;
        links_[last].q_index = base_q + 3;
        coord_names_.push_back(jname + "/roll");
        coord_names_.push_back(jname + "/pitch");
        coord_names_.push_back(jname + "/yaw");
        horizontal_ = {base_q, base_q + 1};
        roll_ = base_q + 3;
        pitch_ = base_q + 4;
        break;
      }
      default:
        last = add_link(jname, parent_link, b.joint, b.origin, b.axis.normalized(), true);
        break;
    }
    body_link_[b.name] = last;
  }
  dof_ = q;

  auto resolve = [&](const std::string& path, const std::string& pname, const std::string& body,
                     const Vec3& offset) {
    auto it = body_link_.find(body);
    if (it == body_link_.end()) throw ModelError(path + ".body", "unknown body '" + body + "'");
    return BodyPoint{pname, it->second, offset};
  };
  std::set<std::string> contact_names;
  for (size_t i = 0; i < contacts.size(); ++i) {
    const std::string path = "contacts[" + std::to_string(i) + "]";
    if (!contact_names.insert(contacts[i].first).second)
      throw ModelError(path + ".name", "duplicate contact '" + contacts[i].first + "'");
    contacts_.push_back(resolve(path, contacts[i].first, contacts[i].second.first, contacts[i].second.second));
  }
  if (end_effector)
    end_effector_ = resolve("end_effector", "end_effector", end_effector->first, end_effector->second);
  if (speed_point)
    speed_point_ = resolve("speed_point", "speed_point", speed_point->first, speed_point->second);
  else
    speed_point_ = BodyPoint{"speed_point", body_link_.at(bodies[order.front()].name), Vec3::Zero()};

  input_matrix_ = Mat::Zero(dof_, static_cast<Eigen::Index>(actuated.size()));
  std::set<int> used;
  for (size_t k = 0; k < actuated.size(); ++k) {
    const std::string path = "actuated[" + std::to_string(k) + "]";
    int idx = -1;
    for (const auto& link : links_)
      if (link.name == actuated[k] && link.q_index >= 0) idx = link.q_index;
    if (idx < 0) throw ModelError(path, "unknown or non-actuable joint '" + actuated[k] + "'");
    if (!used.insert(idx).second) throw ModelError(path, "joint actuated twice");
    actuated_q_.push_back(idx);
    input_matrix_(idx, static_cast<Eigen::Index>(k)) = 1.0;
  }
}

const BodyPoint& RobotModel::contact(const std::string& name) const {
  return contacts_.at(static_cast<size_t>(contact_index(name)));
}

int RobotModel::contact_index(const std::string& name) const {
  for (size_t i = 0; i < contacts_.size(); ++i)
    if (contacts_[i].name == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown point '" + name + "'");
}

const BodyPoint& RobotModel::end_effector() const {
  if (!end_effector_) throw std::invalid_argument("model '" + name_ + "' has no end effector");
  return *end_effector_;
}

const BodyPoint& RobotModel::point(const std::string& id) const {
  if (id == "end_effector") return end_effector();
  if (id == "speed_point") return speed_point_;
  return contact(id);
}

int RobotModel::coordinate_index(const std::string& joint_name) const {
  for (size_t i = 0; i < coord_names_.size(); ++i)
    if (coord_names_[i] == joint_name) return static_cast<int>(i);
  throw std::invalid_argument("unknown coordinate '" + joint_name + "'");
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& l : links_) m += l.mass;
  return m;
}

bool RobotModel::structurally_equal(const RobotModel& o) const {
  if (planar_ != o.planar_ || dof_ != o.dof_ || links_.size() != o.links_.size() ||
      contacts_.size() != o.contacts_.size() || actuated_q_ != o.actuated_q_ || gravity_ != o.gravity_)
    return false;
  for (size_t i = 0; i < links_.size(); ++i) {
    const auto& a = links_[i];
    const auto& b = o.links_[i];
    if (a.parent != b.parent || a.type != b.type || a.q_index != b.q_index || a.origin != b.origin ||
        a.axis != b.axis || a.mass != b.mass || a.com != b.com || a.inertia != b.inertia)
      return false;
  }
  for (size_t i = 0; i < contacts_.size(); ++i)
    if (contacts_[i].link != o.contacts_[i].link || contacts_[i].offset != o.contacts_[i].offset) return false;
  if (end_effector_.has_value() != o.end_effector_.has_value()) return false;
  if (end_effector_ && (end_effector_->link != o.end_effector_->link || end_effector_->offset != o.end_effector_->offset))
    return false;
  return true;
}

void validate_state(const RobotModel& model, const AgentState& x) {
  if (x.q.size() != model.dof() || x.v.size() != model.dof())
    throw std::invalid_argument("state dimension does not match model '" + model.name() + "'");
  if (!x.q.allFinite() || !x.v.allFinite()) throw std::invalid_argument("state has non-finite entries");
  if (!model.planar() && model.pitch_coordinate() >= 0 &&
      std::abs(std::cos(x.q[model.pitch_coordinate()])) < 1e-6)
    throw std::invalid_argument("base pitch at the roll-pitch-yaw singularity (|pitch| = pi/2)");
}

}  // namespace coopgait
