#include "coopgait/kinematics.hpp"

#include <Eigen/Geometry>

namespace coopgait {

LinkFrames forward_kinematics(const RobotModel& model, const Vec& q) {
  const auto& links = model.links();
  LinkFrames f;
  f.rotation.resize(links.size());
  f.origin.resize(links.size());
  f.axis.resize(links.size());
  for (size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    const Mat3 rp = l.parent < 0 ? Mat3::Identity() : f.rotation[l.parent];
    const Vec3 op = l.parent < 0 ? Vec3::Zero() : f.origin[l.parent];
    Vec3 o = op + rp * l.origin;
    Mat3 r = rp;
    f.axis[i] = rp * l.axis;
    if (l.type == JointType::kRevolute) {
      r = rp * Eigen::AngleAxisd(q[l.q_index], l.axis).toRotationMatrix();
    } else if (l.type == JointType::kPrismatic) {
      o += f.axis[i] * q[l.q_index];
    }
    f.rotation[i] = r;
    f.origin[i] = o;
  }
  return f;
}

namespace {

// Visits every actuated-or-passive joint on the path from `link` to the root.
template <typename Fn>
void for_each_ancestor_joint(const RobotModel& model, int link, Fn&& fn) {
  const auto& links = model.links();
  for (int i = link; i >= 0; i = links[i].parent)
    if (links[i].q_index >= 0) fn(i);
}

Mat jacobian_at(const RobotModel& model, const LinkFrames& f, int link, const Vec3& p) {
  Mat jac = Mat::Zero(3, model.dof());
  const auto& links = model.links();
  for_each_ancestor_joint(model, link, [&](int i) {
    if (links[i].type == JointType::kRevolute)
      jac.col(links[i].q_index) = f.axis[i].cross(p - f.origin[i]);
    else
      jac.col(links[i].q_index) = f.axis[i];
  });
  return jac;
}

}  // namespace

Vec3 point_position(const RobotModel& model, const Vec& q, const BodyPoint& point) {
  const LinkFrames f = forward_kinematics(model, q);
  return f.origin[point.link] + f.rotation[point.link] * point.offset;
}

Vec3 point_position(const RobotModel& model, const Vec& q, const std::string& point_id) {
  return point_position(model, q, model.point(point_id));
}

Mat point_jacobian(const RobotModel& model, const Vec& q, const BodyPoint& point) {
  const LinkFrames f = forward_kinematics(model, q);
  const Vec3 p = f.origin[point.link] + f.rotation[point.link] * point.offset;
  return jacobian_at(model, f, point.link, p);
}

Mat point_jacobian(const RobotModel& model, const Vec& q, const std::string& point_id) {
  return point_jacobian(model, q, model.point(point_id));
}

Mat angular_jacobian(const RobotModel& model, const LinkFrames& f, int link) {
  Mat jac = Mat::Zero(3, model.dof());
  const auto& links = model.links();
  for_each_ancestor_joint(model, link, [&](int i) {
    if (links[i].type == JointType::kRevolute) jac.col(links[i].q_index) = f.axis[i];
  });
  return jac;
}

Vec3 jdot_v(const RobotModel& model, const Vec& q, const Vec& v, const BodyPoint& point) {
  // Classical velocity/acceleration recursion in world coordinates with zero
  // joint accelerations: the point acceleration is exactly Jdot * v.
  const LinkFrames f = forward_kinematics(model, q);
  const auto& links = model.links();
  const size_t nl = links.size();
  std::vector<Vec3> w(nl), vel(nl), alpha(nl), acc(nl);
  for (size_t i = 0; i < nl; ++i) {
    const Link& l = links[i];
    const Vec3 wp = l.parent < 0 ? Vec3::Zero() : w[l.parent];
    const Vec3 vp = l.parent < 0 ? Vec3::Zero() : vel[l.parent];
    const Vec3 ap = l.parent < 0 ? Vec3::Zero() : alpha[l.parent];
    const Vec3 accp = l.parent < 0 ? Vec3::Zero() : acc[l.parent];
    const Vec3 op = l.parent < 0 ? Vec3::Zero() : f.origin[l.parent];
    const Vec3 r = f.origin[i] - op;
    const double qd = l.q_index >= 0 ? v[l.q_index] : 0.0;
    w[i] = wp;
    vel[i] = vp + wp.cross(r);
    alpha[i] = ap;
    acc[i] = accp + ap.cross(r) + wp.cross(wp.cross(r));
    if (l.type == JointType::kRevolute) {
      w[i] += f.axis[i] * qd;
      alpha[i] += wp.cross(f.axis[i] * qd);
    } else if (l.type == JointType::kPrismatic) {
      vel[i] += f.axis[i] * qd;
      acc[i] += 2.0 * wp.cross(f.axis[i] * qd);
    }
  }
  const int k = point.link;
  const Vec3 d = f.rotation[k] * point.offset;
  return acc[k] + alpha[k].cross(d) + w[k].cross(w[k].cross(d));
}

Vec3 jdot_v(const RobotModel& model, const Vec& q, const Vec& v, const std::string& point_id) {
  return jdot_v(model, q, v, model.point(point_id));
}

}  // namespace coopgait
