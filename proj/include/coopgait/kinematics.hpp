#pragma once

#include <string>
#include <vector>

#include "coopgait/model.hpp"

namespace coopgait {

/// World poses of every link for one configuration.
struct LinkFrames {
  std::vector<Mat3> rotation;  // world <- link
  std::vector<Vec3> origin;    // world position of the link frame origin
  std::vector<Vec3> axis;      // joint axis in world coordinates
};

LinkFrames forward_kinematics(const RobotModel& model, const Vec& q);

Vec3 point_position(const RobotModel& model, const Vec& q, const BodyPoint& point);
Vec3 point_position(const RobotModel& model, const Vec& q, const std::string& point_id);

/// 3 x n Jacobian of a body-fixed point.
Mat point_jacobian(const RobotModel& model, const Vec& q, const BodyPoint& point);
Mat point_jacobian(const RobotModel& model, const Vec& q, const std::string& point_id);

/// d/dt(J) * v, i.e. the point acceleration at zero generalized acceleration.
Vec3 jdot_v(const RobotModel& model, const Vec& q, const Vec& v, const BodyPoint& point);
Vec3 jdot_v(const RobotModel& model, const Vec& q, const Vec& v, const std::string& point_id);

/// Angular velocity Jacobian (3 x n) of a link.
Mat angular_jacobian(const RobotModel& model, const LinkFrames& frames, int link);

}  // namespace coopgait
