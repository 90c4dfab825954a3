#pragma once

#include <string>

#include "coopgait/control.hpp"
#include "coopgait/gait.hpp"
#include "coopgait/model.hpp"

namespace coopgait::fixtures {

/// Sagittal-plane quadruped: planar torso, four two-link legs (LH, LF, RH,
/// RF; left and right legs overlap in the plane), a bar mount above the torso.
struct PlanarQuadrupedOptions {
  double torso_mass = 10.0;
  double torso_inertia = 0.3;
  double mount_height = 0.45;
  double speed_point_height = -0.2;
};

std::string planar_quadruped_json(const PlanarQuadrupedOptions& opt = {});
RobotModel planar_quadruped(const PlanarQuadrupedOptions& opt = {});

/// Placeholder quadruped with a 6-DOF arm on a spatial base: 6 + 12 + 6
/// coordinates, 18 actuators. Parameters are rough and only meant for sizing.
std::string quadruped_arm_json();
RobotModel quadruped_arm();

/// Fixed-base planar chain of `links` revolute joints (lengths 1, 0.8, 0.6)
/// with point-like masses at the distal ends plus a small rotational inertia.
std::string pendulum_json(int links);
RobotModel pendulum(int links);

struct GaitOptions {
  double speed = 0.2;
  double stance_duration = 0.1;  // four-contact domains
  double swing_duration = 0.2;
  double hip = 0.4;
  double knee = -0.8;
  double step_ahead = 0.1;     // touchdown point ahead of the hip
  double touchdown_speed = 0.2;
  int knots = 8;
};

/// Trot-free walking gait on the planar quadruped: four-contact domains
/// alternate with single-leg swings in the order LH, LF, RH, RF. Touchdowns
/// are impacts, liftoffs identity resets, all guards phase-complete. The
/// design splines are the periodic orbit; u_star holds nominal inputs on it.
Gait planar_gait(const RobotModel& model, const GaitOptions& opt = {}, const ControllerParams& params = {});

/// Tuned coupling parameters for the two-agent planar scenario.
ControllerParams tuned_params();

/// Offset of agent 2 relative to agent 1 in the planar scenario (tandem).
Vec2 planar_offset();

}  // namespace coopgait::fixtures
