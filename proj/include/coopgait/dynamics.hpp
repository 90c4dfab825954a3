#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopgait/kinematics.hpp"
#include "coopgait/model.hpp"

namespace coopgait {

/// Raised when a constrained solve is ill-posed (rank-deficient constraint
/// Jacobian, coincident bar end points).
class DynamicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DynamicsTerms {
  Mat mass;   // D(q)
  Vec bias;   // H(q, qdot)
  Mat input;  // B
};

/// Active point contacts of a domain, by index into RobotModel::contacts().
struct ContactSet {
  std::vector<int> points;
  /// Optional world anchor per point, used only by position-level Baumgarte
  /// terms. Empty means "no position feedback".
  std::vector<Vec3> anchors;

  bool empty() const { return points.empty(); }
  std::string describe(const RobotModel& model) const;
};

ContactSet make_contact_set(const RobotModel& model, const std::vector<std::string>& names);

/// Stacked contact Jacobian (2 rows per point for planar models, 3 otherwise).
Mat contact_jacobian(const RobotModel& model, const ContactSet& contacts, const Vec& q);
Vec contact_jdot_v(const RobotModel& model, const ContactSet& contacts, const Vec& q, const Vec& v);
Vec contact_positions(const RobotModel& model, const ContactSet& contacts, const Vec& q);

/// Massless bar joining the two end effectors; the distance stays constant.
struct BarConstraint {
  double length = 1.0;
};

/// Constraint stabilization gains. Off unless `enabled`.
struct Baumgarte {
  bool enabled = false;
  double omega = 50.0;
  double zeta = 1.0;
};

Mat mass_matrix(const RobotModel& model, const Vec& q);
Vec bias_vector(const RobotModel& model, const Vec& q, const Vec& v);
/// Joint-space inverse dynamics: D(q) qdd + H(q, qd).
Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& v, const Vec& qdd);
DynamicsTerms dynamics_terms(const RobotModel& model, const Vec& q, const Vec& v);

double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& v);
double potential_energy(const RobotModel& model, const Vec& q);

struct ConstrainedAccel {
  Vec qdd;
  Vec lambda;  // stacked contact forces, ordered as the contact set
};

ConstrainedAccel constrained_fd(const RobotModel& model, const ContactSet& contacts, const AgentState& x,
                                const Vec& u, const Baumgarte& stab = {});

/// qdd = f_acc + g_acc * u for the contact-constrained dynamics of one domain.
struct AffineAccel {
  Vec f_acc;
  Mat g_acc;
};

AffineAccel affine_decomposition(const RobotModel& model, const ContactSet& contacts, const AgentState& x,
                                 const Baumgarte& stab = {});

struct ImpactResult {
  Vec v_plus;
  Vec impulse;
};

/// Plastic impact onto `new_contacts`; positions are unchanged.
ImpactResult impact_map(const RobotModel& model, const ContactSet& new_contacts, const AgentState& x_minus);

struct CoupledAccel {
  Vec qdd1, qdd2;
  Vec lambda1, lambda2;
  double lambda_e = 0.0;
};

/// Two agents joined by an optional bar between their end effectors. With
/// no bar the agents are solved independently.
CoupledAccel coupled_fd(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1, const ContactSet& c2,
                        const AugmentedState& xa, const Vec& u1, const Vec& u2,
                        const std::optional<BarConstraint>& bar, const Baumgarte& stab = {});

struct CoupledImpact {
  Vec v1_plus, v2_plus;
  Vec impulse1, impulse2;
  double impulse_e = 0.0;
};

/// Impulsive solve with the extended contact sets of both agents (the
/// post-transition set for an agent that switches, its current set
/// otherwise).
CoupledImpact coupled_impact(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1_hat,
                             const ContactSet& c2_hat, const AugmentedState& xa_minus,
                             const std::optional<BarConstraint>& bar);

/// Agent-1 accelerations of the coupled system as an affine map of both
/// inputs: qdd1 = f1 + g11 u1 + g12 u2.
struct CoupledAffine {
  Vec f1;
  Mat g11;
  Mat g12;
};

CoupledAffine coupled_affine(const RobotModel& m1, const RobotModel& m2, const ContactSet& c1, const ContactSet& c2,
                             const AugmentedState& xa, const std::optional<BarConstraint>& bar,
                             const Baumgarte& stab = {});

/// End-effector separation p1 - p2 and its rate.
struct BarGeometry {
  Vec3 delta;
  Vec3 delta_dot;
  Mat j1, j2;  // end-effector Jacobians
  Vec3 jdv1, jdv2;
};

BarGeometry bar_geometry(const RobotModel& m1, const RobotModel& m2, const AugmentedState& xa);

}  // namespace coopgait
