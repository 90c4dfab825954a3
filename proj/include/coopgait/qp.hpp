#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "coopgait/model.hpp"

namespace coopgait {

/// min 1/2 x'Qx + c'x  s.t.  A_eq x = b_eq,  lo <= x <= hi.
struct QpProblem {
  Mat q;
  Vec c;
  Mat a_eq;
  Vec b_eq;
  Vec lo;
  Vec hi;

  int size() const { return static_cast<int>(c.size()); }
};

enum class BoundSide { kLower, kUpper };

struct ActiveBound {
  int index = 0;
  BoundSide side = BoundSide::kLower;
  bool operator==(const ActiveBound&) const = default;
};

/// Optimal point and multipliers. Stationarity reads
/// Q x + c = A_eq' y + z_lo - z_hi with z_lo, z_hi >= 0.
struct QpSolution {
  Vec x;
  Vec y;
  Vec z_lo;
  Vec z_hi;
  std::vector<ActiveBound> active;
  int iterations = 0;
  bool warm_started = false;
  double objective = 0.0;
};

/// Thrown when the equalities cannot be met inside the box. The message names
/// the constraint that could not be satisfied and its residual.
class QpInfeasible : public std::runtime_error {
 public:
  QpInfeasible(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class QpIterationLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dual active-set solver; Q must be positive definite. `warm` is tried
/// first and discarded if it is not optimal.
QpSolution solve_qp(const QpProblem& p, const std::vector<ActiveBound>& warm = {});

double qp_objective(const QpProblem& p, const Vec& x);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;          // equalities and bounds
  double complementarity = 0.0;
  double dual_sign = 0.0;       // most negative bound multiplier, as a positive number
};

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s);

struct QpBounds {
  double u_min = -200.0;
  double u_max = 200.0;
  double delta_min = -1e3;
  double delta_max = 1e3;
};

/// Decision vector (u, delta): min 1/2|u - u_nom|^2 + w/2 |delta|^2 subject to
/// A u + b + delta = -e and the boxes.
QpProblem build_controller_qp(const Vec& u_nom, const Mat& a, const Vec& b, const Vec& e, double qp_weight,
                              const QpBounds& bounds);

}  // namespace coopgait
