#pragma once

#include "coopgait/model.hpp"

namespace coopgait {

/// Vector-valued clamped cubic spline on increasing knots. Reproduces any
/// cubic polynomial exactly when given its end slopes.
class ClampedSpline {
 public:
  ClampedSpline() = default;
  /// values: K x dim, slopes: 2 x dim (derivative at the first and last knot).
  ClampedSpline(Vec knots, Mat values, Mat slopes);

  int dim() const { return static_cast<int>(values_.cols()); }
  const Vec& knots() const { return knots_; }
  const Mat& values() const { return values_; }
  const Mat& slopes() const { return slopes_; }

  Vec value(double t) const;
  Vec derivative(double t) const;
  Vec second_derivative(double t) const;
  /// Integral from the first knot to t.
  Vec integral(double t) const;

 private:
  int segment(double t) const;

  Vec knots_;
  Mat values_;
  Mat slopes_;
  Mat second_;  // K x dim second derivatives at the knots
};

/// K uniform knots on [0, 1].
Vec uniform_knots(int k);

}  // namespace coopgait
