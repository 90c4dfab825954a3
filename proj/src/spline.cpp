#include "coopgait/spline.hpp"

#include <stdexcept>

namespace coopgait {

Vec uniform_knots(int k) {
  Vec t(k);
  for (int i = 0; i < k; ++i) t[i] = static_cast<double>(i) / (k - 1);
  t[k - 1] = 1.0;
  return t;
}

ClampedSpline::ClampedSpline(Vec knots, Mat values, Mat slopes)
    : knots_(std::move(knots)), values_(std::move(values)), slopes_(std::move(slopes)) {
  const Eigen::Index k = knots_.size();
  if (k < 2 || values_.rows() != k || slopes_.rows() != 2 || slopes_.cols() != values_.cols())
    throw std::invalid_argument("spline: inconsistent knot data");
  for (Eigen::Index i = 1; i < k; ++i)
    if (!(knots_[i] > knots_[i - 1])) throw std::invalid_argument("spline: knots must increase");

  Mat a = Mat::Zero(k, k);
  Mat rhs(k, values_.cols());
  const double h0 = knots_[1] - knots_[0];
  a(0, 0) = 2 * h0;
  a(0, 1) = h0;
  rhs.row(0) = 6 * ((values_.row(1) - values_.row(0)) / h0 - slopes_.row(0));
  for (Eigen::Index i = 1; i + 1 < k; ++i) {
    const double hl = knots_[i] - knots_[i - 1];
    const double hr = knots_[i + 1] - knots_[i];
    a(i, i - 1) = hl;
    a(i, i) = 2 * (hl + hr);
    a(i, i + 1) = hr;
    rhs.row(i) = 6 * ((values_.row(i + 1) - values_.row(i)) / hr - (values_.row(i) - values_.row(i - 1)) / hl);
  }
  const double hn = knots_[k - 1] - knots_[k - 2];
  a(k - 1, k - 2) = hn;
  a(k - 1, k - 1) = 2 * hn;
  rhs.row(k - 1) = 6 * (slopes_.row(1) - (values_.row(k - 1) - values_.row(k - 2)) / hn);
  second_ = a.partialPivLu().solve(rhs);
}

int ClampedSpline::segment(double t) const {
  const int k = static_cast<int>(knots_.size());
  int i = 0;
  while (i + 2 < k && t > knots_[i + 1]) ++i;
  return i;
}

Vec ClampedSpline::value(double t) const {
  const int i = segment(t);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - t) / h;
  const double b = 1.0 - a;
  return (a * values_.row(i) + b * values_.row(i + 1) +
          ((a * a * a - a) * second_.row(i) + (b * b * b - b) * second_.row(i + 1)) * h * h / 6.0)
      .transpose();
}

Vec ClampedSpline::derivative(double t) const {
  const int i = segment(t);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - t) / h;
  const double b = 1.0 - a;
  return ((values_.row(i + 1) - values_.row(i)) / h - (3 * a * a - 1) / 6.0 * h * second_.row(i) +
          (3 * b * b - 1) / 6.0 * h * second_.row(i + 1))
      .transpose();
}

Vec ClampedSpline::second_derivative(double t) const {
  const int i = segment(t);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - t) / h;
  return (a * second_.row(i) + (1.0 - a) * second_.row(i + 1)).transpose();
}

Vec ClampedSpline::integral(double t) const {
  Vec total = Vec::Zero(dim());
  const int last = segment(t);
  for (int i = 0; i <= last; ++i) {
    const double h = knots_[i + 1] - knots_[i];
    const double b = i < last ? 1.0 : (t - knots_[i]) / h;
    const double a = 1.0 - b;
    const double ca = -a * a * a * a / 4 + a * a / 2 - 0.25;
    const double cb = b * b * b * b / 4 - b * b / 2;
    total += (h * ((b - b * b / 2) * values_.row(i) + (b * b / 2) * values_.row(i + 1)) +
              h * h * h / 6.0 * (ca * second_.row(i) + cb * second_.row(i + 1)))
                 .transpose();
  }
  return total;
}

}  // namespace coopgait
