#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace apex {

inline constexpr std::size_t kMinKnots = 4;
inline constexpr std::size_t kMaxKnots = 32;

// Equally spaced knots on [0,1] with y-values in [0,1].
struct ControlPoints {
  std::vector<double> knot_xs;
  std::vector<double> knot_ys;

  std::size_t count() const noexcept { return knot_xs.size(); }

  // knot_xs[j] = j / (c - 1) for the given ys.
  static ControlPoints equally_spaced(std::vector<double> ys);
};

// Throws InvalidArgument unless 4 <= c <= 32, xs run strictly increasing from
// 0 to 1, and every y lies in [0,1].
void validate_control_points(const ControlPoints& knots);

// Interpolating cubic with zero second derivative at both end knots.
class NaturalCubicSpline {
 public:
  // Needs at least two strictly increasing knots.
  NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys);

  // Returns the knot value exactly when x coincides with a knot.
  double operator()(double x) const;

  std::span<const double> second_derivatives() const noexcept { return m_; }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> m_;
};

// Natural cubic spline through `knots`, evaluated at each query.
// Throws InvalidArgument for invalid knots or a query outside [0,1].
std::vector<double> spline_interpolate(const ControlPoints& knots,
                                       std::span<const double> query_xs);

}  // namespace apex
