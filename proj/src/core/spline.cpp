#include "apex/core/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "apex/core/errors.hpp"

namespace apex {

ControlPoints ControlPoints::equally_spaced(std::vector<double> ys) {
  ControlPoints out;
  const std::size_t c = ys.size();
  out.knot_xs.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    out.knot_xs[j] = c > 1 ? static_cast<double>(j) / static_cast<double>(c - 1) : 0.0;
  }
  out.knot_ys = std::move(ys);
  return out;
}

void validate_control_points(const ControlPoints& knots) {
  const std::size_t c = knots.count();
  if (c < kMinKnots || c > kMaxKnots) {
    throw InvalidArgument("knot count " + std::to_string(c) + " outside [4, 32]", "c");
  }
  if (knots.knot_ys.size() != c) throw InvalidArgument("knot xs and ys differ in length");
  if (knots.knot_xs.front() != 0.0 || knots.knot_xs.back() != 1.0) {
    throw InvalidArgument("knots must span [0,1]");
  }
  for (std::size_t j = 1; j < c; ++j) {
    if (!(knots.knot_xs[j] > knots.knot_xs[j - 1])) {
      throw InvalidArgument("knot xs must be strictly increasing");
    }
  }
  for (double y : knots.knot_ys) {
    if (!(y >= 0.0 && y <= 1.0)) throw InvalidArgument("knot y outside [0,1]");
  }
}

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> xs, std::span<const double> ys)
    : xs_(xs.begin(), xs.end()), ys_(ys.begin(), ys.end()), m_(xs.size(), 0.0) {
  const std::size_t n = xs_.size();
  if (n < 2 || ys_.size() != n) throw InvalidArgument("spline needs >= 2 knots with matching ys");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(xs_[i] > xs_[i - 1])) throw InvalidArgument("spline knots must be strictly increasing");
  }
  if (n == 2) return;

  // Thomas sweep over the interior second derivatives; M[0] = M[n-1] = 0.
  const std::size_t interior = n - 2;
  std::vector<double> diag(interior), upper(interior), rhs(interior);
  for (std::size_t r = 0; r < interior; ++r) {
    const std::size_t i = r + 1;
    const double h0 = xs_[i] - xs_[i - 1];
    const double h1 = xs_[i + 1] - xs_[i];
    diag[r] = 2.0 * (h0 + h1);
    upper[r] = h1;
    rhs[r] = 6.0 * ((ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0);
  }
  for (std::size_t r = 1; r < interior; ++r) {
    const double lower = xs_[r + 1] - xs_[r];
    const double w = lower / diag[r - 1];
    diag[r] -= w * upper[r - 1];
    rhs[r] -= w * rhs[r - 1];
  }
  m_[interior] = rhs[interior - 1] / diag[interior - 1];
  for (std::size_t r = interior - 1; r-- > 0;) {
    m_[r + 1] = (rhs[r] - upper[r] * m_[r + 2]) / diag[r];
  }
}

double NaturalCubicSpline::operator()(double x) const {
  const std::size_t n = xs_.size();
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
  if (i < n && xs_[i] == x) return ys_[i];
  i = std::min(i, n - 2);

  const double h = xs_[i + 1] - xs_[i];
  const double a = xs_[i + 1] - x;
  const double b = x - xs_[i];
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
         (ys_[i] / h - m_[i] * h / 6.0) * a + (ys_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

std::vector<double> spline_interpolate(const ControlPoints& knots,
                                       std::span<const double> query_xs) {
  validate_control_points(knots);
  for (double x : query_xs) {
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("spline query outside [0,1]", "query_xs");
  }
  const NaturalCubicSpline spline(knots.knot_xs, knots.knot_ys);
  std::vector<double> out(query_xs.size());
  std::transform(query_xs.begin(), query_xs.end(), out.begin(), [&](double x) { return spline(x); });
  return out;
}

}  // namespace apex
