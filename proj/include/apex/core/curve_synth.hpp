#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "apex/core/grid.hpp"
#include "apex/core/rng.hpp"
#include "apex/core/spline.hpp"
#include "apex/core/types.hpp"

namespace apex {

// c uniform on {4..32}, then c knot heights uniform on [0,1].
template <UniformSource S>
ControlPoints sample_control_points(S& source) {
  const auto c = static_cast<std::size_t>(source.uniform_int(static_cast<std::int64_t>(kMinKnots),
                                                             static_cast<std::int64_t>(kMaxKnots)));
  std::vector<double> ys(c);
  for (auto& y : ys) y = static_cast<double>(source.uniform01());
  return ControlPoints::equally_spaced(std::move(ys));
}

// Random ground-truth curve: natural spline through random knots, sampled on
// the grid and clamped to [0,1] (the spline may overshoot between knots).
template <UniformSource S>
NormalizedCurve generate_curve(S& source, const SampleGrid& grid) {
  const ControlPoints knots = sample_control_points(source);
  NormalizedCurve curve{spline_interpolate(knots, grid.xs())};
  for (auto& y : curve.ys) y = std::clamp(y, 0.0, 1.0);
  return curve;
}

}  // namespace apex
