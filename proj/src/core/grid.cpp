#include "apex/core/grid.hpp"

#include <string>

#include "apex/core/errors.hpp"

namespace apex {

SampleGrid make_sample_grid(std::size_t n_points) {
  if (n_points < 2) {
    throw InvalidArgument("sample grid needs at least 2 points, got " + std::to_string(n_points),
                          "n_points");
  }
  std::vector<double> xs(n_points);
  const double denom = static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) xs[i] = static_cast<double>(i) / denom;
  return SampleGrid(std::move(xs));
}

}  // namespace apex
