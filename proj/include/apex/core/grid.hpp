#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace apex {

inline constexpr std::size_t kDefaultGridPoints = 1024;

// Fixed abscissae shared by every curve: xs[i] = i / (n - 1).
class SampleGrid {
 public:
  std::size_t size() const noexcept { return xs_.size(); }
  std::span<const double> xs() const noexcept { return xs_; }
  double operator[](std::size_t i) const { return xs_[i]; }

 private:
  friend SampleGrid make_sample_grid(std::size_t n_points);
  explicit SampleGrid(std::vector<double> xs) : xs_(std::move(xs)) {}
  std::vector<double> xs_;
};

// Throws InvalidArgument when n_points < 2.
SampleGrid make_sample_grid(std::size_t n_points = kDefaultGridPoints);

}  // namespace apex
