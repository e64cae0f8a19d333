#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "apex/core/grid.hpp"

namespace apex {

inline constexpr std::size_t kDefaultMaxPlots = 10;

// y-values of one curve on the sample grid.
struct NormalizedCurve {
  std::vector<double> ys;

  std::size_t size() const noexcept { return ys.size(); }
  double operator[](std::size_t i) const { return ys[i]; }
};

// RGB raster, row-major HWC, channel values in [0,1].
struct PlotImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  PlotImage() = default;
  PlotImage(std::size_t h, std::size_t w, float fill = 1.0f)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  bool empty() const noexcept { return height == 0 || width == 0; }
  float at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[(row * width + col) * 3 + ch];
  }
  float& at(std::size_t row, std::size_t col, std::size_t ch) {
    return pixels[(row * width + col) * 3 + ch];
  }
};

// Model output: K̂ candidate curves and their confidence scores.
struct PredictionSet {
  std::vector<NormalizedCurve> curves;
  std::vector<double> scores;

  std::size_t size() const noexcept { return curves.size(); }

  // Widens single-precision model output and clamps to [0,1].
  // `curves` is row-major (slots x points).
  static PredictionSet from_model_output(std::span<const float> curves, std::span<const float> scores,
                                         std::size_t points_per_curve);
};

struct GroundTruthSet {
  std::vector<NormalizedCurve> curves;

  std::size_t k() const noexcept { return curves.size(); }
};

// Throws InvalidArgument unless 1 <= k <= max_plots, every curve has
// n_points values, and every value lies in [0,1].
void validate_ground_truth(const GroundTruthSet& gt, std::size_t n_points,
                           std::size_t max_plots = kDefaultMaxPlots);

// Throws InvalidArgument unless curves and scores align, all lengths equal
// n_points, and every value lies in [0,1].
void validate_prediction(const PredictionSet& pred, std::size_t n_points);

}  // namespace apex
