#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "apex/core/calibration.hpp"
#include "apex/core/grid.hpp"
#include "apex/core/types.hpp"
#include "apex/nn/network.hpp"

namespace apex::pipeline {

inline constexpr double kScoreThreshold = 0.5;

struct ExtractionResult {
  std::vector<NormalizedCurve> kept_curves;
  std::vector<double> kept_scores;       // descending
  std::vector<std::size_t> kept_indices; // 0-based prediction slots

  std::size_t size() const noexcept { return kept_curves.size(); }
  bool empty() const noexcept { return kept_curves.empty(); }
};

// Keeps slots whose score is strictly above `threshold`, ordered by
// descending score (ties by slot index).
ExtractionResult select_predictions(const PredictionSet& pred, double threshold = kScoreThreshold);

// Forward pass plus selection. Throws InputError for an empty image.
ExtractionResult extract(const PlotImage& image, const nn::ApexNet& net);

// Header "x,y_1,...,y_M", then one row per grid point with the x column and
// every curve passed through the calibration; %.9g, LF endings. Throws
// InvalidArgument for invalid calibration, mismatched curve lengths, or an
// empty result when `allow_empty` is false.
std::string export_csv(const std::vector<NormalizedCurve>& curves, const SampleGrid& grid,
                       const AxisCalibration& calib, bool allow_empty = false);

std::string export_csv(const ExtractionResult& result, const SampleGrid& grid,
                       const AxisCalibration& calib, bool allow_empty = false);

}  // namespace apex::pipeline
