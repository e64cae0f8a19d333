#include "apex/pipeline/extract.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "apex/core/errors.hpp"

namespace apex::pipeline {

ExtractionResult select_predictions(const PredictionSet& pred, double threshold) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < pred.scores.size(); ++j) {
    if (pred.scores[j] > threshold) idx.push_back(j);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pred.scores[a] > pred.scores[b]; });
  ExtractionResult out;
  for (std::size_t j : idx) {
    out.kept_curves.push_back(pred.curves[j]);
    out.kept_scores.push_back(pred.scores[j]);
    out.kept_indices.push_back(j);
  }
  return out;
}

ExtractionResult extract(const PlotImage& image, const nn::ApexNet& net) {
  return select_predictions(net.predict(image));
}

std::string export_csv(const std::vector<NormalizedCurve>& curves, const SampleGrid& grid,
                       const AxisCalibration& calib, bool allow_empty) {
  validate_calibration(calib);
  if (curves.empty() && !allow_empty) {
    throw InvalidArgument("no curves to export", "curves");
  }
  for (const auto& c : curves) {
    if (c.ys.size() != grid.size()) {
      throw InvalidArgument("curve length " + std::to_string(c.ys.size()) +
                                " does not match the grid size " + std::to_string(grid.size()),
                            "curves");
    }
    if (!std::all_of(c.ys.begin(), c.ys.end(), [](double v) { return v >= 0.0 && v <= 1.0; })) {
      throw InvalidArgument("curve values must lie in [0,1]", "curves");
    }
  }

  std::string out = "x";
  for (std::size_t m = 1; m <= curves.size(); ++m) out += ",y_" + std::to_string(m);
  out += '\n';
  char buf[40];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", unnormalize(grid[i], calib.x_min, calib.x_max, calib.x_scale));
    out += buf;
    for (const auto& c : curves) {
      std::snprintf(buf, sizeof buf, ",%.9g", unnormalize(c.ys[i], calib.y_min, calib.y_max, calib.y_scale));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string export_csv(const ExtractionResult& result, const SampleGrid& grid,
                       const AxisCalibration& calib, bool allow_empty) {
  return export_csv(result.kept_curves, grid, calib, allow_empty);
}

}  // namespace apex::pipeline
