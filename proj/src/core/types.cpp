#include "apex/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "apex/core/errors.hpp"

namespace apex {
namespace {

void check_curve(const NormalizedCurve& curve, std::size_t n_points, const std::string& what) {
  if (curve.size() != n_points) {
    throw InvalidArgument(what + " has " + std::to_string(curve.size()) + " values, expected " +
                          std::to_string(n_points));
  }
  for (double y : curve.ys) {
    if (!std::isfinite(y) || y < 0.0 || y > 1.0) {
      throw InvalidArgument(what + " has a value outside [0,1]");
    }
  }
}

}  // namespace

PredictionSet PredictionSet::from_model_output(std::span<const float> curves,
                                               std::span<const float> scores,
                                               std::size_t points_per_curve) {
  if (points_per_curve == 0 || curves.size() != scores.size() * points_per_curve) {
    throw InvalidArgument("model output shape mismatch");
  }
  PredictionSet out;
  out.curves.resize(scores.size());
  out.scores.resize(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    auto& ys = out.curves[j].ys;
    ys.resize(points_per_curve);
    for (std::size_t i = 0; i < points_per_curve; ++i) {
      ys[i] = std::clamp(static_cast<double>(curves[j * points_per_curve + i]), 0.0, 1.0);
    }
    out.scores[j] = std::clamp(static_cast<double>(scores[j]), 0.0, 1.0);
  }
  return out;
}

void validate_ground_truth(const GroundTruthSet& gt, std::size_t n_points, std::size_t max_plots) {
  if (gt.k() < 1 || gt.k() > max_plots) {
    throw InvalidArgument("ground truth plot count " + std::to_string(gt.k()) +
                          " outside [1, " + std::to_string(max_plots) + "]");
  }
  for (std::size_t i = 0; i < gt.k(); ++i) {
    check_curve(gt.curves[i], n_points, "ground-truth curve " + std::to_string(i));
  }
}

void validate_prediction(const PredictionSet& pred, std::size_t n_points) {
  if (pred.curves.size() != pred.scores.size()) {
    throw InvalidArgument("prediction curves and scores differ in count");
  }
  for (std::size_t j = 0; j < pred.size(); ++j) {
    check_curve(pred.curves[j], n_points, "predicted curve " + std::to_string(j));
    const double s = pred.scores[j];
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw InvalidArgument("score " + std::to_string(j) + " outside [0,1]");
    }
  }
}

}  // namespace apex
