#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "apex/core/types.hpp"

namespace apex {

// Prediction slot indices, 0-based, ascending, unique.
using IndexSet = std::vector<std::size_t>;

inline constexpr double kScoreClamp = 1e-7;

struct LossBreakdown {
  double plot_loss = 0.0;
  double score_loss = 0.0;
  double total = 0.0;
  IndexSet assignment;
};

// d(total)/d(prediction), laid out like the prediction: curves row-major
// (slots x points), one entry per score.
struct LossGradient {
  std::vector<double> d_curves;
  std::vector<double> d_scores;
};

// Slots that are the nearest (unsquared l2) prediction for at least one
// ground-truth curve. Ties go to the smallest slot index.
IndexSet assignment_set(const GroundTruthSet& gt, const PredictionSet& pred);

// Sum over ground-truth curves of the l2 distance to the nearest prediction.
double loss_plot(const GroundTruthSet& gt, const PredictionSet& pred);

// Binary cross-entropy of the scores against membership in `assignment`,
// natural log, arguments clamped below at kScoreClamp.
double loss_score(std::span<const double> scores, const IndexSet& assignment);

LossBreakdown loss_total(const GroundTruthSet& gt, const PredictionSet& pred);

// Same losses on flat model output (slots x points curves, slot scores),
// optionally with the gradient. The assignment is held fixed when
// differentiating the score term; the plot term takes the subgradient at the
// argmin (zero at zero distance). Instantiated for float and double.
template <class T>
LossBreakdown loss_with_gradient(const GroundTruthSet& gt, std::span<const T> curves,
                                 std::span<const T> scores, std::size_t points,
                                 LossGradient* grad = nullptr);

}  // namespace apex
