#include "apex/model/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "apex/core/errors.hpp"

namespace apex {
namespace {

struct Match {
  std::size_t slot = 0;
  double distance = 0.0;
};

template <class T>
Match nearest(const NormalizedCurve& target, std::span<const T> curves, std::size_t slots,
              std::size_t points) {
  Match best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < slots; ++j) {
    const T* row = curves.data() + j * points;
    double sq = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      const double d = target.ys[i] - static_cast<double>(row[i]);
      sq += d * d;
    }
    const double dist = std::sqrt(sq);
    if (dist < best.distance) best = {j, dist};
  }
  return best;
}

std::vector<double> flatten(const PredictionSet& pred, std::size_t points) {
  std::vector<double> flat;
  flat.reserve(pred.size() * points);
  for (const auto& c : pred.curves) {
    if (c.size() != points) throw InvalidArgument("predicted curves differ in length");
    flat.insert(flat.end(), c.ys.begin(), c.ys.end());
  }
  return flat;
}

std::size_t points_of(const GroundTruthSet& gt) {
  if (gt.k() == 0) throw InvalidArgument("ground truth must contain at least one curve");
  return gt.curves.front().size();
}

}  // namespace

template <class T>
LossBreakdown loss_with_gradient(const GroundTruthSet& gt, std::span<const T> curves,
                                 std::span<const T> scores, std::size_t points,
                                 LossGradient* grad) {
  if (gt.k() == 0) throw InvalidArgument("ground truth must contain at least one curve");
  const std::size_t slots = scores.size();
  if (slots == 0 || curves.size() != slots * points) {
    throw InvalidArgument("prediction shape mismatch");
  }
  for (const auto& c : gt.curves) {
    if (c.size() != points) throw InvalidArgument("ground-truth and predicted curve lengths differ");
  }
  if (grad != nullptr) {
    grad->d_curves.assign(curves.size(), 0.0);
    grad->d_scores.assign(slots, 0.0);
  }

  LossBreakdown out;
  std::vector<char> member(slots, 0);
  for (const auto& target : gt.curves) {
    const Match m = nearest(target, curves, slots, points);
    out.plot_loss += m.distance;
    member[m.slot] = 1;
    if (grad != nullptr && m.distance > 0.0) {
      const T* row = curves.data() + m.slot * points;
      double* g = grad->d_curves.data() + m.slot * points;
      for (std::size_t i = 0; i < points; ++i) {
        g[i] += (static_cast<double>(row[i]) - target.ys[i]) / m.distance;
      }
    }
  }
  for (std::size_t j = 0; j < slots; ++j) {
    if (member[j]) out.assignment.push_back(j);
  }

  for (std::size_t j = 0; j < slots; ++j) {
    const double s = static_cast<double>(scores[j]);
    if (member[j]) {
      out.score_loss -= std::log(std::max(s, kScoreClamp));
      if (grad != nullptr && s > kScoreClamp) grad->d_scores[j] = -1.0 / s;
    } else {
      out.score_loss -= std::log(std::max(1.0 - s, kScoreClamp));
      if (grad != nullptr && 1.0 - s > kScoreClamp) grad->d_scores[j] = 1.0 / (1.0 - s);
    }
  }
  out.total = out.plot_loss + out.score_loss;
  return out;
}

template LossBreakdown loss_with_gradient<float>(const GroundTruthSet&, std::span<const float>,
                                                 std::span<const float>, std::size_t,
                                                 LossGradient*);
template LossBreakdown loss_with_gradient<double>(const GroundTruthSet&, std::span<const double>,
                                                  std::span<const double>, std::size_t,
                                                  LossGradient*);

IndexSet assignment_set(const GroundTruthSet& gt, const PredictionSet& pred) {
  return loss_total(gt, pred).assignment;
}

double loss_plot(const GroundTruthSet& gt, const PredictionSet& pred) {
  return loss_total(gt, pred).plot_loss;
}

double loss_score(std::span<const double> scores, const IndexSet& assignment) {
  double loss = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const bool in_set = std::binary_search(assignment.begin(), assignment.end(), j);
    loss -= in_set ? std::log(std::max(scores[j], kScoreClamp))
                   : std::log(std::max(1.0 - scores[j], kScoreClamp));
  }
  return loss;
}

LossBreakdown loss_total(const GroundTruthSet& gt, const PredictionSet& pred) {
  const std::size_t points = points_of(gt);
  if (pred.curves.size() != pred.scores.size()) {
    throw InvalidArgument("prediction curves and scores differ in count");
  }
  const std::vector<double> flat = flatten(pred, points);
  return loss_with_gradient<double>(gt, flat, pred.scores, points);
}

}  // namespace apex
