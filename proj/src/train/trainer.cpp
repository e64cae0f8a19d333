#include "apex/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "apex/core/errors.hpp"
#include "apex/core/rng.hpp"
#include "apex/data/image_io.hpp"
#include "apex/model/loss.hpp"
#include "apex/nn/checkpoint.hpp"
#include "apex/nn/optimizer.hpp"

namespace apex::train {
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kEvalBatch = 4;

struct Sample {
  fs::path image;
  GroundTruthSet truth;
};

std::vector<Sample> load_samples(const data::CorpusManifest& corpus,
                                 const std::vector<const data::ManifestEntry*>& entries,
                                 std::size_t points) {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto* e : entries) {
    const fs::path image = corpus.root / e->image;
    if (!fs::exists(image)) throw DataError("missing corpus image " + image.string());
    auto truth = data::read_ground_truth(corpus.root / e->gt, points);
    if (truth.k() != e->k) throw DataError("ground truth k disagrees with manifest for " + e->id);
    out.push_back({image, std::move(truth)});
  }
  return out;
}

nn::Tensor load_batch(const nn::ApexNet& net, const std::vector<Sample>& samples,
                      std::span<const std::size_t> idx) {
  const auto& cfg = net.config();
  const std::size_t per = cfg.in_channels * cfg.input_size * cfg.input_size;
  nn::Tensor batch(nn::Shape{idx.size(), cfg.in_channels, cfg.input_size, cfg.input_size});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    PlotImage img;
    try {
      img = data::read_image(samples[idx[b]].image);
    } catch (const InputError& e) {
      throw DataError(e.what());
    }
    const nn::Tensor one = net.preprocess(img);
    std::copy(one.data(), one.data() + per, batch.data() + b * per);
  }
  return batch;
}

struct BatchLoss {
  double plot = 0.0;
  double score = 0.0;
};

// Per-example losses summed over the batch; gradients (if requested) are those
// of the summed loss.
BatchLoss batch_loss(const nn::ForwardOutput& out, const std::vector<Sample>& samples,
                     std::span<const std::size_t> idx, std::size_t slots, std::size_t points,
                     std::vector<float>* d_curves, std::vector<float>* d_scores) {
  BatchLoss total;
  LossGradient grad;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const std::span<const float> curves(out.curves.data() + b * slots * points, slots * points);
    const std::span<const float> scores(out.scores.data() + b * slots, slots);
    const auto loss = loss_with_gradient<float>(samples[idx[b]].truth, curves, scores, points,
                                                d_curves ? &grad : nullptr);
    total.plot += loss.plot_loss;
    total.score += loss.score_loss;
    if (d_curves) {
      for (std::size_t i = 0; i < slots * points; ++i) {
        (*d_curves)[b * slots * points + i] = static_cast<float>(grad.d_curves[i]);
      }
      for (std::size_t j = 0; j < slots; ++j) {
        (*d_scores)[b * slots + j] = static_cast<float>(grad.d_scores[j]);
      }
    }
  }
  return total;
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
}

double holdout_plot_loss(const nn::ApexNet& net, const std::vector<Sample>& samples) {
  const auto& cfg = net.config();
  double sum = 0.0;
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  for (const auto& b : make_batches(all, kEvalBatch)) {
    const auto out = net.forward(load_batch(net, samples, b));
    sum += batch_loss(out, samples, b, cfg.max_plots, cfg.points_per_plot, nullptr, nullptr).plot;
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1", "batch");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be positive", "lr");
  }
  if (eval_interval < 1) throw InvalidArgument("eval interval must be at least 1", "eval_interval");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw InvalidArgument("holdout fraction must be in [0,1)", "holdout_fraction");
  }
  if (!(target_loss_ratio >= 0.0)) {
    throw InvalidArgument("target loss ratio must be non-negative", "target_loss_ratio");
  }
  if (optimizer != "adam" && optimizer != "sgd") {
    throw InvalidArgument("optimizer must be adam or sgd", "optimizer");
  }
  architecture.validate();
}

nlohmann::json StepRecord::to_json() const {
  return {{"step", step},
          {"epoch", epoch},
          {"loss_plot", loss_plot},
          {"loss_score", loss_score},
          {"loss_total", loss_total}};
}

nlohmann::json EvalReport::to_json() const {
  return {{"e_plot", e_plot}, {"e_count", e_count}, {"n_examples", n_examples}, {"checkpoint", checkpoint}};
}

std::size_t predicted_count(const PredictionSet& pred) {
  return static_cast<std::size_t>(
      std::count_if(pred.scores.begin(), pred.scores.end(), [](double s) { return s > 0.5; }));
}

double count_error(std::size_t k, std::size_t predicted) {
  if (k == 0) throw InvalidArgument("ground truth count must be positive", "k");
  return std::abs(static_cast<double>(k) - static_cast<double>(predicted)) / static_cast<double>(k);
}

TrainResult train(const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  const auto manifest = data::read_manifest(config.corpus);
  std::vector<const data::ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (config.use_all_splits || e.split == data::Split::Train) entries.push_back(&e);
  }
  if (entries.empty()) throw DataError("corpus has no training examples");

  const auto& arch = config.architecture;
  const std::size_t slots = arch.max_plots;
  const std::size_t points = arch.points_per_plot;
  std::vector<Sample> all = load_samples(manifest, entries, points);

  // Seeded holdout selection; the remainder is the training set.
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(config.seed ^ 0x5bd1e995ULL);
  shuffle(order, split_rng);
  const auto n_holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(all.size())));
  std::vector<Sample> holdout;
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_holdout ? holdout : samples).push_back(all[order[i]]);
  }
  all.clear();

  try {
    fs::create_directories(config.checkpoint_dir);
  } catch (const fs::filesystem_error& e) {
    throw DataError(std::string("cannot create checkpoint directory: ") + e.what());
  }
  TrainResult result;
  result.train_examples = samples.size();
  result.holdout_examples = holdout.size();
  result.log = config.checkpoint_dir / "train_log.jsonl";
  const fs::path last = config.checkpoint_dir / "last.ckpt";
  const fs::path best = config.checkpoint_dir / "best.ckpt";
  result.final_checkpoint = config.checkpoint_dir / "final.ckpt";

  nn::ApexNet net(arch, config.seed);
  nn::save_checkpoint(net, config.checkpoint_dir / "init.ckpt");
  nn::save_checkpoint(net, last);
  nn::save_checkpoint(net, best);
  auto optimizer = nn::make_optimizer(config.optimizer, static_cast<float>(config.learning_rate));

  std::vector<std::size_t> train_idx(samples.size());
  std::iota(train_idx.begin(), train_idx.end(), 0);

  // Initial loss: training-mode pass over a copy so running statistics of the
  // real model are untouched.
  {
    nn::ApexNet probe = net;
    double sum = 0.0;
    for (const auto& b : make_batches(train_idx, config.batch_size)) {
      const auto out = probe.forward_train(load_batch(probe, samples, b));
      sum += batch_loss(out, samples, b, slots, points, nullptr, nullptr).plot;
    }
    result.initial_loss_plot = sum / static_cast<double>(samples.size());
  }

  std::ofstream log(result.log, std::ios::trunc);
  if (!log) throw DataError("cannot write training log " + result.log.string());

  double best_holdout = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng order_rng(config.seed + epoch);
    std::vector<std::size_t> perm = train_idx;
    shuffle(perm, order_rng);
    double epoch_plot = 0.0;

    for (const auto& b : make_batches(perm, config.batch_size)) {
      net.zero_grad();
      const auto out = net.forward_train(load_batch(net, samples, b));
      std::vector<float> d_curves(out.curves.size());
      std::vector<float> d_scores(out.scores.size());
      const BatchLoss loss = batch_loss(out, samples, b, slots, points, &d_curves, &d_scores);
      const double n = static_cast<double>(b.size());
      StepRecord rec{++step, epoch, loss.plot / n, loss.score / n, (loss.plot + loss.score) / n};
      log << rec.to_json().dump() << '\n';
      log.flush();
      if (!std::isfinite(rec.loss_total)) {
        throw TrainingAborted("loss became non-finite at step " + std::to_string(step), last.string());
      }
      net.backward(d_curves, d_scores);
      optimizer->step(net.parameters());
      epoch_plot += loss.plot;
      if (on_step) on_step(rec);
    }
    result.epoch_loss_plot.push_back(epoch_plot / static_cast<double>(samples.size()));

    const bool done = config.target_loss_ratio > 0.0 &&
                      result.epoch_loss_plot.back() <= config.target_loss_ratio * result.initial_loss_plot;
    if (epoch % config.eval_interval == 0 || epoch == config.epochs || done) {
      nn::save_checkpoint(net, last);
      if (holdout.empty()) {
        nn::save_checkpoint(net, best);
      } else {
        const double h = holdout_plot_loss(net, holdout);
        if (h < best_holdout) {
          best_holdout = h;
          nn::save_checkpoint(net, best);
        }
      }
    }
    if (done) break;
  }
  result.steps = step;
  nn::save_checkpoint(net, result.final_checkpoint);
  result.checkpoint = best;
  return result;
}

EvalReport evaluate(const nn::ApexNet& net, const data::CorpusManifest& corpus,
                    const std::vector<const data::ManifestEntry*>& entries) {
  if (entries.empty()) throw InvalidArgument("evaluation split is empty", "split");
  const auto& cfg = net.config();
  const auto samples = load_samples(corpus, entries, cfg.points_per_plot);
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);

  EvalReport report;
  report.n_examples = samples.size();
  for (const auto& b : make_batches(idx, kEvalBatch)) {
    const auto out = net.forward(load_batch(net, samples, b));
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto pred = PredictionSet::from_model_output(
          std::span<const float>(out.curves.data() + i * cfg.max_plots * cfg.points_per_plot,
                                 cfg.max_plots * cfg.points_per_plot),
          std::span<const float>(out.scores.data() + i * cfg.max_plots, cfg.max_plots),
          cfg.points_per_plot);
      const auto& truth = samples[b[i]].truth;
      report.e_plot += loss_plot(truth, pred);
      report.e_count += count_error(truth.k(), predicted_count(pred));
    }
  }
  report.e_plot /= static_cast<double>(report.n_examples);
  report.e_count /= static_cast<double>(report.n_examples);
  return report;
}

EvalReport evaluate(const fs::path& checkpoint, const fs::path& corpus_dir, data::Split split) {
  const nn::ApexNet net = nn::load_checkpoint(checkpoint);
  const auto manifest = data::read_manifest(corpus_dir);
  auto report = evaluate(net, manifest, manifest.split(split));
  report.checkpoint = checkpoint.string();
  return report;
}

}  // namespace apex::train
