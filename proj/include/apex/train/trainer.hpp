#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "apex/core/types.hpp"
#include "apex/data/corpus.hpp"
#include "apex/nn/network.hpp"
#include "json.hpp"

namespace apex::train {

struct TrainConfig {
  std::filesystem::path corpus;
  std::filesystem::path checkpoint_dir;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::size_t eval_interval = 1;  // epochs between holdout evaluations
  std::uint64_t seed = 0;
  nn::ArchitectureConfig architecture = nn::ArchitectureConfig::standard();

  // Fraction of the training examples held out for checkpoint selection.
  double holdout_fraction = 0.05;
  // Train on every manifest entry instead of the train split only.
  bool use_all_splits = false;
  // Stop once an epoch's mean loss_plot is at most this fraction of the
  // initial one. 0 disables.
  double target_loss_ratio = 0.0;

  // Throws InvalidArgument.
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss_plot = 0.0;  // per-example means over the batch
  double loss_score = 0.0;
  double loss_total = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::filesystem::path checkpoint;        // selected checkpoint
  std::filesystem::path final_checkpoint;  // parameters after the last step
  std::filesystem::path log;
  double initial_loss_plot = 0.0;          // mean over the training examples before any update
  std::vector<double> epoch_loss_plot;     // mean logged loss_plot per epoch
  std::size_t steps = 0;
  std::size_t train_examples = 0;
  std::size_t holdout_examples = 0;
};

// Optional per-step hook, e.g. for progress output.
using StepCallback = std::function<void(const StepRecord&)>;

// Minimizes loss_total over the corpus. Writes init.ckpt, last.ckpt,
// best.ckpt, final.ckpt and train_log.jsonl into checkpoint_dir.
// Throws DataError for a missing/corrupt corpus and TrainingAborted when the
// loss stops being finite.
TrainResult train(const TrainConfig& config, const StepCallback& on_step = {});

// Number of scores strictly above 0.5.
std::size_t predicted_count(const PredictionSet& pred);

// |k - predicted| / k.
double count_error(std::size_t k, std::size_t predicted);

struct EvalReport {
  double e_plot = 0.0;
  double e_count = 0.0;
  std::size_t n_examples = 0;
  std::string checkpoint;

  nlohmann::json to_json() const;
};

// Eval-mode means of loss_plot and count_error. Throws InvalidArgument for an
// empty entry list.
EvalReport evaluate(const nn::ApexNet& net, const data::CorpusManifest& corpus,
                    const std::vector<const data::ManifestEntry*>& entries);

// Loads the checkpoint and evaluates the corpus test split.
EvalReport evaluate(const std::filesystem::path& checkpoint,
                    const std::filesystem::path& corpus_dir,
                    data::Split split = data::Split::Test);

}  // namespace apex::train
