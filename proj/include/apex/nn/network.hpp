#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apex/core/types.hpp"
#include "apex/nn/tensor.hpp"
#include "json.hpp"

namespace apex::nn {

struct BlockSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  bool pool = true;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct ArchitectureConfig {
  std::size_t input_size = 512;
  std::size_t in_channels = 3;
  std::vector<BlockSpec> blocks;
  std::size_t max_plots = kDefaultMaxPlots;
  std::size_t points_per_plot = kDefaultGridPoints;

  // Nine conv-BN-ReLU-pool blocks, 16..512 channels, 512x512 down to 1x1.
  static ArchitectureConfig standard();

  // Throws ModelConfigError.
  void validate() const;
  // Spatial side length after the last block.
  std::size_t final_size() const;
  std::size_t final_channels() const;

  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
  // SHA-256 of the canonical JSON form.
  std::string hash() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Sigmoid outputs: curves (batch, max_plots * points_per_plot) and
// scores (batch, max_plots), both row-major.
struct ForwardOutput {
  std::size_t batch = 0;
  std::vector<float> curves;
  std::vector<float> scores;
};

// Convolutional set predictor: a stack of conv3x3 -> batch norm -> ReLU
// [-> 2x2 max pool] blocks, global average pooling (a no-op once the stack
// reaches 1x1), then two sigmoid-activated 1x1 heads for curves and scores.
class ApexNet {
 public:
  explicit ApexNet(ArchitectureConfig config, std::uint64_t init_seed = 0);

  const ArchitectureConfig& config() const noexcept { return config_; }

  // Evaluation mode (running statistics). Safe to call concurrently.
  ForwardOutput forward(const Tensor& input) const;

  // Training mode: batch statistics, running statistics updated, activations
  // kept for backward().
  ForwardOutput forward_train(const Tensor& input);

  // Gradients w.r.t. the sigmoid outputs of the last forward_train call;
  // accumulates into parameter gradients.
  void backward(std::span<const float> d_curves, std::span<const float> d_scores);

  void zero_grad();
  std::vector<Parameter*> parameters();

  // Every persistent tensor (parameters, then running statistics) in a fixed
  // order. This order is the checkpoint layout.
  std::vector<std::pair<std::string, Tensor*>> state();
  std::vector<std::pair<std::string, const Tensor*>> state() const;

  // Bilinear stretch to input_size x input_size, (1, 3, S, S).
  Tensor preprocess(const PlotImage& image) const;
  PredictionSet predict(const PlotImage& image) const;

  static constexpr float kBatchNormEps = 1e-5f;
  static constexpr float kBatchNormMomentum = 0.1f;

 private:
  struct Block {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t size = 0;
    bool pool = true;
    Parameter weight;
    Parameter bias;
    Parameter gamma;
    Parameter beta;
    Tensor running_mean;
    Tensor running_var;
  };

  struct BlockCache {
    std::vector<float> input;
    std::vector<float> conv_out;
    std::vector<float> mean;
    std::vector<float> var;
    std::vector<std::uint8_t> argmax;
  };

  struct TrainCache {
    std::size_t batch = 0;
    std::vector<BlockCache> blocks;
    std::vector<float> last_output;
    std::vector<float> features;
    std::vector<float> curves;
    std::vector<float> scores;
  };

  void check_input(const Tensor& input) const;
  ForwardOutput run_heads(std::size_t batch, std::span<const float> features) const;

  ArchitectureConfig config_;
  std::vector<Block> blocks_;
  Parameter curve_weight_;
  Parameter curve_bias_;
  Parameter score_weight_;
  Parameter score_bias_;
  TrainCache cache_;
};

}  // namespace apex::nn
