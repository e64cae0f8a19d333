#include "apex/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "apex/core/errors.hpp"
#include "apex/core/hash.hpp"
#include "apex/core/rng.hpp"
#include "apex/nn/kernels.hpp"

namespace apex::nn {
namespace {

namespace k = kernels;

Parameter make_param(std::string name, Shape shape) {
  return Parameter{std::move(name), Tensor(shape), Tensor(shape)};
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for conv and
// linear layers.
void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

ArchitectureConfig ArchitectureConfig::standard() {
  ArchitectureConfig cfg;
  for (std::size_t ch : {16, 32, 64, 128, 256, 256, 512, 512, 512}) {
    cfg.blocks.push_back(BlockSpec{ch, 3, true});
  }
  return cfg;
}

void ArchitectureConfig::validate() const {
  if (input_size == 0 || in_channels == 0) throw ModelConfigError("input size and channels must be positive");
  if (blocks.empty()) throw ModelConfigError("architecture needs at least one block");
  if (max_plots == 0 || points_per_plot < 2) throw ModelConfigError("head needs max_plots >= 1 and points >= 2");
  std::size_t size = input_size;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].out_channels == 0) {
      throw ModelConfigError("block " + std::to_string(i) + " has zero output channels");
    }
    if (blocks[i].kernel != 3) {
      throw ModelConfigError("block " + std::to_string(i) + ": only 3x3 kernels are supported");
    }
    if (blocks[i].pool) {
      size /= 2;
      if (size < 1) {
        throw ModelConfigError("pooling block " + std::to_string(i) + " shrinks the feature map below 1x1");
      }
    }
  }
}

std::size_t ArchitectureConfig::final_size() const {
  std::size_t size = input_size;
  for (const auto& b : blocks) {
    if (b.pool) size /= 2;
  }
  return size;
}

std::size_t ArchitectureConfig::final_channels() const {
  return blocks.empty() ? in_channels : blocks.back().out_channels;
}

nlohmann::json ArchitectureConfig::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"out_channels", b.out_channels}, {"kernel", b.kernel}, {"pool", b.pool}});
  }
  return {{"input_size", input_size},
          {"in_channels", in_channels},
          {"blocks", blocks_json},
          {"max_plots", max_plots},
          {"points_per_plot", points_per_plot}};
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  try {
    ArchitectureConfig cfg;
    cfg.input_size = j.at("input_size").get<std::size_t>();
    cfg.in_channels = j.value("in_channels", std::size_t{3});
    for (const auto& b : j.at("blocks")) {
      cfg.blocks.push_back(BlockSpec{b.at("out_channels").get<std::size_t>(),
                                     b.value("kernel", std::size_t{3}), b.value("pool", true)});
    }
    cfg.max_plots = j.at("max_plots").get<std::size_t>();
    cfg.points_per_plot = j.at("points_per_plot").get<std::size_t>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ModelConfigError(std::string("malformed architecture config: ") + e.what());
  }
}

std::string ArchitectureConfig::hash() const { return sha256_hex(to_json().dump()); }

ApexNet::ApexNet(ArchitectureConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(init_seed);
  std::size_t in_ch = config_.in_channels;
  std::size_t size = config_.input_size;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    const auto& spec = config_.blocks[i];
    const std::string prefix = "block" + std::to_string(i) + ".";
    Block b;
    b.in_ch = in_ch;
    b.out_ch = spec.out_channels;
    b.size = size;
    b.pool = spec.pool;
    b.weight = make_param(prefix + "conv.weight", {spec.out_channels, in_ch, 3, 3});
    b.bias = make_param(prefix + "conv.bias", {1, spec.out_channels});
    b.gamma = make_param(prefix + "bn.weight", {1, spec.out_channels});
    b.beta = make_param(prefix + "bn.bias", {1, spec.out_channels});
    b.running_mean = Tensor({1, spec.out_channels}, 0.0f);
    b.running_var = Tensor({1, spec.out_channels}, 1.0f);
    init_uniform(b.weight.value, in_ch * 9, rng);
    init_uniform(b.bias.value, in_ch * 9, rng);
    b.gamma.value.fill(1.0f);
    blocks_.push_back(std::move(b));
    in_ch = spec.out_channels;
    if (spec.pool) size /= 2;
  }
  const std::size_t features = config_.final_channels();
  const std::size_t curve_out = config_.max_plots * config_.points_per_plot;
  curve_weight_ = make_param("head.curves.weight", {curve_out, features});
  curve_bias_ = make_param("head.curves.bias", {1, curve_out});
  score_weight_ = make_param("head.scores.weight", {config_.max_plots, features});
  score_bias_ = make_param("head.scores.bias", {1, config_.max_plots});
  init_uniform(curve_weight_.value, features, rng);
  init_uniform(curve_bias_.value, features, rng);
  init_uniform(score_weight_.value, features, rng);
  init_uniform(score_bias_.value, features, rng);
}

void ApexNet::check_input(const Tensor& input) const {
  const Shape& s = input.shape();
  if (s.n == 0 || s.c != config_.in_channels || s.h != config_.input_size ||
      s.w != config_.input_size) {
    throw InputError("input tensor shape does not match the architecture (" +
                           std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
                           std::to_string(s.w) + ")");
  }
}

ForwardOutput ApexNet::run_heads(std::size_t batch, std::span<const float> features) const {
  const std::size_t in = config_.final_channels();
  ForwardOutput out;
  out.batch = batch;
  out.curves.resize(batch * config_.max_plots * config_.points_per_plot);
  out.scores.resize(batch * config_.max_plots);
  k::linear_forward(batch, in, config_.max_plots * config_.points_per_plot, features,
                    curve_weight_.value.span(), curve_bias_.value.span(), out.curves);
  k::linear_forward(batch, in, config_.max_plots, features, score_weight_.value.span(),
                    score_bias_.value.span(), out.scores);
  k::sigmoid_forward(out.curves);
  k::sigmoid_forward(out.scores);
  return out;
}

ForwardOutput ApexNet::forward(const Tensor& input) const {
  check_input(input);
  const std::size_t batch = input.shape().n;
  std::vector<float> x(input.span().begin(), input.span().end());
  std::vector<float> y;
  for (const Block& b : blocks_) {
    const ConvGeometry g{batch, b.in_ch, b.out_ch, b.size, b.size};
    const PlaneGeometry pg{batch, b.out_ch, b.size, b.size};
    y.resize(g.output_size());
    k::conv3x3_forward(g, x, b.weight.value.span(), b.bias.value.span(), y);
    k::batchnorm_eval_forward(pg, y, b.gamma.value.span(), b.beta.value.span(),
                              b.running_mean.span(), b.running_var.span(), kBatchNormEps, y);
    k::relu_forward(y);
    if (b.pool) {
      x.resize(batch * b.out_ch * (b.size / 2) * (b.size / 2));
      std::vector<std::uint8_t> argmax(x.size());
      k::maxpool2x2_forward(pg, y, x, argmax);
    } else {
      std::swap(x, y);
    }
  }
  const std::size_t side = config_.final_size();
  std::vector<float> features(batch * config_.final_channels());
  k::global_avgpool_forward({batch, config_.final_channels(), side, side}, x, features);
  return run_heads(batch, features);
}

ForwardOutput ApexNet::forward_train(const Tensor& input) {
  check_input(input);
  const std::size_t batch = input.shape().n;
  cache_ = TrainCache{};
  cache_.batch = batch;
  cache_.blocks.resize(blocks_.size());
  std::vector<float> x(input.span().begin(), input.span().end());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Block& b = blocks_[i];
    BlockCache& c = cache_.blocks[i];
    const ConvGeometry g{batch, b.in_ch, b.out_ch, b.size, b.size};
    const PlaneGeometry pg{batch, b.out_ch, b.size, b.size};
    c.input = std::move(x);
    c.conv_out.resize(g.output_size());
    c.mean.resize(b.out_ch);
    c.var.resize(b.out_ch);
    k::conv3x3_forward(g, c.input, b.weight.value.span(), b.bias.value.span(), c.conv_out);
    std::vector<float> act(g.output_size());
    k::batchnorm_train_forward(pg, c.conv_out, b.gamma.value.span(), b.beta.value.span(),
                               kBatchNormEps, act, c.mean, c.var);
    k::relu_forward(act);

    const double count = static_cast<double>(batch * b.size * b.size);
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    for (std::size_t ch = 0; ch < b.out_ch; ++ch) {
      b.running_mean[ch] = static_cast<float>((1.0 - kBatchNormMomentum) * b.running_mean[ch] +
                                              kBatchNormMomentum * c.mean[ch]);
      b.running_var[ch] = static_cast<float>((1.0 - kBatchNormMomentum) * b.running_var[ch] +
                                             kBatchNormMomentum * c.var[ch] * unbias);
    }

    if (b.pool) {
      x.resize(batch * b.out_ch * (b.size / 2) * (b.size / 2));
      c.argmax.resize(x.size());
      k::maxpool2x2_forward(pg, act, x, c.argmax);
    } else {
      x = std::move(act);
    }
  }
  const std::size_t side = config_.final_size();
  cache_.features.resize(batch * config_.final_channels());
  k::global_avgpool_forward({batch, config_.final_channels(), side, side}, x, cache_.features);
  cache_.last_output = std::move(x);
  ForwardOutput out = run_heads(batch, cache_.features);
  cache_.curves = out.curves;
  cache_.scores = out.scores;
  return out;
}

void ApexNet::backward(std::span<const float> d_curves, std::span<const float> d_scores) {
  const std::size_t batch = cache_.batch;
  if (batch == 0) throw ModelConfigError("backward() without a preceding forward_train()");
  if (d_curves.size() != cache_.curves.size() || d_scores.size() != cache_.scores.size()) {
    throw ModelConfigError("backward() gradient shape mismatch");
  }
  const std::size_t feat = config_.final_channels();
  const std::size_t curve_out = config_.max_plots * config_.points_per_plot;

  std::vector<float> dc(d_curves.begin(), d_curves.end());
  std::vector<float> ds(d_scores.begin(), d_scores.end());
  k::sigmoid_backward(cache_.curves, dc);
  k::sigmoid_backward(cache_.scores, ds);
  std::vector<float> dfeat(batch * feat);
  std::vector<float> dfeat_scores(batch * feat);
  k::linear_backward(batch, feat, curve_out, cache_.features, curve_weight_.value.span(), dc,
                     dfeat, curve_weight_.grad.span(), curve_bias_.grad.span());
  k::linear_backward(batch, feat, config_.max_plots, cache_.features, score_weight_.value.span(),
                     ds, dfeat_scores, score_weight_.grad.span(), score_bias_.grad.span());
  for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] += dfeat_scores[i];

  const std::size_t side = config_.final_size();
  std::vector<float> dout(cache_.last_output.size());
  k::global_avgpool_backward({batch, feat, side, side}, dfeat, dout);

  for (std::size_t i = blocks_.size(); i-- > 0;) {
    Block& b = blocks_[i];
    const BlockCache& c = cache_.blocks[i];
    const ConvGeometry g{batch, b.in_ch, b.out_ch, b.size, b.size};
    const PlaneGeometry pg{batch, b.out_ch, b.size, b.size};

    // Recompute the activation from the saved conv output and batch stats.
    std::vector<float> act(g.output_size());
    k::batchnorm_eval_forward(pg, c.conv_out, b.gamma.value.span(), b.beta.value.span(), c.mean,
                              c.var, kBatchNormEps, act);
    k::relu_forward(act);

    std::vector<float> dact(g.output_size());
    if (b.pool) {
      k::maxpool2x2_backward(pg, dout, c.argmax, dact);
    } else {
      dact = std::move(dout);
    }
    k::relu_backward(act, dact);
    std::vector<float> dz(g.output_size());
    k::batchnorm_backward(pg, c.conv_out, dact, b.gamma.value.span(), c.mean, c.var,
                          kBatchNormEps, dz, b.gamma.grad.span(), b.beta.grad.span());
    dout.assign(i == 0 ? 0 : g.input_size(), 0.0f);
    k::conv3x3_backward(g, c.input, b.weight.value.span(), dz, dout, b.weight.grad.span(),
                        b.bias.grad.span());
  }
  cache_ = TrainCache{};
}

void ApexNet::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0.0f);
}

std::vector<Parameter*> ApexNet::parameters() {
  std::vector<Parameter*> out;
  for (Block& b : blocks_) {
    out.insert(out.end(), {&b.weight, &b.bias, &b.gamma, &b.beta});
  }
  out.insert(out.end(), {&curve_weight_, &curve_bias_, &score_weight_, &score_bias_});
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ApexNet::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Parameter* p : parameters()) out.emplace_back(p->name, &p->value);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".bn.";
    out.emplace_back(prefix + "running_mean", &blocks_[i].running_mean);
    out.emplace_back(prefix + "running_var", &blocks_[i].running_var);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ApexNet::state() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ApexNet*>(this)->state()) out.emplace_back(name, t);
  return out;
}

Tensor ApexNet::preprocess(const PlotImage& image) const {
  if (image.empty() || image.pixels.size() != image.height * image.width * 3) {
    throw InputError("empty or malformed image");
  }
  if (config_.in_channels != 3) throw ModelConfigError("preprocess expects a 3-channel model");
  const std::size_t s = config_.input_size;
  Tensor t({1, 3, s, s});
  k::resize_bilinear_to_chw(image.pixels, image.height, image.width, s, s, t.span());
  return t;
}

PredictionSet ApexNet::predict(const PlotImage& image) const {
  const ForwardOutput out = forward(preprocess(image));
  return PredictionSet::from_model_output(out.curves, out.scores, config_.points_per_plot);
}

}  // namespace apex::nn
