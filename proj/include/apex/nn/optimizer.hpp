#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "apex/nn/network.hpp"

namespace apex::nn {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the accumulated gradients.
  virtual void step(const std::vector<Parameter*>& params) = 0;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const std::vector<Parameter*>& params) override;

 private:
  float lr_;
  float beta1_;
  float beta2_;
  float eps_;
  long long t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(float lr, float momentum = 0.9f) : lr_(lr), momentum_(momentum) {}
  void step(const std::vector<Parameter*>& params) override;

 private:
  float lr_;
  float momentum_;
  std::vector<std::vector<float>> velocity_;
};

// "adam" or "sgd"; throws InvalidArgument otherwise.
std::unique_ptr<Optimizer> make_optimizer(std::string_view kind, float lr);

}  // namespace apex::nn
