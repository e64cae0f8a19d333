#include "apex/nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "apex/core/errors.hpp"

namespace apex::nn {

void Adam::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.size(), 0.0f);
      v_.emplace_back(p->value.size(), 0.0f);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_));
  const auto step_size = static_cast<float>(lr_ / c1);
  const auto root_c2 = static_cast<float>(std::sqrt(c2));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    float* value = p.value.data();
    const float* g = p.grad.data();
    float* m = m_[pi].data();
    float* v = v_[pi].data();
    const auto n = static_cast<std::ptrdiff_t>(p.value.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
      value[i] -= step_size * m[i] / (std::sqrt(v[i]) / root_c2 + eps_);
    }
  }
}

void Sgd::step(const std::vector<Parameter*>& params) {
  if (velocity_.empty()) {
    for (const Parameter* p : params) velocity_.emplace_back(p->value.size(), 0.0f);
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    float* vel = velocity_[pi].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      vel[i] = momentum_ * vel[i] + p.grad[i];
      p.value[i] -= lr_ * vel[i];
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(std::string_view kind, float lr) {
  if (!(lr > 0.0f)) throw InvalidArgument("learning rate must be positive", "lr");
  if (kind == "adam") return std::make_unique<Adam>(lr);
  if (kind == "sgd") return std::make_unique<Sgd>(lr);
  throw InvalidArgument("unknown optimizer '" + std::string(kind) + "'", "optimizer");
}

}  // namespace apex::nn
