#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include "apex/nn/checkpoint.hpp"
#include "apex/nn/network.hpp"

namespace apex::testing {

// Small network that runs in milliseconds: 32x32 input, 1x1 after five pools.
inline nn::ArchitectureConfig tiny_architecture(std::size_t max_plots = 10,
                                                std::size_t points = kDefaultGridPoints) {
  nn::ArchitectureConfig cfg;
  cfg.input_size = 32;
  cfg.blocks = {{8, 3, true}, {8, 3, true}, {16, 3, true}, {16, 3, true}, {16, 3, true}};
  cfg.max_plots = max_plots;
  cfg.points_per_plot = points;
  return cfg;
}

// Score-head biases pushed to +/-4 so the slots listed in `kept` score above
// 0.5 for any input and the rest below.
inline void force_scores(nn::ApexNet& net, std::initializer_list<std::size_t> kept) {
  for (auto& [name, tensor] : net.state()) {
    if (name == "head.scores.bias") {
      for (std::size_t j = 0; j < tensor->size(); ++j) (*tensor)[j] = -4.0f;
      float boost = 4.0f;
      for (std::size_t j : kept) {
        (*tensor)[j] = boost;
        boost += 0.5f;
      }
    }
    if (name == "head.scores.weight") tensor->fill(0.0f);
  }
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("apex_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace apex::testing
