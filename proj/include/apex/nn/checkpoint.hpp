#pragma once

#include <filesystem>

#include "apex/nn/network.hpp"

namespace apex::nn {

// Layout: 8-byte magic "APEXCKPT", little-endian u64 header length, JSON
// header {"format_version", "config", "config_hash", "tensors": [{name, count}]},
// then every tensor as little-endian float32 in header order.
void save_checkpoint(const ApexNet& net, const std::filesystem::path& path);

// Architecture from the checkpoint header. Throws DataError for unreadable or
// corrupt files.
ApexNet load_checkpoint(const std::filesystem::path& path);

// As above, but throws ModelConfigError when the stored config hash differs
// from `expected.hash()`.
ApexNet load_checkpoint(const std::filesystem::path& path, const ArchitectureConfig& expected);

ArchitectureConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace apex::nn
