#include "apex/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "apex/core/errors.hpp"

namespace apex::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'A', 'P', 'E', 'X', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

struct Header {
  nlohmann::json json;
  std::streamoff data_offset = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("not an apex checkpoint: " + path.string());
  }
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 26)) {
    throw DataError("corrupt checkpoint header: " + path.string());
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw DataError("truncated checkpoint header: " + path.string());
  }
  Header h;
  try {
    h.json = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (h.json.value("format_version", 0) != kFormatVersion) {
    throw DataError("unsupported checkpoint version in " + path.string());
  }
  h.data_offset = in.tellg();
  return h;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return in;
}

ApexNet load_into(std::ifstream& in, const Header& h, const std::filesystem::path& path,
                  const ArchitectureConfig& config) {
  ApexNet net(config);
  auto state = net.state();
  const auto& tensors = h.json.at("tensors");
  if (tensors.size() != state.size()) throw DataError("checkpoint tensor count mismatch: " + path.string());
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto& [name, tensor] = state[i];
    if (tensors[i].at("name").get<std::string>() != name ||
        tensors[i].at("count").get<std::size_t>() != tensor->size()) {
      throw DataError("checkpoint tensor '" + name + "' does not match the architecture");
    }
    if (!in.read(reinterpret_cast<char*>(tensor->data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(float)))) {
      throw DataError("truncated checkpoint data: " + path.string());
    }
  }
  return net;
}

}  // namespace

void save_checkpoint(const ApexNet& net, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["config"] = net.config().to_json();
  header["config_hash"] = net.config().hash();
  nlohmann::json tensors = nlohmann::json::array();
  const auto state = net.state();
  for (const auto& [name, t] : state) tensors.push_back({{"name", name}, {"count", t->size()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : state) {
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArchitectureConfig read_checkpoint_config(const std::filesystem::path& path) {
  auto in = open(path);
  const Header h = read_header(in, path);
  try {
    return ArchitectureConfig::from_json(h.json.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header lacks a config: " + std::string(e.what()));
  }
}

ApexNet load_checkpoint(const std::filesystem::path& path) {
  auto in = open(path);
  const Header h = read_header(in, path);
  try {
    const auto config = ArchitectureConfig::from_json(h.json.at("config"));
    if (h.json.at("config_hash").get<std::string>() != config.hash()) {
      throw DataError("checkpoint config hash does not match its config: " + path.string());
    }
    return load_into(in, h, path, config);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  }
}

ApexNet load_checkpoint(const std::filesystem::path& path, const ArchitectureConfig& expected) {
  auto in = open(path);
  const Header h = read_header(in, path);
  try {
    const std::string stored = h.json.at("config_hash").get<std::string>();
    if (stored != expected.hash()) {
      throw ModelConfigError("checkpoint " + path.string() + " was trained for a different architecture (hash " +
                             stored.substr(0, 12) + " != " + expected.hash().substr(0, 12) + ")");
    }
    return load_into(in, h, path, expected);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  }
}

}  // namespace apex::nn
