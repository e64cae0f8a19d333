#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apex/core/types.hpp"
#include "apex/data/render_spec.hpp"

namespace apex::data {

enum class Split { Train, Test };
std::string_view to_string(Split s);

struct ManifestEntry {
  std::string id;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::string image;  // relative to the corpus root
  std::string gt;
  std::size_t k = 0;
  std::string backend_version;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(Split s) const;
};

struct Example {
  PlotImage image;
  GroundTruthSet truth;
  RenderSpec spec;
};

Example generate_example(std::uint64_t example_seed, const GeneratorConfig& config);

// Zero-padded 8-digit index.
std::string example_id(std::size_t index);

// First floor(0.8 * count) indices are train, the rest test.
std::size_t train_count(std::size_t count);

// Writes images/, gt/ and finally manifest.jsonl under out_dir. Examples are
// generated in parallel; output does not depend on scheduling. Throws
// CorpusWriteError naming the failed entry.
CorpusManifest generate_corpus(std::size_t count, std::uint64_t base_seed,
                               const std::filesystem::path& out_dir,
                               const GeneratorConfig& config = {});

// Ground-truth file text: {"id","seed","k","n","y"} with 9 significant digits.
std::string ground_truth_json(const std::string& id, std::uint64_t seed,
                              const GroundTruthSet& truth);

// Throw DataError for missing or malformed files.
CorpusManifest read_manifest(const std::filesystem::path& corpus_dir);
GroundTruthSet read_ground_truth(const std::filesystem::path& path,
                                 std::size_t n_points = kDefaultGridPoints);

}  // namespace apex::data
