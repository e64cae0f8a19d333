#include "apex/data/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "apex/core/curve_synth.hpp"
#include "apex/core/errors.hpp"
#include "apex/core/grid.hpp"
#include "apex/data/image_io.hpp"
#include "apex/data/render.hpp"
#include "json.hpp"

namespace apex::data {
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

nlohmann::json parse_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::vector<const ManifestEntry*> CorpusManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::string example_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08zu", index);
  return buf;
}

std::size_t train_count(std::size_t count) { return count * 8 / 10; }

Example generate_example(std::uint64_t example_seed, const GeneratorConfig& config) {
  Rng rng(example_seed);
  Example ex;
  ex.spec = sample_render_spec(rng, config);
  ex.spec.id = example_seed;
  const SampleGrid grid = make_sample_grid(config.grid_points);
  for (std::size_t j = 0; j < ex.spec.k; ++j) ex.truth.curves.push_back(generate_curve(rng, grid));
  ex.image = render_plot_image(ex.spec, ex.truth, grid);
  return ex;
}

std::string ground_truth_json(const std::string& id, std::uint64_t seed,
                              const GroundTruthSet& truth) {
  std::string out;
  const std::size_t n = truth.curves.empty() ? 0 : truth.curves.front().ys.size();
  out.reserve(16 + truth.k() * n * 12);
  char buf[64];
  out += "{\"id\":\"" + id + "\",\"seed\":" + std::to_string(seed) +
         ",\"k\":" + std::to_string(truth.k()) + ",\"n\":" + std::to_string(n) + ",\"y\":[";
  for (std::size_t j = 0; j < truth.k(); ++j) {
    out += j ? ",[" : "[";
    const auto& ys = truth.curves[j].ys;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      std::snprintf(buf, sizeof buf, i ? ",%.9g" : "%.9g", ys[i]);
      out += buf;
    }
    out += "]";
  }
  out += "]}\n";
  return out;
}

CorpusManifest generate_corpus(std::size_t count, std::uint64_t base_seed, const fs::path& out_dir,
                               const GeneratorConfig& config) {
  if (count < 1) throw InvalidArgument("count must be at least 1", "count");
  config.validate();
  try {
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "gt");
  } catch (const fs::filesystem_error& e) {
    throw CorpusWriteError(e.what(), out_dir.string());
  }

  const std::string backend = backend_version();
  const std::size_t n_train = train_count(count);
  CorpusManifest manifest;
  manifest.root = out_dir;
  manifest.entries.resize(count);

  // The lowest failing index wins so the reported error does not depend on
  // scheduling.
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::string failure;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(count); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    ManifestEntry& e = manifest.entries[i];
    e.id = example_id(i);
    e.seed = base_seed + i;
    e.split = i < n_train ? Split::Train : Split::Test;
    e.image = "images/" + e.id + ".png";
    e.gt = "gt/" + e.id + ".json";
    e.backend_version = backend;
    try {
      const Example ex = generate_example(e.seed, config);
      e.k = ex.truth.k();
      write_png(ex.image, out_dir / e.image);
      write_text(out_dir / e.gt, ground_truth_json(e.id, e.seed, ex.truth));
    } catch (const std::exception& err) {
#pragma omp critical(apex_corpus_failure)
      if (i < failed_index) {
        failed_index = i;
        failure = err.what();
      }
    }
  }
  if (failed_index != std::numeric_limits<std::size_t>::max()) {
    throw CorpusWriteError(failure, example_id(failed_index));
  }

  std::string text;
  for (const auto& e : manifest.entries) {
    const nlohmann::json line = {{"id", e.id},   {"split", to_string(e.split)},
                                 {"seed", e.seed}, {"image", e.image},
                                 {"gt", e.gt},   {"k", e.k},
                                 {"backend_version", e.backend_version}};
    text += line.dump() + "\n";
  }
  const fs::path tmp = out_dir / "manifest.jsonl.tmp";
  try {
    write_text(tmp, text);
    fs::rename(tmp, out_dir / "manifest.jsonl");
  } catch (const std::exception& err) {
    throw CorpusWriteError(err.what(), "manifest.jsonl");
  }
  return manifest;
}

CorpusManifest read_manifest(const fs::path& corpus_dir) {
  const fs::path path = corpus_dir / "manifest.jsonl";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("corpus manifest not found: " + path.string());
  CorpusManifest m;
  m.root = corpus_dir;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      const auto split = j.at("split").get<std::string>();
      if (split == "train") e.split = Split::Train;
      else if (split == "test") e.split = Split::Test;
      else throw DataError("unknown split '" + split + "' at " + where);
      e.seed = j.at("seed").get<std::uint64_t>();
      e.image = j.at("image").get<std::string>();
      e.gt = j.at("gt").get<std::string>();
      e.k = j.at("k").get<std::size_t>();
      e.backend_version = j.value("backend_version", "");
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& err) {
      throw DataError("malformed manifest line " + where + ": " + err.what());
    }
  }
  if (m.entries.empty()) throw DataError("corpus manifest is empty: " + path.string());
  return m;
}

GroundTruthSet read_ground_truth(const fs::path& path, std::size_t n_points) {
  const auto j = parse_json_file(path);
  GroundTruthSet gt;
  try {
    const auto k = j.at("k").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    const auto& y = j.at("y");
    if (n != n_points || !y.is_array() || y.size() != k || k == 0) {
      throw DataError("ground truth shape mismatch in " + path.string());
    }
    for (const auto& row : y) {
      if (!row.is_array() || row.size() != n) {
        throw DataError("ground truth row length mismatch in " + path.string());
      }
      NormalizedCurve c;
      c.ys.reserve(n);
      for (const auto& v : row) {
        const double d = v.get<double>();
        if (!std::isfinite(d) || d < 0.0 || d > 1.0) {
          throw DataError("ground truth value outside [0,1] in " + path.string());
        }
        c.ys.push_back(d);
      }
      gt.curves.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ground truth " + path.string() + ": " + e.what());
  }
  return gt;
}

}  // namespace apex::data
