// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "apex/core/calibration.hpp"
#include "apex/core/curve_synth.hpp"
#include "apex/core/grid.hpp"
#include "apex/core/rng.hpp"
#include "apex/data/corpus.hpp"
#include "apex/data/image_io.hpp"
#include "apex/model/loss.hpp"
#include "apex/nn/checkpoint.hpp"
#include "apex/pipeline/extract.hpp"
#include "apex/service/service.hpp"
#include "apex/train/trainer.hpp"
#include "httplib.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace apex;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kLossOracleTol = 1e-6;
constexpr double kLossOracleSeconds = 10.0;
constexpr double kScoreValueTol = 1e-9;
constexpr double kScoreLimitTol = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kSplineTol = 1e-9;
constexpr double kGridlineTol = 0.05;
constexpr double kRoundTripTol = 1e-9;
constexpr double kSmokeTargetRatio = 0.5;
constexpr double kSmokeSeconds = 2.0 * 3600.0;

// Smoke-run setup.
constexpr std::size_t kSmokeExamples = 32;
constexpr std::uint64_t kSmokeCorpusSeed = 777;
constexpr std::uint64_t kSmokeTrainSeed = 0;
constexpr std::size_t kSmokeBatch = 8;
constexpr double kSmokeLearningRate = 1e-3;
constexpr std::size_t kSmokeMaxEpochs = 300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<std::string> filters;

// Optional command-line arguments select criteria by name substring.
void report(const char* name, const std::function<Outcome()>& check) {
  if (!filters.empty() &&
      std::none_of(filters.begin(), filters.end(), [&](const auto& f) { return std::string(name).find(f) != std::string::npos; })) {
    return;
  }
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-32s %s  [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

NormalizedCurve random_curve(Rng& rng, std::size_t n) {
  NormalizedCurve c;
  for (std::size_t i = 0; i < n; ++i) c.ys.push_back(rng.uniform01());
  return c;
}

std::vector<std::vector<double>> rows(const std::vector<NormalizedCurve>& cs) {
  std::vector<std::vector<double>> out;
  for (const auto& c : cs) out.push_back(c.ys);
  return out;
}

Outcome loss_oracle() {
  Rng rng(1001);
  double worst = 0.0;
  std::size_t set_mismatch = 0;
  const auto t0 = Clock::now();
  for (int t = 0; t < 500; ++t) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto slots = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    GroundTruthSet gt;
    for (std::size_t i = 0; i < k; ++i) gt.curves.push_back(random_curve(rng, n));
    PredictionSet pred;
    for (std::size_t j = 0; j < slots; ++j) pred.curves.push_back(random_curve(rng, n));
    pred.scores.assign(slots, 0.5);
    const auto ref = oracle::plot_loss_by_enumeration(rows(gt.curves), rows(pred.curves));
    worst = std::max(worst, std::abs(loss_plot(gt, pred) - ref.plot_loss));
    const auto a = assignment_set(gt, pred);
    if (std::set<std::size_t>(a.begin(), a.end()) != ref.assignment) ++set_mismatch;
  }
  const double secs = seconds_since(t0);
  return {worst <= kLossOracleTol && set_mismatch == 0 && secs < kLossOracleSeconds,
          fmt("500 instances: max |dL| %.2e (tol %.0e), %.0f assignment mismatches, ", worst, kLossOracleTol,
              double(set_mismatch)) +
              fmt("%.2fs (< %.0fs)", secs, kLossOracleSeconds)};
}

Outcome score_values() {
  const std::vector<double> half(10, 0.5);
  const double v = loss_score(half, IndexSet{0, 3, 9});
  const double err = std::abs(v - 10.0 * std::log(2.0));

  IndexSet all(10);
  for (std::size_t j = 0; j < 10; ++j) all[j] = j;
  const double confident = loss_score(std::vector<double>(10, 1.0 - 1e-7), all);
  const double rejecting = loss_score(std::vector<double>(10, 1e-7), {});
  return {err <= kScoreValueTol && confident <= kScoreLimitTol && rejecting <= kScoreLimitTol,
          fmt("|L - 10 ln2| %.1e (tol %.0e); confidence limit %.1e, rejection limit %.1e", err, kScoreValueTol,
              confident, rejecting) +
              fmt(" (tol %.0e)", kScoreLimitTol)};
}

Outcome gradient_check() {
  Rng rng(1002);
  int checked = 0;
  double worst = 0.0;
  const auto t0 = Clock::now();
  while (checked < 50) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto slots = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 8));
    GroundTruthSet gt;
    for (std::size_t i = 0; i < k; ++i) gt.curves.push_back(random_curve(rng, n));
    std::vector<double> curves(slots * n), scores(slots);
    for (auto& v : curves) v = rng.uniform01();
    for (auto& v : scores) v = rng.uniform(0.05, 0.95);

    bool tie_free = true;
    for (const auto& g : gt.curves) {
      std::vector<double> d;
      for (std::size_t j = 0; j < slots; ++j) {
        double sq = 0;
        for (std::size_t i = 0; i < n; ++i) sq += std::pow(g.ys[i] - curves[j * n + i], 2);
        d.push_back(std::sqrt(sq));
      }
      std::sort(d.begin(), d.end());
      tie_free = tie_free && d[1] - d[0] >= 1e-3 && d[0] > 1e-3;
    }
    if (!tie_free) continue;
    ++checked;

    LossGradient grad;
    loss_with_gradient<double>(gt, curves, scores, n, &grad);
    const auto total = [&] { return loss_with_gradient<double>(gt, curves, scores, n).total; };
    const auto compare = [&](double& x, double analytic) {
      const double keep = x;
      x = keep + kGradStep;
      const double up = total();
      x = keep - kGradStep;
      const double down = total();
      x = keep;
      const double numeric = (up - down) / (2 * kGradStep);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      if (scale > 1e-12) worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    for (std::size_t i = 0; i < curves.size(); ++i) compare(curves[i], grad.d_curves[i]);
    for (std::size_t j = 0; j < slots; ++j) compare(scores[j], grad.d_scores[j]);
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradRelTol && secs < kGradSeconds,
          fmt("50 tie-free instances: max relative error %.2e (tol %.0e), %.2fs (< %.0fs)", worst, kGradRelTol, secs,
              kGradSeconds)};
}

Outcome spline_oracle() {
  const auto grid = make_sample_grid();
  Rng knots_rng(1003);
  Rng curve_rng(1003);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const ControlPoints knots = sample_control_points(knots_rng);
    const NormalizedCurve curve = generate_curve(curve_rng, grid);
    const oracle::DenseNaturalSpline ref(knots.knot_xs, knots.knot_ys);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double expected = std::clamp(ref(grid[i]), 0.0, 1.0);
      worst = std::max(worst, std::abs(curve.ys[i] - expected));
    }
  }
  return {worst <= kSplineTol, fmt("100 knot sets x 1024 points: max |dy| %.2e (tol %.0e)", worst, kSplineTol)};
}

Outcome generator() {
  const auto dir = testing::scratch_dir("acceptance_corpus");
  const std::uint64_t base = 20240;
  const auto a = data::generate_corpus(1000, base, dir / "a");
  data::generate_corpus(1000, base, dir / "b");

  std::size_t gt_diffs = 0;
  for (const auto& e : a.entries) gt_diffs += slurp(dir / "a" / e.gt) != slurp(dir / "b" / e.gt);
  const bool manifest_same = slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl");
  const auto n_train = a.split(data::Split::Train).size();
  const auto n_test = a.split(data::Split::Test).size();

  std::array<double, 10> counts{};
  std::size_t grid_on = 0;
  const data::GeneratorConfig cfg;
  for (const auto& e : a.entries) {
    counts[e.k - 1] += 1;
    Rng rng(e.seed);
    grid_on += data::sample_render_spec(rng, cfg).gridlines;
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 100.0) * (c - 100.0) / 100.0;
  const double crit = oracle::chi_square_critical_01(9);
  const double grid_freq = double(grid_on) / 1000.0;
  fs::remove_all(dir);

  const bool pass = gt_diffs == 0 && manifest_same && n_train == 800 && n_test == 200 &&
                    std::abs(grid_freq - 0.5) <= kGridlineTol && chi2 < crit;
  return {pass, fmt("gt diffs %.0f, split %.0f/%.0f, gridlines %.3f (0.5 +/- %.2f), ", double(gt_diffs),
                    double(n_train), double(n_test), grid_freq) +
                    fmt("k chi2 %.2f < %.3f (dof 9, p=0.01)", chi2, crit) + (manifest_same ? "" : ", manifest differs")};
}

Outcome calibration_round_trip() {
  Rng rng(1004);
  double worst_lin = 0.0, worst_log = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double v = rng.uniform01();
    double lo = rng.uniform(-1e3, 1e3);
    double hi = lo + rng.uniform(1e-3, 2e3);
    worst_lin = std::max(worst_lin, std::abs(normalize_linear(unnormalize_linear(v, lo, hi), lo, hi) - v));

    lo = std::pow(10.0, rng.uniform(-3, 3));
    hi = lo * std::pow(10.0, rng.uniform(0.01, 6));
    worst_log = std::max(worst_log, std::abs(normalize_log(unnormalize_log(v, lo, hi), lo, hi) - v));
    const double x = lo * std::pow(hi / lo, rng.uniform01());
    worst_log = std::max(worst_log, std::abs(unnormalize_log(normalize_log(x, lo, hi), lo, hi) - x) / x);
  }
  return {worst_lin <= kRoundTripTol && worst_log <= kRoundTripTol,
          fmt("10^4 triples: linear max err %.2e, log max err %.2e (tol %.0e)", worst_lin, worst_log, kRoundTripTol)};
}

Outcome smoke_run() {
  const auto dir = testing::scratch_dir("acceptance_smoke");
  data::generate_corpus(kSmokeExamples, kSmokeCorpusSeed, dir / "corpus");

  train::TrainConfig cfg;
  cfg.corpus = dir / "corpus";
  cfg.checkpoint_dir = dir / "ckpt";
  cfg.batch_size = kSmokeBatch;
  cfg.learning_rate = kSmokeLearningRate;
  cfg.epochs = kSmokeMaxEpochs;
  cfg.seed = kSmokeTrainSeed;
  cfg.use_all_splits = true;   // the fixed 32 examples, all of them
  cfg.holdout_fraction = 0.0;
  cfg.eval_interval = kSmokeMaxEpochs;
  cfg.target_loss_ratio = kSmokeTargetRatio;

  const auto t0 = Clock::now();
  std::size_t last_epoch = 0;
  const auto result = train::train(cfg, [&](const train::StepRecord& r) {
    if (r.epoch != last_epoch && r.epoch % 10 == 0) {
      std::fprintf(stderr, "  smoke run: epoch %zu, %.0fs\n", r.epoch, seconds_since(t0));
    }
    last_epoch = r.epoch;
  });
  const double secs = seconds_since(t0);
  const double final_loss = result.epoch_loss_plot.empty() ? result.initial_loss_plot : result.epoch_loss_plot.back();
  const double ratio = final_loss / result.initial_loss_plot;

  const auto manifest = data::read_manifest(cfg.corpus);
  std::vector<const data::ManifestEntry*> all;
  for (const auto& e : manifest.entries) all.push_back(&e);
  const auto before = train::evaluate(nn::load_checkpoint(cfg.checkpoint_dir / "init.ckpt"), manifest, all);
  const auto after = train::evaluate(nn::load_checkpoint(result.final_checkpoint), manifest, all);
  fs::remove_all(dir);

  const bool pass = ratio <= kSmokeTargetRatio && secs <= kSmokeSeconds && after.e_count < before.e_count;
  return {pass, fmt("loss_plot %.2f -> %.2f (ratio %.3f, target <= %.2f), ", result.initial_loss_plot, final_loss, ratio,
                    kSmokeTargetRatio) +
                    fmt("%.0f epochs in %.0fs (budget %.0fs); ", double(result.epoch_loss_plot.size()), secs, kSmokeSeconds) +
                    fmt("e_count %.3f -> %.3f, e_plot %.2f -> %.2f", before.e_count, after.e_count, before.e_plot,
                        after.e_plot)};
}

Outcome shape_threshold() {
  const nn::ApexNet net(nn::ArchitectureConfig::standard(), 5);
  nn::Tensor input(nn::Shape{1, 3, 512, 512}, 1.0f);
  for (std::size_t i = 0; i < input.size(); i += 11) input[i] = 0.0f;
  const auto out = net.forward(input);
  bool open_unit = true;
  for (float v : out.curves) open_unit = open_unit && v > 0.0f && v < 1.0f;
  for (float v : out.scores) open_unit = open_unit && v > 0.0f && v < 1.0f;
  const bool shapes = out.curves.size() == 10 * 1024 && out.scores.size() == 10;

  PredictionSet pred;
  pred.curves.assign(10, NormalizedCurve{std::vector<double>(1024, 0.5)});
  pred.scores = {0.5, 0.50000001, 0.49999999, 0.9, 1.0, 0.0, 0.5, 0.7, 0.5, 0.51};
  const auto kept = pipeline::select_predictions(pred);
  const bool threshold = kept.kept_indices == std::vector<std::size_t>{4, 3, 7, 9, 1};

  return {shapes && open_unit && threshold,
          fmt("curves %.0f x %.0f, scores %.0f, all in (0,1): ", 10.0, double(out.curves.size()) / 10.0,
              double(out.scores.size())) +
              (open_unit ? "yes" : "no") + "; strict > 0.5 filter: " + (threshold ? "exact" : "wrong")};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(APEX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome export_equality() {
  const auto dir = testing::scratch_dir("acceptance_export");
  nn::ApexNet net(testing::tiny_architecture(), 12);
  testing::force_scores(net, {1, 4, 5, 9});
  const auto ckpt = dir / "net.ckpt";
  nn::save_checkpoint(net, ckpt);
  const auto image = dir / "plot.png";
  data::write_png(data::generate_example(99, {}).image, image);

  service::ServiceConfig cfg;
  cfg.checkpoint = ckpt;
  cfg.host = "127.0.0.1";
  cfg.port = 0;
  service::HttpServer server(cfg);
  const int port = server.bind();
  if (port < 0) return {false, "cannot bind a local port"};
  std::thread t([&] { server.listen(); });
  server.wait_for_model();
  httplib::Client http("127.0.0.1", port);
  http.set_read_timeout(60, 0);

  const std::vector<AxisCalibration> calibs = {
      AxisCalibration::identity(),
      {-3, 250, 0.01, 1e4, AxisScale::Linear, AxisScale::Log},
      {1, 1e6, -40, -2, AxisScale::Log, AxisScale::Linear},
  };
  std::size_t equal = 0;
  for (std::size_t c = 0; c < calibs.size(); ++c) {
    const auto& cal = calibs[c];
    const auto csv = dir / ("cli_" + std::to_string(c) + ".csv");
    char args[512];
    std::snprintf(args, sizeof args, "--xmin %.17g --xmax %.17g --ymin %.17g --ymax %.17g --xscale %s --yscale %s",
                  cal.x_min, cal.x_max, cal.y_min, cal.y_max, std::string(to_string(cal.x_scale)).c_str(),
                  std::string(to_string(cal.y_scale)).c_str());
    if (run_cli("extract --image " + image.string() + " --checkpoint " + ckpt.string() + " " + args + " --out " +
                csv.string()) != 0) {
      continue;
    }
    auto res = http.Post("/api/extract", httplib::MultipartFormDataItems{{"image", slurp(image), "plot.png", "image/png"}});
    if (!res || res->status != 200) continue;
    const auto j = nlohmann::json::parse(res->body);
    PredictionSet pred;
    for (const auto& curve : j["curves"]) pred.curves.push_back(NormalizedCurve{curve.get<std::vector<double>>()});
    pred.scores = j["scores"].get<std::vector<double>>();
    const auto kept = pipeline::select_predictions(pred);
    nlohmann::json body;
    body["calibration"] = service::calibration_to_json(cal);
    body["curves"] = nlohmann::json::array();
    for (const auto& curve : kept.kept_curves) body["curves"].push_back(curve.ys);
    auto exported = http.Post("/api/export", body.dump(), "application/json");
    if (exported && exported->status == 200 && exported->body == slurp(csv) && kept.size() == 4) ++equal;
  }
  server.stop();
  t.join();
  fs::remove_all(dir);
  return {equal == calibs.size(),
          fmt("%.0f/%.0f calibrations byte-identical between 'apex extract' and POST /api/export", double(equal),
              double(calibs.size()))};
}

}  // namespace

int main(int argc, char** argv) {
  filters.assign(argv + 1, argv + argc);
  report("loss oracle", loss_oracle);
  report("score-loss values", score_values);
  report("gradient check", gradient_check);
  report("spline oracle", spline_oracle);
  report("generator determinism/validity", generator);
  report("calibration round trips", calibration_round_trip);
  report("shape/threshold contract", shape_threshold);
  report("CLI/service export equality", export_equality);
  report("overfit smoke run", smoke_run);
  std::printf("%s: %d failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
