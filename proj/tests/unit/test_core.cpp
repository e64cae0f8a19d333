#include <cmath>
#include <vector>

#include "apex/core/calibration.hpp"
#include "apex/core/errors.hpp"
#include "apex/core/grid.hpp"
#include "apex/core/rng.hpp"
#include "apex/core/types.hpp"
#include "doctest.h"

using namespace apex;

TEST_CASE("sample grid endpoints and spacing") {
  const auto g = make_sample_grid(1024);
  CHECK(g.size() == 1024);
  CHECK(g[0] == 0.0);
  CHECK(g[1023] == 1.0);

  const auto two = make_sample_grid(2);
  CHECK(std::vector<double>(two.xs().begin(), two.xs().end()) == std::vector<double>{0.0, 1.0});

  const auto five = make_sample_grid(5);
  CHECK(std::vector<double>(five.xs().begin(), five.xs().end()) ==
        std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

  CHECK_THROWS_AS(make_sample_grid(1), InvalidArgument);
  CHECK_THROWS_AS(make_sample_grid(0), InvalidArgument);
}

TEST_CASE("grid spacing is uniform for every size") {
  for (std::size_t n = 2; n <= 2048; n = n * 3 / 2 + 1) {
    const auto g = make_sample_grid(n);
    const double step = g[1] - g[0];
    for (std::size_t i = 1; i < n; ++i) {
      REQUIRE(g[i] > g[i - 1]);
      CHECK(std::abs((g[i] - g[i - 1]) - step) <= 1e-12);
    }
  }
}

TEST_CASE("linear unnormalization") {
  CHECK(unnormalize_linear(0.0, 2.0, 4.0) == 2.0);
  CHECK(unnormalize_linear(1.0, 2.0, 4.0) == 4.0);
  CHECK(unnormalize_linear(0.5, 2.0, 4.0) == 3.0);
  CHECK_THROWS_AS(unnormalize_linear(0.5, 4.0, 4.0), InvalidArgument);
  CHECK_THROWS_AS(unnormalize_linear(0.5, 5.0, 4.0), InvalidArgument);
}

TEST_CASE("log unnormalization") {
  CHECK(unnormalize_log(0.0, 1.0, 100.0) == 1.0);
  CHECK(unnormalize_log(1.0, 1.0, 100.0) == 100.0);
  CHECK(unnormalize_log(0.5, 1.0, 100.0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK_THROWS_AS(unnormalize_log(0.5, 0.0, 100.0), InvalidArgument);
  CHECK_THROWS_AS(unnormalize_log(0.5, -1.0, 100.0), InvalidArgument);
  CHECK_THROWS_AS(unnormalize_log(0.5, 100.0, 10.0), InvalidArgument);
}

TEST_CASE("unnormalization is strictly increasing in v") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    double lo = rng.uniform(-1e3, 1e3);
    double hi = lo + rng.uniform(1e-3, 1e3);
    double plo = std::exp(rng.uniform(-5, 5));
    double phi = plo * std::exp(rng.uniform(0.01, 5));
    double prev_lin = -INFINITY;
    double prev_log = -INFINITY;
    for (int i = 0; i <= 100; ++i) {
      const double v = i / 100.0;
      const double lin = unnormalize_linear(v, lo, hi);
      const double lg = unnormalize_log(v, plo, phi);
      CHECK(lin > prev_lin);
      CHECK(lg > prev_log);
      prev_lin = lin;
      prev_log = lg;
    }
  }
}

TEST_CASE("normalize/unnormalize round trips") {
  Rng rng(11);
  for (int t = 0; t < 10000; ++t) {
    double a = rng.uniform(-1e6, 1e6);
    double b = rng.uniform(-1e6, 1e6);
    if (a == b) continue;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double x = rng.uniform(lo, hi);
    CHECK(std::abs(unnormalize_linear(normalize_linear(x, lo, hi), lo, hi) - x) <= 1e-9);

    const double plo = std::pow(10.0, rng.uniform(-6, 5));
    const double phi = plo * std::pow(10.0, rng.uniform(1e-3, 6));
    const double px = unnormalize_log(rng.uniform01(), plo, phi);
    CHECK(std::abs(unnormalize_log(normalize_log(px, plo, phi), plo, phi) - px) <= 1e-9 * std::max(1.0, px));
  }
}

TEST_CASE("calibration validation names the offending field") {
  AxisCalibration c;
  CHECK_FALSE(check_calibration(c).has_value());

  c.x_min = 5;
  c.x_max = 5;
  REQUIRE(check_calibration(c).has_value());
  CHECK(check_calibration(c)->field == "x_min");

  c = {};
  c.y_scale = AxisScale::Log;
  c.y_min = 0.0;
  REQUIRE(check_calibration(c).has_value());
  CHECK(check_calibration(c)->field == "y_min");

  c = {};
  c.y_min = 2;
  c.y_max = 1;
  try {
    validate_calibration(c);
    FAIL("expected throw");
  } catch (const InvalidArgument& e) {
    CHECK(e.field() == "y_min");
  }

  CHECK(parse_axis_scale("log") == AxisScale::Log);
  CHECK_THROWS_AS(parse_axis_scale("semilog"), InvalidArgument);
}

TEST_CASE("apply_calibration") {
  const auto grid = make_sample_grid(1024);
  NormalizedCurve half{std::vector<double>(1024, 0.5)};

  SUBCASE("linear constants") {
    const auto pts = apply_calibration(half, grid, {0, 10, 0, 100, AxisScale::Linear, AxisScale::Linear});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(pts[i].first == doctest::Approx(10.0 * grid[i]).epsilon(1e-15));
      CHECK(pts[i].second == 50.0);
    }
  }
  SUBCASE("identity is exact") {
    NormalizedCurve ramp;
    for (std::size_t i = 0; i < 1024; ++i) ramp.ys.push_back(std::fmod(i * 0.377, 1.0));
    const auto pts = apply_calibration(ramp, grid, AxisCalibration::identity());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(pts[i].first == grid[i]);
      CHECK(pts[i].second == ramp.ys[i]);
    }
  }
  SUBCASE("log-log") {
    const auto pts = apply_calibration(half, grid, {1, 100, 1, 10000, AxisScale::Log, AxisScale::Log});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(pts[i].first == doctest::Approx(std::pow(10.0, 2.0 * grid[i])).epsilon(1e-13));
      CHECK(pts[i].second == doctest::Approx(100.0).epsilon(1e-14));
    }
  }
  SUBCASE("length mismatch") {
    NormalizedCurve short_curve{std::vector<double>(10, 0.5)};
    CHECK_THROWS_AS(apply_calibration(short_curve, grid, {}), InvalidArgument);
  }
}

TEST_CASE("prediction boundary clamps model noise") {
  const std::vector<float> curves = {-1e-7f, 0.5f, 1.0000001f, 0.25f};
  const std::vector<float> scores = {1.2f, -0.1f};
  const auto p = PredictionSet::from_model_output(curves, scores, 2);
  REQUIRE(p.size() == 2);
  CHECK(p.curves[0].ys == std::vector<double>{0.0, 0.5});
  CHECK(p.curves[1].ys == std::vector<double>{1.0, 0.25});
  CHECK(p.scores == std::vector<double>{1.0, 0.0});
  CHECK_NOTHROW(validate_prediction(p, 2));
  CHECK_THROWS_AS(PredictionSet::from_model_output(curves, scores, 3), InvalidArgument);
}

TEST_CASE("ground truth validation") {
  GroundTruthSet gt;
  CHECK_THROWS_AS(validate_ground_truth(gt, 4), InvalidArgument);
  gt.curves.push_back({{0.0, 0.5, 1.0, 0.2}});
  CHECK_NOTHROW(validate_ground_truth(gt, 4));
  gt.curves.push_back({{0.0, 1.5, 1.0, 0.2}});
  CHECK_THROWS_AS(validate_ground_truth(gt, 4), InvalidArgument);
  gt.curves.pop_back();
  for (int i = 0; i < 10; ++i) gt.curves.push_back({{0.1, 0.1, 0.1, 0.1}});
  CHECK_THROWS_AS(validate_ground_truth(gt, 4), InvalidArgument);
}
