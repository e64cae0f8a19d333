#include <chrono>
#include <future>
#include <thread>
#include <vector>

#include "apex/core/errors.hpp"
#include "apex/core/grid.hpp"
#include "apex/core/hash.hpp"
#include "apex/data/image_io.hpp"
#include "apex/nn/checkpoint.hpp"
#include "apex/pipeline/extract.hpp"
#include "apex/service/service.hpp"
#include "doctest.h"
#include "httplib.h"
#include "support/fixtures.hpp"

using namespace apex;
using namespace apex::service;
namespace fs = std::filesystem;

namespace {

std::string png_bytes(std::size_t h = 60, std::size_t w = 90) {
  PlotImage img(h, w);
  for (std::size_t r = 0; r < h; ++r) img.at(r, (r * 3) % w, 1) = 0.0f;
  const auto bytes = data::encode_png(img);
  return {bytes.begin(), bytes.end()};
}

nlohmann::json export_body(const std::vector<std::vector<double>>& curves, nlohmann::json calib) {
  return {{"curves", curves}, {"calibration", std::move(calib)}};
}

nlohmann::json identity_calib() {
  return {{"x_min", 0}, {"x_max", 1}, {"y_min", 0}, {"y_max", 1}, {"x_scale", "linear"}, {"y_scale", "linear"}};
}

std::string field_of(const Reply& r) { return nlohmann::json::parse(r.body).value("field", ""); }

struct Fixture {
  fs::path dir = testing::scratch_dir("service");
  fs::path ckpt = dir / "tiny.ckpt";
  Fixture() {
    nn::ApexNet net(testing::tiny_architecture(), 21);
    testing::force_scores(net, {2, 5});
    nn::save_checkpoint(net, ckpt);
  }
};

}  // namespace

TEST_CASE("calibration JSON") {
  const auto c = calibration_from_json(identity_calib());
  CHECK(c.x_max == 1.0);
  CHECK(calibration_from_json(calibration_to_json(c)).y_scale == AxisScale::Linear);
  nlohmann::json no_scale = {{"x_min", 1}, {"x_max", 2}, {"y_min", 3}, {"y_max", 4}};
  CHECK(calibration_from_json(no_scale).x_scale == AxisScale::Linear);
  nlohmann::json bad = identity_calib();
  bad["y_scale"] = "cubic";
  CHECK_THROWS_AS(calibration_from_json(bad), InvalidArgument);
  bad = identity_calib();
  bad.erase("y_max");
  try {
    calibration_from_json(bad);
    FAIL("missing field accepted");
  } catch (const InvalidArgument& e) {
    CHECK(e.field() == "y_max");
  }
}

TEST_CASE("health and extract before and after model load") {
  Fixture fx;
  ExtractionService svc;
  CHECK(svc.health().status == 503);
  CHECK(svc.extract(png_bytes()).status == 503);

  REQUIRE(svc.load_checkpoint(fx.ckpt));
  const auto h = svc.health();
  CHECK(h.status == 200);
  const auto hj = nlohmann::json::parse(h.body);
  CHECK(hj["status"] == "ok");
  CHECK(hj["checkpoint"] == sha256_file(fx.ckpt));

  CHECK(svc.extract(std::nullopt).status == 400);
  CHECK(svc.extract(std::string()).status == 400);
  CHECK(svc.extract(std::string("not an image")).status == 400);
  CHECK(svc.extract(std::string(kMaxUploadBytes + 1, 'x')).status == 413);

  const auto image = png_bytes();
  const auto r = svc.extract(image);
  REQUIRE(r.status == 200);
  const auto j = nlohmann::json::parse(r.body);
  CHECK(j["grid_n"] == 1024);
  REQUIRE(j["curves"].size() == 10);
  REQUIRE(j["scores"].size() == 10);
  for (const auto& c : j["curves"]) {
    CHECK(c.size() == 1024);
    for (const auto& v : c) CHECK((v.get<double>() >= 0.0 && v.get<double>() <= 1.0));
  }
  CHECK(j["scores"][2].get<double>() > 0.5);
  CHECK(j["scores"][0].get<double>() < 0.5);
  CHECK(j["image_id"] == sha256_hex(image));
  CHECK(svc.extract(image).body == r.body);

  ExtractionService broken;
  CHECK_FALSE(broken.load_checkpoint(fx.dir / "missing.ckpt"));
  const auto bh = broken.health();
  CHECK(bh.status == 503);
  CHECK(nlohmann::json::parse(bh.body)["status"] == "error");
}

TEST_CASE("export endpoint") {
  ExtractionService svc;  // export needs no model
  const auto grid = make_sample_grid();
  const std::vector<double> half(1024, 0.5);

  const auto r = svc.export_csv(export_body({half}, identity_calib()).dump());
  REQUIRE(r.status == 200);
  CHECK(r.content_type == "text/csv");
  CHECK(r.body == pipeline::export_csv({NormalizedCurve{half}}, grid, AxisCalibration::identity()));
  bool attachment = false;
  for (const auto& [k, v] : r.headers) attachment |= k == "Content-Disposition" && v.rfind("attachment", 0) == 0;
  CHECK(attachment);

  auto calib = identity_calib();
  calib["x_min"] = 2;
  calib["x_max"] = 1;
  auto bad = svc.export_csv(export_body({half}, calib).dump());
  CHECK(bad.status == 400);
  CHECK(field_of(bad) == "x_min");

  calib = identity_calib();
  calib["y_scale"] = "log";
  bad = svc.export_csv(export_body({half}, calib).dump());
  CHECK(bad.status == 400);
  CHECK(field_of(bad) == "y_min");

  CHECK(svc.export_csv("{not json").status == 400);
  CHECK(svc.export_csv("[]").status == 400);
  CHECK(field_of(svc.export_csv(export_body({std::vector<double>(5, 0.5)}, identity_calib()).dump())) == "curves");
  CHECK(field_of(svc.export_csv(nlohmann::json{{"curves", {half}}}.dump())) == "calibration");
  CHECK(field_of(svc.export_csv(export_body({}, identity_calib()).dump())) == "curves");

  auto empty = export_body({}, identity_calib());
  empty["allow_empty"] = true;
  const auto e = svc.export_csv(empty.dump());
  CHECK(e.status == 200);
  CHECK(e.body.rfind("x\n0\n", 0) == 0);
}

TEST_CASE("HTTP server end to end") {
  Fixture fx;
  ServiceConfig cfg;
  cfg.checkpoint = fx.ckpt;
  cfg.host = "127.0.0.1";
  cfg.port = 0;
  cfg.cors_origin = "http://localhost:5173";
  HttpServer server(cfg);
  const int port = server.bind();
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });
  server.wait_for_model();

  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);
  auto h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(nlohmann::json::parse(h->body)["checkpoint"] == sha256_file(fx.ckpt));
  CHECK(h->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  const auto image = png_bytes();
  const httplib::MultipartFormDataItems form = {{"image", image, "plot.png", "image/png"}};
  auto first = cli.Post("/api/extract", form);
  REQUIRE(first);
  CHECK(first->status == 200);

  std::vector<std::future<std::string>> parallel;
  for (int i = 0; i < 4; ++i) {
    parallel.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(30, 0);
      auto res = c.Post("/api/extract", form);
      return res ? res->body : std::string("request failed");
    }));
  }
  for (auto& f : parallel) CHECK(f.get() == first->body);

  auto empty = cli.Post("/api/extract", httplib::MultipartFormDataItems{{"image", "", "x.png", "image/png"}});
  REQUIRE(empty);
  CHECK(empty->status == 400);
  auto missing = cli.Post("/api/extract", httplib::MultipartFormDataItems{{"other", "x", "", ""}});
  REQUIRE(missing);
  CHECK(missing->status == 400);

  // Client-side threshold then export equals the library export.
  const auto j = nlohmann::json::parse(first->body);
  PredictionSet pred;
  for (const auto& c : j["curves"]) pred.curves.push_back(NormalizedCurve{c.get<std::vector<double>>()});
  pred.scores = j["scores"].get<std::vector<double>>();
  const auto kept = pipeline::select_predictions(pred);
  REQUIRE(kept.size() == 2);
  std::vector<std::vector<double>> rows;
  for (const auto& c : kept.kept_curves) rows.push_back(c.ys);
  const AxisCalibration calib{1, 1000, 0.5, 2.5, AxisScale::Log, AxisScale::Linear};
  auto exported = cli.Post("/api/export", export_body(rows, calibration_to_json(calib)).dump(), "application/json");
  REQUIRE(exported);
  CHECK(exported->status == 200);
  CHECK(exported->get_header_value("Content-Type") == "text/csv");
  CHECK(exported->body == pipeline::export_csv(kept, make_sample_grid(), calib));

  auto pre = cli.Options("/api/export");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  auto huge = cli.Post("/api/extract", std::string(kMaxUploadBytes + 128 * 1024, 'x'), "application/octet-stream");
  REQUIRE(huge);
  CHECK(huge->status == 413);

  server.stop();
  t.join();
}

TEST_CASE("HTTP server reports 503 while the checkpoint is unavailable") {
  ServiceConfig cfg;
  cfg.checkpoint = "/nonexistent/model.ckpt";
  cfg.host = "127.0.0.1";
  cfg.port = 0;
  HttpServer server(cfg);
  const int port = server.bind();
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });
  server.wait_for_model();
  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 503);
  auto x = cli.Post("/api/extract", httplib::MultipartFormDataItems{{"image", png_bytes(), "p.png", "image/png"}});
  REQUIRE(x);
  CHECK(x->status == 503);
  CHECK(server.service().ready() == false);
  server.stop();
  t.join();
}
