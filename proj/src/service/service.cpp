#include "apex/service/service.hpp"

#include <cstdlib>
#include <iostream>

#include "apex/core/errors.hpp"
#include "apex/core/grid.hpp"
#include "apex/core/hash.hpp"
#include "apex/data/image_io.hpp"
#include "apex/nn/checkpoint.hpp"
#include "apex/pipeline/extract.hpp"
#include "httplib.h"

namespace apex::service {
namespace {

Reply json_reply(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump(), {}};
}

Reply error_reply(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_reply(status, body);
}

double number_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(std::string("missing ") + key, key);
  if (!it->is_number()) throw InvalidArgument(std::string(key) + " must be a number", key);
  return it->get<double>();
}

AxisScale scale_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) return AxisScale::Linear;
  if (!it->is_string()) throw InvalidArgument(std::string(key) + " must be a string", key);
  return parse_axis_scale(it->get<std::string>(), key);
}

}  // namespace

AxisCalibration calibration_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("calibration must be an object", "calibration");
  AxisCalibration c;
  c.x_min = number_field(j, "x_min");
  c.x_max = number_field(j, "x_max");
  c.y_min = number_field(j, "y_min");
  c.y_max = number_field(j, "y_max");
  c.x_scale = scale_field(j, "x_scale");
  c.y_scale = scale_field(j, "y_scale");
  validate_calibration(c);
  return c;
}

nlohmann::json calibration_to_json(const AxisCalibration& c) {
  return {{"x_min", c.x_min},
          {"x_max", c.x_max},
          {"y_min", c.y_min},
          {"y_max", c.y_max},
          {"x_scale", std::string(to_string(c.x_scale))},
          {"y_scale", std::string(to_string(c.y_scale))}};
}

ServiceConfig ServiceConfig::from_environment() { return from_environment(ServiceConfig{}); }

ServiceConfig ServiceConfig::from_environment(ServiceConfig cfg) {
  if (const char* v = std::getenv("APEX_CHECKPOINT"); v && *v) cfg.checkpoint = v;
  if (const char* v = std::getenv("APEX_PORT"); v && *v) {
    try {
      cfg.port = std::stoi(v);
    } catch (const std::exception&) {
      throw InvalidArgument("APEX_PORT must be an integer", "APEX_PORT");
    }
  }
  if (const char* v = std::getenv("APEX_CORS_ORIGIN"); v && *v) cfg.cors_origin = v;
  return cfg;
}

void ExtractionService::set_model(std::shared_ptr<const nn::ApexNet> net, std::string hash) {
  std::lock_guard lock(mutex_);
  net_ = std::move(net);
  hash_ = std::move(hash);
  load_error_.clear();
}

bool ExtractionService::load_checkpoint(const std::filesystem::path& path) {
  try {
    auto net = std::make_shared<const nn::ApexNet>(nn::load_checkpoint(path));
    set_model(std::move(net), sha256_file(path));
    return true;
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    load_error_ = e.what();
    return false;
  }
}

bool ExtractionService::ready() const { return model() != nullptr; }

std::shared_ptr<const nn::ApexNet> ExtractionService::model() const {
  std::lock_guard lock(mutex_);
  return net_;
}

Reply ExtractionService::health() const {
  std::lock_guard lock(mutex_);
  if (!net_) {
    nlohmann::json body = {{"status", load_error_.empty() ? "loading" : "error"}};
    if (!load_error_.empty()) body["error"] = load_error_;
    return json_reply(503, body);
  }
  return json_reply(200, {{"status", "ok"}, {"checkpoint", hash_}});
}

Reply ExtractionService::extract(const std::optional<std::string>& image) const {
  const auto net = model();
  if (!net) return error_reply(503, "model not loaded");
  if (!image || image->empty()) return error_reply(400, "missing or empty image", "image");
  if (image->size() > kMaxUploadBytes) return error_reply(413, "image exceeds 20 MB", "image");

  PlotImage decoded;
  try {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(image->data());
    decoded = data::decode_image(std::span<const std::uint8_t>(bytes, image->size()));
  } catch (const InputError& e) {
    return error_reply(400, e.what(), "image");
  }
  const PredictionSet pred = net->predict(decoded);
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : pred.curves) curves.push_back(c.ys);
  return json_reply(200, {{"image_id", sha256_hex(*image)},
                          {"grid_n", net->config().points_per_plot},
                          {"curves", std::move(curves)},
                          {"scores", pred.scores}});
}

Reply ExtractionService::export_csv(const std::string& json_body) const {
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(json_body);
  } catch (const nlohmann::json::exception&) {
    return error_reply(400, "request body is not valid JSON");
  }
  if (!body.is_object()) return error_reply(400, "request body must be a JSON object");
  try {
    const auto curves_it = body.find("curves");
    if (curves_it == body.end() || !curves_it->is_array()) {
      throw InvalidArgument("curves must be a list of arrays", "curves");
    }
    std::vector<NormalizedCurve> curves;
    for (const auto& row : *curves_it) {
      if (!row.is_array()) throw InvalidArgument("each curve must be an array", "curves");
      NormalizedCurve c;
      for (const auto& v : row) {
        if (!v.is_number()) throw InvalidArgument("curve values must be numbers", "curves");
        c.ys.push_back(v.get<double>());
      }
      curves.push_back(std::move(c));
    }
    const auto calib_it = body.find("calibration");
    if (calib_it == body.end()) throw InvalidArgument("missing calibration", "calibration");
    const AxisCalibration calib = calibration_from_json(*calib_it);
    const bool allow_empty = body.value("allow_empty", false);
    const SampleGrid grid = make_sample_grid(kDefaultGridPoints);
    Reply reply{200, "text/csv", pipeline::export_csv(curves, grid, calib, allow_empty), {}};
    reply.headers.emplace_back("Content-Disposition", "attachment; filename=\"curves.csv\"");
    return reply;
  } catch (const InvalidArgument& e) {
    return error_reply(400, e.what(), e.field());
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, e.what());
  }
}

HttpServer::HttpServer(ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  // Multipart framing adds a little on top of the image itself.
  server_->set_payload_max_length(kMaxUploadBytes + 64 * 1024);
  install_routes();
}

HttpServer::~HttpServer() {
  stop();
  if (loader_.joinable()) loader_.join();
}

void HttpServer::install_routes() {
  const auto send = [this](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, reply.content_type);
  };

  if (!config_.cors_origin.empty()) {
    const std::string origin = config_.cors_origin;
    server_->set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Expose-Headers", "Content-Disposition");
    });
    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }

  server_->Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, service_.health());
  });
  server_->Post("/api/extract", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> image;
    if (req.has_file("image")) image = req.get_file_value("image").content;
    send(res, service_.extract(image));
  });
  server_->Post("/api/export", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.export_csv(req.body));
  });
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      res.set_content(R"({"error":"request exceeds 20 MB","field":"image"})", "application/json");
    } else {
      res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}}.dump(),
                      "application/json");
    }
  });
}

int HttpServer::bind() {
  const int port = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                                      : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port < 0) return -1;
  if (!loader_.joinable()) {
    loader_ = std::thread([this] {
      if (!service_.load_checkpoint(config_.checkpoint)) {
        std::cerr << "apex serve: failed to load checkpoint " << config_.checkpoint << ": "
                  << service_.health().body << "\n";
      }
    });
  }
  return port;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::wait_for_model() {
  if (loader_.joinable()) loader_.join();
}

}  // namespace apex::service
