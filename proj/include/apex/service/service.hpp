#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "apex/core/calibration.hpp"
#include "apex/nn/network.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace apex::service {

inline constexpr std::size_t kMaxUploadBytes = 20u * 1024u * 1024u;

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

// Calibration as sent by clients: {"x_min","x_max","y_min","y_max"} numbers
// plus optional "x_scale"/"y_scale" ("linear" default). Throws InvalidArgument
// naming the field.
AxisCalibration calibration_from_json(const nlohmann::json& j);
nlohmann::json calibration_to_json(const AxisCalibration& calib);

struct ServiceConfig {
  std::filesystem::path checkpoint;
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string cors_origin;  // empty disables CORS headers

  // APEX_CHECKPOINT, APEX_PORT, APEX_CORS_ORIGIN override the defaults.
  static ServiceConfig from_environment();
  static ServiceConfig from_environment(ServiceConfig defaults);
};

// Request handling without the transport, so handlers can be exercised
// directly. Thread-safe; the model is shared read-only.
class ExtractionService {
 public:
  ExtractionService() = default;

  // Installs a model; `checkpoint_hash` is reported by /healthz.
  void set_model(std::shared_ptr<const nn::ApexNet> net, std::string checkpoint_hash);
  // Loads in the calling thread. Returns false (and records the error) on failure.
  bool load_checkpoint(const std::filesystem::path& path);
  bool ready() const;

  Reply health() const;
  // `image` is the uploaded file body; nullopt when the field was absent.
  Reply extract(const std::optional<std::string>& image) const;
  Reply export_csv(const std::string& json_body) const;

 private:
  std::shared_ptr<const nn::ApexNet> model() const;

  mutable std::mutex mutex_;
  std::shared_ptr<const nn::ApexNet> net_;
  std::string hash_;
  std::string load_error_;
};

// HTTP front end. The checkpoint loads on a background thread; until then
// /healthz and /api/extract answer 503.
class HttpServer {
 public:
  explicit HttpServer(ServiceConfig config);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and starts the model load. Returns the
  // bound port, or -1.
  int bind();
  // Serves until stop(); call after bind().
  bool listen();
  void stop();
  void wait_for_model();

  ExtractionService& service() noexcept { return service_; }

 private:
  void install_routes();

  ServiceConfig config_;
  ExtractionService service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread loader_;
};

}  // namespace apex::service
