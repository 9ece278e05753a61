#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "udm/inventory.hpp"
#include "udm/report.hpp"

namespace httplib {
class Server;
}

namespace udm::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store_dir = "reports";
  std::optional<std::filesystem::path> thresholds_path;
  std::optional<std::filesystem::path> inventory_path;
  std::optional<std::filesystem::path> templates_path;
  std::optional<std::filesystem::path> weights_path;
  std::optional<std::filesystem::path> calibration_path;
};

/// Relative paths resolve against `base`. UDM_STORE overrides store_dir.
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Loads inventory, thresholds and optional model files named by the config.
report::PipelineOptions pipeline_options(const ServiceConfig& cfg, PhonemeInventory& inv_out);

/// HTTP surface over a ReportStore. Handlers are safe to run concurrently.
class Service {
 public:
  Service(ServiceConfig cfg, PhonemeInventory inv, report::PipelineOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  report::ReportStore& store() { return *store_; }
  /// Blocks until stop().
  bool listen();
  /// Binds an ephemeral port on the configured host and returns it.
  int bind_any_port();
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  ServiceConfig cfg_;
  PhonemeInventory inv_;
  report::PipelineOptions opts_;
  std::unique_ptr<report::ReportStore> store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace udm::service
