#include "udm/service.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"
#include "udm/error.hpp"
#include "udm/synth.hpp"

namespace udm::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
  }
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownReport:
    case ErrorCode::UnknownEvent: return 404;
    case ErrorCode::StaleVersion: return 409;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::CorruptFile: return 400;
    default: return 422;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(report::canonical_dump(body), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  json body = {{"error", e.what()}, {"code", std::string(to_string(e.code()))}};
  int status = status_for(e.code());
  if (const auto* pe = dynamic_cast<const PipelineError*>(&e)) {
    body["stage"] = pe->stage();
    // Input problems caught inside a stage are still pipeline failures.
    if (status == 400 && pe->stage() != "config") status = 422;
  }
  send_json(res, status, body);
}

std::optional<int> expected_version(const httplib::Request& req, const json* body) {
  if (req.has_header("If-Match")) {
    try {
      return std::stoi(req.get_header_value("If-Match"));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "header 'If-Match': expected an integer version");
    }
  }
  if (body && body->contains("expected_version")) {
    const auto& v = body->at("expected_version");
    if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, "field 'expected_version': expected an integer");
    return v.get<int>();
  }
  return std::nullopt;
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace

ServiceConfig service_config_from_json(const json& j, const fs::path& base) {
  ServiceConfig cfg;
  auto path_of = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': expected a path");
    fs::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  try {
    if (j.contains("listen")) {
      const auto listen = j.at("listen").get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "field 'listen': expected host:port");
      cfg.host = listen.substr(0, colon);
      cfg.port = std::stoi(listen.substr(colon + 1));
    }
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("service config: ") + e.what());
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidConfig, "field 'listen': bad port");
  }
  if (auto p = path_of("store_dir")) cfg.store_dir = *p;
  cfg.thresholds_path = path_of("thresholds");
  cfg.inventory_path = path_of("inventory");
  cfg.templates_path = path_of("templates");
  cfg.weights_path = path_of("weights");
  cfg.calibration_path = path_of("calibration");
  cfg.store_dir = report::resolve_store_dir(cfg.store_dir);
  return cfg;
}

ServiceConfig load_service_config(const fs::path& path) {
  return service_config_from_json(read_json(path), path.parent_path());
}

report::PipelineOptions pipeline_options(const ServiceConfig& cfg, PhonemeInventory& inv_out) {
  inv_out = cfg.inventory_path ? load_inventory(*cfg.inventory_path) : demo_inventory();
  report::PipelineOptions opts;
  if (cfg.thresholds_path) opts.thresholds = classify::thresholds_from_json(read_json(*cfg.thresholds_path));
  if (cfg.calibration_path) {
    opts.calibration.temperature = read_json(*cfg.calibration_path).at("temperature").get<double>();
  }
  if (cfg.templates_path) opts.encoder = align::templates_from_json(read_json(*cfg.templates_path));
  if (cfg.weights_path) opts.weights = temporal::WeightBundle::load(*cfg.weights_path);
  if (!opts.encoder) opts.encoder = synth::build_templates(inv_out, opts.frontend);
  return opts;
}

Service::Service(ServiceConfig cfg, PhonemeInventory inv, report::PipelineOptions opts)
    : cfg_(std::move(cfg)),
      inv_(std::move(inv)),
      opts_(std::move(opts)),
      store_(std::make_unique<report::ReportStore>(cfg_.store_dir)),
      server_(std::make_unique<httplib::Server>()) {
  if (!opts_.encoder) opts_.encoder = synth::build_templates(inv_, opts_.frontend);
  install_routes();
}

Service::~Service() { stop(); }

bool Service::listen() { return server_->listen(cfg_.host, cfg_.port); }
int Service::bind_any_port() { return server_->bind_to_any_port(cfg_.host); }
bool Service::listen_after_bind() { return server_->listen_after_bind(); }
void Service::stop() {
  if (server_) server_->stop();
}
void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::install_routes() {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, If-Match"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto guard = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}, {"code", "Internal"}});
      }
    };
  };

  srv.Post("/analyze", guard([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      throw Error(ErrorCode::InvalidConfig, "expected multipart/form-data with 'audio' and 'transcript'");
    }
    if (!req.has_file("audio")) throw Error(ErrorCode::InvalidConfig, "field 'audio': missing");
    if (!req.has_file("transcript")) throw Error(ErrorCode::InvalidConfig, "field 'transcript': missing");
    const auto audio_part = req.get_file_value("audio");
    const auto transcript = req.get_file_value("transcript").content;
    auto opts = opts_;
    if (req.has_file("thresholds")) {
      json th;
      try {
        th = json::parse(req.get_file_value("thresholds").content);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("field 'thresholds': malformed JSON: ") + e.what());
      }
      opts.thresholds = classify::thresholds_from_json(th);
    }
    AudioBuffer audio;
    try {
      const auto& c = audio_part.content;
      audio = decode_wav(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(c.data()), c.size()));
    } catch (const Error& e) {
      throw PipelineError("audio", e);
    }
    auto r = report::analyze(audio, transcript, inv_, opts, audio_part.filename);
    r = store_->create(std::move(r));
    send_json(res, 200, {{"report_id", r.report_id}, {"version", r.version}});
  }));

  srv.Get("/reports", guard([this](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& s : store_->list()) list.push_back(report::to_json(s));
    send_json(res, 200, {{"reports", list}});
  }));

  srv.Get(R"(/reports/([A-Za-z0-9_-]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(report::serialize(store_->get(req.matches[1])), "application/json");
  }));

  srv.Get(R"(/reports/([A-Za-z0-9_-]+)/alignment\.svg)",
          guard([this](const httplib::Request& req, httplib::Response& res) {
            double pps = 100.0;
            if (req.has_param("px_per_s")) {
              try {
                pps = std::stod(req.get_param_value("px_per_s"));
              } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidConfig, "parameter 'px_per_s': expected a number");
              }
            }
            res.status = 200;
            res.set_content(report::render_alignment_svg(store_->get(req.matches[1]), pps), "image/svg+xml");
          }));

  srv.Post(R"(/reports/([A-Za-z0-9_-]+)/reanalyze)",
           guard([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             store_->get(id);  // 404 before validating the body
             json body = parse_body(req);
             const auto expected = expected_version(req, &body);
             if (body.is_object()) body.erase("expected_version");
             const auto th = classify::thresholds_from_json(body);
             res.status = 200;
             res.set_content(report::serialize(store_->reanalyze(id, th, expected)), "application/json");
           }));

  srv.Post(R"(/reports/([A-Za-z0-9_-]+)/verdicts)",
           guard([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             store_->get(id);
             const json body = parse_body(req);
             if (!body.is_object()) throw Error(ErrorCode::InvalidConfig, "verdict body must be an object");
             auto str = [&](const char* key, bool required) -> std::string {
               if (!body.contains(key)) {
                 if (required) throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': missing");
                 return {};
               }
               if (!body.at(key).is_string()) {
                 throw Error(ErrorCode::InvalidConfig, std::string("field '") + key + "': expected a string");
               }
               return body.at(key).get<std::string>();
             };
             const auto event_id = str("event_id", true);
             const auto verdict = str("verdict", true);
             auto annotator = str("annotator", false);
             if (annotator.empty()) annotator = "anonymous";
             if (verdict != "accepted" && verdict != "rejected") {
               throw Error(ErrorCode::InvalidConfig, "field 'verdict': must be 'accepted' or 'rejected'");
             }
             const auto expected = expected_version(req, &body);
             res.status = 200;
             res.set_content(report::serialize(store_->record_verdict(id, event_id, verdict, annotator, expected)),
                             "application/json");
           }));
}

}  // namespace udm::service
