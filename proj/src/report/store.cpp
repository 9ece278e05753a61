#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "udm/error.hpp"
#include "udm/report.hpp"

namespace udm::report {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

void dump(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {  // object_t is an ordered map
        if (!first) out += ',';
        first = false;
        out += json(k).dump();
        out += ':';
        dump(v, out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: out += format_double(j.get<double>()); break;
    default: out += j.dump(); break;
  }
}

json segments_json(const std::vector<ReportSegment>& segs) {
  json a = json::array();
  for (const auto& s : segs) {
    a.push_back({{"symbol", s.symbol},
                 {"start_s", s.start_s},
                 {"end_s", s.end_s},
                 {"mean_posterior", s.mean_posterior},
                 {"frame_span", {s.start_frame, s.end_frame}}});
  }
  return a;
}

std::vector<ReportSegment> segments_from(const json& a) {
  std::vector<ReportSegment> out;
  for (const auto& s : a) {
    out.push_back({s.at("symbol").get<std::string>(), s.at("start_s").get<double>(), s.at("end_s").get<double>(),
                   s.at("mean_posterior").get<double>(), s.at("frame_span").at(0).get<std::size_t>(),
                   s.at("frame_span").at(1).get<std::size_t>()});
  }
  return out;
}

json candidates_json(const std::vector<classify::Candidate>& c) {
  json a = json::array();
  for (const auto& x : c) a.push_back(classify::to_json(x));
  return a;
}

std::vector<classify::Candidate> candidates_from(const json& a) {
  std::vector<classify::Candidate> out;
  for (const auto& x : a) out.push_back(classify::candidate_from_json(x));
  return out;
}

}  // namespace

std::string canonical_dump(const json& j) {
  std::string out;
  dump(j, out);
  return out;
}

double quantize(double v) {
  if (!std::isfinite(v)) return v;
  const double q = std::strtod(format_double(v).c_str(), nullptr);
  return q == 0.0 ? 0.0 : q;
}

json to_json(const AnalysisReport& r) {
  json ops = json::array();
  for (const auto& op : r.edit_ops) ops.push_back(align::to_json(op));
  json events = json::array();
  for (const auto& e : r.events) events.push_back(classify::to_json(e));
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back(
        {{"event_id", v.event_id}, {"verdict", v.verdict}, {"annotator", v.annotator}, {"timestamp", v.timestamp}});
  }
  json neutral = json::object();
  for (std::size_t g = 0; g < classify::kChannelGroups.size(); ++g) {
    neutral[std::string(classify::to_string(classify::kChannelGroups[g]))] = candidates_json(r.neutralized[g]);
  }
  const auto& c = r.config;
  return {{"report_id", r.report_id},
          {"audio", {{"path", r.audio.path}, {"duration_s", r.audio.duration_s}, {"sample_rate", r.audio.sample_rate}}},
          {"config",
           {{"frontend", frontend::to_json(c.frontend)},
            {"thresholds", classify::to_json(c.thresholds)},
            {"calibration", {{"temperature", c.calibration.temperature}}},
            {"inventory", c.inventory},
            {"encoder", c.encoder},
            {"switch_penalty", c.switch_penalty},
            {"refine_window", c.refine_window},
            {"neural", c.neural},
            {"attribution", c.attribution}}},
          {"transcript", udm::to_json(r.transcript)},
          {"alignment", segments_json(r.alignment)},
          {"expected_alignment", segments_json(r.expected_alignment)},
          {"edit_ops", ops},
          {"candidates", candidates_json(r.candidates)},
          {"neutralized_candidates", neutral},
          {"events", events},
          {"version", r.version},
          {"verdicts", verdicts},
          {"processing_s", r.processing_s}};
}

AnalysisReport report_from_json(const json& j) {
  try {
    AnalysisReport r;
    r.report_id = j.at("report_id").get<std::string>();
    const auto& a = j.at("audio");
    r.audio = {a.at("path").get<std::string>(), a.at("duration_s").get<double>(), a.at("sample_rate").get<int>()};
    const auto& c = j.at("config");
    r.config.frontend = frontend::frontend_config_from_json(c.at("frontend"));
    r.config.thresholds = classify::thresholds_from_json(c.at("thresholds"));
    r.config.calibration.temperature = c.at("calibration").at("temperature").get<double>();
    r.config.inventory = c.at("inventory").get<std::string>();
    r.config.encoder = c.value("encoder", std::string("templates"));
    r.config.switch_penalty = c.value("switch_penalty", 4.0);
    r.config.refine_window = c.value("refine_window", 3);
    r.config.neural = c.value("neural", false);
    r.config.attribution = c.value("attribution", true);
    r.transcript = transcript_from_json(j.at("transcript"));
    r.alignment = segments_from(j.at("alignment"));
    r.expected_alignment = segments_from(j.value("expected_alignment", json::array()));
    for (const auto& op : j.at("edit_ops")) r.edit_ops.push_back(align::edit_op_from_json(op));
    r.candidates = candidates_from(j.value("candidates", json::array()));
    if (j.contains("neutralized_candidates")) {
      for (std::size_t g = 0; g < classify::kChannelGroups.size(); ++g) {
        r.neutralized[g] = candidates_from(
            j.at("neutralized_candidates").value(std::string(classify::to_string(classify::kChannelGroups[g])),
                                                 json::array()));
      }
    }
    for (const auto& e : j.at("events")) r.events.push_back(classify::event_from_json(e));
    r.version = j.at("version").get<int>();
    for (const auto& v : j.at("verdicts")) {
      r.verdicts.push_back({v.at("event_id").get<std::string>(), v.at("verdict").get<std::string>(),
                            v.at("annotator").get<std::string>(), v.at("timestamp").get<std::string>()});
    }
    r.processing_s = j.value("processing_s", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("report JSON: ") + e.what());
  }
}

std::string serialize(const AnalysisReport& r) { return canonical_dump(to_json(r)); }

AnalysisReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("report JSON: ") + e.what());
  }
  return report_from_json(j);
}

json to_json(const ReportSummary& s) {
  return {{"report_id", s.report_id},
          {"version", s.version},
          {"audio_path", s.audio_path},
          {"duration_s", s.duration_s},
          {"transcript", s.transcript},
          {"events", s.events}};
}

// ---------------------------------------------------------------------------

namespace {

std::string version_name(int v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%06d.json", v);
  return buf;
}

int latest_version(const fs::path& dir) {
  int best = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (name.size() != 12 || name[0] != 'v' || name.substr(7) != ".json") continue;
    best = std::max(best, std::atoi(name.substr(1, 6).c_str()));
  }
  return best;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes a new version file; fails if that version already exists.
void write_exclusive(const fs::path& p, const std::string& text) {
  std::FILE* f = std::fopen(p.c_str(), "wx");
  if (!f) {
    if (fs::exists(p)) throw Error(ErrorCode::StaleVersion, "version file exists: " + p.string());
    throw Error(ErrorCode::Io, "cannot write " + p.string());
  }
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) throw Error(ErrorCode::Io, "short write to " + p.string());
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char ch : id) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_')) return false;
  }
  return true;
}

std::string fresh_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[40];
  std::snprintf(buf, sizeof buf, "r-%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace

fs::path resolve_store_dir(const fs::path& fallback) {
  if (const char* env = std::getenv("UDM_STORE"); env && *env) return env;
  return fallback;
}

ReportStore::ReportStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (!fs::is_directory(dir_)) throw Error(ErrorCode::Io, "store directory unusable: " + dir_.string());
}

fs::path ReportStore::report_dir(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::UnknownReport, "no report '" + id + "'");
  return dir_ / id;
}

std::mutex& ReportStore::lock_for(const std::string& id) {
  std::lock_guard g(locks_mu_);
  auto& m = locks_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

AnalysisReport ReportStore::create(AnalysisReport r) {
  if (r.report_id.empty()) r.report_id = fresh_id();
  const auto dir = report_dir(r.report_id);
  std::lock_guard g(lock_for(r.report_id));
  std::error_code ec;
  if (!fs::create_directory(dir, ec)) {
    throw Error(ErrorCode::StaleVersion, "report '" + r.report_id + "' already exists");
  }
  r.version = 1;
  write_exclusive(dir / version_name(1), serialize(r));
  return r;
}

AnalysisReport ReportStore::get(const std::string& id) const {
  const auto dir = report_dir(id);
  const int v = fs::is_directory(dir) ? latest_version(dir) : 0;
  if (v == 0) throw Error(ErrorCode::UnknownReport, "no report '" + id + "'");
  return parse_report(read_file(dir / version_name(v)));
}

std::vector<ReportSummary> ReportStore::list() const {
  std::vector<ReportSummary> out;
  std::error_code ec;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    const auto id = d.filename().string();
    if (!valid_id(id) || latest_version(d) == 0) continue;
    try {
      const auto r = get(id);
      out.push_back({r.report_id, r.version, r.audio.path, r.audio.duration_s, r.transcript.source_text,
                     r.events.size()});
    } catch (const Error&) {
      // Skip unreadable entries rather than failing the listing.
    }
  }
  return out;
}

AnalysisReport ReportStore::commit(const std::string& id, const Mutation& mutate, std::optional<int> expected_version) {
  const auto dir = report_dir(id);
  std::lock_guard g(lock_for(id));
  AnalysisReport current = get(id);
  if (expected_version && *expected_version != current.version) {
    throw Error(ErrorCode::StaleVersion, "report '" + id + "' is at version " + std::to_string(current.version) +
                                             ", not " + std::to_string(*expected_version));
  }
  AnalysisReport next = mutate(current);
  next.report_id = current.report_id;
  next.version = current.version + 1;
  write_exclusive(dir / version_name(next.version), serialize(next));
  return next;
}

AnalysisReport ReportStore::reanalyze(const std::string& id, const classify::Thresholds& th,
                                      std::optional<int> expected_version) {
  return commit(id, [&](const AnalysisReport& r) { return rescore(r, th); }, expected_version);
}

AnalysisReport ReportStore::record_verdict(const std::string& id, const std::string& event_id,
                                           const std::string& verdict, const std::string& annotator,
                                           std::optional<int> expected_version) {
  const auto ts = utc_timestamp();
  return commit(id, [&](const AnalysisReport& r) { return with_verdict(r, event_id, verdict, annotator, ts); },
                expected_version);
}

}  // namespace udm::report
