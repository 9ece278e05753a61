#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "udm/alignment.hpp"
#include "udm/audio.hpp"
#include "udm/classifier.hpp"
#include "udm/frontend.hpp"
#include "udm/inventory.hpp"
#include "udm/temporal.hpp"
#include "udm/transcript.hpp"

namespace udm::report {

struct AudioMeta {
  std::string path;
  double duration_s = 0.0;
  int sample_rate = 0;
};

struct ReportSegment {
  std::string symbol;
  double start_s = 0.0;
  double end_s = 0.0;
  double mean_posterior = 0.0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;

  bool operator==(const ReportSegment&) const = default;
};

struct Verdict {
  std::string event_id;
  std::string verdict;  // "accepted" or "rejected"
  std::string annotator;
  std::string timestamp;

  bool operator==(const Verdict&) const = default;
};

struct ConfigSnapshot {
  frontend::FrontendConfig frontend;
  classify::Thresholds thresholds;
  classify::CalibrationModel calibration;
  std::string inventory;
  std::string encoder;  // "templates" or "external"
  double switch_penalty = 2.0;
  int refine_window = 3;
  bool neural = false;
  bool attribution = true;
};

struct AnalysisReport {
  std::string report_id;
  AudioMeta audio;
  ConfigSnapshot config;
  ExpectedTranscript transcript;
  /// Decoded realized phones; edit ops index into this list.
  std::vector<ReportSegment> alignment;
  /// Forced alignment against the transcript.
  std::vector<ReportSegment> expected_alignment;
  std::vector<align::PhonemeEditOp> edit_ops;
  std::vector<classify::Candidate> candidates;
  classify::NeutralizedCandidates neutralized;
  std::vector<classify::DysfluencyEvent> events;
  int version = 1;
  std::vector<Verdict> verdicts;
  double processing_s = 0.0;
};

nlohmann::json to_json(const AnalysisReport& r);
AnalysisReport report_from_json(const nlohmann::json& j);

/// Sorted keys, floats as %.6g, no insignificant whitespace.
std::string canonical_dump(const nlohmann::json& j);
/// The value a double takes after a canonical dump and parse.
double quantize(double v);
std::string serialize(const AnalysisReport& r);
AnalysisReport parse_report(std::string_view text);

struct PipelineOptions {
  frontend::FrontendConfig frontend;
  classify::Thresholds thresholds;
  classify::CalibrationModel calibration;
  /// Defaults to templates built from the inventory's synthesis map.
  std::optional<align::EncoderSource> encoder;
  std::optional<temporal::WeightBundle> weights;
  align::DecodeOptions decode;
  int refine_window = 3;
  bool attribution = true;
};

/// Full analysis. Stage failures surface as PipelineError.
AnalysisReport analyze(const AudioBuffer& audio, const std::string& transcript_text, const PhonemeInventory& inv,
                       const PipelineOptions& opts, const std::string& audio_path = {});
AnalysisReport analyze_file(const std::filesystem::path& audio_path, const std::string& transcript_text,
                            const PhonemeInventory& inv, const PipelineOptions& opts);

/// Candidates for already extracted features, as the attribution closure
/// needs them.
std::vector<classify::Candidate> score_candidates(const frontend::FeatureMatrix& features,
                                                  const ExpectedTranscript& t, const PhonemeInventory& inv,
                                                  const PipelineOptions& opts, const frontend::FrameGrid& grid);

/// Recomputes events from stored candidates under new thresholds. Alignment
/// and edit ops are copied unchanged; verdicts on vanished events are dropped.
/// Does not bump the version.
AnalysisReport rescore(const AnalysisReport& r, const classify::Thresholds& th);
/// Throws UnknownEvent or InvalidConfig. Does not bump the version.
AnalysisReport with_verdict(const AnalysisReport& r, const std::string& event_id, const std::string& verdict,
                            const std::string& annotator, const std::string& timestamp);
std::string utc_timestamp();

struct ReportSummary {
  std::string report_id;
  int version = 0;
  std::string audio_path;
  double duration_s = 0.0;
  std::string transcript;
  std::size_t events = 0;
};

nlohmann::json to_json(const ReportSummary& s);

/// One canonical JSON file per report version: {dir}/{id}/v000001.json, ...
/// Mutations of one report are serialized; different reports proceed in
/// parallel.
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  /// Assigns a fresh id when report_id is empty and persists version 1.
  AnalysisReport create(AnalysisReport r);
  /// Throws UnknownReport.
  AnalysisReport get(const std::string& id) const;
  std::vector<ReportSummary> list() const;

  using Mutation = std::function<AnalysisReport(const AnalysisReport&)>;
  /// Applies `mutate` to the newest version and persists it as version + 1.
  /// Throws StaleVersion when `expected_version` is given and differs.
  AnalysisReport commit(const std::string& id, const Mutation& mutate, std::optional<int> expected_version = {});
  AnalysisReport reanalyze(const std::string& id, const classify::Thresholds& th,
                           std::optional<int> expected_version = {});
  AnalysisReport record_verdict(const std::string& id, const std::string& event_id, const std::string& verdict,
                                const std::string& annotator, std::optional<int> expected_version = {});

 private:
  std::filesystem::path report_dir(const std::string& id) const;
  std::mutex& lock_for(const std::string& id);

  std::filesystem::path dir_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Store directory: UDM_STORE when set, else `fallback`.
std::filesystem::path resolve_store_dir(const std::filesystem::path& fallback);

std::string render_alignment_svg(const AnalysisReport& r, double px_per_s = 100.0);

}  // namespace udm::report
