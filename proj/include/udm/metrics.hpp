#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "udm/alignment.hpp"
#include "udm/classifier.hpp"
#include "udm/synth.hpp"

namespace udm::metrics {

struct DetectionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// Per canonical category (atypical last): gold count and matched gold count.
  std::array<std::size_t, classify::kCanonicalCount + 1> gold{};
  std::array<std::size_t, classify::kCanonicalCount + 1> hit{};

  DetectionCounts& operator+=(const DetectionCounts& o);
};

struct DetectionScores {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  double balanced_accuracy = 1.0;
};

struct MetricsReport {
  DetectionScores detection;
  double aer_percent = 0.0;
  double kappa = 1.0;
  double rtf = 0.0;
};

nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const DetectionScores& d);

double temporal_iou(double a0, double a1, double b0, double b1);

/// Greedy one-to-one matching: pairs with IoU >= 0.5 and equal category are
/// taken by descending IoU, ties broken by earlier start.
DetectionCounts match_events(std::span<const synth::GoldEvent> pred, std::span<const synth::GoldEvent> gold);
DetectionScores scores_from_counts(const DetectionCounts& c);
DetectionScores evaluate_detection(std::span<const synth::GoldEvent> pred, std::span<const synth::GoldEvent> gold);
std::vector<synth::GoldEvent> as_gold_events(std::span<const classify::DysfluencyEvent> events);

/// Frame labels with blanks replaced by the preceding phone (or the following
/// one before the first phone).
std::vector<std::string> fill_blanks(std::span<const std::string> labels);
std::vector<std::string> frame_symbols(const align::AlignmentPath& path, const PhonemeInventory& inv);

/// Percentage of frames whose phone differs from the gold label. Throws
/// FrameCountMismatch.
double alignment_error_rate(const align::AlignmentPath& pred, std::span<const std::string> gold,
                            const PhonemeInventory& inv);
double alignment_error_rate(std::span<const std::string> pred, std::span<const std::string> gold);
/// Mismatching frames and total frames, for corpus-level pooling.
std::pair<std::size_t, std::size_t> alignment_mismatches(std::span<const std::string> pred,
                                                         std::span<const std::string> gold);

/// Throws LengthMismatch. Returns 1 when chance agreement is 1.
double cohens_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// Throws ZeroDuration.
double real_time_factor(double processing_s, double audio_s);

}  // namespace udm::metrics
