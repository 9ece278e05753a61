#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "udm/alignment.hpp"
#include "udm/frontend.hpp"
#include "udm/temporal.hpp"

namespace udm::classify {

enum class Category {
  SoundRepetition,
  SyllableRepetition,
  WordRepetition,
  Prolongation,
  BlockSilent,
  BlockAudible,
  Atypical,
};

inline constexpr std::size_t kCanonicalCount = 6;
inline constexpr std::array<Category, kCanonicalCount> kCanonical = {
    Category::SoundRepetition, Category::SyllableRepetition, Category::WordRepetition,
    Category::Prolongation,    Category::BlockSilent,        Category::BlockAudible};

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);
/// Static clinical severity tag attached as metadata.
std::string_view severity(Category c);

struct CategoryScores {
  std::array<double, kCanonicalCount> values{};

  double& operator[](Category c) { return values[static_cast<std::size_t>(c)]; }
  double operator[](Category c) const { return values[static_cast<std::size_t>(c)]; }
  /// Highest-scoring canonical category. Ties resolve toward the more
  /// specific repetition unit (word, then syllable, then sound).
  std::pair<Category, double> best() const;
  double max() const { return best().second; }
};

struct OpenSetScore {
  double atypicality = 0.0;
};

struct Thresholds {
  /// Indexed by Category, atypical included.
  std::array<double, kCanonicalCount + 1> sensitivity{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  double open_set_threshold = 0.6;
  double z_prolong = 2.5;
  double silence_block_ms = 250.0;
  double silence_db = -60.0;
  double w_canonical = 0.7;
  double w_open = 0.3;

  double& sensitivity_of(Category c) { return sensitivity[static_cast<std::size_t>(c)]; }
  double sensitivity_of(Category c) const { return sensitivity[static_cast<std::size_t>(c)]; }
  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

nlohmann::json to_json(const Thresholds& th);
/// Missing fields keep their defaults. Errors name the offending field.
Thresholds thresholds_from_json(const nlohmann::json& j);

struct CalibrationModel {
  double temperature = 1.0;
};

/// A scored stretch of the utterance that may become an event.
struct Candidate {
  std::size_t id = 0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  CategoryScores scores;
  double atypicality = 0.0;
  std::vector<std::size_t> edit_ops;
};

nlohmann::json to_json(const Candidate& c);
Candidate candidate_from_json(const nlohmann::json& j);

enum class ChannelGroup { Mel, Pitch, Energy, Mfcc };
inline constexpr std::array<ChannelGroup, 4> kChannelGroups = {ChannelGroup::Mel, ChannelGroup::Pitch,
                                                               ChannelGroup::Energy, ChannelGroup::Mfcc};
std::string_view to_string(ChannelGroup g);

using Attribution = std::array<double, 4>;

struct DysfluencyEvent {
  std::string id;
  Category category = Category::Atypical;
  double start_s = 0.0;
  double end_s = 0.0;
  double raw_score = 0.0;
  double calibrated_confidence = 0.0;
  std::vector<std::size_t> edit_ops;
  std::vector<std::size_t> candidates;
  /// Best canonical reading, kept so atypical events can be thresholded.
  Category nearest = Category::SoundRepetition;
  double best_canonical = 0.0;
  double atypicality = 0.0;
  Attribution attribution{};
};

nlohmann::json to_json(const DysfluencyEvent& e);
DysfluencyEvent event_from_json(const nlohmann::json& j);

/// Inputs the rule set reads besides the edit operations.
struct ScoringContext {
  const align::AlignmentPath& aligned;
  const ExpectedTranscript& transcript;
  const PhonemeInventory& inventory;
  const frontend::FeatureMatrix& energy;
  const frontend::FrameGrid& grid;
  int win_size = 1024;
};

/// Rule-based canonical scoring. Contiguous insertion/deletion/substitution
/// runs, prolongation ops and pending-phone silences become candidates;
/// overlapping candidates are merged so the result is disjoint and sorted.
/// Atypicality is filled with the complement rule.
std::vector<Candidate> canonical_scores(std::span<const align::PhonemeEditOp> ops, const ScoringContext& ctx,
                                        const Thresholds& th);

/// Complement rule used when no neural weights are present.
OpenSetScore open_set_score(const CategoryScores& scores);
/// Distance of the pooled fused representation over [start, end) to the
/// stored centroid, squashed by 1 - exp(-d / scale).
OpenSetScore open_set_score(const temporal::HiddenSeq& fused, std::size_t start, std::size_t end,
                            const Vector& centroid, double scale);

/// final = w_canonical * best_canonical + w_open * atypicality.
double final_score(double best_canonical, double atypicality, const Thresholds& th);

std::vector<DysfluencyEvent> combine_predictions(std::span<const Candidate> candidates, const Thresholds& th);

double logit(double p);
double sigmoid(double x);
std::vector<DysfluencyEvent> calibrate_confidence(std::vector<DysfluencyEvent> events, const CalibrationModel& cal);
/// Temperature minimizing the negative log-likelihood of binary outcomes.
double fit_temperature(std::span<const double> raw_scores, std::span<const int> labels);

/// Score of an event's label over its span under another candidate set;
/// 0 when no candidate overlaps.
double rescore_span(const DysfluencyEvent& ev, std::span<const Candidate> candidates, const Thresholds& th);

/// Features with one channel group replaced by its utterance mean.
frontend::FeatureMatrix neutralize(const frontend::FeatureMatrix& features, ChannelGroup group);

using NeutralizedCandidates = std::array<std::vector<Candidate>, 4>;
using Rescorer = std::function<std::vector<Candidate>(const frontend::FeatureMatrix&)>;

/// Occlusion attribution: raw_score minus the score with each group neutralized.
Attribution attribute_event(const DysfluencyEvent& ev, const NeutralizedCandidates& neutralized, const Thresholds& th);
Attribution attribute_event(const DysfluencyEvent& ev, const frontend::FeatureMatrix& features,
                            const Rescorer& pipeline, const Thresholds& th);

/// Pure filter on calibrated confidence. Atypical events must clear both the
/// atypical sensitivity and that of their nearest canonical category.
std::vector<DysfluencyEvent> apply_thresholds(std::vector<DysfluencyEvent> events, const Thresholds& th);

}  // namespace udm::classify
