#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "udm/frontend.hpp"
#include "udm/inventory.hpp"
#include "udm/matrix.hpp"
#include "udm/transcript.hpp"

namespace udm::align {

/// Frames x (symbols + blank), each row a probability distribution.
struct Posteriorgram {
  Matrix probs;
  double frame_rate = 0.0;

  std::size_t frames() const { return static_cast<std::size_t>(probs.rows()); }
  /// Largest absolute deviation of a row sum from 1.
  double max_row_error() const;
};

/// Per-phone MFCC centroids for the template-matching encoder. The optional
/// bank holds extra reference vectors (e.g. frames straddling two phones)
/// each owned by one symbol; a phone's distance is the minimum over its
/// centroid and the bank rows it owns.
struct PhoneTemplates {
  std::vector<std::string> symbols;
  Matrix centroids;  // symbols x n_coef
  Matrix bank;       // rows x n_coef
  std::vector<std::size_t> bank_owner;
  double temperature = 1.0;
  double blank_prior = 0.2;
};

nlohmann::json to_json(const PhoneTemplates& t);
PhoneTemplates templates_from_json(const nlohmann::json& j);

/// Either a template encoder or an externally computed posteriorgram.
using EncoderSource = std::variant<PhoneTemplates, Posteriorgram>;

/// Template path: softmax over negative Euclidean MFCC distances scaled by
/// 1/temperature, sharing 1 - blank_prior; the blank always gets blank_prior.
/// Channels mfcc_0 .. mfcc_{n-1} are read by label.
/// External path: validated and returned unchanged.
Posteriorgram phoneme_posteriors(const frontend::FeatureMatrix& features, const PhonemeInventory& inv,
                                 const EncoderSource& model);

/// Rows whose energy is below `floor_db` become pure blank.
Posteriorgram gate_silence(const Posteriorgram& post, const frontend::FeatureMatrix& energy,
                           const PhonemeInventory& inv, double floor_db);

/// Text format: "frames channels frame_rate" then row-major values.
Posteriorgram read_posteriorgram(std::istream& in);
Posteriorgram read_posteriorgram(const std::filesystem::path& path);
void write_posteriorgram(std::ostream& out, const Posteriorgram& post);

constexpr int kBlank = -1;

struct Segment {
  std::size_t symbol = 0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // exclusive
  double mean_posterior = 0.0;

  std::size_t length() const { return end_frame - start_frame; }
  bool operator==(const Segment&) const = default;
};

struct AlignmentPath {
  std::vector<int> frame_labels;  // symbol index or kBlank
  std::vector<Segment> segments;
  double log_score = 0.0;

  /// CTC collapse of frame_labels.
  std::vector<std::size_t> realized() const;
  bool operator==(const AlignmentPath&) const = default;
};

/// Rebuilds segments and the path score from frame labels.
AlignmentPath path_from_labels(std::vector<int> labels, const Posteriorgram& post, const PhonemeInventory& inv);

/// Minimum frame count for a CTC path spelling `phones`.
std::size_t min_ctc_frames(std::span<const std::size_t> phones);

/// Viterbi over the blank-interleaved CTC graph. Ties prefer staying in the
/// current state, so transitions happen as early as possible.
AlignmentPath ctc_forced_align(const Posteriorgram& post, const ExpectedTranscript& t, const PhonemeInventory& inv);

struct DecodeOptions {
  /// Log-domain cost of switching phone label inside a voiced stretch.
  double switch_penalty = 2.0;
  /// Shortest segment allowed between two switches, in frames.
  std::size_t min_frames = 1;
};

/// Unconstrained phone-loop Viterbi: frames flagged silent become blank and
/// every other frame carries a phone. Used to recover what was actually said.
AlignmentPath decode_realized(const Posteriorgram& post, const PhonemeInventory& inv, std::span<const char> silent,
                              const DecodeOptions& opts = {});

/// Moves each boundary between two directly adjacent segments by up to
/// `window` frames to maximize the sum of both segments' mean posteriors.
AlignmentPath refine_alignment(const AlignmentPath& raw, const Posteriorgram& post, const PhonemeInventory& inv,
                               int window = 3);

enum class EditKind { Insertion, Deletion, Substitution, Prolongation };

std::string_view to_string(EditKind kind);
EditKind edit_kind_from_string(std::string_view s);

struct PhonemeEditOp {
  EditKind kind = EditKind::Insertion;
  std::optional<std::string> expected_symbol;
  std::optional<std::string> realized_symbol;
  std::optional<std::size_t> expected_index;
  std::optional<std::size_t> realized_index;  // segment index in the aligned path
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  double duration_z = 0.0;

  bool operator==(const PhonemeEditOp&) const = default;
};

nlohmann::json to_json(const PhonemeEditOp& op);
PhonemeEditOp edit_op_from_json(const nlohmann::json& j);

/// One aligned pair; either side may be absent.
struct AlignedPair {
  std::optional<std::size_t> realized;
  std::optional<std::size_t> expected;
};

/// Unit-cost Levenshtein alignment. The backtrace from the end prefers the
/// diagonal, then insertion, then deletion.
std::vector<AlignedPair> levenshtein_align(std::span<const std::size_t> realized,
                                           std::span<const std::size_t> expected);
std::size_t levenshtein_distance(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Insertions, deletions and substitutions from the Levenshtein alignment of
/// the realized and expected phones, plus a prolongation for every matched
/// phone whose duration z-score exceeds z_prolong. Runs of insertions slide
/// along identical context to the nearest word or syllable boundary.
std::vector<PhonemeEditOp> classify_edit_ops(const AlignmentPath& aligned, const ExpectedTranscript& t,
                                             const PhonemeInventory& inv, const frontend::FrameGrid& grid,
                                             double z_prolong = 2.5);

}  // namespace udm::align
