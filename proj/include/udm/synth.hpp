#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "udm/alignment.hpp"
#include "udm/audio.hpp"
#include "udm/classifier.hpp"
#include "udm/frontend.hpp"
#include "udm/inventory.hpp"
#include "udm/transcript.hpp"

namespace udm::synth {

/// Where an injection attaches depends on its category: repetitions take a
/// syllable index (sound, syllable) or a word index (word); prolongations and
/// blocks take a phone index.
struct Injection {
  classify::Category category = classify::Category::SoundRepetition;
  std::size_t position = 0;
  int extra_units = 2;         // repetitions
  double factor = 3.0;         // prolongation duration multiplier
  double duration_ms = 400.0;  // silent and audible blocks

  bool operator==(const Injection&) const = default;
};

/// Category frequencies of the reference corpus, normalized.
std::array<double, classify::kCanonicalCount> default_priors();

struct SynthesisSpec {
  /// Expected transcript; drawn at random from the inventory when absent.
  std::optional<ExpectedTranscript> transcript;
  std::vector<Injection> injections;
  /// Number of additional injections drawn from the category priors.
  int random_injections = 0;
  std::array<double, classify::kCanonicalCount> priors = default_priors();
  std::uint64_t seed = 0;
  int sample_rate = 16000;
  /// RMS of each voiced phone.
  double phone_rms = 0.1;
  /// Peak amplitude of the audible-block noise burst.
  double noise_amplitude = 0.05;
  /// Peak amplitude of the background noise floor.
  double floor_amplitude = 3e-4;

  void validate(const PhonemeInventory& inv) const;
};

nlohmann::json to_json(const SynthesisSpec& spec);
/// Throws InvalidSpec.
SynthesisSpec spec_from_json(const nlohmann::json& j);

struct GoldEvent {
  classify::Category category = classify::Category::SoundRepetition;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const GoldEvent&) const = default;
};

struct GoldAnnotation {
  std::vector<GoldEvent> events;
  /// Phone heard at each frame centre; empty string for silence.
  std::vector<std::string> frame_labels;

  bool operator==(const GoldAnnotation&) const = default;
};

nlohmann::json to_json(const GoldAnnotation& g);
GoldAnnotation gold_from_json(const nlohmann::json& j);

struct SyntheticCase {
  AudioBuffer audio;
  ExpectedTranscript transcript;
  GoldAnnotation gold;
  std::vector<std::string> realized_phones;
  /// Injections actually applied, random ones included.
  std::vector<Injection> injections;
};

/// Deterministic per seed. A transcript given only as text is parsed against
/// `inv`. Throws InvalidSpec.
SyntheticCase generate_synthetic_case(const SynthesisSpec& spec, const PhonemeInventory& inv,
                                      const frontend::FrontendConfig& cfg = {});

/// Corpus case: random transcript and one or two injections drawn from the
/// category priors.
SynthesisSpec corpus_spec(std::uint64_t seed);

/// Harmonic tone complex for one phone, normalized to `rms`.
std::vector<double> render_phone(const ToneSpec& tone, std::size_t samples, int sample_rate, double rms);

/// MFCC centroid of every phone rendered in isolation, plus a bank of frames
/// straddling each pair of neighbouring units.
align::PhoneTemplates build_templates(const PhonemeInventory& inv, const frontend::FrontendConfig& cfg,
                                      int sample_rate = 16000);

/// Writes audio, transcript and gold for one case and returns its manifest line.
nlohmann::json write_case(const SyntheticCase& c, const SynthesisSpec& spec, const std::filesystem::path& dir,
                          const std::string& stem);

}  // namespace udm::synth
