#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "udm/audio.hpp"
#include "udm/matrix.hpp"

namespace udm::frontend {

struct FrontendConfig {
  int n_fft = 2048;
  int hop = 256;
  double f_min = 75.0;
  double f_max = 500.0;
  int win_size = 1024;
  int n_mels = 80;
  int n_coef = 13;
  double log_floor = std::log(1e-10);
  /// Normalized autocorrelation peak required to call a frame voiced.
  double voicing_threshold = 0.3;

  /// Checks the sample-rate independent invariants.
  void validate() const;
  /// Also checks f_max against the Nyquist frequency.
  void validate(int sample_rate) const;
};

nlohmann::json to_json(const FrontendConfig& cfg);
FrontendConfig frontend_config_from_json(const nlohmann::json& j);

struct FeatureMatrix {
  Matrix data;
  double frame_rate = 0.0;
  std::vector<std::string> channel_labels;

  std::size_t frames() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(data.cols()); }
  /// Column of `label`, or -1 when absent.
  int channel_index(const std::string& label) const;
};

/// Time bookkeeping for the shared analysis grid. Frame i covers samples
/// [i*hop, i*hop + n_fft) and is centred at i*hop + n_fft/2.
struct FrameGrid {
  int sample_rate = 16000;
  int n_fft = 2048;
  int hop = 256;
  std::size_t frames = 0;
  std::size_t samples = 0;

  double center_s(std::size_t frame) const;
  /// Time of the boundary preceding `frame`; 0 for the first frame and the
  /// audio duration for `frames`.
  double boundary_s(std::size_t frame) const;
  double frame_rate() const { return static_cast<double>(sample_rate) / hop; }
};

FrameGrid make_grid(const AudioBuffer& audio, const FrontendConfig& cfg);

/// floor((N - n_fft) / hop) + 1, or 0 when N < n_fft.
std::size_t frame_count(std::size_t n_samples, const FrontendConfig& cfg);

std::vector<double> hann_window(int length);
/// HTK-mel triangular filters with unit peak, spanning 0 Hz to Nyquist.
Matrix mel_filterbank(int sample_rate, const FrontendConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

FeatureMatrix mel_spectrogram(const AudioBuffer& x, const FrontendConfig& cfg);
FeatureMatrix pitch_track(const AudioBuffer& x, const FrontendConfig& cfg);
FeatureMatrix energy_contour(const AudioBuffer& x, const FrontendConfig& cfg);
FeatureMatrix mfcc(const FeatureMatrix& mel, const FrontendConfig& cfg);
FeatureMatrix combine_features(std::span<const FeatureMatrix> parts);

/// mel, pitch, energy and mfcc concatenated in that order.
FeatureMatrix extract_features(const AudioBuffer& x, const FrontendConfig& cfg);

}  // namespace udm::frontend
