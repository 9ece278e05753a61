#include "udm/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "udm/error.hpp"

namespace udm::frontend {
namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  /// Power spectrum |X_k|^2, k = 0..n/2, of the current input.
  void power(std::span<double> out) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

void require_length(const AudioBuffer& x, std::size_t needed, const char* what) {
  if (x.samples.size() < needed) {
    throw Error(ErrorCode::TooShort, std::string(what) + " needs at least " + std::to_string(needed) +
                                         " samples, got " + std::to_string(x.samples.size()));
  }
}

std::vector<std::string> numbered(const std::string& prefix, int count) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) labels.push_back(prefix + std::to_string(i));
  return labels;
}

}  // namespace

void FrontendConfig::validate() const {
  if (n_fft <= 0 || hop <= 0 || hop > n_fft) throw Error(ErrorCode::InvalidConfig, "require 0 < hop <= n_fft");
  if (!(f_min > 0 && f_min < f_max)) throw Error(ErrorCode::InvalidConfig, "require 0 < f_min < f_max");
  if (win_size <= 0) throw Error(ErrorCode::InvalidConfig, "win_size must be positive");
  if (n_mels <= 0 || n_coef <= 0 || n_coef > n_mels) {
    throw Error(ErrorCode::InvalidConfig, "require 0 < n_coef <= n_mels");
  }
  if (!std::isfinite(log_floor)) throw Error(ErrorCode::InvalidConfig, "log_floor must be finite");
  if (voicing_threshold < 0 || voicing_threshold > 1) {
    throw Error(ErrorCode::InvalidConfig, "voicing_threshold must lie in [0, 1]");
  }
}

void FrontendConfig::validate(int sample_rate) const {
  validate();
  if (!(f_max < sample_rate / 2.0)) throw Error(ErrorCode::InvalidConfig, "f_max must be below Nyquist");
}

nlohmann::json to_json(const FrontendConfig& cfg) {
  return {{"n_fft", cfg.n_fft},       {"hop", cfg.hop},       {"f_min", cfg.f_min},
          {"f_max", cfg.f_max},       {"win_size", cfg.win_size}, {"n_mels", cfg.n_mels},
          {"n_coef", cfg.n_coef},     {"log_floor", cfg.log_floor},
          {"voicing_threshold", cfg.voicing_threshold}};
}

FrontendConfig frontend_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "frontend config must be a JSON object");
  FrontendConfig cfg;
  try {
    cfg.n_fft = j.value("n_fft", cfg.n_fft);
    cfg.hop = j.value("hop", cfg.hop);
    cfg.f_min = j.value("f_min", cfg.f_min);
    cfg.f_max = j.value("f_max", cfg.f_max);
    cfg.win_size = j.value("win_size", cfg.win_size);
    cfg.n_mels = j.value("n_mels", cfg.n_mels);
    cfg.n_coef = j.value("n_coef", cfg.n_coef);
    cfg.log_floor = j.value("log_floor", cfg.log_floor);
    cfg.voicing_threshold = j.value("voicing_threshold", cfg.voicing_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("frontend config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

int FeatureMatrix::channel_index(const std::string& label) const {
  const auto it = std::find(channel_labels.begin(), channel_labels.end(), label);
  return it == channel_labels.end() ? -1 : static_cast<int>(it - channel_labels.begin());
}

double FrameGrid::center_s(std::size_t frame) const {
  return (static_cast<double>(frame) * hop + n_fft / 2.0) / sample_rate;
}

double FrameGrid::boundary_s(std::size_t frame) const {
  if (frame == 0) return 0.0;
  if (frame >= frames) return static_cast<double>(samples) / sample_rate;
  return (static_cast<double>(frame) * hop + n_fft / 2.0 - hop / 2.0) / sample_rate;
}

FrameGrid make_grid(const AudioBuffer& audio, const FrontendConfig& cfg) {
  return FrameGrid{audio.sample_rate, cfg.n_fft, cfg.hop, frame_count(audio.samples.size(), cfg),
                   audio.samples.size()};
}

std::size_t frame_count(std::size_t n_samples, const FrontendConfig& cfg) {
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  if (n_samples < n_fft) return 0;
  return (n_samples - n_fft) / static_cast<std::size_t>(cfg.hop) + 1;
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(int sample_rate, const FrontendConfig& cfg) {
  const int bins = cfg.n_fft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.n_fft;
      if (f > lo && f < hi) fb(m, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

FeatureMatrix mel_spectrogram(const AudioBuffer& x, const FrontendConfig& cfg) {
  cfg.validate(x.sample_rate);
  require_length(x, static_cast<std::size_t>(cfg.n_fft), "mel_spectrogram");

  const std::size_t frames = frame_count(x.samples.size(), cfg);
  const int bins = cfg.n_fft / 2 + 1;
  const auto window = hann_window(cfg.n_fft);
  const Matrix fb = mel_filterbank(x.sample_rate, cfg);
  const double floor = std::exp(cfg.log_floor);

  FeatureMatrix out;
  out.frame_rate = static_cast<double>(x.sample_rate) / cfg.hop;
  out.channel_labels = numbered("mel_", cfg.n_mels);
  out.data.resize(static_cast<Eigen::Index>(frames), cfg.n_mels);

  RealFft fft(cfg.n_fft);
  Vector power(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.samples.data() + t * static_cast<std::size_t>(cfg.hop);
    double* in = fft.input();
    for (int n = 0; n < cfg.n_fft; ++n) in[n] = src[n] * window[static_cast<std::size_t>(n)];
    fft.power({power.data(), static_cast<std::size_t>(bins)});
    const Vector mel = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m) {
      out.data(static_cast<Eigen::Index>(t), m) = std::log(std::max(mel[m], floor));
    }
  }
  return out;
}

FeatureMatrix pitch_track(const AudioBuffer& x, const FrontendConfig& cfg) {
  cfg.validate(x.sample_rate);
  require_length(x, static_cast<std::size_t>(cfg.n_fft), "pitch_track");

  const std::size_t frames = frame_count(x.samples.size(), cfg);
  const int n = cfg.n_fft;
  const int lag_min = std::max(1, static_cast<int>(std::ceil(x.sample_rate / cfg.f_max)));
  const int lag_max = std::min(n - 2, static_cast<int>(std::floor(x.sample_rate / cfg.f_min)));

  FeatureMatrix out;
  out.frame_rate = static_cast<double>(x.sample_rate) / cfg.hop;
  out.channel_labels = {"pitch_hz", "voiced_flag"};
  out.data = Matrix::Zero(static_cast<Eigen::Index>(frames), 2);

  std::vector<double> frame(static_cast<std::size_t>(n));
  std::vector<double> sq_prefix(static_cast<std::size_t>(n) + 1);
  std::vector<double> acf(static_cast<std::size_t>(lag_max) + 2, 0.0);

  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.samples.data() + t * static_cast<std::size_t>(cfg.hop);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += src[i];
    mean /= n;
    sq_prefix[0] = 0.0;
    for (int i = 0; i < n; ++i) {
      frame[static_cast<std::size_t>(i)] = src[i] - mean;
      sq_prefix[static_cast<std::size_t>(i) + 1] = sq_prefix[static_cast<std::size_t>(i)] + frame[i] * frame[i];
    }
    if (sq_prefix[static_cast<std::size_t>(n)] <= 1e-12 * n) continue;

    // Normalized autocorrelation over [lag_min - 1, lag_max + 1] so the
    // parabolic fit has neighbours at both ends of the search range.
    const int lo = std::max(1, lag_min - 1);
    const int hi = std::min(n - 1, lag_max + 1);
    for (int lag = lo; lag <= hi; ++lag) {
      double num = 0.0;
      for (int i = 0; i + lag < n; ++i) num += frame[i] * frame[i + lag];
      const double e0 = sq_prefix[static_cast<std::size_t>(n - lag)];
      const double e1 = sq_prefix[static_cast<std::size_t>(n)] - sq_prefix[static_cast<std::size_t>(lag)];
      acf[static_cast<std::size_t>(lag)] = (e0 > 0 && e1 > 0) ? num / std::sqrt(e0 * e1) : 0.0;
    }

    double global = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) global = std::max(global, acf[static_cast<std::size_t>(lag)]);
    if (global < cfg.voicing_threshold) continue;

    // Smallest-lag local maximum close to the global one avoids octave errors.
    int best = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      const double r = acf[static_cast<std::size_t>(lag)];
      const bool left_ok = lag == lag_min || r >= acf[static_cast<std::size_t>(lag) - 1];
      const bool right_ok = lag == lag_max || r > acf[static_cast<std::size_t>(lag) + 1];
      if (left_ok && right_ok && r >= 0.9 * global) {
        best = lag;
        break;
      }
    }
    if (best < 0) continue;

    double refined = best;
    if (best > lag_min && best < lag_max) {
      const double a = acf[static_cast<std::size_t>(best) - 1];
      const double b = acf[static_cast<std::size_t>(best)];
      const double c = acf[static_cast<std::size_t>(best) + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0) refined += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    const double f0 = std::clamp(x.sample_rate / refined, cfg.f_min, cfg.f_max);
    out.data(static_cast<Eigen::Index>(t), 0) = f0;
    out.data(static_cast<Eigen::Index>(t), 1) = 1.0;
  }
  return out;
}

FeatureMatrix energy_contour(const AudioBuffer& x, const FrontendConfig& cfg) {
  cfg.validate(x.sample_rate);
  require_length(x, static_cast<std::size_t>(std::max(cfg.n_fft, cfg.win_size)), "energy_contour");

  const std::size_t frames = frame_count(x.samples.size(), cfg);
  const std::size_t total = x.samples.size();
  std::vector<double> prefix(total + 1, 0.0);
  for (std::size_t i = 0; i < total; ++i) prefix[i + 1] = prefix[i] + x.samples[i] * x.samples[i];

  FeatureMatrix out;
  out.frame_rate = static_cast<double>(x.sample_rate) / cfg.hop;
  out.channel_labels = {"energy_db"};
  out.data.resize(static_cast<Eigen::Index>(frames), 1);

  const long half = cfg.win_size / 2;
  for (std::size_t t = 0; t < frames; ++t) {
    const long center = static_cast<long>(t) * cfg.hop + cfg.n_fft / 2;
    const auto begin = static_cast<std::size_t>(std::max(0L, center - half));
    const auto end = static_cast<std::size_t>(std::min(static_cast<long>(total), center - half + cfg.win_size));
    const double mean_sq = std::max(0.0, prefix[end] - prefix[begin]) / static_cast<double>(end - begin);
    const double db = mean_sq > 0 ? 10.0 * std::log10(mean_sq) : -100.0;
    out.data(static_cast<Eigen::Index>(t), 0) = std::max(db, -100.0);
  }
  return out;
}

FeatureMatrix mfcc(const FeatureMatrix& mel, const FrontendConfig& cfg) {
  cfg.validate();
  if (mel.channels() != static_cast<std::size_t>(cfg.n_mels)) {
    throw Error(ErrorCode::ChannelMismatch, "expected " + std::to_string(cfg.n_mels) + " mel channels, got " +
                                                std::to_string(mel.channels()));
  }
  const int m = cfg.n_mels;
  Matrix dct(cfg.n_coef, m);
  for (int k = 0; k < cfg.n_coef; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / m);
    for (int i = 0; i < m; ++i) dct(k, i) = scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * m));
  }
  FeatureMatrix out;
  out.frame_rate = mel.frame_rate;
  out.channel_labels = numbered("mfcc_", cfg.n_coef);
  out.data = mel.data * dct.transpose();
  return out;
}

FeatureMatrix combine_features(std::span<const FeatureMatrix> parts) {
  if (parts.empty()) return {};
  const std::size_t frames = parts.front().frames();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.frames() != frames) {
      throw Error(ErrorCode::FrameCountMismatch,
                  std::to_string(p.frames()) + " frames vs " + std::to_string(frames));
    }
    if (std::abs(p.frame_rate - parts.front().frame_rate) > 1e-9) {
      throw Error(ErrorCode::FrameCountMismatch, "frame rates differ");
    }
    cols += p.data.cols();
  }
  FeatureMatrix out;
  out.frame_rate = parts.front().frame_rate;
  out.data.resize(static_cast<Eigen::Index>(frames), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.data.middleCols(at, p.data.cols()) = p.data;
    at += p.data.cols();
    out.channel_labels.insert(out.channel_labels.end(), p.channel_labels.begin(), p.channel_labels.end());
  }
  return out;
}

FeatureMatrix extract_features(const AudioBuffer& x, const FrontendConfig& cfg) {
  const FeatureMatrix mel = mel_spectrogram(x, cfg);
  const FeatureMatrix parts[] = {mel, pitch_track(x, cfg), energy_contour(x, cfg), mfcc(mel, cfg)};
  return combine_features(parts);
}

}  // namespace udm::frontend
