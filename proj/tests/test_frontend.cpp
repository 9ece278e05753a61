#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "udm/error.hpp"
#include "udm/frontend.hpp"

using namespace udm;
using namespace udm::frontend;

namespace {

AudioBuffer tone(double hz, double amp, double seconds, int sr = 16000) {
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t n = 0; n < a.samples.size(); ++n) a.samples[n] = amp * std::sin(2.0 * std::numbers::pi * hz * n / sr);
  return a;
}

AudioBuffer noise(std::size_t n, std::uint64_t seed, int sr = 16000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  AudioBuffer a;
  a.sample_rate = sr;
  for (std::size_t i = 0; i < n; ++i) a.samples.push_back(u(rng));
  return a;
}

// Hand-assembled RIFF header, independent of the encoder under test.
std::vector<std::uint8_t> wav_bytes(std::uint16_t channels, std::uint16_t bits, std::uint16_t format,
                                    const std::vector<std::int16_t>& samples, std::uint32_t sr = 16000) {
  std::vector<std::uint8_t> b;
  auto put = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    b.insert(b.end(), c, c + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  put("RIFF", 4);
  u32(36 + data_bytes);
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(sr);
  u32(sr * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  put("data", 4);
  u32(data_bytes);
  put(samples.data(), data_bytes);
  return b;
}

}  // namespace

TEST_CASE("wav: silence, full scale and format errors") {
  const auto zeros = decode_wav(wav_bytes(1, 16, 1, std::vector<std::int16_t>(16000, 0)));
  CHECK(zeros.sample_rate == 16000);
  CHECK(zeros.samples.size() == 16000);
  for (double s : zeros.samples) CHECK(s == 0.0);

  const auto peak = decode_wav(wav_bytes(1, 16, 1, {32767, -32768}));
  CHECK(peak.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
  CHECK(peak.samples[1] == -1.0);

  CHECK_THROWS_AS(decode_wav(wav_bytes(2, 16, 1, {1, 2, 3, 4})), Error);
  try {
    decode_wav(wav_bytes(2, 16, 1, {1, 2, 3, 4}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedFormat);
  }
  try {
    decode_wav(wav_bytes(1, 16, 3, {1, 2}));
    FAIL("float format accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedFormat);
  }
  auto truncated = wav_bytes(1, 16, 1, std::vector<std::int16_t>(100, 7));
  truncated.resize(60);
  try {
    decode_wav(truncated);
    FAIL("truncated file accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptFile);
  }
}

TEST_CASE("wav: encode/decode round trip through a file") {
  AudioBuffer a = noise(3000, 4);
  for (double& s : a.samples) s = std::round(s * 32768.0) / 32768.0;
  const auto dir = oracle::temp_dir("wav");
  save_audio(dir / "x.wav", a);
  const auto b = load_audio(dir / "x.wav");
  CHECK(b.sample_rate == a.sample_rate);
  CHECK(b.samples == a.samples);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mel: zeros give the floor on 55 frames") {
  FrontendConfig cfg;
  AudioBuffer z{std::vector<double>(16000, 0.0), 16000};
  const auto m = mel_spectrogram(z, cfg);
  CHECK(m.frames() == 55);
  CHECK(m.channels() == 80);
  CHECK((m.data.array() == cfg.log_floor).all());
  CHECK(m.channel_labels.front() == "mel_0");
  CHECK(m.channel_labels.back() == "mel_79");
}

TEST_CASE("mel: 1 kHz tone peaks in the band around 1 kHz") {
  FrontendConfig cfg;
  const auto m = mel_spectrogram(tone(1000.0, 0.5, 1.0), cfg);
  const Matrix fb = mel_filterbank(16000, cfg);
  const Eigen::Index bin = 1000 * cfg.n_fft / 16000;
  Eigen::Index expected;
  fb.col(bin).maxCoeff(&expected);
  for (Eigen::Index t = 0; t < m.data.rows(); ++t) {
    Eigen::Index arg;
    m.data.row(t).maxCoeff(&arg);
    CHECK(arg == expected);
  }
}

TEST_CASE("mel: matches a direct DFT and filterbank oracle") {
  FrontendConfig cfg;
  const auto x = noise(2048 + 3 * 256, 11);
  const auto m = mel_spectrogram(x, cfg);
  const auto ref = oracle::log_mel(x.samples, 16000, cfg.n_fft, cfg.hop, cfg.n_mels, cfg.log_floor);
  REQUIRE(ref.size() == m.frames());
  double worst = 0.0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    for (int k = 0; k < cfg.n_mels; ++k) {
      const double a = m.data(static_cast<Eigen::Index>(t), k), b = ref[t][static_cast<std::size_t>(k)];
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("mel: too short input") {
  FrontendConfig cfg;
  AudioBuffer a{std::vector<double>(2047, 0.0), 16000};
  try {
    mel_spectrogram(a, cfg);
    FAIL("accepted short input");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
  a.samples.push_back(0.0);
  CHECK(mel_spectrogram(a, cfg).frames() == 1);
}

TEST_CASE("mel: shifting by one hop shifts by one frame") {
  FrontendConfig cfg;
  const auto x = noise(2048 + 10 * 256, 3);
  AudioBuffer y = x;
  y.samples.erase(y.samples.begin(), y.samples.begin() + cfg.hop);
  const auto a = mel_spectrogram(x, cfg), b = mel_spectrogram(y, cfg);
  REQUIRE(b.frames() + 1 == a.frames());
  for (Eigen::Index t = 0; t < b.data.rows(); ++t) {
    CHECK((a.data.row(t + 1) - b.data.row(t)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("pitch: 220 Hz tone, silence and a sub-range tone") {
  FrontendConfig cfg;
  const auto p = pitch_track(tone(220.0, 0.5, 1.0), cfg);
  CHECK(p.channel_labels == std::vector<std::string>{"pitch_hz", "voiced_flag"});
  for (Eigen::Index t = 1; t + 1 < p.data.rows(); ++t) {
    CHECK(p.data(t, 1) == 1.0);
    CHECK(std::abs(p.data(t, 0) - 220.0) <= 2.0);
  }
  const auto s = pitch_track(AudioBuffer{std::vector<double>(16000, 0.0), 16000}, cfg);
  CHECK((s.data.array() == 0.0).all());
  const auto low = pitch_track(tone(60.0, 0.5, 1.0), cfg);
  for (Eigen::Index t = 0; t < low.data.rows(); ++t) {
    const double f = low.data(t, 0);
    if (low.data(t, 1) == 0.0) {
      CHECK(f == 0.0);
    } else {
      CHECK(f >= cfg.f_min - 1e-9);
      CHECK(f <= cfg.f_max + 1e-9);
      CHECK(std::abs(f - 60.0) > 2.0);
    }
  }
}

TEST_CASE("pitch: pure tones 80-480 Hz within 2 Hz on >= 95% of voiced frames") {
  FrontendConfig cfg;
  for (double f = 80.0; f <= 480.0; f += 25.0) {
    const auto p = pitch_track(tone(f, 0.5, 0.5), cfg);
    int voiced = 0, good = 0;
    for (Eigen::Index t = 0; t < p.data.rows(); ++t) {
      if (p.data(t, 1) != 1.0) continue;
      ++voiced;
      good += std::abs(p.data(t, 0) - f) <= 2.0;
    }
    CAPTURE(f);
    REQUIRE(voiced > 0);
    CHECK(good >= 0.95 * voiced);
  }
}

TEST_CASE("energy: constant, zeros, doubling, sign flip") {
  FrontendConfig cfg;
  AudioBuffer c{std::vector<double>(8000, 0.1), 16000};
  const auto e = energy_contour(c, cfg);
  CHECK(e.channel_labels == std::vector<std::string>{"energy_db"});
  for (Eigen::Index t = 0; t < e.data.rows(); ++t) CHECK(e.data(t, 0) == doctest::Approx(-20.0).epsilon(1e-9));

  const auto z = energy_contour(AudioBuffer{std::vector<double>(8000, 0.0), 16000}, cfg);
  CHECK((z.data.array() == -100.0).all());

  const auto x = noise(8000, 9);
  AudioBuffer x2 = x, neg = x;
  for (double& s : x2.samples) s *= 2.0;
  for (double& s : neg.samples) s = -s;
  const auto a = energy_contour(x, cfg), b = energy_contour(x2, cfg), n = energy_contour(neg, cfg);
  for (Eigen::Index t = 0; t < a.data.rows(); ++t) {
    CHECK(std::abs(b.data(t, 0) - a.data(t, 0) - 6.0206) < 0.01);
    CHECK(n.data(t, 0) == a.data(t, 0));
  }
}

TEST_CASE("mfcc: constant frames, zeros and the DCT oracle") {
  FrontendConfig cfg;
  FeatureMatrix mel;
  mel.data = Matrix::Constant(2, cfg.n_mels, 3.5);
  mel.channel_labels.resize(static_cast<std::size_t>(cfg.n_mels));
  auto c = mfcc(mel, cfg);
  CHECK(c.channels() == 13);
  // N equal terms times the orthonormal factor sqrt(1/N).
  CHECK(c.data(0, 0) == doctest::Approx(3.5 * 80.0 * std::sqrt(1.0 / 80.0)).epsilon(1e-12));
  for (int k = 1; k < 13; ++k) CHECK(std::abs(c.data(0, k)) < 1e-9);

  const auto z = mfcc(mel_spectrogram(AudioBuffer{std::vector<double>(4096, 0.0), 16000}, cfg), cfg);
  CHECK(z.data(0, 0) == doctest::Approx(cfg.log_floor * 80.0 * std::sqrt(1.0 / 80.0)).epsilon(1e-12));
  for (int k = 1; k < 13; ++k) CHECK(std::abs(z.data(0, k)) < 1e-9);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> v(80);
  for (double& x : v) x = g(rng);
  mel.data.resize(1, 80);
  for (int i = 0; i < 80; ++i) mel.data(0, i) = v[static_cast<std::size_t>(i)];
  c = mfcc(mel, cfg);
  const auto ref = oracle::dct2(v, 13);
  for (int k = 0; k < 13; ++k) CHECK(std::abs(c.data(0, k) - ref[static_cast<std::size_t>(k)]) < 1e-9);

  mel.data.resize(1, 40);
  CHECK_THROWS_AS(mfcc(mel, cfg), Error);
}

TEST_CASE("mfcc of mel matches the naive DFT-filterbank-log-DCT chain") {
  FrontendConfig cfg;
  const auto x = noise(2048 + 2 * 256, 77);
  const auto c = mfcc(mel_spectrogram(x, cfg), cfg);
  const auto ref = oracle::log_mel(x.samples, 16000, cfg.n_fft, cfg.hop, cfg.n_mels, cfg.log_floor);
  for (std::size_t t = 0; t < ref.size(); ++t) {
    const auto r = oracle::dct2(ref[t], cfg.n_coef);
    for (int k = 0; k < cfg.n_coef; ++k) {
      const double a = c.data(static_cast<Eigen::Index>(t), k), b = r[static_cast<std::size_t>(k)];
      CHECK(std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("combine: widths add, single part is identity, frame mismatch") {
  FrontendConfig cfg;
  const auto x = noise(16000, 5);
  const auto f = extract_features(x, cfg);
  CHECK(f.channels() == 96);
  CHECK(f.channel_labels[80] == "pitch_hz");
  CHECK(f.channel_labels[82] == "energy_db");
  CHECK(f.channel_labels[83] == "mfcc_0");

  const auto mel = mel_spectrogram(x, cfg);
  const std::vector<FeatureMatrix> one{mel};
  const auto same = combine_features(one);
  CHECK(same.data == mel.data);
  CHECK(same.channel_labels == mel.channel_labels);

  FeatureMatrix short_part = mel;
  short_part.data.conservativeResize(mel.data.rows() - 1, Eigen::NoChange);
  const std::vector<FeatureMatrix> bad{mel, short_part};
  try {
    combine_features(bad);
    FAIL("mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameCountMismatch);
  }
}

TEST_CASE("all extractors share one frame grid") {
  FrontendConfig cfg;
  for (std::size_t n : {2048u, 2049u, 2303u, 2304u, 16000u, 23456u}) {
    const auto x = noise(n, n);
    const auto expected = frame_count(n, cfg);
    CHECK(mel_spectrogram(x, cfg).frames() == expected);
    CHECK(pitch_track(x, cfg).frames() == expected);
    CHECK(energy_contour(x, cfg).frames() == expected);
    CHECK(expected == (n - 2048) / 256 + 1);
  }
}

TEST_CASE("frontend config JSON and validation") {
  FrontendConfig cfg;
  cfg.n_mels = 64;
  const auto back = frontend_config_from_json(to_json(cfg));
  CHECK(back.n_mels == 64);
  CHECK(back.n_fft == 2048);
  FrontendConfig bad;
  bad.hop = 4096;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.n_coef = 100;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  CHECK_THROWS_AS(bad.validate(800), Error);
}
