#include "udm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "udm/error.hpp"

namespace udm::synth {

using classify::Category;

std::array<double, classify::kCanonicalCount> default_priors() {
  std::array<double, classify::kCanonicalCount> p = {28.4, 22.1, 15.3, 19.7, 8.2, 6.3};
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

void SynthesisSpec::validate(const PhonemeInventory& inv) const {
  double total = 0.0;
  for (double p : priors) {
    if (!std::isfinite(p) || p < 0.0) throw Error(ErrorCode::InvalidSpec, "priors must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorCode::InvalidSpec, "priors must sum to 1");
  if (sample_rate <= 0) throw Error(ErrorCode::InvalidSpec, "sample_rate must be positive");
  if (random_injections < 0) throw Error(ErrorCode::InvalidSpec, "random_injections must be nonnegative");
  if (!(phone_rms > 0.0) || !(noise_amplitude >= 0.0) || !(floor_amplitude >= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "amplitudes must be nonnegative");
  }
  if (!transcript) {
    if (!injections.empty()) throw Error(ErrorCode::InvalidSpec, "explicit injections need a transcript");
    return;
  }
  try {
    transcript->validate(inv);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  if (transcript->phones.empty()) throw Error(ErrorCode::InvalidSpec, "transcript is empty");
  const std::size_t n_words = transcript->words().size();
  const std::size_t n_syl = transcript->syllables().size();
  const std::size_t n_phones = transcript->phones.size();
  for (const auto& inj : injections) {
    std::size_t limit = n_phones;
    switch (inj.category) {
      case Category::SoundRepetition:
      case Category::SyllableRepetition: limit = n_syl; break;
      case Category::WordRepetition: limit = n_words; break;
      case Category::Atypical: throw Error(ErrorCode::InvalidSpec, "atypical events cannot be injected");
      default: break;
    }
    if (inj.position >= limit) throw Error(ErrorCode::InvalidSpec, "injection position out of range");
    const bool repetition = inj.category == Category::SoundRepetition ||
                            inj.category == Category::SyllableRepetition ||
                            inj.category == Category::WordRepetition;
    if (repetition && inj.extra_units < 1) throw Error(ErrorCode::InvalidSpec, "extra_units must be >= 1");
    if (inj.category == Category::Prolongation && !(inj.factor > 1.0)) {
      throw Error(ErrorCode::InvalidSpec, "prolongation factor must exceed 1");
    }
    if ((inj.category == Category::BlockSilent || inj.category == Category::BlockAudible) &&
        !(inj.duration_ms > 0.0)) {
      throw Error(ErrorCode::InvalidSpec, "block duration must be positive");
    }
  }
}

nlohmann::json to_json(const SynthesisSpec& spec) {
  nlohmann::json inj = nlohmann::json::array();
  for (const auto& i : spec.injections) {
    inj.push_back({{"category", std::string(classify::to_string(i.category))},
                   {"position", i.position},
                   {"extra_units", i.extra_units},
                   {"factor", i.factor},
                   {"duration_ms", i.duration_ms}});
  }
  nlohmann::json priors = nlohmann::json::object();
  for (std::size_t c = 0; c < classify::kCanonicalCount; ++c) {
    priors[std::string(classify::to_string(classify::kCanonical[c]))] = spec.priors[c];
  }
  nlohmann::json j = {{"injections", inj},
                      {"random_injections", spec.random_injections},
                      {"priors", priors},
                      {"seed", spec.seed},
                      {"sample_rate", spec.sample_rate},
                      {"phone_rms", spec.phone_rms},
                      {"noise_amplitude", spec.noise_amplitude},
                      {"floor_amplitude", spec.floor_amplitude}};
  j["transcript"] = spec.transcript ? udm::to_json(*spec.transcript) : nlohmann::json(nullptr);
  return j;
}

SynthesisSpec spec_from_json(const nlohmann::json& j) {
  SynthesisSpec spec;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "spec must be a JSON object");
    if (j.contains("transcript") && !j.at("transcript").is_null()) {
      const auto& t = j.at("transcript");
      if (t.is_string()) {
        // Plain text needs an inventory; keep it for the caller to parse.
        ExpectedTranscript et;
        et.source_text = t.get<std::string>();
        spec.transcript = et;
      } else {
        spec.transcript = transcript_from_json(t);
      }
    }
    if (j.contains("injections")) {
      for (const auto& i : j.at("injections")) {
        Injection inj;
        inj.category = classify::category_from_string(i.at("category").get<std::string>());
        inj.position = i.at("position").get<std::size_t>();
        inj.extra_units = i.value("extra_units", inj.extra_units);
        inj.factor = i.value("factor", inj.factor);
        inj.duration_ms = i.value("duration_ms", inj.duration_ms);
        spec.injections.push_back(inj);
      }
    }
    spec.random_injections = j.value("random_injections", 0);
    if (j.contains("priors")) {
      const auto& p = j.at("priors");
      for (std::size_t c = 0; c < classify::kCanonicalCount; ++c) {
        spec.priors[c] = p.value(std::string(classify::to_string(classify::kCanonical[c])), 0.0);
      }
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.sample_rate = j.value("sample_rate", spec.sample_rate);
    spec.phone_rms = j.value("phone_rms", spec.phone_rms);
    spec.noise_amplitude = j.value("noise_amplitude", spec.noise_amplitude);
    spec.floor_amplitude = j.value("floor_amplitude", spec.floor_amplitude);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidSpec) throw;
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  return spec;
}

nlohmann::json to_json(const GoldAnnotation& g) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : g.events) {
    events.push_back(
        {{"category", std::string(classify::to_string(e.category))}, {"start_s", e.start_s}, {"end_s", e.end_s}});
  }
  return {{"events", events}, {"frame_labels", g.frame_labels}};
}

GoldAnnotation gold_from_json(const nlohmann::json& j) {
  GoldAnnotation g;
  for (const auto& e : j.at("events")) {
    g.events.push_back({classify::category_from_string(e.at("category").get<std::string>()),
                        e.at("start_s").get<double>(), e.at("end_s").get<double>()});
  }
  g.frame_labels = j.value("frame_labels", std::vector<std::string>{});
  return g;
}

std::vector<double> render_phone(const ToneSpec& tone, std::size_t samples, int sample_rate, double rms) {
  std::vector<double> out(samples, 0.0);
  if (samples == 0) return out;
  const double nyquist_cap = 0.45 * sample_rate;
  std::vector<double> amps;
  for (int h = 1; h * tone.f0_hz < nyquist_cap; ++h) {
    const double f = h * tone.f0_hz;
    double a = 0.01;
    for (double formant : tone.formants_hz) a += std::exp(-0.5 * std::pow((f - formant) / 150.0, 2.0));
    amps.push_back(a);
  }
  double power = 0.0;
  for (double a : amps) power += 0.5 * a * a;
  const double gain = power > 0.0 ? rms / std::sqrt(power) : 0.0;
  const double w0 = 2.0 * std::numbers::pi * tone.f0_hz / sample_rate;
  const double n_h = static_cast<double>(amps.size());
  for (std::size_t h = 0; h < amps.size(); ++h) {
    const double k = static_cast<double>(h + 1);
    const double phase = std::numbers::pi * k * k / n_h;  // low crest factor
    const double a = gain * amps[h];
    for (std::size_t n = 0; n < samples; ++n) out[n] += a * std::sin(k * w0 * static_cast<double>(n) + phase);
  }
  return out;
}

namespace {

enum class UnitKind { Phone, Silence, Noise };

struct Unit {
  UnitKind kind = UnitKind::Phone;
  std::size_t symbol = 0;  // phone heard, or replaced by noise
  std::size_t samples = 0;
  int event = -1;
};

double draw_duration_ms(const DurationStats& d, std::mt19937_64& rng) {
  const double cv = d.std_ms / d.mean_ms;
  const double sigma = std::sqrt(std::log(1.0 + cv * cv));
  const double mu = std::log(d.mean_ms) - 0.5 * sigma * sigma;
  std::normal_distribution<double> n(0.0, 1.0);
  const double v = std::exp(mu + sigma * n(rng));
  return std::clamp(v, d.mean_ms - d.std_ms, d.mean_ms + d.std_ms);
}

std::vector<std::size_t> of_class(const PhonemeInventory& inv, PhoneClass c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    if (inv.classes[i] == c) out.push_back(i);
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

ExpectedTranscript random_transcript(const PhonemeInventory& inv, std::mt19937_64& rng) {
  const auto consonants = of_class(inv, PhoneClass::Consonant);
  const auto vowels = of_class(inv, PhoneClass::Vowel);
  if (consonants.empty() || vowels.empty()) {
    throw Error(ErrorCode::InvalidSpec, "inventory needs consonants and vowels for random transcripts");
  }
  ExpectedTranscript t;
  std::uniform_int_distribution<int> n_words(3, 5), n_syl(1, 3);
  const int words = n_words(rng);
  for (int w = 0; w < words; ++w) {
    t.word_boundaries.push_back(t.phones.size());
    const int syl = n_syl(rng);
    for (int s = 0; s < syl; ++s) {
      t.syllable_boundaries.push_back(t.phones.size());
      t.phones.push_back(inv.symbols[pick(consonants, rng)]);
      t.phones.push_back(inv.symbols[pick(vowels, rng)]);
    }
  }
  t.source_text = format_transcript(t);
  return t;
}

/// Word index of every phone.
std::vector<std::size_t> word_of_phone(const ExpectedTranscript& t) {
  std::vector<std::size_t> w(t.phones.size());
  const auto words = t.words();
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t p = words[i].first; p < words[i].second; ++p) w[p] = i;
  }
  return w;
}

/// Random injections on distinct, preferably non-adjacent words.
std::vector<Injection> draw_injections(const ExpectedTranscript& t, const SynthesisSpec& spec,
                                       const std::vector<Injection>& fixed, std::mt19937_64& rng) {
  const auto words = t.words();
  const auto syllables = t.syllables();
  const auto word_of = word_of_phone(t);
  std::vector<int> used(words.size(), 0);
  auto mark = [&](std::size_t w) { used[w] = 1; };
  for (const auto& inj : fixed) {
    switch (inj.category) {
      case Category::SoundRepetition:
      case Category::SyllableRepetition: mark(word_of[syllables[inj.position].first]); break;
      case Category::WordRepetition: mark(inj.position); break;
      default: mark(word_of[inj.position]); break;
    }
  }

  std::discrete_distribution<std::size_t> cat(spec.priors.begin(), spec.priors.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Injection> out;
  for (int n = 0; n < spec.random_injections; ++n) {
    const Category c = classify::kCanonical[cat(rng)];
    // Word candidates for this category, first those with no used
    // neighbour, then any unused word.
    std::vector<std::size_t> eligible;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (used[w]) continue;
      const std::size_t n_syl = static_cast<std::size_t>(std::count_if(
          syllables.begin(), syllables.end(),
          [&](const auto& s) { return s.first >= words[w].first && s.first < words[w].second; }));
      if (c == Category::SyllableRepetition && n_syl < 2) continue;
      if (c == Category::BlockSilent && w == 0) continue;
      eligible.push_back(w);
    }
    std::vector<std::size_t> spaced;
    for (std::size_t w : eligible) {
      const bool left = w > 0 && used[w - 1];
      const bool right = w + 1 < words.size() && used[w + 1];
      if (!left && !right) spaced.push_back(w);
    }
    const auto& pool = spaced.empty() ? eligible : spaced;
    if (pool.empty()) continue;
    const std::size_t w = pick(pool, rng);
    mark(w);

    Injection inj;
    inj.category = c;
    const std::size_t first_syllable = static_cast<std::size_t>(
        std::find_if(syllables.begin(), syllables.end(), [&](const auto& s) { return s.first == words[w].first; }) -
        syllables.begin());
    switch (c) {
      case Category::SoundRepetition:
        inj.position = first_syllable;
        inj.extra_units = 1 + static_cast<int>(unit(rng) * 3.0);
        break;
      case Category::SyllableRepetition:
        inj.position = first_syllable;
        inj.extra_units = 1 + static_cast<int>(unit(rng) * 2.0);
        break;
      case Category::WordRepetition:
        inj.position = w;
        inj.extra_units = 1 + static_cast<int>(unit(rng) * 2.0);
        break;
      case Category::Prolongation: {
        std::uniform_int_distribution<std::size_t> ph(words[w].first, words[w].second - 1);
        inj.position = ph(rng);
        inj.factor = 2.5 + 1.5 * unit(rng);
        break;
      }
      case Category::BlockSilent:
        inj.position = words[w].first;
        inj.duration_ms = 300.0 + 300.0 * unit(rng);
        break;
      case Category::BlockAudible:
        inj.position = words[w].first;
        inj.duration_ms = 200.0 + 150.0 * unit(rng);
        break;
      case Category::Atypical: break;
    }
    out.push_back(inj);
  }
  return out;
}

std::size_t to_samples(double ms, int sr) {
  return static_cast<std::size_t>(std::llround(ms * 1e-3 * sr));
}

// A phone as placed in an utterance: 4 ms raised-cosine edges.
std::vector<double> faded_phone(const ToneSpec& tone, std::size_t samples, int sr, double rms) {
  auto x = render_phone(tone, samples, sr, rms);
  const std::size_t fade = to_samples(4.0, sr);
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t edge = std::min(n, samples - 1 - n);
    if (edge < fade) x[n] *= 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) / fade);
  }
  return x;
}

}  // namespace

SyntheticCase generate_synthetic_case(const SynthesisSpec& given, const PhonemeInventory& inv,
                                      const frontend::FrontendConfig& cfg) {
  inv.validate();
  SynthesisSpec spec = given;
  if (spec.transcript && spec.transcript->phones.empty() && !spec.transcript->source_text.empty()) {
    try {
      spec.transcript = parse_transcript(spec.transcript->source_text, inv);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidSpec, std::string("transcript: ") + e.what());
    }
  }
  spec.validate(inv);
  std::mt19937_64 rng(spec.seed);

  SyntheticCase out;
  out.transcript = spec.transcript ? *spec.transcript : random_transcript(inv, rng);
  const auto& t = out.transcript;
  out.injections = spec.injections;
  const auto extra = draw_injections(t, spec, spec.injections, rng);
  out.injections.insert(out.injections.end(), extra.begin(), extra.end());

  std::vector<std::size_t> expected;
  for (const auto& p : t.phones) expected.push_back(inv.index_of(p));
  const auto words = t.words();
  const auto syllables = t.syllables();
  const auto fillers = of_class(inv, PhoneClass::Filler);
  const int sr = spec.sample_rate;

  auto phone_unit = [&](std::size_t sym, int event) {
    return Unit{UnitKind::Phone, sym, to_samples(draw_duration_ms(inv.durations[sym], rng), sr), event};
  };

  std::vector<Unit> units;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const Unit* replaced = nullptr;
    Unit main = phone_unit(expected[i], -1);
    Unit noise;
    for (std::size_t k = 0; k < out.injections.size(); ++k) {
      const auto& inj = out.injections[k];
      const int ev = static_cast<int>(k);
      switch (inj.category) {
        case Category::SoundRepetition:
          if (syllables[inj.position].first != i) break;
          for (int u = 0; u < inj.extra_units; ++u) {
            units.push_back(phone_unit(expected[i], ev));
            if (!fillers.empty()) units.push_back(phone_unit(fillers.front(), ev));
          }
          break;
        case Category::SyllableRepetition:
          if (syllables[inj.position].first != i) break;
          for (int u = 0; u < inj.extra_units; ++u) {
            for (std::size_t p = syllables[inj.position].first; p < syllables[inj.position].second; ++p) {
              units.push_back(phone_unit(expected[p], ev));
            }
          }
          break;
        case Category::WordRepetition:
          if (words[inj.position].first != i) break;
          for (int u = 0; u < inj.extra_units; ++u) {
            for (std::size_t p = words[inj.position].first; p < words[inj.position].second; ++p) {
              units.push_back(phone_unit(expected[p], ev));
            }
          }
          break;
        case Category::Prolongation:
          if (inj.position != i) break;
          main.samples = static_cast<std::size_t>(std::llround(static_cast<double>(main.samples) * inj.factor));
          main.event = ev;
          break;
        case Category::BlockSilent:
          if (inj.position != i) break;
          units.push_back(Unit{UnitKind::Silence, expected[i], to_samples(inj.duration_ms, sr), ev});
          break;
        case Category::BlockAudible:
          if (inj.position != i) break;
          noise = Unit{UnitKind::Noise, expected[i], to_samples(inj.duration_ms, sr), ev};
          replaced = &noise;
          break;
        case Category::Atypical: break;
      }
    }
    units.push_back(replaced ? *replaced : main);
  }

  // Render.
  std::size_t total = 0;
  for (const auto& u : units) total += u.samples;
  out.audio.sample_rate = sr;
  out.audio.samples.assign(total, 0.0);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t pos = 0;
  for (const auto& u : units) {
    spans.emplace_back(pos, pos + u.samples);
    if (u.kind == UnitKind::Phone) {
      const auto x = faded_phone(inv.tones[u.symbol], u.samples, sr, spec.phone_rms);
      std::copy(x.begin(), x.end(), out.audio.samples.begin() + static_cast<std::ptrdiff_t>(pos));
      out.realized_phones.push_back(inv.symbols[u.symbol]);
    } else if (u.kind == UnitKind::Noise) {
      for (std::size_t n = 0; n < u.samples; ++n) out.audio.samples[pos + n] = spec.noise_amplitude * noise(rng);
    }
    pos += u.samples;
  }
  for (double& s : out.audio.samples) s += spec.floor_amplitude * noise(rng);

  // Gold events.
  for (std::size_t k = 0; k < out.injections.size(); ++k) {
    std::size_t lo = total, hi = 0;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (units[u].event != static_cast<int>(k)) continue;
      lo = std::min(lo, spans[u].first);
      hi = std::max(hi, spans[u].second);
    }
    if (hi <= lo) continue;
    out.gold.events.push_back({out.injections[k].category, static_cast<double>(lo) / sr,
                               static_cast<double>(hi) / sr});
  }
  std::sort(out.gold.events.begin(), out.gold.events.end(),
            [](const GoldEvent& a, const GoldEvent& b) { return a.start_s < b.start_s; });

  // Gold frame labels: the unit under each frame centre.
  const std::size_t frames = frontend::frame_count(total, cfg);
  out.gold.frame_labels.resize(frames);
  std::size_t u = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t centre = f * static_cast<std::size_t>(cfg.hop) + static_cast<std::size_t>(cfg.n_fft / 2);
    while (u + 1 < units.size() && spans[u].second <= centre) ++u;
    out.gold.frame_labels[f] = units[u].kind == UnitKind::Silence ? std::string() : inv.symbols[units[u].symbol];
  }
  return out;
}

SynthesisSpec corpus_spec(std::uint64_t seed) {
  SynthesisSpec spec;
  spec.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  spec.random_injections = std::uniform_int_distribution<int>(1, 2)(rng);
  return spec;
}

align::PhoneTemplates build_templates(const PhonemeInventory& inv, const frontend::FrontendConfig& cfg,
                                      int sample_rate) {
  const std::size_t n = static_cast<std::size_t>(cfg.n_fft) * 3;
  const SynthesisSpec defaults;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  // Mean mel power of each phone, rendered at the
  // synthesizer's level and noise floor.
  auto mean_power = [&](std::vector<double> x) {
    for (double& v : x) v += defaults.floor_amplitude * noise(rng);
    const auto mel = frontend::mel_spectrogram(AudioBuffer{std::move(x), sample_rate}, cfg);
    return Vector(mel.data.array().exp().colwise().mean().transpose());
  };
  std::vector<Vector> power;
  for (std::size_t s = 0; s < inv.size(); ++s) {
    power.push_back(mean_power(render_phone(inv.tones[s], n, sample_rate, defaults.phone_rms)));
  }

  auto cepstrum = [&](const Vector& p) {
    frontend::FeatureMatrix mel;
    mel.data = p.array().max(std::exp(cfg.log_floor)).log().matrix().transpose();
    mel.channel_labels.resize(static_cast<std::size_t>(cfg.n_mels));
    return Vector(frontend::mfcc(mel, cfg).data.row(0).transpose());
  };

  align::PhoneTemplates tpl;
  tpl.symbols = inv.symbols;
  tpl.centroids = Matrix::Zero(static_cast<Eigen::Index>(inv.size()), cfg.n_coef);
  for (std::size_t s = 0; s < inv.size(); ++s) tpl.centroids.row(static_cast<Eigen::Index>(s)) = cepstrum(power[s]);

  // A 128 ms window usually straddles two units. Render every ordered pair
  // of neighbours (silence included) at a few boundary phases and keep the
  // straddling frames, owned by the phone under the frame centre.
  const std::size_t win = static_cast<std::size_t>(cfg.n_fft), hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t none = inv.size();
  std::vector<Vector> rows;
  for (std::size_t a = 0; a <= none; ++a) {
    for (std::size_t b = 0; b <= none; ++b) {
      if (a == b) continue;
      for (std::size_t phase = 0; phase < hop; phase += hop / 4) {
        const std::size_t cut = win + phase;
        std::vector<double> x(cut + win + hop, 0.0);
        if (a < none) {
          const auto pa = faded_phone(inv.tones[a], cut, sample_rate, defaults.phone_rms);
          std::copy(pa.begin(), pa.end(), x.begin());
        }
        if (b < none) {
          const auto pb = faded_phone(inv.tones[b], x.size() - cut, sample_rate, defaults.phone_rms);
          std::copy(pb.begin(), pb.end(), x.begin() + static_cast<std::ptrdiff_t>(cut));
        }
        for (double& v : x) v += defaults.floor_amplitude * noise(rng);
        const auto mel = frontend::mel_spectrogram(AudioBuffer{std::move(x), sample_rate}, cfg);
        const auto cep = frontend::mfcc(mel, cfg);
        for (Eigen::Index f = 0; f < cep.data.rows(); ++f) {
          const std::size_t start = static_cast<std::size_t>(f) * hop;
          if (start >= cut || start + win <= cut) continue;
          const std::size_t owner = start + win / 2 < cut ? a : b;
          if (owner == none) continue;
          rows.push_back(cep.data.row(f).transpose());
          tpl.bank_owner.push_back(owner);
        }
      }
    }
  }
  tpl.bank.resize(static_cast<Eigen::Index>(rows.size()), cfg.n_coef);
  for (std::size_t r = 0; r < rows.size(); ++r) tpl.bank.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  tpl.temperature = 0.5;
  tpl.blank_prior = 0.2;
  return tpl;
}

nlohmann::json write_case(const SyntheticCase& c, const SynthesisSpec& spec, const std::filesystem::path& dir,
                          const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto wav = dir / (stem + ".wav");
  const auto gold = dir / (stem + ".gold.json");
  const auto transcript = dir / (stem + ".transcript.txt");
  save_audio(wav, c.audio);
  {
    std::ofstream g(gold);
    if (!g) throw Error(ErrorCode::Io, "cannot write " + gold.string());
    g << to_json(c.gold).dump(2) << '\n';
  }
  {
    std::ofstream t(transcript);
    if (!t) throw Error(ErrorCode::Io, "cannot write " + transcript.string());
    t << format_transcript(c.transcript) << '\n';
  }
  SynthesisSpec applied;
  applied.injections = c.injections;
  return {{"seed", spec.seed},
          {"spec", to_json(spec)},
          {"applied_injections", to_json(applied).at("injections")},
          {"audio", wav.string()},
          {"transcript", transcript.string()},
          {"gold", gold.string()}};
}

}  // namespace udm::synth
