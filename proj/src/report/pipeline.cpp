#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "udm/error.hpp"
#include "udm/report.hpp"
#include "udm/synth.hpp"

namespace udm::report {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(name, e);
  }
}

std::vector<ReportSegment> to_segments(const align::AlignmentPath& path, const PhonemeInventory& inv,
                                       const frontend::FrameGrid& grid) {
  std::vector<ReportSegment> out;
  for (const auto& s : path.segments) {
    out.push_back({inv.symbols[s.symbol], quantize(grid.boundary_s(s.start_frame)),
                   quantize(grid.boundary_s(s.end_frame)), quantize(s.mean_posterior), s.start_frame, s.end_frame});
  }
  return out;
}

std::vector<char> silent_mask(const frontend::FeatureMatrix& features, double floor_db) {
  const int col = features.channel_index("energy_db");
  if (col < 0) throw Error(ErrorCode::MissingChannels, "no energy_db channel");
  std::vector<char> mask(features.frames());
  for (std::size_t f = 0; f < mask.size(); ++f) mask[f] = features.data(static_cast<Eigen::Index>(f), col) < floor_db;
  return mask;
}

/// Recurrent/attention input: MFCCs plus energy in tens of dB.
Matrix temporal_input(const frontend::FeatureMatrix& features, int n_coef, int input_dim) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(features.frames()), input_dim);
  for (int k = 0; k < n_coef && k < input_dim; ++k) {
    const int c = features.channel_index("mfcc_" + std::to_string(k));
    if (c >= 0) x.col(k) = features.data.col(c);
  }
  const int e = features.channel_index("energy_db");
  if (e >= 0 && n_coef < input_dim) x.col(n_coef) = features.data.col(e) / 10.0;
  return x;
}

void neural_atypicality(std::vector<classify::Candidate>& cands, const frontend::FeatureMatrix& features,
                        const temporal::WeightBundle& w, int n_coef) {
  if (cands.empty()) return;
  const Matrix x = temporal_input(features, n_coef, w.config().input_dim);
  const auto h = temporal::temporal_stack(x, w);
  Vector centroid;
  double scale = 1.0;
  if (w.contains("open_set.centroid")) {
    centroid = w.vector("open_set.centroid");
    if (w.contains("open_set.scale")) scale = w.vector("open_set.scale")(0);
  } else {
    // No stored centroid: measure deviation from the utterance's own mean.
    centroid = h.data.colwise().mean().transpose();
    double d = 0.0;
    for (Eigen::Index r = 0; r < h.data.rows(); ++r) d += (h.data.row(r).transpose() - centroid).norm();
    scale = h.data.rows() > 0 ? std::max(d / static_cast<double>(h.data.rows()), 1e-12) : 1.0;
  }
  for (auto& c : cands) c.atypicality = classify::open_set_score(h, c.start_frame, c.end_frame, centroid, scale).atypicality;
}

void quantize_candidates(std::vector<classify::Candidate>& cands) {
  for (auto& c : cands) {
    for (auto& v : c.scores.values) v = quantize(v);
    c.atypicality = quantize(c.atypicality);
    c.start_s = quantize(c.start_s);
    c.end_s = quantize(c.end_s);
  }
}

align::EncoderSource encoder_for(const PhonemeInventory& inv, const PipelineOptions& opts) {
  if (opts.encoder) return *opts.encoder;
  return synth::build_templates(inv, opts.frontend);
}

struct Decoded {
  align::Posteriorgram post;
  align::AlignmentPath realized;
  std::vector<align::PhonemeEditOp> ops;
  std::vector<classify::Candidate> candidates;
};

Decoded decode_and_score(const frontend::FeatureMatrix& features, const ExpectedTranscript& t,
                         const PhonemeInventory& inv, const PipelineOptions& opts, const align::EncoderSource& enc,
                         const frontend::FrameGrid& grid) {
  const auto& th = opts.thresholds;
  Decoded d;
  d.post = stage("posteriors", [&] {
    auto p = align::phoneme_posteriors(features, inv, enc);
    return align::gate_silence(p, features, inv, th.silence_db);
  });
  d.realized = stage("alignment", [&] {
    const auto mask = silent_mask(features, th.silence_db);
    const auto raw = align::decode_realized(d.post, inv, mask, opts.decode);
    return align::refine_alignment(raw, d.post, inv, opts.refine_window);
  });
  d.ops = stage("edit_ops", [&] { return align::classify_edit_ops(d.realized, t, inv, grid, th.z_prolong); });
  d.candidates = stage("classifier", [&] {
    classify::ScoringContext ctx{d.realized, t, inv, features, grid, opts.frontend.win_size};
    return classify::canonical_scores(d.ops, ctx, th);
  });
  if (opts.weights) {
    stage("temporal", [&] {
      neural_atypicality(d.candidates, features, *opts.weights, opts.frontend.n_coef);
      return 0;
    });
  }
  quantize_candidates(d.candidates);
  return d;
}

std::vector<classify::DysfluencyEvent> decide(const std::vector<classify::Candidate>& cands,
                                              const classify::NeutralizedCandidates& neutralized,
                                              const classify::Thresholds& th, const classify::CalibrationModel& cal,
                                              bool attribution) {
  auto events = classify::calibrate_confidence(classify::combine_predictions(cands, th), cal);
  if (attribution) {
    for (auto& e : events) e.attribution = classify::attribute_event(e, neutralized, th);
  }
  return classify::apply_thresholds(std::move(events), th);
}

}  // namespace

std::vector<classify::Candidate> score_candidates(const frontend::FeatureMatrix& features,
                                                  const ExpectedTranscript& t, const PhonemeInventory& inv,
                                                  const PipelineOptions& opts, const frontend::FrameGrid& grid) {
  return decode_and_score(features, t, inv, opts, encoder_for(inv, opts), grid).candidates;
}

AnalysisReport analyze(const AudioBuffer& audio, const std::string& transcript_text, const PhonemeInventory& inv,
                       const PipelineOptions& opts, const std::string& audio_path) {
  const auto t0 = std::chrono::steady_clock::now();
  stage("config", [&] {
    opts.frontend.validate();
    opts.thresholds.validate();
    if (!(opts.calibration.temperature > 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be positive");
    if (opts.weights) opts.weights->validate();
    return 0;
  });
  const auto t = stage("transcript", [&] { return parse_transcript(transcript_text, inv); });

  const auto enc = stage("posteriors", [&] { return encoder_for(inv, opts); });
  const auto features = stage("frontend", [&] {
    validate_audio(audio);
    opts.frontend.validate(audio.sample_rate);
    return frontend::extract_features(audio, opts.frontend);
  });
  const auto grid = frontend::make_grid(audio, opts.frontend);

  const auto main = decode_and_score(features, t, inv, opts, enc, grid);
  const auto forced = stage("alignment", [&] {
    const auto raw = align::ctc_forced_align(main.post, t, inv);
    return align::refine_alignment(raw, main.post, inv, opts.refine_window);
  });

  AnalysisReport r;
  if (opts.attribution) {
    for (std::size_t g = 0; g < classify::kChannelGroups.size(); ++g) {
      const auto neutral = classify::neutralize(features, classify::kChannelGroups[g]);
      r.neutralized[g] = decode_and_score(neutral, t, inv, opts, enc, grid).candidates;
    }
  }

  r.audio = {audio_path, quantize(audio.duration_s()), audio.sample_rate};
  r.config.frontend = opts.frontend;
  r.config.thresholds = opts.thresholds;
  r.config.calibration = opts.calibration;
  r.config.inventory = inv.name;
  r.config.encoder = std::holds_alternative<align::PhoneTemplates>(enc) ? "templates" : "external";
  r.config.switch_penalty = opts.decode.switch_penalty;
  r.config.refine_window = opts.refine_window;
  r.config.neural = opts.weights.has_value();
  r.config.attribution = opts.attribution;
  r.transcript = t;
  r.alignment = to_segments(main.realized, inv, grid);
  r.expected_alignment = to_segments(forced, inv, grid);
  r.edit_ops = main.ops;
  r.candidates = main.candidates;
  r.events = stage("classifier", [&] {
    return decide(r.candidates, r.neutralized, opts.thresholds, opts.calibration, opts.attribution);
  });
  r.version = 1;
  r.processing_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

AnalysisReport analyze_file(const std::filesystem::path& audio_path, const std::string& transcript_text,
                            const PhonemeInventory& inv, const PipelineOptions& opts) {
  const auto audio = stage("audio", [&] { return load_audio(audio_path); });
  return analyze(audio, transcript_text, inv, opts, audio_path.string());
}

AnalysisReport rescore(const AnalysisReport& r, const classify::Thresholds& th) {
  th.validate();
  AnalysisReport out = r;
  out.config.thresholds = th;
  out.events = decide(r.candidates, r.neutralized, th, r.config.calibration, r.config.attribution);
  std::erase_if(out.verdicts, [&](const Verdict& v) {
    return std::none_of(out.events.begin(), out.events.end(),
                        [&](const classify::DysfluencyEvent& e) { return e.id == v.event_id; });
  });
  return out;
}

AnalysisReport with_verdict(const AnalysisReport& r, const std::string& event_id, const std::string& verdict,
                            const std::string& annotator, const std::string& timestamp) {
  if (verdict != "accepted" && verdict != "rejected") {
    throw Error(ErrorCode::InvalidConfig, "field 'verdict': must be 'accepted' or 'rejected'");
  }
  const bool known = std::any_of(r.events.begin(), r.events.end(),
                                 [&](const classify::DysfluencyEvent& e) { return e.id == event_id; });
  if (!known) throw Error(ErrorCode::UnknownEvent, "no event '" + event_id + "' in report " + r.report_id);
  AnalysisReport out = r;
  out.verdicts.push_back({event_id, verdict, annotator, timestamp});
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace udm::report
