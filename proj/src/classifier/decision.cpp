#include <algorithm>
#include <cmath>

#include "udm/classifier.hpp"
#include "udm/error.hpp"

namespace udm::classify {

double final_score(double best_canonical, double atypicality, const Thresholds& th) {
  return std::clamp(th.w_canonical * best_canonical + th.w_open * atypicality, 0.0, 1.0);
}

std::vector<DysfluencyEvent> combine_predictions(std::span<const Candidate> candidates, const Thresholds& th) {
  th.validate();
  std::vector<DysfluencyEvent> events;
  for (const auto& c : candidates) {
    const auto [best_c, best] = c.scores.best();
    DysfluencyEvent e;
    if (best > 0.0 && best >= th.sensitivity_of(best_c)) {
      e.category = best_c;
    } else if (c.atypicality >= th.open_set_threshold) {
      e.category = Category::Atypical;
    } else {
      continue;
    }
    e.start_s = c.start_s;
    e.end_s = c.end_s;
    e.raw_score = final_score(best, c.atypicality, th);
    e.edit_ops = c.edit_ops;
    e.candidates = {c.id};
    e.nearest = best_c;
    e.best_canonical = best;
    e.atypicality = c.atypicality;
    events.push_back(std::move(e));
  }

  std::stable_sort(events.begin(), events.end(), [](const DysfluencyEvent& a, const DysfluencyEvent& b) {
    return a.start_s < b.start_s;
  });
  std::vector<DysfluencyEvent> merged;
  for (auto& e : events) {
    auto same = std::find_if(merged.begin(), merged.end(), [&](const DysfluencyEvent& m) {
      return m.category == e.category && e.start_s < m.end_s && m.start_s < e.end_s;
    });
    if (same == merged.end()) {
      merged.push_back(std::move(e));
      continue;
    }
    same->start_s = std::min(same->start_s, e.start_s);
    same->end_s = std::max(same->end_s, e.end_s);
    if (e.raw_score > same->raw_score) {
      same->raw_score = e.raw_score;
      same->nearest = e.nearest;
      same->best_canonical = e.best_canonical;
      same->atypicality = e.atypicality;
    }
    same->edit_ops.insert(same->edit_ops.end(), e.edit_ops.begin(), e.edit_ops.end());
    std::sort(same->edit_ops.begin(), same->edit_ops.end());
    same->candidates.insert(same->candidates.end(), e.candidates.begin(), e.candidates.end());
    std::sort(same->candidates.begin(), same->candidates.end());
  }
  for (auto& e : merged) {
    e.id = "ev-" + std::to_string(e.candidates.front()) + "-" + std::string(to_string(e.category));
    e.calibrated_confidence = e.raw_score;
  }
  return merged;
}

double logit(double p) {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<DysfluencyEvent> calibrate_confidence(std::vector<DysfluencyEvent> events, const CalibrationModel& cal) {
  if (!(cal.temperature > 0.0) || !std::isfinite(cal.temperature)) {
    throw Error(ErrorCode::InvalidConfig, "field 'temperature': must be positive");
  }
  for (auto& e : events) {
    e.calibrated_confidence = std::clamp(sigmoid(logit(e.raw_score) / cal.temperature), 0.0, 1.0);
  }
  return events;
}

double fit_temperature(std::span<const double> raw_scores, std::span<const int> labels) {
  if (raw_scores.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  if (raw_scores.empty()) return 1.0;
  // NLL is convex in the inverse temperature b; find the root of its
  // derivative sum_i z_i (sigma(b z_i) - y_i) by bisection in log space.
  std::vector<double> z(raw_scores.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = logit(raw_scores[i]);
  auto slope = [&](double b) {
    double g = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) g += z[i] * (sigmoid(b * z[i]) - (labels[i] != 0 ? 1.0 : 0.0));
    return g;
  };
  double lo = std::log(1e-3), hi = std::log(1e3);
  if (slope(std::exp(lo)) >= 0.0) return 1.0 / std::exp(lo);
  if (slope(std::exp(hi)) <= 0.0) return 1.0 / std::exp(hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(std::exp(mid)) < 0.0 ? lo : hi) = mid;
  }
  return 1.0 / std::exp(0.5 * (lo + hi));
}

double rescore_span(const DysfluencyEvent& ev, std::span<const Candidate> candidates, const Thresholds& th) {
  double score = 0.0;
  for (const auto& c : candidates) {
    if (!(c.start_s < ev.end_s && ev.start_s < c.end_s)) continue;
    const double canonical = ev.category == Category::Atypical ? c.scores.max() : c.scores[ev.category];
    score = std::max(score, final_score(canonical, c.atypicality, th));
  }
  return score;
}

frontend::FeatureMatrix neutralize(const frontend::FeatureMatrix& features, ChannelGroup group) {
  frontend::FeatureMatrix out = features;
  for (std::size_t ch = 0; ch < features.channels(); ++ch) {
    const std::string& label = features.channel_labels[ch];
    bool hit = false;
    switch (group) {
      case ChannelGroup::Mel: hit = label.rfind("mel_", 0) == 0; break;
      case ChannelGroup::Pitch: hit = label == "pitch_hz" || label == "voiced_flag"; break;
      case ChannelGroup::Energy: hit = label == "energy_db"; break;
      case ChannelGroup::Mfcc: hit = label.rfind("mfcc_", 0) == 0; break;
    }
    if (!hit || features.frames() == 0) continue;
    const auto col = static_cast<Eigen::Index>(ch);
    out.data.col(col).setConstant(features.data.col(col).mean());
  }
  return out;
}

Attribution attribute_event(const DysfluencyEvent& ev, const NeutralizedCandidates& neutralized,
                            const Thresholds& th) {
  Attribution a{};
  for (std::size_t g = 0; g < a.size(); ++g) a[g] = ev.raw_score - rescore_span(ev, neutralized[g], th);
  return a;
}

Attribution attribute_event(const DysfluencyEvent& ev, const frontend::FeatureMatrix& features,
                            const Rescorer& pipeline, const Thresholds& th) {
  NeutralizedCandidates n;
  for (std::size_t g = 0; g < n.size(); ++g) n[g] = pipeline(neutralize(features, kChannelGroups[g]));
  return attribute_event(ev, n, th);
}

std::vector<DysfluencyEvent> apply_thresholds(std::vector<DysfluencyEvent> events, const Thresholds& th) {
  std::erase_if(events, [&](const DysfluencyEvent& e) {
    double bar = th.sensitivity_of(e.category);
    if (e.category == Category::Atypical && e.best_canonical > 0.0) {
      bar = std::max(bar, th.sensitivity_of(e.nearest));
    }
    return e.calibrated_confidence < bar;
  });
  return events;
}

}  // namespace udm::classify
