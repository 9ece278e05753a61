#include "udm/metrics.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "udm/error.hpp"

namespace udm::metrics {

DetectionCounts& DetectionCounts::operator+=(const DetectionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold[i] += o.gold[i];
    hit[i] += o.hit[i];
  }
  return *this;
}

nlohmann::json to_json(const DetectionScores& d) {
  return {{"precision", d.precision},
          {"recall", d.recall},
          {"f1", d.f1},
          {"balanced_accuracy", d.balanced_accuracy}};
}

nlohmann::json to_json(const MetricsReport& m) {
  auto j = to_json(m.detection);
  j["aer_percent"] = m.aer_percent;
  j["kappa"] = m.kappa;
  j["rtf"] = m.rtf;
  return j;
}

double temporal_iou(double a0, double a1, double b0, double b1) {
  const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  const double uni = std::max(a1, b1) - std::min(a0, b0);
  return uni > 0.0 ? inter / uni : 0.0;
}

DetectionCounts match_events(std::span<const synth::GoldEvent> pred, std::span<const synth::GoldEvent> gold) {
  struct Pair {
    double iou;
    double first_start;
    double second_start;
    std::size_t p;
    std::size_t g;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (pred[p].category != gold[g].category) continue;
      const double iou = temporal_iou(pred[p].start_s, pred[p].end_s, gold[g].start_s, gold[g].end_s);
      if (iou < 0.5) continue;
      pairs.push_back({iou, std::min(pred[p].start_s, gold[g].start_s), std::max(pred[p].start_s, gold[g].start_s),
                       p, g});
    }
  }
  // Symmetric key so swapping pred and gold yields the same matching.
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.first_start, a.second_start) < std::tie(a.iou, b.first_start, b.second_start);
  });
  std::vector<char> used_p(pred.size(), 0), used_g(gold.size(), 0);
  DetectionCounts c;
  for (const auto& e : gold) ++c.gold[static_cast<std::size_t>(e.category)];
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_g[pr.g]) continue;
    used_p[pr.p] = used_g[pr.g] = 1;
    ++c.tp;
    ++c.hit[static_cast<std::size_t>(gold[pr.g].category)];
  }
  c.fp = pred.size() - c.tp;
  c.fn = gold.size() - c.tp;
  return c;
}

DetectionScores scores_from_counts(const DetectionCounts& c) {
  DetectionScores s;
  s.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  s.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < c.gold.size(); ++i) {
    if (c.gold[i] == 0) continue;
    sum += static_cast<double>(c.hit[i]) / static_cast<double>(c.gold[i]);
    ++present;
  }
  s.balanced_accuracy = present == 0 ? 1.0 : sum / static_cast<double>(present);
  return s;
}

DetectionScores evaluate_detection(std::span<const synth::GoldEvent> pred, std::span<const synth::GoldEvent> gold) {
  return scores_from_counts(match_events(pred, gold));
}

std::vector<synth::GoldEvent> as_gold_events(std::span<const classify::DysfluencyEvent> events) {
  std::vector<synth::GoldEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back({e.category, e.start_s, e.end_s});
  return out;
}

std::vector<std::string> fill_blanks(std::span<const std::string> labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  std::string last;
  for (auto& l : out) {
    if (l.empty()) {
      l = last;
    } else {
      last = l;
    }
  }
  // Leading blanks take the first phone.
  const auto first = std::find_if(out.begin(), out.end(), [](const std::string& s) { return !s.empty(); });
  if (first != out.end()) std::fill(out.begin(), first, *first);
  return out;
}

std::vector<std::string> frame_symbols(const align::AlignmentPath& path, const PhonemeInventory& inv) {
  std::vector<std::string> out;
  out.reserve(path.frame_labels.size());
  for (int l : path.frame_labels) out.push_back(l == align::kBlank ? std::string() : inv.symbols.at(l));
  return out;
}

std::pair<std::size_t, std::size_t> alignment_mismatches(std::span<const std::string> pred,
                                                         std::span<const std::string> gold) {
  if (pred.size() != gold.size()) {
    throw Error(ErrorCode::FrameCountMismatch,
                std::to_string(pred.size()) + " predicted vs " + std::to_string(gold.size()) + " gold frames");
  }
  const auto p = fill_blanks(pred);
  const auto g = fill_blanks(gold);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < p.size(); ++i) wrong += p[i] != g[i] ? 1 : 0;
  return {wrong, p.size()};
}

double alignment_error_rate(std::span<const std::string> pred, std::span<const std::string> gold) {
  const auto [wrong, total] = alignment_mismatches(pred, gold);
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(wrong) / static_cast<double>(total);
}

double alignment_error_rate(const align::AlignmentPath& pred, std::span<const std::string> gold,
                            const PhonemeInventory& inv) {
  const auto labels = frame_symbols(pred, inv);
  return alignment_error_rate(labels, gold);
}

double cohens_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::LengthMismatch, "kappa needs two label sequences of equal nonzero length");
  }
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> ca, cb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, count] : ca) {
    const auto it = cb.find(label);
    if (it != cb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

double real_time_factor(double processing_s, double audio_s) {
  if (!(audio_s > 0.0)) throw Error(ErrorCode::ZeroDuration, "audio duration must be positive");
  return processing_s / audio_s;
}

}  // namespace udm::metrics
