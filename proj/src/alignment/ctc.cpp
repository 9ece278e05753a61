#include <cmath>
#include <limits>

#include "udm/alignment.hpp"
#include "udm/error.hpp"

namespace udm::align {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_prob(const Posteriorgram& post, std::size_t t, std::size_t column) {
  return std::log(post.probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(column)));
}

}  // namespace

std::vector<std::size_t> AlignmentPath::realized() const {
  std::vector<std::size_t> out;
  int prev = kBlank;
  for (int label : frame_labels) {
    if (label != kBlank && label != prev) out.push_back(static_cast<std::size_t>(label));
    prev = label;
  }
  return out;
}

AlignmentPath path_from_labels(std::vector<int> labels, const Posteriorgram& post, const PhonemeInventory& inv) {
  AlignmentPath path;
  path.frame_labels = std::move(labels);
  double sum = 0.0;
  for (std::size_t t = 0; t < path.frame_labels.size(); ++t) {
    const int label = path.frame_labels[t];
    const std::size_t col = label == kBlank ? inv.blank_index : inv.column_of(static_cast<std::size_t>(label));
    const double p = post.probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(col));
    sum += std::log(p);
    if (label == kBlank) continue;
    if (t == 0 || path.frame_labels[t - 1] != label) {
      path.segments.push_back({static_cast<std::size_t>(label), t, t + 1, 0.0});
    } else {
      path.segments.back().end_frame = t + 1;
    }
    path.segments.back().mean_posterior += p;
  }
  for (auto& s : path.segments) s.mean_posterior /= static_cast<double>(s.length());
  path.log_score = sum;
  return path;
}

std::size_t min_ctc_frames(std::span<const std::size_t> phones) {
  std::size_t n = phones.size();
  for (std::size_t i = 1; i < phones.size(); ++i) n += phones[i] == phones[i - 1] ? 1 : 0;
  return n;
}

AlignmentPath ctc_forced_align(const Posteriorgram& post, const ExpectedTranscript& t, const PhonemeInventory& inv) {
  std::vector<std::size_t> phones;
  phones.reserve(t.phones.size());
  for (const auto& p : t.phones) phones.push_back(inv.index_of(p));
  if (static_cast<std::size_t>(post.probs.cols()) != inv.columns()) {
    throw Error(ErrorCode::ShapeMismatch, "posteriorgram width does not match inventory");
  }

  const std::size_t frames = post.frames();
  const std::size_t needed = min_ctc_frames(phones);
  if (phones.empty() || frames < needed) {
    throw Error(ErrorCode::InfeasibleLength,
                std::to_string(frames) + " frames cannot spell " + std::to_string(phones.size()) +
                    " phones (need " + std::to_string(needed) + ")");
  }

  // Expanded states: even = blank, odd = phone (s - 1) / 2.
  const std::size_t n_states = 2 * phones.size() + 1;
  auto column = [&](std::size_t s) { return s % 2 == 0 ? inv.blank_index : inv.column_of(phones[s / 2]); };

  std::vector<double> prev(n_states, kNegInf), cur(n_states, kNegInf);
  std::vector<std::uint32_t> back(frames * n_states, 0);
  prev[0] = log_prob(post, 0, column(0));
  prev[1] = log_prob(post, 0, column(1));

  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < n_states; ++s) {
      double best = prev[s];
      std::size_t from = s;
      if (s >= 1 && prev[s - 1] > best) {
        best = prev[s - 1];
        from = s - 1;
      }
      if (s % 2 == 1 && s >= 3 && phones[s / 2] != phones[s / 2 - 1] && prev[s - 2] > best) {
        best = prev[s - 2];
        from = s - 2;
      }
      cur[s] = best + log_prob(post, t, column(s));
      back[t * n_states + s] = static_cast<std::uint32_t>(from);
    }
    std::swap(prev, cur);
  }

  std::size_t state = n_states - 1;
  if (prev[n_states - 2] > prev[n_states - 1]) state = n_states - 2;

  std::vector<int> labels(frames);
  for (std::size_t t = frames; t-- > 0;) {
    labels[t] = state % 2 == 0 ? kBlank : static_cast<int>(phones[state / 2]);
    if (t > 0) state = back[t * n_states + state];
  }
  return path_from_labels(std::move(labels), post, inv);
}

AlignmentPath decode_realized(const Posteriorgram& post, const PhonemeInventory& inv, std::span<const char> silent,
                              const DecodeOptions& opts) {
  const std::size_t frames = post.frames();
  if (silent.size() != frames) throw Error(ErrorCode::FrameCountMismatch, "silence mask length differs from frames");
  if (static_cast<std::size_t>(post.probs.cols()) != inv.columns()) {
    throw Error(ErrorCode::ShapeMismatch, "posteriorgram width does not match inventory");
  }
  const std::size_t n_sym = inv.size();
  std::vector<int> labels(frames, kBlank);

  std::size_t t0 = 0;
  while (t0 < frames) {
    if (silent[t0]) {
      ++t0;
      continue;
    }
    std::size_t t1 = t0;
    while (t1 < frames && !silent[t1]) ++t1;

    // Viterbi over [t0, t1) with a constant switching cost. Each symbol is
    // a chain of `dur` states so a label must hold for `dur` frames before
    // it may switch; the run edges are exempt.
    const std::size_t len = t1 - t0;
    const std::size_t dur = std::max<std::size_t>(1, opts.min_frames);
    const std::size_t n_st = n_sym * dur;
    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    std::vector<double> score(n_st, kNeg), next(n_st);
    std::vector<std::uint32_t> back(len * n_st, 0);
    for (std::size_t k = 0; k < n_sym; ++k) score[k * dur] = log_prob(post, t0, inv.column_of(k));
    for (std::size_t i = 1; i < len; ++i) {
      // Best and runner-up among symbols whose chain is complete.
      std::size_t best_k = 0, second_k = n_sym > 1 ? 1 : 0;
      auto done = [&](std::size_t k) { return score[k * dur + dur - 1]; };
      if (done(second_k) > done(best_k)) std::swap(best_k, second_k);
      for (std::size_t k = 2; k < n_sym; ++k) {
        if (done(k) > done(best_k)) {
          second_k = best_k;
          best_k = k;
        } else if (done(k) > done(second_k)) {
          second_k = k;
        }
      }
      for (std::size_t k = 0; k < n_sym; ++k) {
        const double lp = log_prob(post, t0 + i, inv.column_of(k));
        const std::size_t base = k * dur;
        for (std::size_t d = 0; d < dur; ++d) {
          double s = kNeg;
          std::size_t from = base + d;
          if (d > 0) {
            s = score[base + d - 1];
            from = base + d - 1;
          }
          if (d == dur - 1 && score[base + d] > s) {
            s = score[base + d];
            from = base + d;
          }
          if (d == 0) {
            const std::size_t other = k == best_k ? second_k : best_k;
            if (n_sym > 1 && other != k && done(other) - opts.switch_penalty > s) {
              s = done(other) - opts.switch_penalty;
              from = other * dur + dur - 1;
            }
          }
          next[base + d] = s + lp;
          back[i * n_st + base + d] = static_cast<std::uint32_t>(from);
        }
      }
      std::swap(score, next);
    }
    std::size_t st = 0;
    for (std::size_t j = 1; j < n_st; ++j) {
      if (score[j] > score[st]) st = j;
    }
    for (std::size_t i = len; i-- > 0;) {
      labels[t0 + i] = static_cast<int>(st / dur);
      if (i > 0) st = back[i * n_st + st];
    }
    t0 = t1;
  }
  return path_from_labels(std::move(labels), post, inv);
}

AlignmentPath refine_alignment(const AlignmentPath& raw, const Posteriorgram& post, const PhonemeInventory& inv,
                               int window) {
  if (window <= 0 || raw.segments.size() < 2 || raw.frame_labels.size() != post.frames()) return raw;

  std::vector<int> labels = raw.frame_labels;
  std::vector<Segment> segs = raw.segments;
  const auto frames = static_cast<Eigen::Index>(post.frames());

  // Column prefix sums of a symbol's posterior.
  auto prefix_for = [&](std::size_t symbol) {
    std::vector<double> pre(static_cast<std::size_t>(frames) + 1, 0.0);
    const auto col = static_cast<Eigen::Index>(inv.column_of(symbol));
    for (Eigen::Index t = 0; t < frames; ++t) pre[static_cast<std::size_t>(t) + 1] = pre[static_cast<std::size_t>(t)] + post.probs(t, col);
    return pre;
  };

  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    Segment& left = segs[i];
    Segment& right = segs[i + 1];
    if (left.end_frame != right.start_frame) continue;
    const auto pl = prefix_for(left.symbol);
    const auto pr = prefix_for(right.symbol);
    auto objective = [&](std::size_t b) {
      return (pl[b] - pl[left.start_frame]) / static_cast<double>(b - left.start_frame) +
             (pr[right.end_frame] - pr[b]) / static_cast<double>(right.end_frame - b);
    };
    const std::size_t boundary = left.end_frame;
    std::size_t best = boundary;
    double best_value = objective(boundary);
    for (int step = 1; step <= window; ++step) {
      for (int sign : {-1, 1}) {
        const long cand = static_cast<long>(boundary) + sign * step;
        if (cand <= static_cast<long>(left.start_frame) || cand >= static_cast<long>(right.end_frame)) continue;
        const double v = objective(static_cast<std::size_t>(cand));
        if (v > best_value) {
          best_value = v;
          best = static_cast<std::size_t>(cand);
        }
      }
    }
    if (best == boundary) continue;
    for (std::size_t t = std::min(best, boundary); t < std::max(best, boundary); ++t) {
      labels[t] = static_cast<int>(best < boundary ? right.symbol : left.symbol);
    }
    left.end_frame = best;
    right.start_frame = best;
  }
  return path_from_labels(std::move(labels), post, inv);
}

}  // namespace udm::align
