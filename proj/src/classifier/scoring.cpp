#include <algorithm>
#include <cmath>
#include <limits>

#include "udm/classifier.hpp"
#include "udm/error.hpp"

namespace udm::classify {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::SoundRepetition: return "sound_repetition";
    case Category::SyllableRepetition: return "syllable_repetition";
    case Category::WordRepetition: return "word_repetition";
    case Category::Prolongation: return "prolongation";
    case Category::BlockSilent: return "block_silent";
    case Category::BlockAudible: return "block_audible";
    case Category::Atypical: return "atypical";
  }
  return "atypical";
}

Category category_from_string(std::string_view s) {
  for (std::size_t i = 0; i <= kCanonicalCount; ++i) {
    const auto c = static_cast<Category>(i);
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown category '" + std::string(s) + "'");
}

std::string_view severity(Category c) {
  switch (c) {
    case Category::SoundRepetition: return "high";
    case Category::SyllableRepetition: return "high";
    case Category::WordRepetition: return "medium";
    case Category::Prolongation: return "high";
    case Category::BlockSilent: return "very_high";
    case Category::BlockAudible: return "very_high";
    case Category::Atypical: return "unknown";
  }
  return "unknown";
}

std::pair<Category, double> CategoryScores::best() const {
  static constexpr std::array<Category, kCanonicalCount> order = {
      Category::WordRepetition, Category::SyllableRepetition, Category::SoundRepetition,
      Category::Prolongation,   Category::BlockAudible,       Category::BlockSilent};
  Category best_c = order[0];
  double best_v = (*this)[best_c];
  for (Category c : order) {
    if ((*this)[c] > best_v) {
      best_v = (*this)[c];
      best_c = c;
    }
  }
  return {best_c, best_v};
}

std::string_view to_string(ChannelGroup g) {
  switch (g) {
    case ChannelGroup::Mel: return "mel";
    case ChannelGroup::Pitch: return "pitch";
    case ChannelGroup::Energy: return "energy";
    case ChannelGroup::Mfcc: return "mfcc";
  }
  return "mel";
}

namespace {

void check_unit(double v, const std::string& field) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "field '" + field + "': must lie in [0, 1]");
  }
}

double number_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "field '" + path + "': expected a number");
  return v.get<double>();
}

nlohmann::json scores_json(const CategoryScores& s) {
  nlohmann::json j = nlohmann::json::object();
  for (Category c : kCanonical) j[std::string(to_string(c))] = s[c];
  return j;
}

}  // namespace

void Thresholds::validate() const {
  for (std::size_t i = 0; i <= kCanonicalCount; ++i) {
    check_unit(sensitivity[i], "sensitivity." + std::string(to_string(static_cast<Category>(i))));
  }
  check_unit(open_set_threshold, "open_set_threshold");
  if (!std::isfinite(z_prolong)) throw Error(ErrorCode::InvalidConfig, "field 'z_prolong': must be finite");
  if (!std::isfinite(silence_block_ms) || silence_block_ms <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "field 'silence_block_ms': must be positive");
  }
  if (!std::isfinite(silence_db)) throw Error(ErrorCode::InvalidConfig, "field 'silence_db': must be finite");
  if (!std::isfinite(w_canonical) || w_canonical < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "field 'w_canonical': must be nonnegative");
  }
  if (!std::isfinite(w_open) || w_open < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "field 'w_open': must be nonnegative");
  }
  if (std::abs(w_canonical + w_open - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "field 'w_open': w_canonical + w_open must equal 1");
  }
}

nlohmann::json to_json(const Thresholds& th) {
  nlohmann::json sens = nlohmann::json::object();
  for (std::size_t i = 0; i <= kCanonicalCount; ++i) {
    sens[std::string(to_string(static_cast<Category>(i)))] = th.sensitivity[i];
  }
  return {{"sensitivity", sens},
          {"open_set_threshold", th.open_set_threshold},
          {"z_prolong", th.z_prolong},
          {"silence_block_ms", th.silence_block_ms},
          {"silence_db", th.silence_db},
          {"w_canonical", th.w_canonical},
          {"w_open", th.w_open}};
}

Thresholds thresholds_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "thresholds must be a JSON object");
  Thresholds th;
  if (j.contains("sensitivity")) {
    const auto& s = j.at("sensitivity");
    if (!s.is_object()) throw Error(ErrorCode::InvalidConfig, "field 'sensitivity': expected an object");
    for (const auto& [key, value] : s.items()) {
      Category c;
      try {
        c = category_from_string(key);
      } catch (const Error&) {
        throw Error(ErrorCode::InvalidConfig, "field 'sensitivity." + key + "': unknown category");
      }
      th.sensitivity_of(c) = number_field(s, key, "sensitivity." + key);
    }
  }
  auto read = [&](const char* key, double& out) {
    if (j.contains(key)) out = number_field(j, key, key);
  };
  read("open_set_threshold", th.open_set_threshold);
  read("z_prolong", th.z_prolong);
  read("silence_block_ms", th.silence_block_ms);
  read("silence_db", th.silence_db);
  read("w_canonical", th.w_canonical);
  read("w_open", th.w_open);
  for (const auto& [key, value] : j.items()) {
    static const std::array<std::string_view, 7> known = {"sensitivity", "open_set_threshold", "z_prolong",
                                                          "silence_block_ms", "silence_db", "w_canonical",
                                                          "w_open"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidConfig, "field '" + key + "': unknown field");
    }
  }
  th.validate();
  return th;
}

nlohmann::json to_json(const Candidate& c) {
  return {{"id", c.id},
          {"frame_span", {c.start_frame, c.end_frame}},
          {"start_s", c.start_s},
          {"end_s", c.end_s},
          {"scores", scores_json(c.scores)},
          {"atypicality", c.atypicality},
          {"edit_ops", c.edit_ops}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.id = j.at("id").get<std::size_t>();
  c.start_frame = j.at("frame_span").at(0).get<std::size_t>();
  c.end_frame = j.at("frame_span").at(1).get<std::size_t>();
  c.start_s = j.at("start_s").get<double>();
  c.end_s = j.at("end_s").get<double>();
  for (Category cat : kCanonical) c.scores[cat] = j.at("scores").at(std::string(to_string(cat))).get<double>();
  c.atypicality = j.at("atypicality").get<double>();
  c.edit_ops = j.at("edit_ops").get<std::vector<std::size_t>>();
  return c;
}

nlohmann::json to_json(const DysfluencyEvent& e) {
  nlohmann::json attribution = nlohmann::json::object();
  for (std::size_t g = 0; g < kChannelGroups.size(); ++g) {
    attribution[std::string(to_string(kChannelGroups[g]))] = e.attribution[g];
  }
  return {{"id", e.id},
          {"category", std::string(to_string(e.category))},
          {"severity", std::string(severity(e.category))},
          {"start_s", e.start_s},
          {"end_s", e.end_s},
          {"raw_score", e.raw_score},
          {"calibrated_confidence", e.calibrated_confidence},
          {"contributing_edit_ops", e.edit_ops},
          {"candidates", e.candidates},
          {"nearest_category", std::string(to_string(e.nearest))},
          {"best_canonical", e.best_canonical},
          {"atypicality", e.atypicality},
          {"attribution", attribution}};
}

DysfluencyEvent event_from_json(const nlohmann::json& j) {
  DysfluencyEvent e;
  e.id = j.at("id").get<std::string>();
  e.category = category_from_string(j.at("category").get<std::string>());
  e.start_s = j.at("start_s").get<double>();
  e.end_s = j.at("end_s").get<double>();
  e.raw_score = j.at("raw_score").get<double>();
  e.calibrated_confidence = j.at("calibrated_confidence").get<double>();
  e.edit_ops = j.at("contributing_edit_ops").get<std::vector<std::size_t>>();
  e.candidates = j.value("candidates", std::vector<std::size_t>{});
  e.nearest = category_from_string(j.value("nearest_category", std::string("sound_repetition")));
  e.best_canonical = j.value("best_canonical", 0.0);
  e.atypicality = j.value("atypicality", 0.0);
  if (j.contains("attribution")) {
    for (std::size_t g = 0; g < kChannelGroups.size(); ++g) {
      e.attribution[g] = j.at("attribution").value(std::string(to_string(kChannelGroups[g])), 0.0);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Rule set

namespace {

struct Run {
  std::vector<std::size_t> ops;  // indices into the op list
  std::size_t cursor = 0;        // expected phones consumed before the run
};

/// Whether inserting `inserted` at expected position `cursor` yields the
/// expected sequence with some unit of `units` spoken k >= 2 times.
bool repeats_unit(std::span<const std::size_t> inserted, std::span<const std::size_t> expected, std::size_t cursor,
                  const std::vector<std::pair<std::size_t, std::size_t>>& units,
                  const std::vector<std::pair<std::size_t, std::size_t>>* exclude) {
  if (inserted.empty() || cursor > expected.size()) return false;
  std::vector<std::size_t> spoken(expected.begin(), expected.begin() + static_cast<std::ptrdiff_t>(cursor));
  spoken.insert(spoken.end(), inserted.begin(), inserted.end());
  spoken.insert(spoken.end(), expected.begin() + static_cast<std::ptrdiff_t>(cursor), expected.end());
  for (const auto& u : units) {
    const std::size_t len = u.second - u.first;
    if (len == 0 || inserted.size() % len != 0) continue;
    if (exclude && std::find(exclude->begin(), exclude->end(), u) != exclude->end()) continue;
    std::vector<std::size_t> candidate(expected.begin(), expected.begin() + static_cast<std::ptrdiff_t>(u.first));
    for (std::size_t k = 0; k < inserted.size() / len; ++k) {
      candidate.insert(candidate.end(), expected.begin() + static_cast<std::ptrdiff_t>(u.first),
                       expected.begin() + static_cast<std::ptrdiff_t>(u.second));
    }
    candidate.insert(candidate.end(), expected.begin() + static_cast<std::ptrdiff_t>(u.first), expected.end());
    if (candidate == spoken) return true;
  }
  return false;
}

Eigen::Index energy_column(const frontend::FeatureMatrix& energy) {
  const int c = energy.channel_index("energy_db");
  if (c >= 0) return c;
  if (energy.channels() == 1) return 0;
  throw Error(ErrorCode::MissingChannels, "no energy_db channel");
}

double mean_energy(const frontend::FeatureMatrix& energy, Eigen::Index col, std::size_t start, std::size_t end) {
  end = std::min(end, energy.frames());
  if (start >= end) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t f = start; f < end; ++f) s += energy.data(static_cast<Eigen::Index>(f), col);
  return s / static_cast<double>(end - start);
}

void merge_into(Candidate& into, const Candidate& from) {
  into.start_frame = std::min(into.start_frame, from.start_frame);
  into.end_frame = std::max(into.end_frame, from.end_frame);
  into.start_s = std::min(into.start_s, from.start_s);
  into.end_s = std::max(into.end_s, from.end_s);
  for (Category c : kCanonical) into.scores[c] = std::max(into.scores[c], from.scores[c]);
  into.edit_ops.insert(into.edit_ops.end(), from.edit_ops.begin(), from.edit_ops.end());
  std::sort(into.edit_ops.begin(), into.edit_ops.end());
}

}  // namespace

std::vector<Candidate> canonical_scores(std::span<const align::PhonemeEditOp> ops, const ScoringContext& ctx,
                                        const Thresholds& th) {
  const auto& inv = ctx.inventory;
  const auto& t = ctx.transcript;
  std::vector<std::size_t> expected;
  expected.reserve(t.phones.size());
  for (const auto& p : t.phones) expected.push_back(inv.index_of(p));
  const auto words = t.words();
  const auto syllables = t.syllables();
  const Eigen::Index ecol = ctx.energy.frames() > 0 ? energy_column(ctx.energy) : 0;

  std::vector<Candidate> cands;
  auto span_of = [&](Candidate& c) {
    c.start_s = ctx.grid.boundary_s(c.start_frame);
    c.end_s = ctx.grid.boundary_s(c.end_frame);
  };

  // Group non-match ops into runs with no matched phone between them. Every
  // match consumes one realized and one expected phone, so the gap in
  // realized indices tells how far the expected cursor moved.
  std::vector<Run> runs;
  std::size_t next_r = 0, next_e = 0;
  bool open = false;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    std::size_t cursor = next_e;
    if (op.expected_index) {
      cursor = *op.expected_index;
    } else if (op.realized_index && *op.realized_index > next_r) {
      cursor = next_e + (*op.realized_index - next_r);
    }
    const bool contiguous = open && (!op.realized_index || *op.realized_index == next_r) &&
                            (!op.expected_index || *op.expected_index == next_e);
    if (op.realized_index) next_r = *op.realized_index + 1;
    next_e = op.expected_index ? *op.expected_index + 1 : cursor;

    if (op.kind == align::EditKind::Prolongation) {
      open = false;
      Candidate c;
      c.start_frame = op.start_frame;
      c.end_frame = op.end_frame;
      c.scores[Category::Prolongation] = std::clamp(op.duration_z / 5.0, 0.0, 1.0);
      c.edit_ops = {i};
      span_of(c);
      cands.push_back(std::move(c));
      continue;
    }
    if (!contiguous) {
      runs.push_back(Run{{}, cursor});
      open = true;
    }
    runs.back().ops.push_back(i);
  }

  for (auto& run : runs) {
    std::vector<std::size_t> inserted;
    bool insertion_only = true, has_substitution = false, has_realized = false;
    std::size_t start = std::numeric_limits<std::size_t>::max(), end = 0;
    double post_sum = 0.0;
    std::size_t post_frames = 0;
    for (std::size_t i : run.ops) {
      const auto& op = ops[i];
      if (op.kind != align::EditKind::Insertion) insertion_only = false;
      if (op.kind == align::EditKind::Substitution) has_substitution = true;
      if (!op.realized_index) continue;
      has_realized = true;
      const auto& seg = ctx.aligned.segments.at(*op.realized_index);
      inserted.push_back(seg.symbol);
      start = std::min(start, op.start_frame);
      end = std::max(end, op.end_frame);
      post_sum += seg.mean_posterior * static_cast<double>(seg.length());
      post_frames += seg.length();
    }
    if (!has_realized || end <= start) continue;

    Candidate c;
    c.start_frame = start;
    c.end_frame = end;
    c.edit_ops = run.ops;
    span_of(c);

    if (insertion_only) {
      // Insertions sit between expected phones before-1 and before.
      const std::size_t before = run.cursor;
      double best_sound = 0.0;
      std::vector<std::size_t> voiced;
      for (std::size_t s : inserted) {
        if (!inv.is_filler(s)) voiced.push_back(s);
      }
      if (!voiced.empty()) {
        for (std::size_t neighbour : {before, before - 1}) {
          if (neighbour >= expected.size()) continue;  // also catches before == 0
          const auto hits = std::count(voiced.begin(), voiced.end(), expected[neighbour]);
          best_sound = std::max(best_sound, static_cast<double>(hits) / static_cast<double>(voiced.size()));
        }
      }
      c.scores[Category::SoundRepetition] = best_sound;
      if (repeats_unit(inserted, expected, before, syllables, &words)) {
        c.scores[Category::SyllableRepetition] = 1.0;
      }
      if (repeats_unit(inserted, expected, before, words, nullptr)) {
        c.scores[Category::WordRepetition] = 1.0;
      }
    }
    if (has_substitution && mean_energy(ctx.energy, ecol, start, end) >= th.silence_db && post_frames > 0) {
      const double mp = post_sum / static_cast<double>(post_frames);
      if (mp < 0.5) c.scores[Category::BlockAudible] = std::clamp(1.0 - mp, 0.0, 1.0);
    }
    cands.push_back(std::move(c));
  }

  // Pending-phone silences.
  if (ctx.energy.frames() > 0 && !ctx.aligned.segments.empty()) {
    const std::size_t n = ctx.energy.frames();
    const double half_win = ctx.win_size / 2.0;
    const double sr = ctx.grid.sample_rate;
    std::size_t f = 0;
    while (f < n) {
      if (ctx.energy.data(static_cast<Eigen::Index>(f), ecol) >= th.silence_db) {
        ++f;
        continue;
      }
      const std::size_t first = f;
      while (f < n && ctx.energy.data(static_cast<Eigen::Index>(f), ecol) < th.silence_db) ++f;
      const std::size_t last = f - 1;
      const bool spoken_before = ctx.aligned.segments.front().start_frame < first;
      const bool pending_after = ctx.aligned.segments.back().end_frame > last + 1;
      if (!spoken_before || !pending_after) continue;
      const double total_s = static_cast<double>(ctx.grid.samples) / sr;
      const double s0 = std::max(0.0, ctx.grid.center_s(first) - half_win / sr);
      const double s1 = std::min(total_s, ctx.grid.center_s(last) + half_win / sr);
      const double dur_ms = 1000.0 * (s1 - s0);
      if (dur_ms < th.silence_block_ms) continue;
      Candidate c;
      c.start_frame = first;
      c.end_frame = last + 1;
      c.start_s = s0;
      c.end_s = s1;
      c.scores[Category::BlockSilent] =
          std::min(1.0, 0.6 + 0.4 * (dur_ms - th.silence_block_ms) / th.silence_block_ms);
      cands.push_back(std::move(c));
    }
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.start_s != b.start_s ? a.start_s < b.start_s : a.end_s < b.end_s;
  });
  std::vector<Candidate> merged;
  for (auto& c : cands) {
    if (!merged.empty() && c.start_s < merged.back().end_s) {
      merge_into(merged.back(), c);
    } else {
      merged.push_back(std::move(c));
    }
  }
  for (std::size_t i = 0; i < merged.size(); ++i) {
    merged[i].id = i;
    merged[i].atypicality = open_set_score(merged[i].scores).atypicality;
  }
  return merged;
}

OpenSetScore open_set_score(const CategoryScores& scores) {
  return {std::clamp(1.0 - scores.max(), 0.0, 1.0)};
}

OpenSetScore open_set_score(const temporal::HiddenSeq& fused, std::size_t start, std::size_t end,
                            const Vector& centroid, double scale) {
  end = std::min(end, fused.frames());
  if (end <= start || centroid.size() != fused.data.cols()) return {0.0};
  const Vector pooled = fused.data.middleRows(static_cast<Eigen::Index>(start),
                                              static_cast<Eigen::Index>(end - start))
                            .colwise()
                            .mean()
                            .transpose();
  const double d = (pooled - centroid).norm();
  const double s = scale > 0.0 ? scale : 1.0;
  return {std::clamp(1.0 - std::exp(-d / s), 0.0, 1.0)};
}

}  // namespace udm::classify
