#include <algorithm>

#include "udm/alignment.hpp"
#include "udm/error.hpp"

namespace udm::align {

std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::Insertion: return "insertion";
    case EditKind::Deletion: return "deletion";
    case EditKind::Substitution: return "substitution";
    case EditKind::Prolongation: return "prolongation";
  }
  return "insertion";
}

EditKind edit_kind_from_string(std::string_view s) {
  if (s == "insertion") return EditKind::Insertion;
  if (s == "deletion") return EditKind::Deletion;
  if (s == "substitution") return EditKind::Substitution;
  if (s == "prolongation") return EditKind::Prolongation;
  throw Error(ErrorCode::InvalidConfig, "unknown edit kind '" + std::string(s) + "'");
}

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const PhonemeEditOp& op) {
  return {{"kind", std::string(to_string(op.kind))},
          {"expected_symbol", optional_json(op.expected_symbol)},
          {"realized_symbol", optional_json(op.realized_symbol)},
          {"expected_index", optional_json(op.expected_index)},
          {"realized_index", optional_json(op.realized_index)},
          {"frame_span", {op.start_frame, op.end_frame}},
          {"duration_z", op.duration_z}};
}

PhonemeEditOp edit_op_from_json(const nlohmann::json& j) {
  PhonemeEditOp op;
  op.kind = edit_kind_from_string(j.at("kind").get<std::string>());
  op.expected_symbol = optional_from<std::string>(j, "expected_symbol");
  op.realized_symbol = optional_from<std::string>(j, "realized_symbol");
  op.expected_index = optional_from<std::size_t>(j, "expected_index");
  op.realized_index = optional_from<std::size_t>(j, "realized_index");
  op.start_frame = j.at("frame_span").at(0).get<std::size_t>();
  op.end_frame = j.at("frame_span").at(1).get<std::size_t>();
  op.duration_z = j.value("duration_z", 0.0);
  return op;
}

std::vector<AlignedPair> levenshtein_align(std::span<const std::size_t> realized,
                                           std::span<const std::size_t> expected) {
  const std::size_t n = realized.size(), m = expected.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (realized[i - 1] != expected[j - 1] ? 1 : 0);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<AlignedPair> pairs;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (realized[i - 1] != expected[j - 1] ? 1 : 0)) {
      pairs.push_back({i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      pairs.push_back({i - 1, std::nullopt});
      --i;
    } else {
      pairs.push_back({std::nullopt, j - 1});
      --j;
    }
  }
  std::reverse(pairs.begin(), pairs.end());
  return pairs;
}

std::size_t levenshtein_distance(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::size_t cost = 0;
  for (const auto& p : levenshtein_align(a, b)) {
    if (!p.realized || !p.expected || a[*p.realized] != b[*p.expected]) ++cost;
  }
  return cost;
}

namespace {

/// Slides each run of pure insertions along identical context so that it
/// starts on a word boundary, or failing that a syllable boundary. Shifts
/// never change the alignment cost; they only choose which copy of a
/// repeated unit counts as the extra one.
void anchor_insertions(std::vector<AlignedPair>& pairs, std::span<const std::size_t> realized,
                       std::span<const std::size_t> expected, const ExpectedTranscript& t) {
  using Pairs = std::vector<AlignedPair>;
  auto is_ins = [](const Pairs& v, std::size_t i) { return v[i].realized && !v[i].expected; };
  auto is_match = [&](const Pairs& v, std::size_t i) {
    return v[i].realized && v[i].expected && realized[*v[i].realized] == expected[*v[i].expected];
  };
  auto rank = [&](const Pairs& v, std::size_t begin, std::size_t end) {
    std::size_t cursor = 0;
    if (end < v.size() && v[end].expected) {
      cursor = *v[end].expected;
    } else if (begin > 0 && v[begin - 1].expected) {
      cursor = *v[begin - 1].expected + 1;
    } else if (begin > 0) {
      return 0;
    }
    auto has = [&](const std::vector<std::size_t>& b) { return std::find(b.begin(), b.end(), cursor) != b.end(); };
    if (has(t.word_boundaries)) return 2;
    if (has(t.syllable_boundaries)) return 1;
    return 0;
  };

  std::size_t p = 0;
  while (p < pairs.size()) {
    if (!is_ins(pairs, p)) {
      ++p;
      continue;
    }
    std::size_t q = p;
    while (q < pairs.size() && is_ins(pairs, q)) ++q;

    Pairs best = pairs;
    std::size_t best_q = q;
    int best_rank = rank(pairs, p, q);
    for (int dir : {-1, 1}) {
      Pairs v = pairs;
      std::size_t a = p, b = q;
      while (true) {
        // Realized indices never move; the match at one end of the run
        // hands its expected phone to the other end.
        if (dir > 0) {
          if (b >= v.size() || !is_match(v, b) || realized[*v[a].realized] != realized[*v[b].realized]) break;
          v[a].expected = v[b].expected;
          v[b].expected.reset();
          ++a;
          ++b;
        } else {
          if (a == 0 || !is_match(v, a - 1) || realized[*v[a - 1].realized] != realized[*v[b - 1].realized]) break;
          v[b - 1].expected = v[a - 1].expected;
          v[a - 1].expected.reset();
          --a;
          --b;
        }
        const int r = rank(v, a, b);
        if (r > best_rank) {
          best = v;
          best_rank = r;
          best_q = b;
        }
      }
    }
    pairs = std::move(best);
    p = std::max(best_q, q);
  }
}

}  // namespace

std::vector<PhonemeEditOp> classify_edit_ops(const AlignmentPath& aligned, const ExpectedTranscript& t,
                                             const PhonemeInventory& inv, const frontend::FrameGrid& grid,
                                             double z_prolong) {
  std::vector<std::size_t> realized;
  realized.reserve(aligned.segments.size());
  for (const auto& s : aligned.segments) realized.push_back(s.symbol);
  std::vector<std::size_t> expected;
  expected.reserve(t.phones.size());
  for (const auto& p : t.phones) expected.push_back(inv.index_of(p));

  auto pairs = levenshtein_align(realized, expected);
  anchor_insertions(pairs, realized, expected, t);

  std::vector<PhonemeEditOp> ops;
  std::size_t anchor = 0;  // end frame of the latest realized segment
  for (const auto& pair : pairs) {
    PhonemeEditOp op;
    op.expected_index = pair.expected;
    op.realized_index = pair.realized;
    if (pair.expected) op.expected_symbol = t.phones[*pair.expected];
    if (pair.realized) {
      const Segment& seg = aligned.segments[*pair.realized];
      op.realized_symbol = inv.symbols[seg.symbol];
      op.start_frame = seg.start_frame;
      op.end_frame = seg.end_frame;
      anchor = seg.end_frame;
    } else {
      op.start_frame = op.end_frame = anchor;
    }

    if (pair.realized && pair.expected) {
      if (realized[*pair.realized] != expected[*pair.expected]) {
        op.kind = EditKind::Substitution;
        ops.push_back(op);
        continue;
      }
      const auto& stats = inv.durations[expected[*pair.expected]];
      const double dur_ms = 1000.0 * (grid.boundary_s(op.end_frame) - grid.boundary_s(op.start_frame));
      op.duration_z = (dur_ms - stats.mean_ms) / stats.std_ms;
      if (op.duration_z > z_prolong) {
        op.kind = EditKind::Prolongation;
        ops.push_back(op);
      }
      continue;
    }
    op.kind = pair.realized ? EditKind::Insertion : EditKind::Deletion;
    ops.push_back(op);
  }
  return ops;
}

}  // namespace udm::align
