#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "udm/alignment.hpp"
#include "udm/error.hpp"
#include "udm/transcript.hpp"

using namespace udm;
using namespace udm::align;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

frontend::FeatureMatrix mfcc_frames(const Matrix& rows) {
  frontend::FeatureMatrix f;
  f.data = rows;
  f.frame_rate = 62.5;
  for (Eigen::Index k = 0; k < rows.cols(); ++k) f.channel_labels.push_back("mfcc_" + std::to_string(k));
  return f;
}

// Uniform posteriors, only used to build paths from labels.
Posteriorgram flat(std::size_t frames, std::size_t cols) {
  return {Matrix::Constant(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(cols), 1.0 / cols), 100.0};
}

// Segments of the given phones, `len` frames each, separated by one blank
// frame whenever a phone repeats.
AlignmentPath path_of(const std::vector<std::size_t>& phones, const PhonemeInventory& inv, std::size_t len = 10) {
  std::vector<int> labels;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    if (i > 0 && phones[i] == phones[i - 1]) labels.push_back(kBlank);
    labels.insert(labels.end(), len, static_cast<int>(phones[i]));
  }
  return path_from_labels(labels, flat(labels.size(), inv.columns()), inv);
}

frontend::FrameGrid grid_for(std::size_t frames) {
  frontend::FrameGrid g;
  g.sample_rate = 16000;
  g.n_fft = 320;
  g.hop = 160;
  g.frames = frames;
  g.samples = (frames - 1) * 160 + 320;
  return g;
}

ExpectedTranscript transcript_of(const std::vector<std::size_t>& phones, const PhonemeInventory& inv) {
  ExpectedTranscript t;
  for (auto p : phones) t.phones.push_back(inv.symbols[p]);
  t.word_boundaries = {0};
  t.syllable_boundaries = {0};
  return t;
}

std::size_t non_prolongation(const std::vector<PhonemeEditOp>& ops) {
  std::size_t n = 0;
  for (const auto& op : ops) n += op.kind != EditKind::Prolongation;
  return n;
}

}  // namespace

TEST_CASE("inventory: demo is valid and JSON round-trips") {
  const auto inv = demo_inventory();
  inv.validate();
  CHECK(inv.columns() == inv.size() + 1);
  const auto back = inventory_from_json(to_json(inv));
  CHECK(back.symbols == inv.symbols);
  CHECK(back.blank_index == inv.blank_index);
  for (std::size_t i = 0; i < inv.size(); ++i) CHECK(back.durations[i].mean_ms == inv.durations[i].mean_ms);

  auto j = to_json(inv);
  j["symbols"].push_back(j["symbols"][0]);
  CHECK_THROWS_AS(inventory_from_json(j), Error);
  auto k = to_json(inv);
  k["duration_stats"]["a"]["std_ms"] = 0.0;
  CHECK_THROWS_AS(inventory_from_json(k), Error);
}

TEST_CASE("inventory: shipped data files load") {
  const std::filesystem::path dir = UDM_DATA_DIR "/inventories";
  const auto demo = load_inventory(dir / "demo.json");
  CHECK(to_json(demo) == to_json(demo_inventory()));
  const auto zh = load_inventory(dir / "mandarin.json");
  CHECK(zh.size() > 50);
  CHECK(zh.index_of("zh") != zh.index_of("z"));
  CHECK(parse_transcript("zhong.guo", zh).phones == std::vector<std::string>{"zh", "ong", "g", "uo"});
}

TEST_CASE("inventory: blank column placement") {
  auto inv = oracle::ab_inventory();
  inv.blank_index = 1;
  CHECK(inv.column_of(0) == 0);
  CHECK(inv.column_of(1) == 2);
  CHECK(!inv.symbol_of_column(1).has_value());
  CHECK(inv.symbol_of_column(2).value() == 1);
}

TEST_CASE("transcript: words, syllables and greedy phone matching") {
  const auto inv = demo_inventory();
  const auto t = parse_transcript("ba.na  di-gu", inv);
  CHECK(t.phones == std::vector<std::string>{"b", "a", "n", "a", "d", "i", "g", "u"});
  CHECK(t.word_boundaries == std::vector<std::size_t>{0, 4});
  CHECK(t.syllable_boundaries == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(t.source_text == "ba.na  di-gu");
  CHECK(parse_transcript(format_transcript(t), inv).phones == t.phones);
  CHECK(code_of([&] { parse_transcript("bx", inv); }) == ErrorCode::TranscriptUnmappable);
  CHECK(code_of([&] { parse_transcript("   ", inv); }) == ErrorCode::TranscriptUnmappable);
  const auto back = transcript_from_json(to_json(t));
  CHECK(back.phones == t.phones);
  CHECK(back.word_boundaries == t.word_boundaries);
}

TEST_CASE("posteriors: exact template match at low temperature") {
  auto inv = oracle::ab_inventory();
  PhoneTemplates tpl;
  tpl.symbols = inv.symbols;
  tpl.centroids = Matrix(2, 2);
  tpl.centroids << 1.0, 0.0, 0.0, 1.0;
  tpl.temperature = 1e-4;
  Matrix x(1, 2);
  x << 1.0, 0.0;
  const auto p = phoneme_posteriors(mfcc_frames(x), inv, tpl);
  CHECK(p.probs(0, inv.column_of(0)) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(p.probs(0, inv.blank_index) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.max_row_error() < 1e-12);
}

TEST_CASE("posteriors: equidistant frame is uniform over symbols") {
  auto inv = demo_inventory();
  PhoneTemplates tpl;
  tpl.symbols = inv.symbols;
  const auto n = static_cast<Eigen::Index>(inv.size());
  tpl.centroids = Matrix::Identity(n, n);
  tpl.temperature = 0.7;
  const auto p = phoneme_posteriors(mfcc_frames(Matrix::Zero(1, n)), inv, tpl);
  for (std::size_t s = 0; s < inv.size(); ++s) {
    CHECK(p.probs(0, static_cast<Eigen::Index>(inv.column_of(s))) ==
          doctest::Approx(0.8 / static_cast<double>(inv.size())).epsilon(1e-12));
  }
}

TEST_CASE("posteriors: bank rows count toward their owner") {
  auto inv = oracle::ab_inventory();
  PhoneTemplates tpl;
  tpl.symbols = inv.symbols;
  tpl.centroids = Matrix(2, 1);
  tpl.centroids << 0.0, 10.0;
  tpl.bank = Matrix(1, 1);
  tpl.bank << 5.0;
  tpl.bank_owner = {1};
  tpl.temperature = 1e-3;
  Matrix x(1, 1);
  x << 5.2;
  const auto p = phoneme_posteriors(mfcc_frames(x), inv, tpl);
  CHECK(p.probs(0, inv.column_of(1)) > 0.79);
  tpl.bank_owner = {7};
  CHECK(code_of([&] { phoneme_posteriors(mfcc_frames(x), inv, tpl); }) == ErrorCode::TemplateInventoryMismatch);
}

TEST_CASE("posteriors: errors and external pass-through") {
  auto inv = oracle::ab_inventory();
  PhoneTemplates tpl;
  tpl.symbols = {"a", "c"};
  tpl.centroids = Matrix::Zero(2, 2);
  CHECK(code_of([&] { phoneme_posteriors(mfcc_frames(Matrix::Zero(1, 2)), inv, tpl); }) ==
        ErrorCode::TemplateInventoryMismatch);
  frontend::FeatureMatrix no_mfcc;
  no_mfcc.data = Matrix::Zero(1, 2);
  no_mfcc.channel_labels = {"mel_0", "mel_1"};
  tpl.symbols = inv.symbols;
  CHECK(code_of([&] { phoneme_posteriors(no_mfcc, inv, tpl); }) == ErrorCode::MissingChannels);

  std::mt19937_64 rng(5);
  Posteriorgram ext{oracle::random_stochastic(4, 3, rng), 62.5};
  const auto out = phoneme_posteriors(mfcc_frames(Matrix::Zero(4, 2)), inv, ext);
  CHECK(out.probs == ext.probs);

  std::stringstream ss;
  write_posteriorgram(ss, ext);
  const auto back = read_posteriorgram(ss);
  CHECK((back.probs - ext.probs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.frame_rate == 62.5);

  std::stringstream bad("2 3 62.5\n0.5 0.5 0.5\n0.2 0.2 0.6\n");
  const auto unnormalized = read_posteriorgram(bad);
  CHECK(code_of([&] { phoneme_posteriors(mfcc_frames(Matrix::Zero(2, 2)), inv, unnormalized); }) ==
        ErrorCode::BadExternalFile);
  CHECK(code_of([&] { phoneme_posteriors(mfcc_frames(Matrix::Zero(3, 2)), inv, ext); }) ==
        ErrorCode::FrameCountMismatch);
  std::stringstream truncated("2 3 62.5\n0.5 0.5\n");
  CHECK(code_of([&] { read_posteriorgram(truncated); }) == ErrorCode::BadExternalFile);
}

TEST_CASE("posteriors: template JSON round trip") {
  PhoneTemplates tpl;
  tpl.symbols = {"a", "b"};
  tpl.centroids = Matrix(2, 2);
  tpl.centroids << 1, 2, 3, 4;
  tpl.bank = Matrix(1, 2);
  tpl.bank << 5, 6;
  tpl.bank_owner = {1};
  tpl.temperature = 0.5;
  const auto back = templates_from_json(to_json(tpl));
  CHECK(back.centroids == tpl.centroids);
  CHECK(back.bank == tpl.bank);
  CHECK(back.bank_owner == tpl.bank_owner);
  CHECK(back.temperature == 0.5);
}

TEST_CASE("gate_silence blanks quiet frames") {
  auto inv = oracle::ab_inventory();
  std::mt19937_64 rng(1);
  Posteriorgram p{oracle::random_stochastic(3, 3, rng), 62.5};
  frontend::FeatureMatrix e;
  e.data = Matrix(3, 1);
  e.data << -80.0, -10.0, -60.0;
  e.channel_labels = {"energy_db"};
  const auto g = gate_silence(p, e, inv, -60.0);
  CHECK(g.probs(0, 0) == 1.0);
  CHECK(g.probs.row(1) == p.probs.row(1));
  CHECK(g.probs.row(2) == p.probs.row(2));
}

TEST_CASE("ctc: one-hot path and infeasible length") {
  const auto inv = oracle::ab_inventory();
  // columns: blank, a, b
  Matrix m = Matrix::Constant(4, 3, 0.0);
  m(0, 1) = m(1, 1) = 1.0;
  m(2, 2) = m(3, 2) = 1.0;
  const auto t = parse_transcript("a+b", inv);
  const auto path = ctc_forced_align({m, 100.0}, t, inv);
  REQUIRE(path.segments.size() == 2);
  CHECK(path.segments[0] == Segment{0, 0, 2, 1.0});
  CHECK(path.segments[1] == Segment{1, 2, 4, 1.0});
  CHECK(path.log_score == 0.0);

  const auto aa = parse_transcript("a+a", inv);
  std::mt19937_64 rng(2);
  CHECK(code_of([&] { ctc_forced_align({oracle::random_stochastic(2, 3, rng), 100.0}, aa, inv); }) ==
        ErrorCode::InfeasibleLength);
  CHECK(ctc_forced_align({oracle::random_stochastic(3, 3, rng), 100.0}, aa, inv).frame_labels ==
        std::vector<int>{0, kBlank, 0});
  ExpectedTranscript unknown;
  unknown.phones = {"z"};
  unknown.word_boundaries = {0};
  unknown.syllable_boundaries = {0};
  CHECK(code_of([&] { ctc_forced_align({oracle::random_stochastic(3, 3, rng), 100.0}, unknown, inv); }) ==
        ErrorCode::UnknownPhone);
}

TEST_CASE("ctc: ties resolve to the earliest transition") {
  const auto inv = oracle::ab_inventory();
  const auto t = parse_transcript("a", inv);
  const auto path = ctc_forced_align({Matrix::Constant(3, 3, 1.0 / 3.0), 100.0}, t, inv);
  // Every path scores 3 log(1/3); tracing back, staying wins each tie.
  CHECK(path.frame_labels == std::vector<int>{0, kBlank, kBlank});
  CHECK(path.log_score == 3.0 * std::log(1.0 / 3.0));
}

TEST_CASE("ctc: equals exhaustive enumeration for T <= 6, |t| <= 3") {
  const auto inv = oracle::ab_inventory();
  std::mt19937_64 rng(20240611);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 1 + rng() % 3;
    std::vector<std::size_t> phones(len);
    for (auto& p : phones) p = rng() % 2;
    const std::size_t frames = 1 + rng() % 6;
    const auto m = oracle::random_stochastic(frames, 3, rng);
    std::vector<std::size_t> target;
    for (auto p : phones) target.push_back(inv.column_of(p));
    const auto best = oracle::ctc_brute_force(m, inv.blank_index, target);
    const auto t = transcript_of(phones, inv);
    if (!std::isfinite(best.score)) {
      CHECK(code_of([&] { ctc_forced_align({m, 100.0}, t, inv); }) == ErrorCode::InfeasibleLength);
      continue;
    }
    const auto path = ctc_forced_align({m, 100.0}, t, inv);
    CHECK(path.log_score == best.score);
    CHECK(path.realized() == phones);
    std::vector<int> want;
    for (auto c : best.labels) want.push_back(c == inv.blank_index ? kBlank : static_cast<int>(*inv.symbol_of_column(c)));
    CHECK(path.frame_labels == want);
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("refine: one-hot and zero window are fixed points") {
  const auto inv = oracle::ab_inventory();
  Matrix m = Matrix::Zero(6, 3);
  for (int t = 0; t < 3; ++t) m(t, 1) = 1.0;
  for (int t = 3; t < 6; ++t) m(t, 2) = 1.0;
  Posteriorgram p{m, 100.0};
  const auto raw = path_from_labels({0, 0, 0, 1, 1, 1}, p, inv);
  CHECK(refine_alignment(raw, p, inv, 3) == raw);
  std::mt19937_64 rng(8);
  Posteriorgram r{oracle::random_stochastic(6, 3, rng), 100.0};
  const auto raw2 = path_from_labels({0, 0, 0, 1, 1, 1}, r, inv);
  CHECK(refine_alignment(raw2, r, inv, 0) == raw2);
}

TEST_CASE("refine: boundary moves +1 when both means improve") {
  const auto inv = oracle::ab_inventory();
  Matrix m(6, 3);
  m << 0.2, 0.6, 0.2,  //
      0.2, 0.6, 0.2,   //
      0.2, 0.6, 0.2,   //
      0.0, 0.9, 0.1,   //
      0.0, 0.2, 0.8,   //
      0.0, 0.2, 0.8;
  Posteriorgram p{m, 100.0};
  const auto raw = path_from_labels({0, 0, 0, 1, 1, 1}, p, inv);
  // Exhaustive search over every split of the six frames.
  std::size_t best_split = 0;
  double best = -1.0;
  for (std::size_t b = 1; b < 6; ++b) {
    const double ma = m.col(1).head(static_cast<Eigen::Index>(b)).mean();
    const double mb = m.col(2).tail(static_cast<Eigen::Index>(6 - b)).mean();
    if (ma + mb > best) {
      best = ma + mb;
      best_split = b;
    }
  }
  CHECK(best_split == 4);
  const auto out = refine_alignment(raw, p, inv, 3);
  CHECK(out.segments[0].end_frame == 4);
  CHECK(out.segments[1].start_frame == 4);
  CHECK(out.realized() == raw.realized());
}

TEST_CASE("refine: never lowers the sum of segment means nor reorders") {
  const auto inv = demo_inventory();
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 8 + rng() % 30;
    Posteriorgram p{oracle::random_stochastic(frames, inv.columns(), rng), 100.0};
    std::vector<int> labels(frames);
    int cur = static_cast<int>(rng() % inv.size());
    for (auto& l : labels) {
      if (rng() % 4 == 0) cur = rng() % 5 == 0 ? kBlank : static_cast<int>(rng() % inv.size());
      l = cur;
    }
    const auto raw = path_from_labels(labels, p, inv);
    const auto out = refine_alignment(raw, p, inv, 3);
    auto total = [](const AlignmentPath& a) {
      double s = 0.0;
      for (const auto& seg : a.segments) s += seg.mean_posterior;
      return s;
    };
    CHECK(total(out) >= total(raw) - 1e-12);
    REQUIRE(out.segments.size() == raw.segments.size());
    for (std::size_t i = 0; i < raw.segments.size(); ++i) CHECK(out.segments[i].symbol == raw.segments[i].symbol);
    for (std::size_t i = 1; i < out.segments.size(); ++i) {
      CHECK(out.segments[i].start_frame >= out.segments[i - 1].end_frame);
    }
  }
}

TEST_CASE("decode_realized: follows one-hot rows and blanks silent frames") {
  const auto inv = oracle::ab_inventory();
  Matrix m = Matrix::Constant(6, 3, 0.05);
  for (int t : {0, 1, 2}) m(t, 1) = 0.9;
  for (int t : {3, 4, 5}) m(t, 2) = 0.9;
  const std::vector<char> silent{0, 0, 0, 1, 0, 0};
  const auto path = decode_realized({m, 100.0}, inv, silent, {});
  CHECK(path.frame_labels == std::vector<int>{0, 0, 0, kBlank, 1, 1});
  DecodeOptions sticky;
  sticky.switch_penalty = 100.0;
  const auto one = decode_realized({m, 100.0}, inv, std::vector<char>(6, 0), sticky);
  CHECK(one.segments.size() == 1);
}

TEST_CASE("decode_realized: minimum segment length") {
  const auto inv = oracle::ab_inventory();
  Matrix m = Matrix::Constant(9, 3, 0.05);
  for (int t = 0; t < 9; ++t) m(t, 1) = 0.9;
  m(4, 1) = 0.05;
  m(4, 2) = 0.9;
  DecodeOptions opts;
  opts.switch_penalty = 0.0;
  CHECK(decode_realized({m, 100.0}, inv, std::vector<char>(9, 0), opts).segments.size() == 3);
  opts.min_frames = 3;
  CHECK(decode_realized({m, 100.0}, inv, std::vector<char>(9, 0), opts).segments.size() == 1);
}

TEST_CASE("edit ops: insertion, deletion and prolongation examples") {
  auto inv = demo_inventory();
  const auto b = inv.index_of("b"), o = inv.index_of("ɔ"), l = inv.index_of("l");
  const auto expected = parse_transcript("b+ɔ+l", inv);

  const auto ins_path = path_of({b, b, o, l}, inv);
  const auto ins = classify_edit_ops(ins_path, expected, inv, grid_for(ins_path.frame_labels.size()), 1e9);
  REQUIRE(ins.size() == 1);
  CHECK(ins[0].kind == EditKind::Insertion);
  CHECK(ins[0].realized_symbol == "b");
  CHECK(!ins[0].expected_symbol.has_value());

  const auto del_path = path_of({b, o}, inv);
  const auto del = classify_edit_ops(del_path, expected, inv, grid_for(del_path.frame_labels.size()), 1e9);
  REQUIRE(del.size() == 1);
  CHECK(del[0].kind == EditKind::Deletion);
  CHECK(del[0].expected_symbol == "l");
  CHECK(!del[0].realized_symbol.has_value());
  CHECK(del[0].start_frame == del[0].end_frame);
  CHECK(del[0].start_frame == del_path.segments.back().end_frame);

  inv.durations[o] = {120.0, 40.0};
  std::vector<int> labels(10, static_cast<int>(b));
  labels.insert(labels.end(), 90, static_cast<int>(o));
  labels.insert(labels.end(), 10, static_cast<int>(l));
  const auto long_path = path_from_labels(labels, flat(labels.size(), inv.columns()), inv);
  const auto ops = classify_edit_ops(long_path, expected, inv, grid_for(labels.size()), 2.5);
  REQUIRE(ops.size() == 1);
  CHECK(ops[0].kind == EditKind::Prolongation);
  CHECK(ops[0].expected_symbol == "ɔ");
  CHECK(ops[0].realized_symbol == "ɔ");
  CHECK(ops[0].duration_z == doctest::Approx(19.5).epsilon(1e-9));
}

TEST_CASE("edit ops: repeated syllable marks the first copy as inserted") {
  const auto inv = demo_inventory();
  const auto t = parse_transcript("ba.na", inv);
  std::vector<std::size_t> realized;
  for (const char* s : {"b", "a", "b", "a", "n", "a"}) realized.push_back(inv.index_of(s));
  const auto path = path_of(realized, inv);
  const auto ops = classify_edit_ops(path, t, inv, grid_for(path.frame_labels.size()), 1e9);
  REQUIRE(ops.size() == 2);
  CHECK(ops[0].realized_index == 0u);
  CHECK(ops[1].realized_index == 1u);
}

TEST_CASE("edit ops: counts equal the edit distance oracle") {
  const auto inv = demo_inventory();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> e(1 + rng() % 8), r(rng() % 9);
    for (auto& x : e) x = rng() % 4;
    for (auto& x : r) x = rng() % 4;
    if (r.empty()) r.push_back(0);
    const auto path = path_of(r, inv);
    const auto ops = classify_edit_ops(path, transcript_of(e, inv), inv, grid_for(path.frame_labels.size()));
    CAPTURE(trial);
    CHECK(non_prolongation(ops) == oracle::edit_distance(r, e));
    CHECK(levenshtein_distance(r, e) == oracle::edit_distance(r, e));
    if (r == e) CHECK(non_prolongation(ops) == 0);
    for (const auto& op : ops) {
      if (op.kind == EditKind::Insertion) CHECK(!op.expected_symbol.has_value());
      if (op.kind == EditKind::Deletion) {
        CHECK(!op.realized_symbol.has_value());
        CHECK(op.start_frame == op.end_frame);
      }
    }
  }
}

TEST_CASE("levenshtein: substitution beats an insertion/deletion pair") {
  const std::vector<std::size_t> r{0, 1, 2}, e{0, 3, 2};
  const auto pairs = levenshtein_align(r, e);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[1].realized == 1u);
  CHECK(pairs[1].expected == 1u);
}

TEST_CASE("edit op JSON round trip") {
  PhonemeEditOp op;
  op.kind = EditKind::Substitution;
  op.expected_symbol = "a";
  op.realized_symbol = "e";
  op.expected_index = 3;
  op.realized_index = 4;
  op.start_frame = 10;
  op.end_frame = 14;
  op.duration_z = -0.25;
  CHECK(edit_op_from_json(to_json(op)) == op);
  CHECK(edit_kind_from_string("prolongation") == EditKind::Prolongation);
}
