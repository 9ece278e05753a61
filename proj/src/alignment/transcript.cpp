#include "udm/transcript.hpp"

#include <algorithm>
#include <sstream>

#include "udm/error.hpp"

namespace udm {
namespace {

std::vector<std::pair<std::size_t, std::size_t>> ranges(const std::vector<std::size_t>& starts, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    out.emplace_back(starts[i], i + 1 < starts.size() ? starts[i + 1] : n);
  }
  return out;
}

std::vector<std::string> split_any(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void tokenize_chunk(const std::string& chunk, const PhonemeInventory& inv, std::vector<std::string>& phones) {
  std::size_t pos = 0;
  while (pos < chunk.size()) {
    std::size_t best = 0;
    for (const auto& sym : inv.symbols) {
      if (sym.size() > best && chunk.compare(pos, sym.size(), sym) == 0) best = sym.size();
    }
    if (best == 0) {
      throw Error(ErrorCode::TranscriptUnmappable,
                  "cannot map '" + chunk.substr(pos) + "' to inventory '" + inv.name + "'");
    }
    phones.push_back(chunk.substr(pos, best));
    pos += best;
  }
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> ExpectedTranscript::words() const {
  return ranges(word_boundaries, phones.size());
}

std::vector<std::pair<std::size_t, std::size_t>> ExpectedTranscript::syllables() const {
  return ranges(syllable_boundaries, phones.size());
}

void ExpectedTranscript::validate(const PhonemeInventory& inv) const {
  for (const auto& p : phones) inv.index_of(p);
  auto check = [&](const std::vector<std::size_t>& b, const char* what) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i] >= phones.size() || (i > 0 && b[i] <= b[i - 1]) || (i == 0 && b[0] != 0)) {
        throw Error(ErrorCode::InvalidSpec, std::string(what) + " boundaries must start at 0 and increase");
      }
    }
  };
  check(word_boundaries, "word");
  check(syllable_boundaries, "syllable");
}

ExpectedTranscript parse_transcript(const std::string& text, const PhonemeInventory& inv) {
  ExpectedTranscript t;
  t.source_text = text;
  for (const auto& word : split_any(text, " \t\r\n")) {
    const std::size_t word_start = t.phones.size();
    for (const auto& syllable : split_any(word, ".-")) {
      const std::size_t syl_start = t.phones.size();
      for (const auto& chunk : split_any(syllable, "+")) tokenize_chunk(chunk, inv, t.phones);
      if (t.phones.size() > syl_start) t.syllable_boundaries.push_back(syl_start);
    }
    if (t.phones.size() > word_start) t.word_boundaries.push_back(word_start);
  }
  if (t.phones.empty()) throw Error(ErrorCode::TranscriptUnmappable, "transcript has no phones");
  return t;
}

std::string format_transcript(const ExpectedTranscript& t) {
  std::ostringstream out;
  const auto words = t.words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) out << ' ';
    for (std::size_t i = words[w].first; i < words[w].second; ++i) {
      if (i > words[w].first) {
        const bool syl_start = std::find(t.syllable_boundaries.begin(), t.syllable_boundaries.end(), i) !=
                               t.syllable_boundaries.end();
        out << (syl_start ? '.' : '+');
      }
      out << t.phones[i];
    }
  }
  return out.str();
}

nlohmann::json to_json(const ExpectedTranscript& t) {
  return {{"phones", t.phones},
          {"word_boundaries", t.word_boundaries},
          {"syllable_boundaries", t.syllable_boundaries},
          {"source_text", t.source_text}};
}

ExpectedTranscript transcript_from_json(const nlohmann::json& j) {
  ExpectedTranscript t;
  t.phones = j.at("phones").get<std::vector<std::string>>();
  t.word_boundaries = j.at("word_boundaries").get<std::vector<std::size_t>>();
  t.syllable_boundaries = j.value("syllable_boundaries", t.word_boundaries);
  t.source_text = j.value("source_text", std::string());
  return t;
}

}  // namespace udm
