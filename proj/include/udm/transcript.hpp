#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "udm/inventory.hpp"

namespace udm {

/// Phone sequence the speaker intended. Word and syllable boundaries are the
/// indices of the first phone of each unit and always start with 0.
struct ExpectedTranscript {
  std::vector<std::string> phones;
  std::vector<std::size_t> word_boundaries;
  std::vector<std::size_t> syllable_boundaries;
  std::string source_text;

  /// Half-open phone ranges [begin, end) of each word or syllable.
  std::vector<std::pair<std::size_t, std::size_t>> words() const;
  std::vector<std::pair<std::size_t, std::size_t>> syllables() const;

  void validate(const PhonemeInventory& inv) const;
};

/// Words are separated by whitespace and syllables by '.' or '-'. Inside a
/// syllable, phones are matched greedily against the inventory (longest symbol
/// first); '+' may be used to separate phones explicitly.
/// Throws TranscriptUnmappable.
ExpectedTranscript parse_transcript(const std::string& text, const PhonemeInventory& inv);

/// Inverse of parse_transcript, using '+' between phones.
std::string format_transcript(const ExpectedTranscript& t);

nlohmann::json to_json(const ExpectedTranscript& t);
ExpectedTranscript transcript_from_json(const nlohmann::json& j);

}  // namespace udm
