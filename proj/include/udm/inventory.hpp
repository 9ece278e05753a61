#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace udm {

enum class PhoneClass { Consonant, Vowel, Filler };

struct DurationStats {
  double mean_ms = 100.0;
  double std_ms = 30.0;
};

/// Timbre of the harmonic tone complex used to synthesize a phone.
struct ToneSpec {
  double f0_hz = 120.0;
  std::vector<double> formants_hz;
};

/// Phone set plus the CTC blank. Posteriorgram column `blank_index` holds the
/// blank; symbol i lives in column i (i < blank_index) or i + 1 otherwise.
struct PhonemeInventory {
  std::string name;
  std::vector<std::string> symbols;
  std::size_t blank_index = 0;
  std::vector<DurationStats> durations;
  std::vector<PhoneClass> classes;
  std::vector<ToneSpec> tones;

  std::size_t size() const { return symbols.size(); }
  std::size_t columns() const { return symbols.size() + 1; }
  std::optional<std::size_t> find(const std::string& symbol) const;
  /// Throws UnknownPhone.
  std::size_t index_of(const std::string& symbol) const;
  std::size_t column_of(std::size_t symbol) const {
    return symbol < blank_index ? symbol : symbol + 1;
  }
  std::optional<std::size_t> symbol_of_column(std::size_t column) const;
  bool is_filler(std::size_t symbol) const { return classes[symbol] == PhoneClass::Filler; }
  bool is_vowel(std::size_t symbol) const { return classes[symbol] == PhoneClass::Vowel; }

  void validate() const;
};

PhonemeInventory inventory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PhonemeInventory& inv);
PhonemeInventory load_inventory(const std::filesystem::path& path);

/// Small built-in inventory used by the synthetic corpus and the tests.
PhonemeInventory demo_inventory();

}  // namespace udm
