#include "udm/inventory.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "udm/error.hpp"

namespace udm {
namespace {

PhoneClass class_from_string(const std::string& s) {
  if (s == "vowel") return PhoneClass::Vowel;
  if (s == "filler") return PhoneClass::Filler;
  if (s == "consonant") return PhoneClass::Consonant;
  throw Error(ErrorCode::InvalidConfig, "unknown phone class '" + s + "'");
}

const char* class_name(PhoneClass c) {
  switch (c) {
    case PhoneClass::Vowel: return "vowel";
    case PhoneClass::Filler: return "filler";
    case PhoneClass::Consonant: return "consonant";
  }
  return "consonant";
}

// Deterministic, well spread timbre for symbols without an explicit tone.
ToneSpec default_tone(std::size_t i) {
  ToneSpec t;
  t.f0_hz = 100.0 + static_cast<double>((i * 37) % 160);
  t.formants_hz = {250.0 + static_cast<double>((i * 131) % 700), 900.0 + static_cast<double>((i * 389) % 1900)};
  return t;
}

}  // namespace

std::optional<std::size_t> PhonemeInventory::find(const std::string& symbol) const {
  const auto it = std::find(symbols.begin(), symbols.end(), symbol);
  if (it == symbols.end()) return std::nullopt;
  return static_cast<std::size_t>(it - symbols.begin());
}

std::size_t PhonemeInventory::index_of(const std::string& symbol) const {
  if (auto i = find(symbol)) return *i;
  throw Error(ErrorCode::UnknownPhone, "'" + symbol + "' is not in inventory '" + name + "'");
}

std::optional<std::size_t> PhonemeInventory::symbol_of_column(std::size_t column) const {
  if (column == blank_index || column > symbols.size()) return std::nullopt;
  return column < blank_index ? column : column - 1;
}

void PhonemeInventory::validate() const {
  if (symbols.empty()) throw Error(ErrorCode::InvalidConfig, "inventory has no symbols");
  std::set<std::string> seen;
  for (const auto& s : symbols) {
    if (s.empty()) throw Error(ErrorCode::InvalidConfig, "empty phone symbol");
    if (!seen.insert(s).second) throw Error(ErrorCode::InvalidConfig, "duplicate symbol '" + s + "'");
  }
  if (blank_index > symbols.size()) throw Error(ErrorCode::InvalidConfig, "blank_index out of range");
  if (durations.size() != symbols.size() || classes.size() != symbols.size() || tones.size() != symbols.size()) {
    throw Error(ErrorCode::InvalidConfig, "per-symbol tables do not match the symbol count");
  }
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (!(durations[i].mean_ms > 0 && durations[i].std_ms > 0)) {
      throw Error(ErrorCode::InvalidConfig, "duration stats of '" + symbols[i] + "' must be positive");
    }
  }
}

PhonemeInventory inventory_from_json(const nlohmann::json& j) {
  PhonemeInventory inv;
  try {
    inv.name = j.value("name", std::string("inventory"));
    inv.symbols = j.at("symbols").get<std::vector<std::string>>();
    inv.blank_index = j.value("blank_index", std::size_t{0});
    const auto& stats = j.at("duration_stats");
    const nlohmann::json empty = nlohmann::json::object();
    const auto& classes = j.contains("classes") ? j.at("classes") : empty;
    const auto& synthesis = j.contains("synthesis") ? j.at("synthesis") : empty;
    for (std::size_t i = 0; i < inv.symbols.size(); ++i) {
      const auto& sym = inv.symbols[i];
      if (!stats.contains(sym)) throw Error(ErrorCode::InvalidConfig, "no duration stats for '" + sym + "'");
      inv.durations.push_back({stats.at(sym).at("mean_ms").get<double>(), stats.at(sym).at("std_ms").get<double>()});
      inv.classes.push_back(classes.contains(sym) ? class_from_string(classes.at(sym).get<std::string>())
                                                  : PhoneClass::Consonant);
      ToneSpec tone = default_tone(i);
      if (synthesis.contains(sym)) {
        const auto& s = synthesis.at(sym);
        tone.f0_hz = s.value("f0_hz", tone.f0_hz);
        if (s.contains("formants_hz")) tone.formants_hz = s.at("formants_hz").get<std::vector<double>>();
      }
      inv.tones.push_back(std::move(tone));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("inventory: ") + e.what());
  }
  inv.validate();
  return inv;
}

nlohmann::json to_json(const PhonemeInventory& inv) {
  nlohmann::json stats = nlohmann::json::object();
  nlohmann::json classes = nlohmann::json::object();
  nlohmann::json synthesis = nlohmann::json::object();
  for (std::size_t i = 0; i < inv.symbols.size(); ++i) {
    const auto& sym = inv.symbols[i];
    stats[sym] = {{"mean_ms", inv.durations[i].mean_ms}, {"std_ms", inv.durations[i].std_ms}};
    classes[sym] = class_name(inv.classes[i]);
    synthesis[sym] = {{"f0_hz", inv.tones[i].f0_hz}, {"formants_hz", inv.tones[i].formants_hz}};
  }
  return {{"name", inv.name},       {"symbols", inv.symbols}, {"blank_index", inv.blank_index},
          {"duration_stats", stats}, {"classes", classes},     {"synthesis", synthesis}};
}

PhonemeInventory load_inventory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open inventory " + path.string());
  try {
    return inventory_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "inventory " + path.string() + ": " + e.what());
  }
}

PhonemeInventory demo_inventory() {
  struct Row {
    const char* symbol;
    PhoneClass cls;
    double mean_ms, std_ms, f0;
    std::vector<double> formants;
  };
  // Consonants and vowels get well separated formant pairs so their
  // cepstral templates stay distinct under a 128 ms analysis window.
  const std::vector<Row> rows = {
      {"b", PhoneClass::Consonant, 120, 30, 110, {300, 900}},
      {"d", PhoneClass::Consonant, 120, 30, 125, {300, 1800}},
      {"g", PhoneClass::Consonant, 120, 30, 140, {300, 2700}},
      {"m", PhoneClass::Consonant, 130, 30, 155, {500, 1300}},
      {"n", PhoneClass::Consonant, 130, 30, 170, {500, 2200}},
      {"l", PhoneClass::Consonant, 130, 30, 185, {500, 3100}},
      {"s", PhoneClass::Consonant, 130, 30, 200, {2600, 3500}},
      {"a", PhoneClass::Vowel, 170, 40, 215, {800, 1200}},
      {"i", PhoneClass::Vowel, 170, 40, 230, {700, 2500}},
      {"u", PhoneClass::Vowel, 170, 40, 245, {900, 1900}},
      {"e", PhoneClass::Vowel, 170, 40, 260, {700, 3300}},
      {"ɔ", PhoneClass::Vowel, 170, 40, 275, {1100, 1600}},
      {"ə", PhoneClass::Filler, 110, 25, 290, {1100, 2800}},
  };
  PhonemeInventory inv;
  inv.name = "demo";
  inv.blank_index = 0;
  for (const auto& r : rows) {
    inv.symbols.emplace_back(r.symbol);
    inv.classes.push_back(r.cls);
    inv.durations.push_back({r.mean_ms, r.std_ms});
    inv.tones.push_back({r.f0, r.formants});
  }
  inv.validate();
  return inv;
}

}  // namespace udm
