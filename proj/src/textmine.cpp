#include "avm/textmine.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <sstream>

namespace avm::textmine {

namespace {

std::vector<std::string> tokenize(const std::string& normalized) {
  std::vector<std::string> tokens;
  std::istringstream in(normalized);
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

/// True when `phrase` (space-separated tokens) occurs as a consecutive token
/// run.
bool has_phrase(const std::vector<std::string>& tokens,
                std::string_view phrase) {
  std::vector<std::string> want = tokenize(std::string(phrase));
  if (want.empty() || tokens.size() < want.size()) return false;
  for (std::size_t i = 0; i + want.size() <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < want.size(); ++j)
      if (tokens[i + j] != want[j]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}

bool has_any(const std::vector<std::string>& tokens,
             const std::vector<std::string_view>& phrases) {
  for (auto p : phrases)
    if (has_phrase(tokens, p)) return true;
  return false;
}

std::optional<int> parse_number_token(const std::string& t) {
  static const std::array<std::string, 10> words = {
      "one", "two", "three", "four", "five",
      "six", "seven", "eight", "nine", "ten"};
  for (std::size_t i = 0; i < words.size(); ++i)
    if (t == words[i]) return static_cast<int>(i + 1);
  if (t.empty() || t.size() > 6) return std::nullopt;
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  return std::stoi(t);
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    // UTF-8 superscript two (0xC2 0xB2) -> '2'
    if (c == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xB2) {
      s += '2';
      ++i;
      continue;
    }
    if (std::isalnum(c)) {
      s += static_cast<char>(std::tolower(c));
    } else if (c == '.' && i > 0 && i + 1 < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
               std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      s += '.';  // decimal point
    } else {
      s += ' ';
    }
  }
  // collapse runs of spaces
  std::string out;
  out.reserve(s.size());
  bool prev_space = true;
  for (char c : s) {
    if (c == ' ') {
      if (!prev_space) out += ' ';
      prev_space = true;
    } else {
      out += c;
      prev_space = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::optional<PropertyType> extract_property_type(std::string_view text) {
  const auto tokens = tokenize(normalize(text));
  // precedence order: most specific phrase first
  if (has_any(tokens, {"end of terrace", "end terrace", "end of terraced"}))
    return PropertyType::EndOfTerrace;
  if (has_any(tokens, {"semi detached", "semidetached", "semi detatched"}))
    return PropertyType::SemiDetached;
  if (has_any(tokens, {"terraced", "terrace", "mid terrace"}))
    return PropertyType::Terraced;
  if (has_any(tokens, {"townhouse", "town house", "townhome"}))
    return PropertyType::Townhouse;
  if (has_any(tokens, {"detached", "detatched"})) return PropertyType::Detached;
  if (has_phrase(tokens, "duplex")) return PropertyType::Duplex;
  if (has_any(tokens, {"studio", "apartment", "apartments", "appartment",
                       "penthouse", "flat"}))
    return PropertyType::Apartment;
  return std::nullopt;
}

std::optional<int> extract_count(std::string_view text, CountKind kind) {
  auto tokens = tokenize(normalize(text));
  // fold "en suite" into one token before scanning
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    if (tokens[i] == "en" && tokens[i + 1] == "suite") {
      tokens[i] = "ensuite";
      tokens.erase(tokens.begin() + i + 1);
    }
  static const std::vector<std::string> bed_keys = {"bed", "beds", "bedroom",
                                                    "bedrooms", "bedroomed"};
  static const std::vector<std::string> bath_keys = {
      "bath",    "baths",    "bathroom", "bathrooms",
      "wc",      "wcs",      "ensuite",  "ensuites"};
  const auto& keys = kind == CountKind::Beds ? bed_keys : bath_keys;
  int total = 0;
  bool matched = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (std::find(keys.begin(), keys.end(), tokens[i]) == keys.end()) continue;
    matched = true;
    std::optional<int> num;
    if (i > 0) num = parse_number_token(tokens[i - 1]);
    total += num.value_or(1);
  }
  if (!matched || total == 0) return std::nullopt;
  if (total > 20) return std::nullopt;  // plausibility gate
  return total;
}

std::optional<double> extract_size(std::string_view text) {
  const std::string s = normalize(text);
  static const std::regex unit_re(
      R"((?:^| )(\d+(?:\.\d+)?) ?(?:sq ?m(?:etres|eters)?|sqm|m2|square met(?:re|er)s?)(?: |$))");
  std::smatch m;
  double size = 0;
  if (std::regex_search(s, m, unit_re)) {
    size = std::stod(m[1]);
  } else {
    static const std::regex dim_re(
        R"((\d+(?:\.\d+)?) ?m(?:tr)?s? ?x ?(\d+(?:\.\d+)?) ?m)");
    for (auto it = std::sregex_iterator(s.begin(), s.end(), dim_re);
         it != std::sregex_iterator(); ++it)
      size += std::stod((*it)[1]) * std::stod((*it)[2]);
    if (size == 0) return std::nullopt;
  }
  if (size < 10.0 || size > 2000.0) return std::nullopt;
  return size;
}

Ber extract_ber(std::string_view text) {
  const auto tokens = tokenize(normalize(text));
  static const std::vector<std::string> levels = {
      "a1", "a2", "a3", "b1", "b2", "b3", "c1", "c2",
      "c3", "d1", "d2", "e1", "e2", "f",  "g"};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != "ber") continue;
    // allow "ber b3", "ber rating b3", "ber of b3", "ber is b3"
    for (std::size_t j = i + 1; j < std::min(i + 4, tokens.size()); ++j) {
      auto hit = std::find(levels.begin(), levels.end(), tokens[j]);
      if (hit != levels.end())
        return static_cast<Ber>(hit - levels.begin());
      if (tokens[j] != "rating" && tokens[j] != "of" && tokens[j] != "is")
        break;
    }
  }
  return Ber::Unknown;
}

FeatureFlags extract_features(std::string_view text) {
  const auto tokens = tokenize(normalize(text));
  FeatureFlags flags{};
  auto set = [&](Feature f, const std::vector<std::string_view>& phrases) {
    flags[static_cast<int>(f)] = has_any(tokens, phrases);
  };
  set(Feature::AtticConversion,
      {"attic conversion", "converted attic", "attic convertion",
       "attic converted"});
  set(Feature::Garden, {"garden", "gardens"});
  set(Feature::CulDeSac, {"cul de sac", "culdesac"});
  set(Feature::Garage, {"garage", "garages"});
  set(Feature::Renovated,
      {"renovated", "renovation", "refurbished", "refurbishment",
       "modernised", "modernized"});
  set(Feature::Period,
      {"period property", "period home", "period house", "period residence",
       "period features", "georgian", "victorian", "edwardian"});
  set(Feature::SouthFacing, {"south facing", "southfacing"});
  set(Feature::GroundFloorApartment,
      {"ground floor apartment", "ground floor flat", "ground floor studio"});
  set(Feature::SecondFloorApartment,
      {"second floor apartment", "second floor flat", "2nd floor apartment",
       "2nd floor flat"});
  set(Feature::Penthouse, {"penthouse"});
  set(Feature::NewProperty,
      {"new build", "newly built", "brand new", "new development", "new home",
       "new homes", "newly constructed"});
  return flags;
}

bool looks_commercial(std::string_view text,
                      const std::vector<std::string>& extra_keywords) {
  const auto tokens = tokenize(normalize(text));
  static const std::vector<std::string_view> base = {
      "retail",          "office suite",    "commercial unit",
      "commercial premises", "shop unit",   "business park",
      "industrial unit", "office block"};
  if (has_any(tokens, base)) return true;
  for (const auto& k : extra_keywords)
    if (has_phrase(tokens, normalize(k))) return true;
  return false;
}

}  // namespace avm::textmine
