#include "avm/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace avm {

namespace {

const std::array<std::string, kNumSubmarkets> kSubmarketNames = {
    "Cork", "Dublin", "Galway", "Limerick", "Rural", "Towns"};

const std::array<std::string, kNumPropertyTypes> kPropertyTypeNames = {
    "detached",     "semi-detached", "terraced", "end-of-terrace",
    "townhouse",    "apartment",     "duplex"};

const std::array<std::string, kNumBerLevels> kBerNames = {
    "A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2",
    "C3", "D1", "D2", "E1", "E2", "F",  "G",  "unknown"};

const std::array<std::string, kNumFeatures> kFeatureNames = {
    "attic_conversion", "garden",      "cul_de_sac",
    "garage",           "renovated",   "period",
    "south_facing",     "ground_floor_apartment",
    "second_floor_apartment", "penthouse", "new_property"};

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

const std::string& to_string(Submarket s) {
  return kSubmarketNames[static_cast<int>(s)];
}
const std::string& to_string(PropertyType t) {
  return kPropertyTypeNames[static_cast<int>(t)];
}
const std::string& to_string(Ber b) { return kBerNames[static_cast<int>(b)]; }
const std::string& to_string(Feature f) {
  return kFeatureNames[static_cast<int>(f)];
}

std::optional<Submarket> parse_submarket(const std::string& token) {
  const std::string t = lower(token);
  for (int i = 0; i < kNumSubmarkets; ++i)
    if (lower(kSubmarketNames[i]) == t) return static_cast<Submarket>(i);
  return std::nullopt;
}

std::optional<PropertyType> parse_property_type(const std::string& token) {
  std::string t = lower(token);
  std::replace(t.begin(), t.end(), ' ', '-');
  std::replace(t.begin(), t.end(), '_', '-');
  for (int i = 0; i < kNumPropertyTypes; ++i)
    if (kPropertyTypeNames[i] == t) return static_cast<PropertyType>(i);
  if (t == "semi" || t == "semidetached") return PropertyType::SemiDetached;
  if (t == "terrace") return PropertyType::Terraced;
  if (t == "end-of-terrace-house" || t == "endofterrace")
    return PropertyType::EndOfTerrace;
  return std::nullopt;
}

std::optional<Ber> parse_ber(const std::string& token) {
  std::string t = token;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  for (int i = 0; i < kNumBerLevels - 1; ++i)
    if (kBerNames[i] == t) return static_cast<Ber>(i);
  if (lower(token) == "unknown") return Ber::Unknown;
  return std::nullopt;
}

}  // namespace avm
