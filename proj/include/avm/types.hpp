#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace avm {

/// Input or configuration problem: bad file, bad value, unknown level.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure while fitting (singular system, non-convergence).
struct fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The six market segments used throughout the pipeline.
enum class Submarket : int { Cork = 0, Dublin, Galway, Limerick, Rural, Towns };
inline constexpr int kNumSubmarkets = 6;

enum class PropertyType : int {
  Detached = 0,
  SemiDetached,
  Terraced,
  EndOfTerrace,
  Townhouse,
  Apartment,
  Duplex
};
inline constexpr int kNumPropertyTypes = 7;

/// Building energy rating, A1 (best) to G, plus Unknown for unrated listings.
enum class Ber : int {
  A1 = 0, A2, A3,
  B1, B2, B3,
  C1, C2, C3,
  D1, D2,
  E1, E2,
  F, G,
  Unknown
};
inline constexpr int kNumBerLevels = 16;

/// Text-mined descriptor flags, in the documented order.
enum class Feature : int {
  AtticConversion = 0,
  Garden,
  CulDeSac,
  Garage,
  Renovated,
  Period,
  SouthFacing,
  GroundFloorApartment,
  SecondFloorApartment,
  Penthouse,
  NewProperty
};
inline constexpr int kNumFeatures = 11;
using FeatureFlags = std::array<bool, kNumFeatures>;

const std::string& to_string(Submarket s);
const std::string& to_string(PropertyType t);
const std::string& to_string(Ber b);
const std::string& to_string(Feature f);

std::optional<Submarket> parse_submarket(const std::string& token);
std::optional<PropertyType> parse_property_type(const std::string& token);
std::optional<Ber> parse_ber(const std::string& token);

/// One row of the raw listings file after field-level parsing. Optional
/// fields stay empty when the column is absent or blank; the clean step
/// fills them from the description where it can.
struct RawListing {
  std::string id;
  std::optional<double> price;
  std::optional<int> month;
  std::optional<double> longitude;
  std::optional<double> latitude;
  std::string description;
  std::optional<int> beds;
  std::optional<int> baths;
  std::optional<double> size;
  std::optional<std::string> ber;
  std::optional<std::string> property_type;
  std::optional<std::string> eircode_key;
};

/// A fully cleaned observation: everything the models consume.
struct PropertyRecord {
  std::string id;
  double log_ppsm = 0;  // ln(price / size), the modelled response
  double price = 0;     // euro
  int month = 1;        // 1..12
  double x = 0, y = 0;  // web-mercator metres
  double longitude = 0, latitude = 0;
  int region_id = -1;   // index into the RegionGraph
  Submarket submarket = Submarket::Rural;
  int beds = 0, baths = 0;
  double size = 0;  // m^2
  PropertyType property_type = PropertyType::Detached;
  Ber ber = Ber::Unknown;
  FeatureFlags features{};
};

}  // namespace avm
