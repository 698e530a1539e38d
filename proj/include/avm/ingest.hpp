#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avm/geometry.hpp"
#include "avm/types.hpp"

namespace avm::ingest {

struct Rejection {
  std::size_t row = 0;  // 1-based data row number
  std::string id;
  std::string reason;
};

struct ParseResult {
  std::vector<RawListing> listings;  // input order preserved
  std::vector<Rejection> rejected;
};

/// Parses the raw listings CSV. Required header columns: price, month,
/// longitude, latitude; optional: id, beds, baths, size, property_type, ber,
/// eircode, description. Rows lacking price or usable coordinates are
/// rejected per row with a reason code; a missing mandatory header aborts.
ParseResult parse_listings(std::istream& in);

struct TownCentre {
  std::string name;
  geo::LonLat pos;
};

/// Town centres file: CSV with columns name, longitude, latitude.
std::vector<TownCentre> read_town_centres(const std::string& path);

struct SubmarketConfig {
  std::vector<geo::PolygonFeature> city_polygons;  // ids must name submarkets
  std::vector<TownCentre> towns;
  double town_radius_m = 10000.0;
};

/// City polygon first (cities take precedence), then Towns within 10 km
/// great-circle distance of any centre, else Rural.
Submarket assign_submarket(geo::LonLat p, const SubmarketConfig& cfg);

struct CleanOptions {
  std::vector<std::string> commercial_keywords;  // extends the built-in list
  double min_size = 10.0, max_size = 2000.0;
  int max_beds = 20, max_baths = 20;
};

struct CleanReport {
  std::size_t input = 0, kept = 0;
  std::map<std::string, std::size_t> dropped;      // reason -> count
  std::map<std::string, std::size_t> imputed;      // field -> count
  std::vector<Rejection> drops;                    // per-row detail
};

struct CleanResult {
  std::vector<PropertyRecord> records;
  CleanReport report;
};

/// Imputes missing structural fields from the description, applies the
/// plausibility gates and the commercial filter, projects coordinates and
/// assigns region and submarket. Rows that still lack type, beds, baths or
/// size after imputation are dropped with a reason; nothing aborts.
CleanResult clean(const std::vector<RawListing>& listings,
                  const geo::RegionGraph& graph, const SubmarketConfig& cfg,
                  const CleanOptions& opts = {});

}  // namespace avm::ingest
