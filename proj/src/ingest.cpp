#include "avm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "avm/io.hpp"
#include "avm/textmine.hpp"

namespace avm::ingest {

namespace {

std::optional<double> parse_double_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw input_error("malformed numeric field");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
    ++pos;
  if (pos != s.size()) throw input_error("malformed numeric field");
  return v;
}

std::optional<int> parse_int_field(const std::string& s) {
  auto v = parse_double_field(s);
  if (!v) return std::nullopt;
  if (*v != std::floor(*v)) throw input_error("malformed numeric field");
  return static_cast<int>(*v);
}

}  // namespace

ParseResult parse_listings(std::istream& in) {
  io::CsvReader reader(in);
  auto header = reader.next_row();
  if (!header) throw input_error("listings file is empty");
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header->size(); ++i) {
    std::string name = (*header)[i];
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    col[name] = static_cast<int>(i);
  }
  for (const char* required : {"price", "month", "longitude", "latitude"})
    if (!col.count(required))
      throw input_error(std::string("listings file missing mandatory column '") +
                        required + "'");

  auto field = [&](const std::vector<std::string>& row,
                   const char* name) -> std::string {
    auto it = col.find(name);
    if (it == col.end() || it->second >= static_cast<int>(row.size())) return "";
    return row[it->second];
  };

  ParseResult out;
  std::size_t row_no = 0;
  while (auto row = reader.next_row()) {
    ++row_no;
    RawListing l;
    l.id = field(*row, "id");
    if (l.id.empty()) l.id = "row" + std::to_string(row_no);
    auto reject = [&](const std::string& reason) {
      out.rejected.push_back({row_no, l.id, reason});
    };
    try {
      l.price = parse_double_field(field(*row, "price"));
      l.month = parse_int_field(field(*row, "month"));
      l.longitude = parse_double_field(field(*row, "longitude"));
      l.latitude = parse_double_field(field(*row, "latitude"));
      l.beds = parse_int_field(field(*row, "beds"));
      l.baths = parse_int_field(field(*row, "baths"));
      l.size = parse_double_field(field(*row, "size"));
    } catch (const input_error&) {
      reject("malformed_numeric");
      continue;
    }
    l.description = field(*row, "description");
    if (const std::string b = field(*row, "ber"); !b.empty()) l.ber = b;
    if (const std::string t = field(*row, "property_type"); !t.empty())
      l.property_type = t;
    if (const std::string e = field(*row, "eircode"); !e.empty())
      l.eircode_key = e;

    if (!l.price) {
      reject("missing_price");
      continue;
    }
    if (*l.price <= 0) {
      reject("nonpositive_price");
      continue;
    }
    if (!l.longitude || !l.latitude) {
      reject("missing_coordinates");
      continue;
    }
    if (std::abs(*l.latitude) > geo::kMaxMercatorLatDeg ||
        std::abs(*l.longitude) > 180.0) {
      reject("coordinate_out_of_range");
      continue;
    }
    if (!l.month || *l.month < 1 || *l.month > 12) {
      reject("month_out_of_range");
      continue;
    }
    out.listings.push_back(std::move(l));
  }
  return out;
}

std::vector<TownCentre> read_town_centres(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open town centres file: " + path);
  io::CsvReader reader(in);
  auto header = reader.next_row();
  if (!header || header->size() < 3)
    throw input_error("town centres file: expected name,longitude,latitude");
  std::vector<TownCentre> towns;
  while (auto row = reader.next_row()) {
    if (row->size() < 3) continue;
    towns.push_back({(*row)[0], {std::stod((*row)[1]), std::stod((*row)[2])}});
  }
  return towns;
}

Submarket assign_submarket(geo::LonLat p, const SubmarketConfig& cfg) {
  for (const auto& poly : cfg.city_polygons) {
    if (geo::point_in_polygon(p, poly)) {
      auto sm = parse_submarket(poly.id);
      if (!sm) throw input_error("city polygon id is not a submarket: " + poly.id);
      return *sm;
    }
  }
  for (const auto& town : cfg.towns)
    if (geo::haversine_m(p, town.pos) <= cfg.town_radius_m)
      return Submarket::Towns;
  return Submarket::Rural;
}

CleanResult clean(const std::vector<RawListing>& listings,
                  const geo::RegionGraph& graph, const SubmarketConfig& cfg,
                  const CleanOptions& opts) {
  CleanResult out;
  out.report.input = listings.size();
  std::size_t row_no = 0;
  for (const RawListing& l : listings) {
    ++row_no;
    auto drop = [&](const std::string& reason) {
      out.report.dropped[reason]++;
      out.report.drops.push_back({row_no, l.id, reason});
    };

    if (textmine::looks_commercial(l.description, opts.commercial_keywords)) {
      drop("commercial");
      continue;
    }

    PropertyRecord r;
    r.id = l.id;
    r.price = *l.price;
    r.month = *l.month;
    r.longitude = *l.longitude;
    r.latitude = *l.latitude;

    // property type: explicit token, else text-mined
    std::optional<PropertyType> type;
    if (l.property_type) type = parse_property_type(*l.property_type);
    if (!type) {
      type = textmine::extract_property_type(l.description);
      if (type) out.report.imputed["property_type"]++;
    }
    if (!type) {
      drop("uninferable");
      continue;
    }
    r.property_type = *type;

    auto gated_count = [&](std::optional<int> v, int max) -> std::optional<int> {
      if (v && (*v < 0 || *v > max)) return std::nullopt;
      return v;
    };
    std::optional<int> beds = gated_count(l.beds, opts.max_beds);
    if (!beds) {
      beds = gated_count(textmine::extract_count(l.description,
                                                 textmine::CountKind::Beds),
                         opts.max_beds);
      if (beds) out.report.imputed["beds"]++;
    }
    std::optional<int> baths = gated_count(l.baths, opts.max_baths);
    if (!baths) {
      baths = gated_count(textmine::extract_count(l.description,
                                                  textmine::CountKind::Baths),
                          opts.max_baths);
      if (baths) out.report.imputed["baths"]++;
    }
    auto gated_size = [&](std::optional<double> v) -> std::optional<double> {
      if (v && (*v < opts.min_size || *v > opts.max_size)) return std::nullopt;
      return v;
    };
    std::optional<double> size = gated_size(l.size);
    if (!size) {
      size = gated_size(textmine::extract_size(l.description));
      if (size) out.report.imputed["size"]++;
    }
    if (!beds || !baths || !size) {
      drop("uninferable");
      continue;
    }
    r.beds = *beds;
    r.baths = *baths;
    r.size = *size;

    std::optional<Ber> ber;
    if (l.ber) ber = parse_ber(*l.ber);
    if (!ber) {
      const Ber mined = textmine::extract_ber(l.description);
      if (mined != Ber::Unknown) out.report.imputed["ber"]++;
      ber = mined;
    }
    r.ber = *ber;
    r.features = textmine::extract_features(l.description);

    const geo::LonLat pos{r.longitude, r.latitude};
    const geo::XY xy = geo::project_web_mercator(pos);
    r.x = xy.x;
    r.y = xy.y;
    auto region = graph.assign(pos);
    if (!region) {
      drop("outside_regions");
      continue;
    }
    r.region_id = *region;
    r.submarket = assign_submarket(pos, cfg);
    r.log_ppsm = std::log(r.price / r.size);
    out.records.push_back(std::move(r));
  }
  out.report.kept = out.records.size();
  return out;
}

}  // namespace avm::ingest
