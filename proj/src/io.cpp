#include "avm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace avm::io {

std::optional<std::vector<std::string>> CsvReader::next_row() {
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!seen_data_ && !line.empty() && line[0] == '#') {
      comments_.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    seen_data_ = true;

    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i >= line.size()) {
        if (quoted) {
          // quoted field containing a newline: pull the next physical line
          std::string more;
          if (!std::getline(in_, more)) break;
          if (!more.empty() && more.back() == '\r') more.pop_back();
          line += '\n';
          line += more;
          continue;
        }
        break;
      }
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
      ++i;
    }
    fields.push_back(std::move(field));
    return fields;
  }
  return std::nullopt;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  // try increasing precision until the value round-trips
  for (int prec = 15; prec <= 17; ++prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> record_columns() {
  std::vector<std::string> cols = {
      "id",     "price", "month",     "longitude", "latitude",
      "x",      "y",     "region_id", "submarket", "beds",
      "baths",  "size",  "property_type", "ber"};
  for (int f = 0; f < kNumFeatures; ++f)
    cols.push_back(to_string(static_cast<Feature>(f)));
  cols.push_back("log_ppsm");
  return cols;
}

void write_records(const std::string& path,
                   const std::vector<PropertyRecord>& records,
                   const std::map<std::string, std::string>& meta) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write records file: " + path);
  for (const auto& [k, v] : meta) out << "# " << k << "=" << v << "\n";
  write_csv_row(out, record_columns());
  for (const PropertyRecord& r : records) {
    std::vector<std::string> row = {
        r.id,
        format_double(r.price),
        std::to_string(r.month),
        format_double(r.longitude),
        format_double(r.latitude),
        format_double(r.x),
        format_double(r.y),
        std::to_string(r.region_id),
        to_string(r.submarket),
        std::to_string(r.beds),
        std::to_string(r.baths),
        format_double(r.size),
        to_string(r.property_type),
        to_string(r.ber)};
    for (int f = 0; f < kNumFeatures; ++f)
      row.push_back(r.features[f] ? "1" : "0");
    row.push_back(format_double(r.log_ppsm));
    write_csv_row(out, row);
  }
}

std::vector<PropertyRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open records file: " + path);
  CsvReader reader(in);
  auto header = reader.next_row();
  if (!header) throw input_error("records file is empty: " + path);
  const auto expected = record_columns();
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = static_cast<int>(i);
  for (const auto& c : expected)
    if (!col.count(c))
      throw input_error("records file missing column '" + c + "': " + path);

  std::vector<PropertyRecord> records;
  while (auto row = reader.next_row()) {
    auto get = [&](const std::string& c) -> const std::string& {
      return (*row)[col.at(c)];
    };
    PropertyRecord r;
    r.id = get("id");
    r.price = std::stod(get("price"));
    r.month = std::stoi(get("month"));
    r.longitude = std::stod(get("longitude"));
    r.latitude = std::stod(get("latitude"));
    r.x = std::stod(get("x"));
    r.y = std::stod(get("y"));
    r.region_id = std::stoi(get("region_id"));
    auto sm = parse_submarket(get("submarket"));
    if (!sm) throw input_error("bad submarket '" + get("submarket") + "'");
    r.submarket = *sm;
    r.beds = std::stoi(get("beds"));
    r.baths = std::stoi(get("baths"));
    r.size = std::stod(get("size"));
    auto pt = parse_property_type(get("property_type"));
    if (!pt) throw input_error("bad property_type '" + get("property_type") + "'");
    r.property_type = *pt;
    auto ber = parse_ber(get("ber"));
    if (!ber) throw input_error("bad ber '" + get("ber") + "'");
    r.ber = *ber;
    for (int f = 0; f < kNumFeatures; ++f)
      r.features[f] = get(to_string(static_cast<Feature>(f))) == "1";
    r.log_ppsm = std::stod(get("log_ppsm"));
    records.push_back(std::move(r));
  }
  return records;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace avm::io
