#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avm/types.hpp"

namespace avm::io {

/// RFC-4180-style CSV: comma separator, double-quote quoting, UTF-8.
/// Lines starting with '#' before the header are metadata comments.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}
  /// Next parsed row, or nullopt at end of input.
  std::optional<std::vector<std::string>> next_row();
  const std::vector<std::string>& comments() const { return comments_; }

 private:
  std::istream& in_;
  std::vector<std::string> comments_;
  bool seen_data_ = false;
};

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Records file: one CSV row per PropertyRecord with documented columns.
/// `meta` lines are written as leading "# key=value" comments.
void write_records(const std::string& path,
                   const std::vector<PropertyRecord>& records,
                   const std::map<std::string, std::string>& meta = {});
std::vector<PropertyRecord> read_records(const std::string& path);

/// Column order of the records file.
std::vector<std::string> record_columns();

/// FNV-1a hash of a canonical string, hex-encoded; used to stamp artifacts
/// with the config that produced them.
std::string fnv1a_hex(const std::string& text);

}  // namespace avm::io
