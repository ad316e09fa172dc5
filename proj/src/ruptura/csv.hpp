#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ruptura::csv {

struct Row {
  std::size_t line = 0;  // 1-based, header is line 1
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  // Parse error when the column is absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

// Plain comma-separated reader: no quoting, blank lines skipped, CR stripped.
Table read(const std::string& path);
Table parse(std::string_view text, const std::string& source_name);

std::vector<std::string> split(std::string_view line, char sep);

double to_double(const std::string& field, std::size_t line, std::string_view column);
std::int64_t to_int(const std::string& field, std::size_t line, std::string_view column);

// Shortest representation that round-trips.
std::string format(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace ruptura::csv
