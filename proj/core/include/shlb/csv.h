#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shlb {

// UTF-8, comma separated, mandatory header row. Fields containing commas,
// quotes or newlines are double-quoted on output.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find_column(std::string_view name) const;
  // Throws InvalidArgument when the column is absent.
  std::size_t column(std::string_view name) const;
  void add_row(std::vector<std::string> row);

  bool operator==(const CsvTable&) const = default;
};

// Throws ParseError (1-based line numbers) on a ragged row or empty input.
CsvTable read_csv(std::istream& in, const std::string& source = "<csv>");
CsvTable read_csv_file(const std::filesystem::path& path);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::filesystem::path& path, const CsvTable& table);

// Shortest representation that parses back to the same double.
std::string format_double(double value);
// Strict parse of a whole field; nullopt on trailing junk or empty input.
std::optional<double> parse_double(std::string_view text);

}  // namespace shlb
