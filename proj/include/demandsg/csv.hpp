#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace demandsg {

// RFC-4180 table: comma delimiter, double-quote escaping, CRLF or LF rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Writes through a temporary sibling and renames into place, so readers never
// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);

}  // namespace demandsg
