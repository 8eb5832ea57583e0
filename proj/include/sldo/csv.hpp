#pragma once

// Minimal CSV and key = value helpers shared by every on-disk format.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sldo {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by header name; throws FormatError when absent.
    std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated table with a mandatory header row. Rows must
/// have as many fields as the header.
CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest text that parses back to the same double ("inf"/"nan" for non-finite values).
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_long(std::string_view s);

using KeyValues = std::map<std::string, std::string>;

void write_key_values(std::ostream& os, const KeyValues& kv);
KeyValues read_key_values(std::istream& is);
KeyValues read_key_values(const std::filesystem::path& path);

}  // namespace sldo
