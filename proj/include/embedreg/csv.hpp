#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace embedreg::csv {

using Row = std::vector<std::string>;

/// Splits one line into fields. Fields may be double-quoted; "" escapes a quote.
Row parse_line(std::string_view line, char delimiter = ',');

/// Reads all non-empty lines of a UTF-8 file. A leading BOM is skipped.
std::vector<Row> read_file(const std::filesystem::path& path, char delimiter = ',');

/// Quotes a field when it contains the delimiter, a quote, or a line break.
std::string escape(std::string_view field, char delimiter = ',');

std::string join(const Row& fields, char delimiter = ',');

}  // namespace embedreg::csv
