#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sourcecv {

/// Parsed CSV content: a header row plus data rows. Quoting follows RFC 4180
/// (double quotes, doubled quote escapes, embedded commas and newlines).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by header name; throws DataError when absent.
    std::size_t column(const std::string& name) const;
    std::optional<std::size_t> find_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");

/// Headerless variant: every row is data (payload files).
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string format_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

/// Strict numeric parses; throw DataError with the offending text and context.
double parse_double(const std::string& text, const std::string& context);
long parse_long(const std::string& text, const std::string& context);

/// Shortest decimal representation that round-trips the value.
std::string format_double(double value);

} // namespace sourcecv
