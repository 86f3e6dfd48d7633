#pragma once

#include <string>
#include <vector>

namespace zvvc::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows; // rectangular, rows[i].size() == header.size()

    int column(const std::string& name) const; // -1 if absent
};

/// Parse a numeric CSV with a mandatory header row. Throws DataError with the
/// offending row/column on shape or number-format problems.
Table read_table(const std::string& text, const std::string& origin);
Table read_table_file(const std::string& path);

/// Shortest round-trip formatting; reading the text back yields the same bits.
std::string format_double(double v);

std::string write_table(const Table& t);
void write_table_file(const std::string& path, const Table& t);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace zvvc::csv
