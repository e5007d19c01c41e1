#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ckan {

// Parsed CSV held column-major; header names kept in file order.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> columns;

    std::size_t n_cols() const { return header.size(); }
    std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
    int column_index(const std::string& name) const; // -1 when absent
};

// RFC-4180-ish reader: quoted fields, doubled quotes, CR/LF/CRLF line ends,
// newlines allowed inside quotes. Throws IoError on unreadable files or rows
// whose cell count disagrees with the header.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

} // namespace ckan
