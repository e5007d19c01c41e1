#include "ckan/csv.hpp"

#include "ckan/errors.hpp"

#include <fstream>
#include <sstream>

namespace ckan {

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

// Splits the next non-blank logical record starting at `pos`; advances `pos`
// past the record terminator and `line` past every physical line consumed
// (including blank lines and newlines inside quotes). `record_line` receives
// the 1-based line the record started on. Understands quotes per RFC 4180.
bool next_record(const std::string& text, std::size_t& pos, std::size_t& line,
                 std::size_t& record_line, std::vector<std::string>& out) {
    for (;;) {
        out.clear();
        if (pos >= text.size()) return false;
        record_line = line;
        std::string cell;
        bool quoted = false;
        bool any = false;
        while (pos < text.size()) {
            char c = text[pos];
            if (quoted) {
                if (c == '"') {
                    if (pos + 1 < text.size() && text[pos + 1] == '"') {
                        cell.push_back('"');
                        pos += 2;
                    } else {
                        quoted = false;
                        ++pos;
                    }
                } else {
                    if (c == '\n') ++line;
                    cell.push_back(c);
                    ++pos;
                }
                any = true;
                continue;
            }
            if (c == '"') {
                quoted = true;
                any = true;
                ++pos;
            } else if (c == ',') {
                out.push_back(std::move(cell));
                cell.clear();
                any = true;
                ++pos;
            } else if (c == '\r' || c == '\n') {
                ++pos;
                if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
                ++line;
                break;
            } else {
                cell.push_back(c);
                any = true;
                ++pos;
            }
        }
        if (!any && out.empty() && cell.empty()) continue; // blank line: skip it
        out.push_back(std::move(cell));
        return true;
    }
}

} // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable table;
    std::size_t pos = 0;
    std::size_t line = 1;
    std::size_t record_line = 1;
    std::vector<std::string> record;
    if (!next_record(text, pos, line, record_line, record) || record.empty()) {
        throw IoError("csv: " + origin + ": missing header row");
    }
    table.header = record;
    table.columns.resize(table.header.size());
    while (next_record(text, pos, line, record_line, record)) {
        if (record.size() != table.header.size()) {
            throw IoError("csv: " + origin + ": line " + std::to_string(record_line) + " has " +
                          std::to_string(record.size()) + " cells, header has " +
                          std::to_string(table.header.size()));
        }
        for (std::size_t c = 0; c < record.size(); ++c) {
            table.columns[c].push_back(std::move(record[c]));
        }
    }
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("csv: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("csv: read failure on " + path);
    return parse_csv(buf.str(), path);
}

} // namespace ckan
