#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridweaver/common.hpp"

namespace gridweaver {

/// In-memory CSV document. Quoting follows RFC 4180: fields containing
/// commas, quotes or newlines are wrapped in double quotes, embedded
/// quotes doubled.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require_column(std::string_view name) const {
        const int c = column(name);
        if (c < 0) throw ParseError("missing required column: " + std::string(name));
        return c;
    }
};

inline CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        any_field = true;
    };
    auto end_row = [&] {
        if (!any_field && row.empty()) return;  // skip blank lines
        end_field();
        if (table.header.empty())
            table.header = row;
        else
            table.rows.push_back(row);
        row.clear();
        any_field = false;
        field.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field += c;
        }
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    if (!field.empty() || any_field) end_row();
    if (in_quotes) throw ParseError("unterminated quoted CSV field");
    return table;
}

inline CsvTable read_csv_file(const std::string& path) { return parse_csv(read_text_file(path)); }

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Streaming CSV writer producing byte-deterministic output ("\n" line
/// endings, shortest round-trip doubles).
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += csv_escape(header[i]);
        }
        buf_ += '\n';
        cols_ = header.size();
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += csv_escape(fields[i]);
        }
        buf_ += '\n';
    }

    const std::string& str() const { return buf_; }
    std::size_t columns() const { return cols_; }

    void save(const std::string& path) const { write_text_file(path, buf_); }

private:
    std::string buf_;
    std::size_t cols_ = 0;
};

}  // namespace gridweaver
