#pragma once

// RFC-4180 tables: header row, CRLF-free "\n" line ends, quoting only where
// needed, numbers as "%.17g" so values round-trip exactly.

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "collapse_lab/error.hpp"

namespace collapse_lab::io {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string quote_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
        if (header_.empty()) throw ValidationError("CSV table needs at least one column");
    }

    /// Starts a new row; cells are appended with the << overloads.
    CsvTable& row() {
        if (!rows_.empty() && rows_.back().size() != header_.size()) throw RuntimeError(incomplete());
        rows_.emplace_back();
        return *this;
    }
    CsvTable& operator<<(double v) { return cell(format_number(v)); }
    CsvTable& operator<<(int v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(long v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(long long v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(unsigned long v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(unsigned long long v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(bool v) { return cell(v ? "true" : "false"); }
    CsvTable& operator<<(const std::string& s) { return cell(s); }
    CsvTable& operator<<(const char* s) { return cell(s); }

    std::size_t row_count() const { return rows_.size(); }
    const std::vector<std::string>& header() const { return header_; }

    std::string str() const {
        if (!rows_.empty() && rows_.back().size() != header_.size()) throw RuntimeError(incomplete());
        std::string out;
        append_line(out, header_);
        for (const auto& r : rows_) append_line(out, r);
        return out;
    }

private:
    CsvTable& cell(std::string s) {
        if (rows_.empty()) throw RuntimeError("CSV cell written before row()");
        if (rows_.back().size() == header_.size()) throw RuntimeError("CSV row has more cells than columns");
        rows_.back().push_back(std::move(s));
        return *this;
    }
    std::string incomplete() const {
        return "CSV row " + std::to_string(rows_.size()) + " has " + std::to_string(rows_.back().size()) + " of " +
               std::to_string(header_.size()) + " cells";
    }
    static void append_line(std::string& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += quote_field(cells[i]);
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Splits RFC-4180 text into records. Used by tests and the determinism check.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        any = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            rec.push_back(std::move(field));
            field.clear();
            out.push_back(std::move(rec));
            rec.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw ValidationError("CSV: unterminated quoted field");
    if (any || !field.empty() || !rec.empty()) {
        rec.push_back(std::move(field));
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace collapse_lab::io
