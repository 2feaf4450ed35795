#pragma once

// Minimal CSV reading/writing and atomic file output. Numbers are written at
// 17 significant digits so they round-trip exactly; missing values are empty
// fields.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "collider_lab/error.hpp"
#include "collider_lab/model.hpp"

namespace collider_lab {

/// 17 significant digits, or "" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return {};
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

/// Quotes a field when it contains a separator, quote, or newline.
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

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ValidationError("csv: no column named '" + name + "'");
    }

    std::string to_string() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& fields) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i) out += ',';
                out += csv_escape(fields[i]);
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

/// RFC 4180 style parsing: quoted fields may contain commas, doubled quotes
/// and newlines. Every record must have as many fields as the header.
inline CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
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
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) {
                    throw ValidationError("csv: unexpected quote on line " + std::to_string(line));
                }
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (field_started || !record.empty()) end_record();

    require(!records.empty(), "csv: no header row");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw ValidationError("csv: record " + std::to_string(r + 1) + " has " +
                                  std::to_string(records[r].size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_text_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

/// Parses a numeric field; "", "NA" and "nan" are missing (NaN).
inline double parse_number(std::string_view s, std::string_view context) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nan("");
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError(std::string(context) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

inline Dataset dataset_from_csv(const CsvTable& t) {
    Dataset d;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        std::vector<double> v(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            v[r] = parse_number(t.rows[r][c], "csv line " + std::to_string(r + 2) + ", column '" +
                                                  t.header[c] + "'");
        }
        d.add_column(t.header[c], std::move(v));
    }
    return d;
}

inline CsvTable dataset_to_csv(const Dataset& d) {
    CsvTable t;
    t.header = d.names();
    std::vector<std::span<const double>> cols;
    for (const auto& n : t.header) cols.push_back(d.column(n));
    t.rows.resize(d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        t.rows[r].reserve(cols.size());
        for (const auto& c : cols) t.rows[r].push_back(format_double(c[r]));
    }
    return t;
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::random_device rd;
    const fs::path tmp =
        path.string() + ".tmp-" + std::to_string(rd()) + "-" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write file '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ValidationError("failed while writing '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ValidationError("cannot move output into place at '" + path.string() + "'");
    }
}

}  // namespace collider_lab
