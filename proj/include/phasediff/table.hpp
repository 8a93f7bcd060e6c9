// table.hpp — result tables with provenance, CSV/JSON serialization
//
// The table body (header + rows) is the reproducibility contract: identical
// config and seed give bytewise-identical bodies. Provenance (including wall
// clock) rides along as '#' comment lines in CSV and a separate JSON object.

#pragma once

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phasediff/errors.hpp"

namespace phasediff {

// 17 significant digits: enough for double round-trips
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> provenance;

    void add_provenance(const std::string& key, const std::string& value) {
        provenance.emplace_back(key, value);
    }

    int column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }

    bool has_row_errors() const {
        const int e = column_index("error");
        if (e < 0) return false;
        for (const auto& row : rows)
            if (!row[static_cast<std::size_t>(e)].empty()) return true;
        return false;
    }
};

namespace detail {

inline std::string csv_escape(const std::string& field) {
    const bool needs_quote = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(fields[i]);
    }
    out += '\n';
    return out;
}

} // namespace detail

// Header + rows only; this is the part compared across reruns
inline std::string table_body_csv(const ResultTable& table) {
    std::string out = detail::csv_line(table.columns);
    for (const auto& row : table.rows) out += detail::csv_line(row);
    return out;
}

inline std::string to_csv(const ResultTable& table, bool include_provenance = true) {
    std::string out;
    if (include_provenance)
        for (const auto& [k, v] : table.provenance) out += "# " + k + " = " + v + "\n";
    out += table_body_csv(table);
    return out;
}

namespace detail {

inline nlohmann::ordered_json cell_to_json(const std::string& cell) {
    if (cell.empty()) return nullptr;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end && *end == '\0' && end != cell.c_str()) return v;
    return cell;
}

} // namespace detail

inline std::string table_body_json(const ResultTable& table) {
    nlohmann::ordered_json body;
    body["columns"] = table.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        auto jr = nlohmann::ordered_json::array();
        for (const auto& cell : row) jr.push_back(detail::cell_to_json(cell));
        rows.push_back(std::move(jr));
    }
    body["rows"] = std::move(rows);
    return body.dump(2);
}

inline std::string to_json(const ResultTable& table) {
    nlohmann::ordered_json doc;
    auto prov = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.provenance) prov[k] = v;
    doc["provenance"] = std::move(prov);
    doc["table"] = nlohmann::ordered_json::parse(table_body_json(table));
    return doc.dump(2) + "\n";
}

// Minimal RFC-4180-style reader; '#' comment lines are skipped
inline ResultTable parse_csv(const std::string& text) {
    ResultTable table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool line_started = false;
    bool is_comment = false;
    bool have_header = !table.columns.empty();

    auto end_field = [&]() {
        fields.push_back(field);
        field.clear();
    };
    auto end_line = [&]() {
        if (line_started && !is_comment) {
            end_field();
            if (!have_header) {
                table.columns = fields;
                have_header = true;
            } else {
                if (fields.size() != table.columns.size())
                    throw Error("CSV row has " + std::to_string(fields.size()) +
                                " fields, header has " + std::to_string(table.columns.size()));
                table.rows.push_back(fields);
            }
        }
        fields.clear();
        field.clear();
        line_started = false;
        is_comment = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!line_started && !in_quotes) {
            if (c == '\n') continue;
            if (c == '\r') continue;
            line_started = true;
            if (c == '#') {
                is_comment = true;
                continue;
            }
        }
        if (is_comment) {
            if (c == '\n') end_line();
            continue;
        }
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
            continue;
        }
        switch (c) {
            case '"': in_quotes = true; break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n': end_line(); break;
            default: field += c;
        }
    }
    if (line_started) end_line();
    return table;
}

inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

} // namespace phasediff
