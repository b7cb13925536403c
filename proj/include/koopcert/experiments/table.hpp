#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"

namespace koopcert::experiments {

inline constexpr const char* kVersion = "koopcert 0.1.0";

using Cell = std::variant<double, std::int64_t, std::string>;

/// Column-named table of records with a provenance block.
struct ResultTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::map<std::string, std::string> provenance;  ///< config_hash, seed, version, ...

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw InputError("ResultTable '" + name + "': row width mismatch");
        rows.push_back(std::move(row));
    }

    [[nodiscard]] std::size_t column(const std::string& col) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == col) return i;
        throw InputError("ResultTable '" + name + "': no column '" + col + "'");
    }

    /// Numeric value of a cell (integers widen to double).
    [[nodiscard]] double number(std::size_t row, const std::string& col) const {
        const Cell& c = rows.at(row).at(column(col));
        if (const auto* d = std::get_if<double>(&c)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
        throw InputError("ResultTable '" + name + "': column '" + col + "' is not numeric");
    }

    [[nodiscard]] std::string text(std::size_t row, const std::string& col) const {
        const Cell& c = rows.at(row).at(column(col));
        if (const auto* s = std::get_if<std::string>(&c)) return *s;
        throw InputError("ResultTable '" + name + "': column '" + col + "' is not text");
    }
};

/// Equality with NaN == NaN, so that emit/parse round trips compare equal.
[[nodiscard]] inline bool same_table(const ResultTable& a, const ResultTable& b) {
    if (a.name != b.name || a.columns != b.columns || a.provenance != b.provenance || a.rows.size() != b.rows.size())
        return false;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        for (std::size_t c = 0; c < a.columns.size(); ++c) {
            const Cell& x = a.rows[r][c];
            const Cell& y = b.rows[r][c];
            if (x.index() != y.index()) return false;
            if (const auto* dx = std::get_if<double>(&x)) {
                const double dy = std::get<double>(y);
                if (!(std::isnan(*dx) && std::isnan(dy)) && *dx != dy) return false;
            } else if (x != y) {
                return false;
            }
        }
    }
    return true;
}

namespace detail {

/// Doubles always carry a '.', exponent or non-finite marker so that they
/// parse back as doubles rather than integers.
inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        std::string s = koopcert::detail::format_double(*d);
        if (s.find_first_of(".eE") == std::string::npos) s += ".0";
        return s;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\n\r\"") != std::string::npos) throw InputError("table text cell contains a separator");
    return s;
}

inline Cell parse_cell(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (!s.empty() && s.find_first_not_of("+-0123456789") == std::string::npos) {
        char* end = nullptr;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (*end == '\0') return static_cast<std::int64_t>(v);
    }
    if (!s.empty() && s.find_first_not_of("+-0123456789.eE") == std::string::npos) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (*end == '\0') return v;
    }
    return s;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(line);
    while (std::getline(ss, item, sep)) out.push_back(item);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace detail

/// CSV: "# table=<name>" and "# key=value" provenance lines, header row, records.
inline void write_csv(const ResultTable& t, std::ostream& out) {
    out << "# table=" << t.name << "\n";
    for (const auto& [k, v] : t.provenance) out << "# " << k << "=" << v << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::format_cell(row[i]);
        out << "\n";
    }
}

inline ResultTable read_csv(std::istream& in) {
    ResultTable t;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw IoError("table CSV: malformed provenance line");
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "table") t.name = value;
            else t.provenance[key] = value;
            continue;
        }
        if (!header) {
            t.columns = detail::split(line, ',');
            header = true;
            continue;
        }
        std::vector<Cell> row;
        for (const auto& cell : detail::split(line, ',')) row.push_back(detail::parse_cell(cell));
        if (row.size() != t.columns.size()) throw IoError("table CSV: row width mismatch");
        t.rows.push_back(std::move(row));
    }
    if (!header) throw IoError("table CSV: missing header");
    return t;
}

[[nodiscard]] inline nlohmann::json to_json(const ResultTable& t) {
    nlohmann::json j;
    j["table"] = t.name;
    j["provenance"] = t.provenance;
    j["columns"] = t.columns;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) {
            if (const auto* d = std::get_if<double>(&c)) {
                if (std::isfinite(*d)) r.push_back(*d);
                else r.push_back(detail::format_cell(c));  // "nan", "inf", "-inf"
            } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
                r.push_back(*i);
            } else {
                r.push_back(std::get<std::string>(c));
            }
        }
        j["rows"].push_back(std::move(r));
    }
    return j;
}

[[nodiscard]] inline ResultTable table_from_json(const nlohmann::json& j) {
    ResultTable t;
    t.name = j.at("table").get<std::string>();
    t.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& c : r) {
            if (c.is_number_integer()) row.emplace_back(c.get<std::int64_t>());
            else if (c.is_number()) row.emplace_back(c.get<double>());
            else {
                const auto s = c.get<std::string>();
                if (s == "nan" || s == "inf" || s == "-inf") row.push_back(detail::parse_cell(s));
                else row.emplace_back(s);
            }
        }
        if (row.size() != t.columns.size()) throw IoError("table JSON: row width mismatch");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Integral doubles dump as e.g. "2.0" so they come back as doubles.
inline void write_json(const ResultTable& t, std::ostream& out) { out << to_json(t).dump(2) << "\n"; }

inline ResultTable read_json(std::istream& in) {
    try {
        return table_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("table JSON: ") + e.what());
    }
}

/// Writes <dir>/<table name>.<format>; returns the path written.
inline std::filesystem::path emit(const ResultTable& t, const std::filesystem::path& dir, const std::string& format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const std::filesystem::path path = dir / (t.name + "." + format);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (format == "csv") write_csv(t, out);
    else if (format == "json") write_json(t, out);
    else throw InputError("unknown output format '" + format + "'");
    if (!out) throw IoError("write failed for '" + path.string() + "'");
    return path;
}

inline ResultTable load_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return path.extension() == ".json" ? read_json(in) : read_csv(in);
}

}  // namespace koopcert::experiments
