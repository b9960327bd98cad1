#pragma once

// Tabular ingestion: comma-separated numeric features with an optional
// label column, labels factorized to 0..k-1 in order of first appearance.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fedhire/core.hpp"
#include "fedhire/errors.hpp"

namespace fedhire {

/// No label column, a column named in the header, or a 0-based index.
/// Negative indices count from the right (-1 is the last column).
using LabelColumn = std::variant<std::monostate, std::string, long>;

struct CsvOptions {
    LabelColumn label;
    bool header = true;
    bool normalize = true;
};

struct CsvTable {
    DataMatrix data;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;  // index = factorized label
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Finite decimal number or nothing. NaN and infinities are rejected.
inline std::optional<double> parse_real(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const CsvOptions& options = {}) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> fields;
        for (auto f : detail::split_fields(line)) fields.emplace_back(f);
        rows.push_back(std::move(fields));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) throw ParseError("csv: empty file", 0, 0);

    const std::size_t width = rows.front().size();
    std::vector<std::string> names;
    std::size_t first = 0;
    if (options.header) {
        names = rows.front();
        first = 1;
    } else {
        for (std::size_t c = 0; c < width; ++c) names.push_back("x" + std::to_string(c));
    }
    if (first >= rows.size()) throw ParseError("csv: no data rows", 0, 0);

    std::optional<std::size_t> label_col;
    if (const auto* name = std::get_if<std::string>(&options.label)) {
        for (std::size_t c = 0; c < names.size(); ++c)
            if (names[c] == *name) label_col = c;
        if (!label_col) throw InvalidArgument("csv: no column named '" + *name + "'");
    } else if (const auto* idx = std::get_if<long>(&options.label)) {
        const long w = static_cast<long>(width);
        const long c = *idx < 0 ? w + *idx : *idx;
        if (c < 0 || c >= w) throw InvalidArgument("csv: label column index out of range");
        label_col = static_cast<std::size_t>(c);
    }

    CsvTable table;
    for (std::size_t c = 0; c < width; ++c)
        if (c != label_col) table.feature_names.push_back(names[c]);
    if (table.feature_names.empty()) throw InvalidArgument("csv: no feature columns");

    Matrix values;
    std::vector<Label> labels;
    std::unordered_map<std::string, Label> ids;
    std::vector<double> point;
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        if (fields.size() != width)
            throw ParseError("csv: line " + std::to_string(line_numbers[r]) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(width),
                             line_numbers[r], 0);
        point.clear();
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) {
                const auto [it, fresh] = ids.try_emplace(fields[c], static_cast<Label>(ids.size()));
                if (fresh) table.class_names.push_back(fields[c]);
                labels.push_back(it->second);
                continue;
            }
            const auto v = detail::parse_real(fields[c]);
            if (!v)
                throw ParseError("csv: line " + std::to_string(line_numbers[r]) + ", column " + std::to_string(c + 1) +
                                     " ('" + names[c] + "'): not a finite number: '" + fields[c] + "'",
                                 line_numbers[r], c + 1);
            point.push_back(*v);
        }
        values.append_row(point);
    }

    std::optional<std::vector<Label>> lab;
    if (label_col) lab = std::move(labels);
    DataMatrix data(std::move(values), std::move(lab));
    table.data = options.normalize ? normalize_min_max(data) : std::move(data);
    return table;
}

inline CsvTable load_csv(const std::string& path, const CsvOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("csv: cannot open '" + path + "'");
    return parse_csv(in, options);
}

}  // namespace fedhire
