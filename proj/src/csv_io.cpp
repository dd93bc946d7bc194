/*
 * Copyright 2026 The medimpute Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "medimpute/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "medimpute/errors.hpp"

namespace medimpute {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::optional<double> parse_double(const std::string& token) {
    double x = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc() || ptr != last || token.empty()) return std::nullopt;
    return x;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string row_prefix(std::size_t data_row) { return "row " + std::to_string(data_row) + ": "; }

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

std::string format_number(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw NumericalError("cannot format number");
    return std::string(buf, ptr);
}

PanelDataset read_csv(std::istream& in, const Schema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: missing header");
    const auto header = split_csv_line(line);

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!column_of.emplace(header[c], c).second) throw DataError("duplicate column '" + header[c] + "' in header");

    auto require = [&](const std::string& name) {
        auto it = column_of.find(name);
        if (it == column_of.end()) throw DataError("unknown column in schema: '" + name + "' is not in the CSV header");
        return it->second;
    };
    const std::size_t id_col = require(schema.id_column);
    const std::size_t time_col = require(schema.time_column);

    // Dataset feature order: continuous first, each kind in schema order.
    std::vector<std::size_t> schema_index;
    for (std::size_t f = 0; f < schema.features.size(); ++f)
        if (schema.features[f].kind == FeatureKind::continuous) schema_index.push_back(f);
    const std::size_t p0 = schema_index.size();
    for (std::size_t f = 0; f < schema.features.size(); ++f)
        if (schema.features[f].kind == FeatureKind::categorical) schema_index.push_back(f);
    const std::size_t p = schema_index.size();

    PanelDataset::Storage s;
    s.id_column = schema.id_column;
    s.time_column = schema.time_column;
    s.time_unit = schema.time_unit;
    std::vector<std::size_t> csv_col(p);
    std::vector<std::map<std::string, int>> level_code(p);
    for (std::size_t d = 0; d < p; ++d) {
        const Feature& f = schema.features[schema_index[d]];
        s.features.push_back(f);
        csv_col[d] = require(f.name);
        if (csv_col[d] == id_col || csv_col[d] == time_col)
            throw DataError("feature '" + f.name + "' reuses the id or time column");
        for (std::size_t l = 0; l < f.levels.size(); ++l)
            if (!level_code[d].emplace(f.levels[l], static_cast<int>(l)).second)
                throw DataError("feature '" + f.name + "' declares level '" + f.levels[l] + "' twice");
    }
    if (header.size() != p + 2) {
        for (const auto& name : header) {
            const bool known = name == schema.id_column || name == schema.time_column ||
                               std::any_of(s.features.begin(), s.features.end(),
                                           [&](const Feature& f) { return f.name == name; });
            if (!known) throw DataError("column '" + name + "' is not described by the schema");
        }
    }
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return csv_col[a] < csv_col[b]; });
    s.column_order = order;

    struct RawRow {
        std::size_t individual;
        double time;
        std::size_t line;
        std::vector<double> cont;
        std::vector<int> cat;
        std::vector<std::uint8_t> missing;
    };
    std::vector<RawRow> raw;
    std::unordered_map<std::string, std::size_t> individual_of;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++data_row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError(row_prefix(data_row) + "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        RawRow r;
        r.line = data_row;
        const std::string& id = fields[id_col];
        if (id.empty() || id == missing_token) throw DataError(row_prefix(data_row) + "missing individual id");
        auto [it, inserted] = individual_of.emplace(id, s.individual_labels.size());
        if (inserted) s.individual_labels.push_back(id);
        r.individual = it->second;
        const auto t = parse_double(fields[time_col]);
        if (!t || !std::isfinite(*t) || *t < 0.0)
            throw DataError(row_prefix(data_row) + "time '" + fields[time_col] + "' is not a non-negative number");
        r.time = *t;
        r.cont.assign(p0, 0.0);
        r.cat.assign(p - p0, 0);
        r.missing.assign(p, 0);
        for (std::size_t d = 0; d < p; ++d) {
            const std::string& tok = fields[csv_col[d]];
            if (tok == missing_token) {
                r.missing[d] = 1;
                continue;
            }
            if (d < p0) {
                const auto x = parse_double(tok);
                if (!x || !std::isfinite(*x))
                    throw DataError(row_prefix(data_row) + "non-numeric value '" + tok + "' in continuous column '" +
                                    s.features[d].name + "'");
                r.cont[d] = *x;
            } else {
                auto lv = level_code[d].find(tok);
                if (lv == level_code[d].end())
                    throw DataError(row_prefix(data_row) + "value '" + tok + "' is not a declared level of '" +
                                    s.features[d].name + "'");
                r.cat[d - p0] = lv->second;
            }
        }
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw DataError("no observations");

    std::stable_sort(raw.begin(), raw.end(), [](const RawRow& a, const RawRow& b) {
        return a.individual != b.individual ? a.individual < b.individual : a.time < b.time;
    });
    for (std::size_t k = 1; k < raw.size(); ++k)
        if (raw[k].individual == raw[k - 1].individual && raw[k].time == raw[k - 1].time)
            throw DataError(row_prefix(std::max(raw[k].line, raw[k - 1].line)) + "duplicate (id, time) pair for id '" +
                            s.individual_labels[raw[k].individual] + "'");

    for (auto& r : raw) {
        s.individual.push_back(r.individual);
        s.timestamp.push_back(r.time);
        s.continuous.insert(s.continuous.end(), r.cont.begin(), r.cont.end());
        s.categorical.insert(s.categorical.end(), r.cat.begin(), r.cat.end());
        s.missing.insert(s.missing.end(), r.missing.begin(), r.missing.end());
    }
    return PanelDataset(std::move(s));
}

PanelDataset load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_csv(in, schema);
}

namespace {

void write_header(std::ostream& out, const PanelDataset& ds) {
    out << quote_if_needed(ds.id_column()) << ',' << quote_if_needed(ds.time_column());
    for (std::size_t d : ds.column_order()) out << ',' << quote_if_needed(ds.feature(d).name);
    out << '\n';
}

}  // namespace

void write_csv(std::ostream& out, const PanelDataset& ds) {
    write_header(out, ds);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        out << quote_if_needed(ds.individual_label(ds.individual(i))) << ',' << format_number(ds.timestamp(i));
        for (std::size_t d : ds.column_order()) {
            out << ',';
            if (ds.is_missing(i, d))
                out << missing_token;
            else if (ds.is_continuous(d))
                out << format_number(*ds.continuous(i, d));
            else
                out << quote_if_needed(ds.feature(d).levels[static_cast<std::size_t>(*ds.category(i, d))]);
        }
        out << '\n';
    }
}

void save_csv(const std::string& path, const PanelDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_csv(out, ds);
    if (!out) throw DataError("failed writing " + path);
}

void write_mask_csv(std::ostream& out, const PanelDataset& ds) {
    write_header(out, ds);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        out << quote_if_needed(ds.individual_label(ds.individual(i))) << ',' << format_number(ds.timestamp(i));
        for (std::size_t d : ds.column_order()) out << ',' << (ds.is_missing(i, d) ? '1' : '0');
        out << '\n';
    }
}

}  // namespace medimpute
