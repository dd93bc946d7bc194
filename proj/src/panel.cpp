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

#include "medimpute/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "medimpute/errors.hpp"

namespace medimpute {

const char* to_string(FeatureKind kind) {
    return kind == FeatureKind::continuous ? "continuous" : "categorical";
}

Schema Schema::from_json(const nlohmann::json& j) {
    Schema s;
    try {
        s.id_column = j.at("id_column").get<std::string>();
        s.time_column = j.at("time_column").get<std::string>();
        s.time_unit = j.value("time_unit", std::string("days"));
        for (const auto& f : j.at("features")) {
            Feature feat;
            feat.name = f.at("name").get<std::string>();
            const auto kind = f.at("kind").get<std::string>();
            if (kind == "continuous") {
                feat.kind = FeatureKind::continuous;
            } else if (kind == "categorical") {
                feat.kind = FeatureKind::categorical;
                feat.levels = f.at("levels").get<std::vector<std::string>>();
                if (feat.levels.empty()) throw DataError("categorical feature '" + feat.name + "' declares no levels");
            } else {
                throw DataError("feature '" + feat.name + "' has unknown kind '" + kind + "'");
            }
            s.features.push_back(std::move(feat));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed schema: ") + e.what());
    }
    if (s.features.empty()) throw DataError("schema declares no features");
    return s;
}

Schema Schema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json Schema::to_json() const {
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : features) {
        nlohmann::json jf{{"name", f.name}, {"kind", to_string(f.kind)}};
        if (f.kind == FeatureKind::categorical) jf["levels"] = f.levels;
        feats.push_back(std::move(jf));
    }
    return {{"id_column", id_column}, {"time_column", time_column}, {"time_unit", time_unit}, {"features", feats}};
}

PanelDataset::PanelDataset(Storage storage) : s_(std::move(storage)) {
    const std::size_t n = s_.individual.size();
    const std::size_t p = s_.features.size();
    if (p == 0) throw DataError("dataset has no features");

    p0_ = 0;
    while (p0_ < p && s_.features[p0_].kind == FeatureKind::continuous) ++p0_;
    for (std::size_t d = p0_; d < p; ++d) {
        if (s_.features[d].kind != FeatureKind::categorical)
            throw DataError("continuous features must precede categorical features");
        if (s_.features[d].levels.empty()) throw DataError("categorical feature '" + s_.features[d].name + "' has no levels");
    }
    const std::size_t p1 = p - p0_;
    if (s_.timestamp.size() != n || s_.continuous.size() != n * p0_ || s_.categorical.size() != n * p1 ||
        s_.missing.size() != n * p)
        throw DataError("dataset storage sizes are inconsistent");

    if (s_.column_order.empty()) {
        s_.column_order.resize(p);
        std::iota(s_.column_order.begin(), s_.column_order.end(), std::size_t{0});
    } else {
        auto sorted = s_.column_order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t d = 0; d < p; ++d)
            if (sorted.size() != p || sorted[d] != d) throw DataError("column order is not a permutation of the features");
    }

    const std::size_t m = s_.individual_labels.size();
    group_start_.assign(m + 1, n);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ind = s_.individual[i];
        const double t = s_.timestamp[i];
        if (!std::isfinite(t) || t < 0.0) throw DataError("row " + std::to_string(i + 1) + ": invalid timestamp");
        if (i == 0 || ind != s_.individual[i - 1]) {
            if (ind != expected)
                throw DataError("row " + std::to_string(i + 1) + ": individuals must be contiguous and ordered");
            group_start_[ind] = i;
            ++expected;
        } else if (!(t > s_.timestamp[i - 1])) {
            throw DataError("row " + std::to_string(i + 1) + ": duplicate or unsorted timestamp for individual '" +
                            s_.individual_labels[ind] + "'");
        }
    }
    if (expected != m) throw DataError("every individual must have at least one row");

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < p0_; ++d) {
            double& x = s_.continuous[i * p0_ + d];
            if (s_.missing[i * p + d]) {
                x = std::numeric_limits<double>::quiet_NaN();
            } else if (!std::isfinite(x)) {
                throw DataError("row " + std::to_string(i + 1) + ": non-finite value in '" + s_.features[d].name + "'");
            }
        }
        for (std::size_t c = 0; c < p1; ++c) {
            const std::size_t d = p0_ + c;
            const int card = static_cast<int>(s_.features[d].levels.size());
            int& code = s_.categorical[i * p1 + c];
            if (s_.missing[i * p + d]) {
                code = card;
            } else if (code < 0 || code >= card) {
                throw DataError("row " + std::to_string(i + 1) + ": category code out of range in '" +
                                s_.features[d].name + "'");
            }
        }
    }
}

int PanelDataset::cardinality(std::size_t d) const {
    return static_cast<int>(s_.features.at(d).levels.size());
}

std::optional<double> PanelDataset::continuous(std::size_t row, std::size_t d) const {
    if (is_missing(row, d)) return std::nullopt;
    return s_.continuous[row * p0_ + d];
}

std::optional<int> PanelDataset::category(std::size_t row, std::size_t d) const {
    if (is_missing(row, d)) return std::nullopt;
    return s_.categorical[row * n_categorical() + (d - p0_)];
}

std::optional<double> PanelDataset::value(std::size_t row, std::size_t d) const {
    if (is_missing(row, d)) return std::nullopt;
    if (d < p0_) return s_.continuous[row * p0_ + d];
    return static_cast<double>(s_.categorical[row * n_categorical() + (d - p0_)]);
}

std::size_t PanelDataset::missing_count() const {
    return static_cast<std::size_t>(std::count(s_.missing.begin(), s_.missing.end(), std::uint8_t{1}));
}

std::size_t PanelDataset::observed_count() const { return s_.missing.size() - missing_count(); }

bool PanelDataset::row_incomplete(std::size_t row) const {
    const std::size_t p = n_features();
    return std::any_of(s_.missing.begin() + static_cast<std::ptrdiff_t>(row * p),
                       s_.missing.begin() + static_cast<std::ptrdiff_t>((row + 1) * p),
                       [](std::uint8_t m) { return m != 0; });
}

Schema PanelDataset::schema() const {
    Schema s;
    s.id_column = s_.id_column;
    s.time_column = s_.time_column;
    s.time_unit = s_.time_unit;
    for (std::size_t d : s_.column_order) s.features.push_back(s_.features[d]);
    return s;
}

PanelDataset PanelDataset::with_missing(std::span<const Cell> cells) const {
    Storage s = s_;
    for (const Cell& c : cells) {
        if (c.row >= n_rows() || c.feature >= n_features()) throw InvalidArgument("cell out of range");
        s.missing[c.row * n_features() + c.feature] = 1;
    }
    return PanelDataset(std::move(s));
}

PanelDataset PanelDataset::select_rows(std::span<const std::size_t> rows) const {
    const std::size_t p = n_features();
    const std::size_t p1 = n_categorical();
    Storage s;
    s.features = s_.features;
    s.id_column = s_.id_column;
    s.time_column = s_.time_column;
    s.time_unit = s_.time_unit;
    s.column_order = s_.column_order;
    std::vector<std::size_t> remap(n_individuals(), static_cast<std::size_t>(-1));
    std::size_t prev = 0;
    bool first = true;
    for (std::size_t r : rows) {
        if (r >= n_rows() || (!first && r <= prev)) throw InvalidArgument("select_rows expects ascending row indices");
        first = false;
        prev = r;
        const std::size_t ind = s_.individual[r];
        if (remap[ind] == static_cast<std::size_t>(-1)) {
            remap[ind] = s.individual_labels.size();
            s.individual_labels.push_back(s_.individual_labels[ind]);
        }
        s.individual.push_back(remap[ind]);
        s.timestamp.push_back(s_.timestamp[r]);
        s.continuous.insert(s.continuous.end(), s_.continuous.begin() + static_cast<std::ptrdiff_t>(r * p0_),
                            s_.continuous.begin() + static_cast<std::ptrdiff_t>((r + 1) * p0_));
        s.categorical.insert(s.categorical.end(), s_.categorical.begin() + static_cast<std::ptrdiff_t>(r * p1),
                             s_.categorical.begin() + static_cast<std::ptrdiff_t>((r + 1) * p1));
        s.missing.insert(s.missing.end(), s_.missing.begin() + static_cast<std::ptrdiff_t>(r * p),
                         s_.missing.begin() + static_cast<std::ptrdiff_t>((r + 1) * p));
    }
    return PanelDataset(std::move(s));
}

bool PanelDataset::operator==(const PanelDataset& o) const {
    if (s_.features != o.s_.features || s_.individual_labels != o.s_.individual_labels ||
        s_.individual != o.s_.individual || s_.timestamp != o.s_.timestamp || s_.missing != o.s_.missing ||
        s_.categorical != o.s_.categorical || s_.id_column != o.s_.id_column || s_.time_column != o.s_.time_column ||
        s_.time_unit != o.s_.time_unit || s_.column_order != o.s_.column_order)
        return false;
    for (std::size_t k = 0; k < s_.continuous.size(); ++k) {
        const double a = s_.continuous[k], b = o.s_.continuous[k];
        if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
    }
    return true;
}

PanelDataset StandardizationParams::invert(const PanelDataset& ds) const {
    auto s = ds.storage();
    const std::size_t p0 = ds.n_continuous();
    if (mean.size() != p0 || sd.size() != p0) throw InvalidArgument("standardization parameters do not match dataset");
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < p0; ++d) {
            double& x = s.continuous[i * p0 + d];
            x = x * sd[d] + mean[d];
        }
    return PanelDataset(std::move(s));
}

StandardizedPanel standardize(const PanelDataset& ds) {
    const std::size_t p0 = ds.n_continuous();
    StandardizationParams params;
    params.mean.assign(p0, 0.0);
    params.sd.assign(p0, 1.0);
    for (std::size_t d = 0; d < p0; ++d) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
            if (auto x = ds.continuous(i, d)) {
                sum += *x;
                ++count;
            }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
            if (auto x = ds.continuous(i, d)) ss += (*x - mean) * (*x - mean);
        const double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
        params.mean[d] = mean;
        params.sd[d] = sd > 0.0 ? sd : 1.0;
    }
    auto s = ds.storage();
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < p0; ++d) {
            double& x = s.continuous[i * p0 + d];
            x = (x - params.mean[d]) / params.sd[d];
        }
    return {PanelDataset(std::move(s)), std::move(params)};
}

std::size_t mcar_mask_size(std::size_t observed, double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(observed) + 0.5));
}

MaskedPanel apply_mcar_mask(const PanelDataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("mask fraction must lie in [0, 1]");
    std::vector<Cell> observed;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d)
            if (!ds.is_missing(i, d)) observed.push_back({i, d});
    if (observed.empty()) throw DataError("dataset has no observed cells to mask");

    const std::size_t m = std::min(mcar_mask_size(observed.size(), fraction), observed.size());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, observed.size() - 1);
        std::swap(observed[i], observed[pick(rng)]);
    }
    observed.resize(m);
    std::sort(observed.begin(), observed.end());

    MaskRecord record;
    record.seed = seed;
    record.fraction = fraction;
    record.cells.reserve(m);
    for (const Cell& c : observed) record.cells.push_back({c, *ds.value(c.row, c.feature)});
    return {ds.with_missing(observed), std::move(record)};
}

TruncatedPanel keep_recent_observations(const PanelDataset& ds, std::size_t k) {
    if (k == 0) throw InvalidArgument("observations per individual must be positive");
    TruncatedPanel out;
    std::vector<std::size_t> rows;
    for (std::size_t ind = 0; ind < ds.n_individuals(); ++ind) {
        const auto [begin, end] = ds.individual_rows(ind);
        if (end - begin < k) {
            ++out.excluded;
            continue;
        }
        out.source_individual.push_back(ind);
        for (std::size_t r = end - k; r < end; ++r) rows.push_back(r);
    }
    if (rows.empty()) throw DataError("no individual has " + std::to_string(k) + " observations");
    out.data = ds.select_rows(rows);
    return out;
}

}  // namespace medimpute
