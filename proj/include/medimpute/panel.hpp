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

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace medimpute {

enum class FeatureKind { continuous, categorical };

const char* to_string(FeatureKind kind);

struct Feature {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    /// Level names for categorical features; a cell's code indexes this list.
    std::vector<std::string> levels;

    bool operator==(const Feature&) const = default;
};

/// Sidecar description of a panel CSV.
///
/// JSON form:
/// {"id_column": "id", "time_column": "t", "time_unit": "years",
///  "features": [{"name": "bmi", "kind": "continuous"},
///               {"name": "smoker", "kind": "categorical", "levels": ["no", "yes"]}]}
struct Schema {
    std::string id_column = "id";
    std::string time_column = "time";
    std::string time_unit = "days";
    std::vector<Feature> features;

    static Schema from_json(const nlohmann::json& j);
    static Schema load(const std::string& path);
    nlohmann::json to_json() const;

    bool operator==(const Schema&) const = default;
};

/// Address of a single cell. `feature` is the dataset feature index
/// (continuous features first, then categorical).
struct Cell {
    std::size_t row = 0;
    std::size_t feature = 0;

    auto operator<=>(const Cell&) const = default;
};

/// Longitudinal mixed-type data set.
///
/// Rows are sorted by (individual, timestamp) with strictly increasing
/// timestamps inside an individual. Individuals are indexed 0..M-1 in order
/// of first appearance; their original labels are kept for output. Features
/// are stored continuous-first. Missing cells carry a sentinel (NaN for
/// continuous, cardinality for categorical) that is only reachable through
/// `storage()`, never through the masked accessors.
class PanelDataset {
public:
    /// Raw column storage. Continuous values are n x p0 row-major, categorical
    /// codes n x p1 row-major, the missing mask n x p row-major.
    struct Storage {
        std::vector<Feature> features;
        std::vector<std::string> individual_labels;
        std::vector<std::size_t> individual;
        std::vector<double> timestamp;
        std::vector<double> continuous;
        std::vector<int> categorical;
        std::vector<std::uint8_t> missing;
        std::string id_column = "id";
        std::string time_column = "time";
        std::string time_unit = "days";
        /// Feature indices in the column order of the originating file.
        std::vector<std::size_t> column_order;
    };

    PanelDataset() = default;
    /// Validates every invariant and normalizes the sentinels; throws DataError.
    explicit PanelDataset(Storage storage);

    std::size_t n_rows() const { return s_.individual.size(); }
    std::size_t n_features() const { return s_.features.size(); }
    std::size_t n_continuous() const { return p0_; }
    std::size_t n_categorical() const { return s_.features.size() - p0_; }
    std::size_t n_individuals() const { return s_.individual_labels.size(); }

    const std::vector<Feature>& features() const { return s_.features; }
    const Feature& feature(std::size_t d) const { return s_.features.at(d); }
    bool is_continuous(std::size_t d) const { return d < p0_; }
    /// Number of levels of categorical feature d.
    int cardinality(std::size_t d) const;

    std::size_t individual(std::size_t row) const { return s_.individual[row]; }
    double timestamp(std::size_t row) const { return s_.timestamp[row]; }
    const std::string& individual_label(std::size_t ind) const { return s_.individual_labels[ind]; }
    /// First row and one-past-last row of an individual.
    std::pair<std::size_t, std::size_t> individual_rows(std::size_t ind) const {
        return {group_start_[ind], group_start_[ind + 1]};
    }

    bool is_missing(std::size_t row, std::size_t d) const { return s_.missing[row * n_features() + d] != 0; }
    std::optional<double> continuous(std::size_t row, std::size_t d) const;
    std::optional<int> category(std::size_t row, std::size_t d) const;
    /// Observed payload as a real (category code for categorical features).
    std::optional<double> value(std::size_t row, std::size_t d) const;

    std::size_t observed_count() const;
    std::size_t missing_count() const;
    bool row_incomplete(std::size_t row) const;

    const std::string& id_column() const { return s_.id_column; }
    const std::string& time_column() const { return s_.time_column; }
    const std::string& time_unit() const { return s_.time_unit; }
    const std::vector<std::size_t>& column_order() const { return s_.column_order; }
    Schema schema() const;

    const Storage& storage() const { return s_; }

    /// Copy with the given (observed) cells marked missing.
    PanelDataset with_missing(std::span<const Cell> cells) const;
    /// Copy restricted to the given rows (ascending); individuals without rows are dropped.
    PanelDataset select_rows(std::span<const std::size_t> rows) const;

    bool operator==(const PanelDataset& other) const;

private:
    Storage s_;
    std::size_t p0_ = 0;
    std::vector<std::size_t> group_start_;
};

/// Observed-entry moments of each continuous column.
struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> sd;

    /// Maps standardized continuous values back to feature-native units.
    PanelDataset invert(const PanelDataset& ds) const;
};

struct StandardizedPanel {
    PanelDataset data;
    StandardizationParams params;
};

/// Z-scores every continuous column using observed entries only
/// (sample standard deviation; a zero or undefined sd is recorded as 1).
StandardizedPanel standardize(const PanelDataset& ds);

struct MaskedCell {
    Cell cell;
    double true_value = 0.0;  ///< category code for categorical cells

    bool operator==(const MaskedCell&) const = default;
};

struct MaskRecord {
    std::string mechanism = "mcar";
    std::uint64_t seed = 0;
    double fraction = 0.0;
    std::vector<MaskedCell> cells;  ///< sorted by (row, feature)
};

struct MaskedPanel {
    PanelDataset data;
    MaskRecord record;
};

/// Number of cells an MCAR mask of `fraction` hides: round-half-up of fraction x observed.
std::size_t mcar_mask_size(std::size_t observed, double fraction);

/// Hides exactly mcar_mask_size(observed, fraction) observed cells chosen
/// uniformly without replacement. Deterministic in `seed`.
MaskedPanel apply_mcar_mask(const PanelDataset& ds, double fraction, std::uint64_t seed);

/// Keeps the `k` most recent rows of every individual. Individuals with fewer
/// than k rows are dropped and counted in `excluded`.
struct TruncatedPanel {
    PanelDataset data;
    std::size_t excluded = 0;
    /// For each kept individual, its index in the source dataset.
    std::vector<std::size_t> source_individual;
};
TruncatedPanel keep_recent_observations(const PanelDataset& ds, std::size_t k);

}  // namespace medimpute
