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
#include <optional>
#include <span>
#include <vector>

#include "medimpute/panel.hpp"

namespace medimpute {

/// Per-feature time-series weights and decay rates plus the neighbor count.
struct Hyperparams {
    std::vector<double> alpha;   ///< alpha_d in [0, 1]
    std::vector<double> lambda;  ///< lambda_d in (0, 1], per declared time unit
    std::size_t k = 10;

    /// Broadcasts a scalar alpha and lambda to p features.
    static Hyperparams shared(std::size_t p, double alpha, double lambda, std::size_t k);

    /// Throws InvalidArgument unless the bounds hold for p features and n rows.
    void validate(std::size_t p, std::size_t n) const;
    /// True when every feature has the same alpha.
    bool shared_alpha() const;

    bool operator==(const Hyperparams&) const = default;
};

/// Same-individual decay coefficients C_ijd = lambda_d^|t_i - t_j|.
///
/// Only pairs from one individual are stored; every other pair is zero.
/// Partners of row i are listed in ascending row order.
class DecayTable {
public:
    DecayTable() = default;
    DecayTable(const PanelDataset& ds, const Hyperparams& hp);

    std::size_t n_rows() const { return offset_.empty() ? 0 : offset_.size() - 1; }
    std::size_t n_features() const { return p_; }
    /// Number of stored ordered pairs.
    std::size_t pair_count() const { return partner_.size(); }
    bool empty() const { return partner_.empty(); }

    /// Empty for rows outside the table, so a default table means "no pairs".
    std::span<const std::size_t> partners(std::size_t i) const {
        if (i + 1 >= offset_.size()) return {};
        return {partner_.data() + offset_[i], offset_[i + 1] - offset_[i]};
    }
    /// Coefficient of the slot-th partner of row i for feature d.
    double coefficient_at(std::size_t i, std::size_t slot, std::size_t d) const {
        return coef_[(offset_[i] + slot) * p_ + d];
    }
    /// C_ijd for an arbitrary pair (0 across individuals and for i == j).
    double coefficient(std::size_t i, std::size_t j, std::size_t d) const;

private:
    std::size_t p_ = 0;
    std::vector<std::size_t> offset_;
    std::vector<std::size_t> partner_;
    std::vector<double> coef_;
};

DecayTable build_decay_table(const PanelDataset& ds, const Hyperparams& hp);

/// Fully imputed matrix: known cells pinned to the data, missing cells free.
class CompletedMatrix {
public:
    CompletedMatrix() = default;
    /// Copies known cells from ds and fills missing cells with the per-feature
    /// fill values (continuous fills for d < p0, category codes after).
    CompletedMatrix(const PanelDataset& ds, std::span<const double> fill);

    std::size_t n_rows() const { return n_; }
    std::size_t n_features() const { return p0_ + p1_; }
    std::size_t n_continuous() const { return p0_; }
    std::size_t n_categorical() const { return p1_; }
    bool is_continuous(std::size_t d) const { return d < p0_; }
    int cardinality(std::size_t d) const { return cardinality_[d - p0_]; }

    bool is_missing(std::size_t i, std::size_t d) const { return missing_[i * (p0_ + p1_) + d] != 0; }
    bool row_incomplete(std::size_t i) const;

    double continuous(std::size_t i, std::size_t d) const { return w_[i * p0_ + d]; }
    int category(std::size_t i, std::size_t d) const { return v_[i * p1_ + (d - p0_)]; }
    /// Cell value as a real (category code for categorical features).
    double value(std::size_t i, std::size_t d) const;

    /// Only missing cells may be written; throws std::logic_error otherwise.
    void set_continuous(std::size_t i, std::size_t d, double x);
    void set_category(std::size_t i, std::size_t d, int c);

    std::span<const double> continuous_row(std::size_t i) const { return {w_.data() + i * p0_, p0_}; }
    std::span<const int> categorical_row(std::size_t i) const { return {v_.data() + i * p1_, p1_}; }

    /// Fully observed copy of `source` holding this matrix's values.
    PanelDataset to_dataset(const PanelDataset& source) const;

    bool operator==(const CompletedMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t p0_ = 0;
    std::size_t p1_ = 0;
    std::vector<double> w_;
    std::vector<int> v_;
    std::vector<std::uint8_t> missing_;
    std::vector<int> cardinality_;
};

/// Rows with at least one missing cell, ascending.
std::vector<std::size_t> incomplete_rows(const CompletedMatrix& cm);

/// Squared Euclidean distance over continuous features plus the number of
/// categorical mismatches.
double pairwise_distance(std::size_t i, std::size_t j, const CompletedMatrix& cm);

/// Neighbor indicators z_ij for the incomplete rows.
class NeighborAssignment {
public:
    NeighborAssignment() = default;
    /// `neighbors` holds k entries per incomplete row, flattened in the order of `incomplete`.
    NeighborAssignment(std::size_t n_rows, std::vector<std::size_t> incomplete,
                       std::vector<std::size_t> neighbors, std::size_t k);

    std::size_t k() const { return k_; }
    std::size_t n_rows() const { return slot_.size(); }
    std::span<const std::size_t> incomplete_rows() const { return incomplete_; }
    bool is_incomplete(std::size_t i) const { return slot_[i] != npos; }
    /// Neighbors of an incomplete row, nearest first.
    std::span<const std::size_t> neighbors(std::size_t i) const;
    /// Incomplete rows that list j among their neighbors, ascending.
    std::span<const std::size_t> referrers(std::size_t j) const {
        return {referrer_.data() + referrer_offset_[j], referrer_offset_[j + 1] - referrer_offset_[j]};
    }

    bool operator==(const NeighborAssignment&) const = default;

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t k_ = 0;
    std::vector<std::size_t> incomplete_;
    std::vector<std::size_t> neighbors_;
    std::vector<std::size_t> slot_;
    std::vector<std::size_t> referrer_offset_;
    std::vector<std::size_t> referrer_;
};

/// For each row in `rows`, the k rows j != i with the smallest
/// pairwise_distance; ties go to the lower row index.
NeighborAssignment assign_neighbors(const CompletedMatrix& cm, std::span<const std::size_t> rows, std::size_t k);

/// Coupling weight u_ijd between a cell of row i and row j.
struct PartnerWeight {
    std::size_t row = 0;
    double weight = 0.0;
};

/// Every row coupled to row i in the objective, ascending, with weight
///   u_ijd = (1 - a_d)(z_ij + [j in I] z_ji) + a_d (C_ijd + [j in I] C_jid).
/// Rows with zero weight are omitted.
std::vector<PartnerWeight> partner_weights(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                           const Hyperparams& hp, const DecayTable& dt);

/// Exact minimizer of the objective over w_id with everything else fixed:
/// the u-weighted mean of the partners' values. nullopt when the total
/// weight is zero.
std::optional<double> update_continuous_cell(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                             const CompletedMatrix& cm, const Hyperparams& hp,
                                             const DecayTable& dt);

/// Exact minimizer over v_id: the category with the smallest u-weighted
/// mismatch cost, smallest code on ties. nullopt when the total weight is zero.
std::optional<int> update_categorical_cell(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                           const CompletedMatrix& cm, const Hyperparams& hp,
                                           const DecayTable& dt);

/// K-NN term over incomplete rows and their neighbors plus the
/// decay-weighted same-individual term over incomplete rows and all partners.
double objective_value(const CompletedMatrix& cm, const NeighborAssignment& na, const Hyperparams& hp,
                       const DecayTable& dt);

}  // namespace medimpute
