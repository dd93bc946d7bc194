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
#include <vector>

#include <json.hpp>

#include "medimpute/knn.hpp"
#include "medimpute/panel.hpp"
#include "medimpute/solver.hpp"

namespace medimpute {

/// Candidate values for cross-validation. alpha and lambda are shared across
/// features unless per_feature is set, in which case the shared winner is
/// refined one feature at a time (single greedy pass).
struct HyperGrid {
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> lambdas{0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<std::size_t> ks{10};
    bool per_feature = false;

    static HyperGrid from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct GridPointScore {
    double alpha = 0.0;
    double lambda = 1.0;
    std::size_t k = 10;
    /// Pooled over folds.
    double mae = 0.0;
    double misclassification = 0.0;
    /// Mean over folds of the cell-count-weighted combination of both errors.
    double score = 0.0;
    std::vector<double> fold_scores;
    std::size_t continuous_cells = 0;
    std::size_t categorical_cells = 0;
};

struct FeatureRefinement {
    std::size_t feature = 0;
    double alpha = 0.0;
    double lambda = 1.0;
    double score = 0.0;
};

struct CVReport {
    std::vector<GridPointScore> points;
    std::size_t selected_point = 0;
    Hyperparams selected;
    double selected_score = 0.0;
    std::size_t folds = 0;
    std::size_t fold_redraws = 0;
    std::vector<FeatureRefinement> refinements;

    nlohmann::json to_json() const;
};

/// Partitions the observed cells into `folds` groups whose sizes differ by at
/// most one. Each fold is drawn so that masking it leaves every column with
/// an observed entry; up to 10 partitions are tried before DataError.
struct FoldPartition {
    std::vector<std::vector<Cell>> folds;
    std::size_t redraws = 0;
};
FoldPartition make_folds(const PanelDataset& ds, std::size_t folds, std::uint64_t seed);

/// Selects alpha, lambda (and k) by held-out imputation error of med_impute.
/// Ties go to smaller alpha, then larger lambda, then smaller k.
CVReport cross_validate(const PanelDataset& ds, const HyperGrid& grid, std::size_t folds, std::uint64_t seed,
                        const SolverConfig& cfg);

}  // namespace medimpute
