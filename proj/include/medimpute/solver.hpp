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

#include "medimpute/knn.hpp"
#include "medimpute/panel.hpp"

namespace medimpute {

struct SolverConfig {
    Hyperparams hyper;
    std::size_t max_sweeps = 50;
    double rel_tolerance = 1e-6;
    /// Extra randomized restarts on top of the mean/mode warm start.
    std::size_t n_restarts = 5;
    std::uint64_t seed = 0;

    void validate(std::size_t p, std::size_t n) const;
};

enum class CellSource : std::uint8_t { observed, imputed, fallback };

struct RestartTrace {
    /// Objective after the warm start, then after each (assignment + sweep) iteration.
    std::vector<double> objective;
    std::size_t sweeps = 0;
};

struct ImputationResult {
    CompletedMatrix completed;
    /// objective_value of `completed` under a fresh neighbor assignment.
    double objective = 0.0;
    std::vector<RestartTrace> restarts;
    std::size_t best_restart = 0;
    /// n x p row-major.
    std::vector<CellSource> provenance;

    CellSource source(std::size_t i, std::size_t d) const { return provenance[i * completed.n_features() + d]; }
};

/// Observed mean of every continuous column and observed mode (smallest code
/// on ties) of every categorical column. Throws DataError("unimputable
/// column ...") when a column has no observed entry.
std::vector<double> observed_column_centers(const PanelDataset& ds);

/// Restart 0 fills with observed means/modes. Restart r >= 1 adds N(0, 0.5^2)
/// noise to the means and draws categories from the observed frequencies.
CompletedMatrix warm_start(const PanelDataset& ds, std::size_t restart_index, std::uint64_t seed);

/// Block coordinate descent on the med.impute objective with random restarts.
/// Each iteration reassigns neighbors, then sweeps exact cell updates over the
/// missing cells in row-major order. Returns the restart with the lowest objective.
ImputationResult med_impute(const PanelDataset& ds, const SolverConfig& cfg);

/// med_impute with every alpha_d forced to 0.
ImputationResult opt_impute(const PanelDataset& ds, const SolverConfig& cfg);

/// Observed column mean / mode fill.
ImputationResult mean_impute(const PanelDataset& ds);

}  // namespace medimpute
