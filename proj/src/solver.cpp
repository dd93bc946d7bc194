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

#include "medimpute/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "medimpute/errors.hpp"

namespace medimpute {

namespace {

constexpr double restart_noise_sd = 0.5;

std::vector<Cell> missing_cells(const PanelDataset& ds) {
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d)
            if (ds.is_missing(i, d)) cells.push_back({i, d});
    return cells;
}

std::vector<CellSource> base_provenance(const PanelDataset& ds) {
    std::vector<CellSource> prov(ds.n_rows() * ds.n_features(), CellSource::observed);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d)
            if (ds.is_missing(i, d)) prov[i * ds.n_features() + d] = CellSource::imputed;
    return prov;
}

struct RestartOutcome {
    CompletedMatrix completed;
    RestartTrace trace;
    std::vector<std::uint8_t> fallback;
    double objective = 0.0;
};

// One restart of block coordinate descent: neighbor reassignment alternated
// with a row-major sweep of exact cell updates.
RestartOutcome descend(CompletedMatrix cm, std::span<const Cell> cells, std::span<const std::size_t> rows,
                       std::span<const double> centers, const Hyperparams& hp, const DecayTable& dt,
                       const SolverConfig& cfg) {
    RestartOutcome out;
    out.fallback.assign(cells.size(), 0);
    auto na = assign_neighbors(cm, rows, hp.k);
    double obj = objective_value(cm, na, hp, dt);
    out.trace.objective.push_back(obj);
    for (std::size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto [i, d] = cells[c];
            if (cm.is_continuous(d)) {
                const auto x = update_continuous_cell(i, d, na, cm, hp, dt);
                cm.set_continuous(i, d, x ? *x : centers[d]);
                out.fallback[c] = x ? 0 : 1;
            } else {
                const auto v = update_categorical_cell(i, d, na, cm, hp, dt);
                cm.set_category(i, d, v ? *v : static_cast<int>(centers[d]));
                out.fallback[c] = v ? 0 : 1;
            }
        }
        na = assign_neighbors(cm, rows, hp.k);
        const double next = objective_value(cm, na, hp, dt);
        if (!std::isfinite(next)) throw NumericalError("objective became non-finite during coordinate descent");
        out.trace.objective.push_back(next);
        out.trace.sweeps = sweep;
        const double improvement = obj > 0.0 ? (obj - next) / obj : 0.0;
        obj = next;
        if (improvement < cfg.rel_tolerance) break;
    }
    out.objective = obj;
    out.completed = std::move(cm);
    return out;
}

}  // namespace

void SolverConfig::validate(std::size_t p, std::size_t n) const {
    hyper.validate(p, n);
    if (max_sweeps == 0) throw InvalidArgument("max_sweeps must be at least 1");
    if (!(rel_tolerance > 0.0)) throw InvalidArgument("rel_tolerance must be positive");
}

std::vector<double> observed_column_centers(const PanelDataset& ds) {
    std::vector<double> centers(ds.n_features(), 0.0);
    for (std::size_t d = 0; d < ds.n_features(); ++d) {
        if (ds.is_continuous(d)) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < ds.n_rows(); ++i)
                if (auto x = ds.continuous(i, d)) {
                    sum += *x;
                    ++count;
                }
            if (count == 0) throw DataError("unimputable column '" + ds.feature(d).name + "': no observed entries");
            centers[d] = sum / static_cast<double>(count);
        } else {
            std::vector<std::size_t> counts(static_cast<std::size_t>(ds.cardinality(d)), 0);
            std::size_t total = 0;
            for (std::size_t i = 0; i < ds.n_rows(); ++i)
                if (auto c = ds.category(i, d)) {
                    ++counts[static_cast<std::size_t>(*c)];
                    ++total;
                }
            if (total == 0) throw DataError("unimputable column '" + ds.feature(d).name + "': no observed entries");
            centers[d] = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        }
    }
    return centers;
}

CompletedMatrix warm_start(const PanelDataset& ds, std::size_t restart_index, std::uint64_t seed) {
    const auto centers = observed_column_centers(ds);
    CompletedMatrix cm(ds, centers);
    if (restart_index == 0) return cm;

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(restart_index)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, restart_noise_sd);
    std::vector<std::discrete_distribution<int>> frequency(ds.n_features());
    for (std::size_t d = ds.n_continuous(); d < ds.n_features(); ++d) {
        std::vector<double> counts(static_cast<std::size_t>(ds.cardinality(d)), 0.0);
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
            if (auto c = ds.category(i, d)) counts[static_cast<std::size_t>(*c)] += 1.0;
        frequency[d] = std::discrete_distribution<int>(counts.begin(), counts.end());
    }
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d) {
            if (!ds.is_missing(i, d)) continue;
            if (ds.is_continuous(d))
                cm.set_continuous(i, d, centers[d] + noise(rng));
            else
                cm.set_category(i, d, frequency[d](rng));
        }
    return cm;
}

ImputationResult med_impute(const PanelDataset& ds, const SolverConfig& cfg) {
    cfg.validate(ds.n_features(), ds.n_rows());
    const auto centers = observed_column_centers(ds);
    const auto cells = missing_cells(ds);

    ImputationResult result;
    result.provenance = base_provenance(ds);
    if (cells.empty()) {
        result.completed = CompletedMatrix(ds, centers);
        result.restarts.push_back(RestartTrace{{0.0}, 0});
        return result;
    }

    const DecayTable dt(ds, cfg.hyper);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        if (ds.row_incomplete(i)) rows.push_back(i);

    // Without same-individual pairs only the K-NN term is left. A feature with
    // alpha_d < 1 gets the same weighted-mean updates as at alpha = 0, and one
    // with alpha_d = 1 carries no cost at all, so descend on the alpha = 0
    // problem and match opt_impute exactly.
    Hyperparams solve_hp = cfg.hyper;
    if (dt.empty()) std::fill(solve_hp.alpha.begin(), solve_hp.alpha.end(), 0.0);

    std::vector<std::uint8_t> best_fallback;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r <= cfg.n_restarts; ++r) {
        auto outcome = descend(warm_start(ds, r, cfg.seed), cells, rows, centers, solve_hp, dt, cfg);
        result.restarts.push_back(outcome.trace);
        if (outcome.objective < best) {
            best = outcome.objective;
            result.best_restart = r;
            result.completed = std::move(outcome.completed);
            best_fallback = std::move(outcome.fallback);
        }
    }
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (best_fallback[c]) result.provenance[cells[c].row * ds.n_features() + cells[c].feature] = CellSource::fallback;

    const auto na = assign_neighbors(result.completed, rows, cfg.hyper.k);
    result.objective = objective_value(result.completed, na, cfg.hyper, dt);
    return result;
}

ImputationResult opt_impute(const PanelDataset& ds, const SolverConfig& cfg) {
    SolverConfig zeroed = cfg;
    std::fill(zeroed.hyper.alpha.begin(), zeroed.hyper.alpha.end(), 0.0);
    return med_impute(ds, zeroed);
}

ImputationResult mean_impute(const PanelDataset& ds) {
    ImputationResult result;
    result.completed = CompletedMatrix(ds, observed_column_centers(ds));
    result.provenance = base_provenance(ds);
    result.objective = std::numeric_limits<double>::quiet_NaN();
    return result;
}

}  // namespace medimpute
