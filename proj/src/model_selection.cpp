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

#include "medimpute/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "medimpute/errors.hpp"

namespace medimpute {

HyperGrid HyperGrid::from_json(const nlohmann::json& j) {
    HyperGrid g;
    try {
        if (j.contains("alphas")) g.alphas = j.at("alphas").get<std::vector<double>>();
        if (j.contains("lambdas")) g.lambdas = j.at("lambdas").get<std::vector<double>>();
        if (j.contains("ks")) g.ks = j.at("ks").get<std::vector<std::size_t>>();
        g.per_feature = j.value("per_feature", false);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed grid: ") + e.what());
    }
    g.validate();
    return g;
}

nlohmann::json HyperGrid::to_json() const {
    return {{"alphas", alphas}, {"lambdas", lambdas}, {"ks", ks}, {"per_feature", per_feature}};
}

void HyperGrid::validate() const {
    if (alphas.empty() || lambdas.empty() || ks.empty()) throw InvalidArgument("grid lists must be non-empty");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("grid alpha outside [0, 1]");
    for (double l : lambdas)
        if (!(l > 0.0 && l <= 1.0)) throw InvalidArgument("grid lambda outside (0, 1]");
    for (std::size_t k : ks)
        if (k == 0) throw InvalidArgument("grid k must be positive");
}

nlohmann::json CVReport::to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points)
        pts.push_back({{"alpha", p.alpha},
                       {"lambda", p.lambda},
                       {"k", p.k},
                       {"mae", p.mae},
                       {"misclassification", p.misclassification},
                       {"score", p.score},
                       {"fold_scores", p.fold_scores},
                       {"continuous_cells", p.continuous_cells},
                       {"categorical_cells", p.categorical_cells}});
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : refinements)
        refs.push_back({{"feature", r.feature}, {"alpha", r.alpha}, {"lambda", r.lambda}, {"score", r.score}});
    return {{"folds", folds},
            {"fold_redraws", fold_redraws},
            {"points", pts},
            {"selected_point", selected_point},
            {"selected", {{"alpha", selected.alpha}, {"lambda", selected.lambda}, {"k", selected.k}}},
            {"selected_score", selected_score},
            {"refinements", refs}};
}

FoldPartition make_folds(const PanelDataset& ds, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
    std::vector<Cell> observed;
    std::vector<std::size_t> observed_per_feature(ds.n_features(), 0);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d)
            if (!ds.is_missing(i, d)) {
                observed.push_back({i, d});
                ++observed_per_feature[d];
            }
    if (observed.size() < folds) throw InvalidArgument("fewer observed cells than folds");

    constexpr std::size_t max_attempts = 10;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(attempt)};
        std::mt19937_64 rng(seq);
        auto cells = observed;
        std::shuffle(cells.begin(), cells.end(), rng);
        FoldPartition part;
        part.redraws = attempt;
        part.folds.resize(folds);
        for (std::size_t c = 0; c < cells.size(); ++c) part.folds[c % folds].push_back(cells[c]);
        bool valid = true;
        for (auto& fold : part.folds) {
            std::sort(fold.begin(), fold.end());
            std::vector<std::size_t> held(ds.n_features(), 0);
            for (const Cell& c : fold) ++held[c.feature];
            for (std::size_t d = 0; d < ds.n_features(); ++d)
                if (held[d] == observed_per_feature[d]) valid = false;
        }
        if (valid) return part;
    }
    throw DataError("could not draw folds that leave every column observed");
}

namespace {

struct FoldData {
    PanelDataset masked;
    std::vector<MaskedCell> held_out;
};

bool better(const GridPointScore& a, const GridPointScore& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    return a.k < b.k;
}

GridPointScore evaluate(const std::vector<FoldData>& folds, const Hyperparams& hp, const SolverConfig& cfg) {
    GridPointScore point;
    point.k = hp.k;
    double abs_sum = 0.0;
    std::size_t mismatches = 0;
    for (const auto& fold : folds) {
        SolverConfig run = cfg;
        run.hyper = hp;
        const auto result = med_impute(fold.masked, run);
        double fold_abs = 0.0;
        std::size_t fold_mis = 0;
        for (const auto& mc : fold.held_out) {
            const auto [i, d] = mc.cell;
            if (result.completed.is_continuous(d)) {
                fold_abs += std::abs(result.completed.continuous(i, d) - mc.true_value);
                ++point.continuous_cells;
            } else {
                if (result.completed.category(i, d) != static_cast<int>(mc.true_value)) ++fold_mis;
                ++point.categorical_cells;
            }
        }
        abs_sum += fold_abs;
        mismatches += fold_mis;
        point.fold_scores.push_back((fold_abs + static_cast<double>(fold_mis)) /
                                    static_cast<double>(fold.held_out.size()));
    }
    point.mae = point.continuous_cells ? abs_sum / static_cast<double>(point.continuous_cells) : 0.0;
    point.misclassification =
        point.categorical_cells ? static_cast<double>(mismatches) / static_cast<double>(point.categorical_cells) : 0.0;
    double total = 0.0;
    for (double s : point.fold_scores) total += s;
    point.score = total / static_cast<double>(point.fold_scores.size());
    return point;
}

}  // namespace

CVReport cross_validate(const PanelDataset& ds, const HyperGrid& grid, std::size_t folds, std::uint64_t seed,
                        const SolverConfig& cfg) {
    grid.validate();
    const std::size_t p = ds.n_features();
    auto partition = make_folds(ds, folds, seed);

    std::vector<FoldData> fold_data;
    for (const auto& cells : partition.folds) {
        FoldData fd{ds.with_missing(cells), {}};
        for (const Cell& c : cells) fd.held_out.push_back({c, *ds.value(c.row, c.feature)});
        fold_data.push_back(std::move(fd));
    }

    CVReport report;
    report.folds = folds;
    report.fold_redraws = partition.redraws;
    // lambda is inert at alpha = 0, so those points are solved once per k.
    std::map<std::size_t, GridPointScore> alpha_zero;
    for (std::size_t k : grid.ks)
        for (double a : grid.alphas)
            for (double l : grid.lambdas) {
                GridPointScore point;
                if (a == 0.0) {
                    auto it = alpha_zero.find(k);
                    if (it == alpha_zero.end())
                        it = alpha_zero.emplace(k, evaluate(fold_data, Hyperparams::shared(p, 0.0, l, k), cfg)).first;
                    point = it->second;
                } else {
                    point = evaluate(fold_data, Hyperparams::shared(p, a, l, k), cfg);
                }
                point.alpha = a;
                point.lambda = l;
                report.points.push_back(std::move(point));
            }

    for (std::size_t q = 1; q < report.points.size(); ++q)
        if (better(report.points[q], report.points[report.selected_point])) report.selected_point = q;
    const auto& winner = report.points[report.selected_point];
    report.selected = Hyperparams::shared(p, winner.alpha, winner.lambda, winner.k);
    report.selected_score = winner.score;

    if (grid.per_feature) {
        // One greedy pass: refine feature d's pair with the others held fixed.
        for (std::size_t d = 0; d < p; ++d) {
            GridPointScore current;
            current.alpha = report.selected.alpha[d];
            current.lambda = report.selected.lambda[d];
            current.k = report.selected.k;
            current.score = report.selected_score;
            for (double a : grid.alphas)
                for (double l : grid.lambdas) {
                    if (a == report.selected.alpha[d] && l == report.selected.lambda[d]) continue;
                    Hyperparams hp = report.selected;
                    hp.alpha[d] = a;
                    hp.lambda[d] = l;
                    auto candidate = evaluate(fold_data, hp, cfg);
                    candidate.alpha = a;
                    candidate.lambda = l;
                    if (better(candidate, current)) current = std::move(candidate);
                }
            report.selected.alpha[d] = current.alpha;
            report.selected.lambda[d] = current.lambda;
            report.selected_score = current.score;
            report.refinements.push_back({d, current.alpha, current.lambda, current.score});
        }
    }
    return report;
}

}  // namespace medimpute
