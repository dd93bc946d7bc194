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

// Fixture builders and brute-force reference implementations shared by the
// unit tests and the acceptance runner. Nothing here calls into the library
// code it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "medimpute/downstream.hpp"
#include "medimpute/knn.hpp"
#include "medimpute/panel.hpp"

namespace medimpute::testing {

inline constexpr double NA = std::numeric_limits<double>::quiet_NaN();
inline constexpr int NA_CODE = -1;

/// Panel from row-major blocks; rows must already be grouped and time-sorted.
/// NaN marks a missing continuous cell, -1 a missing category.
inline PanelDataset make_panel(const std::vector<std::size_t>& individual, const std::vector<double>& time,
                               std::size_t p0, const std::vector<int>& levels, const std::vector<double>& cont,
                               const std::vector<int>& cat) {
    PanelDataset::Storage s;
    for (std::size_t d = 0; d < p0; ++d) s.features.push_back({"x" + std::to_string(d), FeatureKind::continuous, {}});
    for (std::size_t c = 0; c < levels.size(); ++c) {
        Feature f{"c" + std::to_string(c), FeatureKind::categorical, {}};
        for (int l = 0; l < levels[c]; ++l) f.levels.push_back("l" + std::to_string(l));
        s.features.push_back(f);
    }
    const std::size_t n = individual.size();
    const std::size_t p1 = levels.size();
    const std::size_t m = n ? *std::max_element(individual.begin(), individual.end()) + 1 : 0;
    for (std::size_t i = 0; i < m; ++i) s.individual_labels.push_back("id" + std::to_string(i));
    s.individual = individual;
    s.timestamp = time;
    s.continuous = cont;
    s.categorical = cat;
    s.missing.assign(n * (p0 + p1), 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < p0; ++d)
            if (std::isnan(cont[i * p0 + d])) s.missing[i * (p0 + p1) + d] = 1;
        for (std::size_t c = 0; c < p1; ++c)
            if (cat[i * p1 + c] < 0) s.missing[i * (p0 + p1) + p0 + c] = 1;
    }
    return PanelDataset(std::move(s));
}

struct RandomPanelOptions {
    std::size_t individuals = 3;
    std::size_t min_obs = 1;
    std::size_t max_obs = 4;
    std::size_t p0 = 2;
    std::size_t p1 = 1;
    int levels = 3;
    double missing = 0.2;
    /// Continuous values drawn from {0, 0.5, ..., 2} so distance ties are common.
    bool coarse = false;
    /// Integer timestamps, which keep lambda = 0.5 decays exact.
    bool integer_times = true;
};

/// Random panel that keeps at least one observed entry per column.
template <class Rng>
PanelDataset random_panel(Rng& rng, const RandomPanelOptions& o) {
    std::uniform_int_distribution<std::size_t> obs(o.min_obs, o.max_obs);
    std::uniform_int_distribution<int> gap(1, 3);
    std::uniform_int_distribution<int> level(0, o.levels - 1);
    std::uniform_int_distribution<int> half(0, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (;;) {
        std::vector<std::size_t> ind;
        std::vector<double> time, cont;
        std::vector<int> cat;
        for (std::size_t m = 0; m < o.individuals; ++m) {
            double t = static_cast<double>(gap(rng)) - 1.0;
            const std::size_t k = obs(rng);
            for (std::size_t r = 0; r < k; ++r) {
                ind.push_back(m);
                time.push_back(o.integer_times ? t : t + 0.25 * unit(rng));
                t += gap(rng);
                for (std::size_t d = 0; d < o.p0; ++d) {
                    const double x = o.coarse ? 0.5 * half(rng) : gauss(rng);
                    cont.push_back(unit(rng) < o.missing ? NA : x);
                }
                for (std::size_t c = 0; c < o.p1; ++c) {
                    const int v = level(rng);
                    cat.push_back(unit(rng) < o.missing ? NA_CODE : v);
                }
            }
        }
        const std::size_t n = ind.size();
        bool ok = n >= 2;
        for (std::size_t d = 0; ok && d < o.p0; ++d) {
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) any = any || !std::isnan(cont[i * o.p0 + d]);
            ok = any;
        }
        for (std::size_t c = 0; ok && c < o.p1; ++c) {
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) any = any || cat[i * o.p1 + c] >= 0;
            ok = any;
        }
        if (ok) return make_panel(ind, time, o.p0, std::vector<int>(o.p1, o.levels), cont, cat);
    }
}

/// Completed matrix whose missing cells hold random values.
template <class Rng>
CompletedMatrix random_completion(Rng& rng, const PanelDataset& ds, bool coarse) {
    std::vector<double> fill(ds.n_features(), 0.0);
    CompletedMatrix cm(ds, fill);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> half(0, 4);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < ds.n_features(); ++d) {
            if (!ds.is_missing(i, d)) continue;
            if (ds.is_continuous(d)) {
                cm.set_continuous(i, d, coarse ? 0.5 * half(rng) : gauss(rng));
            } else {
                std::uniform_int_distribution<int> lv(0, ds.cardinality(d) - 1);
                cm.set_category(i, d, lv(rng));
            }
        }
    return cm;
}

/// Per-feature contribution to the distance between rows i and j.
inline double feature_distance(const CompletedMatrix& cm, std::size_t i, std::size_t j, std::size_t d) {
    if (cm.is_continuous(d)) {
        const double diff = cm.continuous(i, d) - cm.continuous(j, d);
        return diff * diff;
    }
    return cm.category(i, d) != cm.category(j, d) ? 1.0 : 0.0;
}

/// Distance summed feature by feature in declaration order.
inline double naive_distance(const CompletedMatrix& cm, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < cm.n_features(); ++d) s += feature_distance(cm, i, j, d);
    return s;
}

/// Full sort of all candidate neighbors by (distance, index).
inline std::vector<std::vector<std::size_t>> sorted_neighbors(const CompletedMatrix& cm,
                                                              const std::vector<std::size_t>& rows, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i : rows) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < cm.n_rows(); ++j)
            if (j != i) all.emplace_back(naive_distance(cm, i, j), j);
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> pick;
        for (std::size_t r = 0; r < k; ++r) pick.push_back(all[r].second);
        out.push_back(pick);
    }
    return out;
}

/// Neighbor lists in incomplete-row order, the layout naive_objective expects.
inline std::vector<std::vector<std::size_t>> neighbor_lists(const NeighborAssignment& na) {
    std::vector<std::vector<std::size_t>> z;
    for (std::size_t i : na.incomplete_rows()) {
        const auto nb = na.neighbors(i);
        z.emplace_back(nb.begin(), nb.end());
    }
    return z;
}

inline double naive_decay(const PanelDataset& ds, const Hyperparams& hp, std::size_t i, std::size_t j, std::size_t d) {
    if (i == j || ds.individual(i) != ds.individual(j)) return 0.0;
    return std::pow(hp.lambda[d], std::abs(ds.timestamp(i) - ds.timestamp(j)));
}

/// Literal double sum of the objective. `z[a]` lists the neighbors of the
/// a-th incomplete row, `rows` the incomplete rows themselves.
inline double naive_objective(const CompletedMatrix& cm, const PanelDataset& ds, const Hyperparams& hp,
                              const std::vector<std::size_t>& rows, const std::vector<std::vector<std::size_t>>& z) {
    double total = 0.0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        for (std::size_t j = 0; j < cm.n_rows(); ++j) {
            const bool nb = std::find(z[a].begin(), z[a].end(), j) != z[a].end();
            for (std::size_t d = 0; d < cm.n_features(); ++d) {
                const double dist = feature_distance(cm, i, j, d);
                if (nb) total += (1.0 - hp.alpha[d]) * dist;
                total += hp.alpha[d] * naive_decay(ds, hp, i, j, d) * dist;
            }
        }
    }
    return total;
}

/// Every (coefficient, partner) pair through which cell (i, d) enters the
/// objective, read off the double sum term by term.
inline std::vector<std::pair<double, std::size_t>> cell_terms(const PanelDataset& ds, const Hyperparams& hp,
                                                              const std::vector<std::size_t>& rows,
                                                              const std::vector<std::vector<std::size_t>>& z,
                                                              std::size_t i, std::size_t d) {
    std::vector<std::pair<double, std::size_t>> terms;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t r = rows[a];
        for (std::size_t j = 0; j < ds.n_rows(); ++j) {
            if (r != i && j != i) continue;
            if (r == i && j == i) continue;
            const std::size_t partner = r == i ? j : r;
            const bool nb = std::find(z[a].begin(), z[a].end(), j) != z[a].end();
            double coef = 0.0;
            if (nb) coef += 1.0 - hp.alpha[d];
            coef += hp.alpha[d] * naive_decay(ds, hp, r, j, d);
            if (coef != 0.0) terms.emplace_back(coef, partner);
        }
    }
    return terms;
}

/// Golden-section minimizer of sum_j c_j (x - w_j)^2. Comparisons use the
/// factored difference f(x1) - f(x2) = (x1 - x2) sum_j c_j (x1 + x2 - 2 w_j),
/// which stays accurate near the minimum where f itself is flat.
inline double golden_section_min(const std::vector<std::pair<double, double>>& coef_value) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [c, w] : coef_value) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
    }
    auto less = [&](double x1, double x2) {
        double s = 0.0;
        for (const auto& [c, w] : coef_value) s += c * ((x1 - w) + (x2 - w));
        return (x1 - x2) * s < 0.0;
    };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    for (int it = 0; it < 400 && b - a > 1e-14 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
        if (less(x1, x2)) {
            b = x2;
            x2 = x1;
            x1 = b - g * (b - a);
        } else {
            a = x1;
            x1 = x2;
            x2 = a + g * (b - a);
        }
    }
    return 0.5 * (a + b);
}

/// Counts positive/negative pairs directly.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        if (y[a] != 1) continue;
        for (std::size_t b = 0; b < s.size(); ++b) {
            if (y[b] != 0) continue;
            pairs += 1.0;
            if (s[a] > s[b]) wins += 1.0;
            else if (s[a] == s[b]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// One-sided sign-test p-value: P(Binomial(n, 1/2) >= wins).
inline double sign_test_p(std::size_t wins, std::size_t n) {
    double p = 0.0;
    for (std::size_t x = wins; x <= n; ++x) {
        double c = 1.0;
        for (std::size_t r = 0; r < x; ++r) c = c * static_cast<double>(n - r) / static_cast<double>(r + 1);
        p += c * std::pow(0.5, static_cast<double>(n));
    }
    return p;
}

/// Design matrix from a row-major array.
inline DesignMatrix make_design(std::size_t rows, std::size_t cols, std::vector<double> values) {
    DesignMatrix X;
    X.rows = rows;
    X.cols = cols;
    X.values = std::move(values);
    for (std::size_t r = 0; r < rows; ++r) X.individual.push_back(r);
    for (std::size_t c = 0; c < cols; ++c) X.column_names.push_back("f" + std::to_string(c));
    return X;
}

/// Mean log-loss computed term by term with log1p(exp(.)).
inline double naive_logloss(const DesignMatrix& X, const std::vector<int>& y, const std::vector<double>& w, double b) {
    double total = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        double s = b;
        for (std::size_t c = 0; c < X.cols; ++c) s += X(r, c) * w[c];
        const double m = y[r] ? -s : s;
        total += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    }
    return total / static_cast<double>(X.rows);
}

}  // namespace medimpute::testing
