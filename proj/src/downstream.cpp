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

#include "medimpute/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medimpute/errors.hpp"

namespace medimpute {

MetricReport imputation_error(const CompletedMatrix& imputed, const MaskRecord& record) {
    if (record.cells.empty()) throw InvalidArgument("nothing to score: mask record is empty");
    const std::size_t p = imputed.n_features();
    MetricReport r;
    std::vector<double> feature_abs(p, 0.0);
    std::vector<std::size_t> feature_count(p, 0);
    double abs_sum = 0.0;
    std::size_t wrong = 0;
    for (const auto& mc : record.cells) {
        const auto [i, d] = mc.cell;
        if (i >= imputed.n_rows() || d >= p) throw InvalidArgument("mask record cell outside the matrix");
        if (imputed.is_continuous(d)) {
            const double e = std::abs(imputed.continuous(i, d) - mc.true_value);
            abs_sum += e;
            feature_abs[d] += e;
            ++feature_count[d];
            ++r.continuous_cells;
        } else {
            if (imputed.category(i, d) != static_cast<int>(mc.true_value)) ++wrong;
            ++r.categorical_cells;
        }
    }
    r.mae = r.continuous_cells ? abs_sum / static_cast<double>(r.continuous_cells) : 0.0;
    r.misclassification =
        r.categorical_cells ? static_cast<double>(wrong) / static_cast<double>(r.categorical_cells) : 0.0;
    r.feature_mae.assign(p, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t d = 0; d < p; ++d)
        if (feature_count[d]) r.feature_mae[d] = feature_abs[d] / static_cast<double>(feature_count[d]);
    return r;
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> picked) const {
    DesignMatrix out;
    out.cols = cols;
    out.column_names = column_names;
    out.rows = picked.size();
    for (std::size_t r : picked) {
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.individual.push_back(individual[r]);
    }
    return out;
}

DesignMatrix latest_observation_matrix(const CompletedMatrix& imputed, const PanelDataset& ds) {
    if (imputed.n_rows() != ds.n_rows() || imputed.n_features() != ds.n_features())
        throw InvalidArgument("completed matrix does not match the dataset");
    DesignMatrix X;
    for (std::size_t d = 0; d < ds.n_features(); ++d) {
        if (ds.is_continuous(d)) {
            X.column_names.push_back(ds.feature(d).name);
        } else {
            for (int l = 1; l < ds.cardinality(d); ++l)
                X.column_names.push_back(ds.feature(d).name + "=" + ds.feature(d).levels[static_cast<std::size_t>(l)]);
        }
    }
    X.cols = X.column_names.size();
    X.rows = ds.n_individuals();
    X.values.reserve(X.rows * X.cols);
    for (std::size_t ind = 0; ind < ds.n_individuals(); ++ind) {
        const std::size_t i = ds.individual_rows(ind).second - 1;
        X.individual.push_back(ind);
        for (std::size_t d = 0; d < ds.n_features(); ++d) {
            if (ds.is_continuous(d)) {
                X.values.push_back(imputed.continuous(i, d));
            } else {
                for (int l = 1; l < ds.cardinality(d); ++l) X.values.push_back(imputed.category(i, d) == l ? 1.0 : 0.0);
            }
        }
    }
    return X;
}

void standardize_columns(DesignMatrix& X, const DesignMatrix& fit_rows) {
    for (std::size_t c = 0; c < X.cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < fit_rows.rows; ++r) sum += fit_rows(r, c);
        const double mean = fit_rows.rows ? sum / static_cast<double>(fit_rows.rows) : 0.0;
        double ss = 0.0;
        for (std::size_t r = 0; r < fit_rows.rows; ++r) ss += (fit_rows(r, c) - mean) * (fit_rows(r, c) - mean);
        double sd = fit_rows.rows > 1 ? std::sqrt(ss / static_cast<double>(fit_rows.rows - 1)) : 0.0;
        if (!(sd > 0.0)) sd = 1.0;
        for (std::size_t r = 0; r < X.rows; ++r) X.values[r * X.cols + c] = (X.values[r * X.cols + c] - mean) / sd;
    }
}

double LogisticModel::linear_score(std::span<const double> x) const {
    double s = intercept;
    for (std::size_t c = 0; c < weights.size(); ++c) s += weights[c] * x[c];
    return s;
}

namespace {

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double linear(const DesignMatrix& X, std::size_t r, std::span<const double> w, double b) {
    double s = b;
    const auto x = X.row(r);
    for (std::size_t c = 0; c < X.cols; ++c) s += w[c] * x[c];
    return s;
}

double l1_norm(std::span<const double> w) {
    double t = 0.0;
    for (double x : w) t += std::abs(x);
    return t;
}

void require_both_classes(std::span<const int> y) {
    const auto pos = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size()))
        throw InvalidArgument("labels must contain both classes");
}

}  // namespace

double logistic_loss(const DesignMatrix& X, std::span<const int> y, std::span<const double> w, double b) {
    double total = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double s = linear(X, r, w, b);
        total += softplus(s) - (y[r] != 0 ? s : 0.0);
    }
    return total / static_cast<double>(X.rows);
}

std::vector<double> logistic_loss_gradient(const DesignMatrix& X, std::span<const int> y, std::span<const double> w,
                                           double b) {
    std::vector<double> g(X.cols + 1, 0.0);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double resid = sigmoid(linear(X, r, w, b)) - (y[r] != 0 ? 1.0 : 0.0);
        const auto x = X.row(r);
        for (std::size_t c = 0; c < X.cols; ++c) g[c] += resid * x[c];
        g[X.cols] += resid;
    }
    for (double& v : g) v /= static_cast<double>(X.rows);
    return g;
}

LogisticModel fit_l1_logistic(const DesignMatrix& X, std::span<const int> y, double reg) {
    if (y.size() != X.rows) throw InvalidArgument("label count does not match design rows");
    require_both_classes(y);
    if (!(reg >= 0.0)) throw InvalidArgument("regularization strength must be non-negative");

    constexpr std::size_t max_iterations = 10000;
    constexpr double tolerance = 1e-8;

    LogisticModel m;
    m.reg = reg;
    m.weights.assign(X.cols, 0.0);
    const double base = static_cast<double>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; })) /
                        static_cast<double>(y.size());
    m.intercept = std::log(base / (1.0 - base));

    double step = 1.0;
    double smooth = logistic_loss(X, y, m.weights, m.intercept);
    double objective = smooth + reg * l1_norm(m.weights);
    m.objective_trace.push_back(objective);
    std::vector<double> w_next(X.cols);
    while (m.iterations < max_iterations) {
        const auto g = logistic_loss_gradient(X, y, m.weights, m.intercept);
        // Let the step grow again after the previous line search shrank it.
        step *= 2.0;
        double b_next = 0.0, smooth_next = 0.0;
        for (;;) {
            double model = smooth, dist2 = 0.0;
            for (std::size_t c = 0; c < X.cols; ++c) {
                const double z = m.weights[c] - step * g[c];
                const double shrink = step * reg;
                w_next[c] = z > shrink ? z - shrink : (z < -shrink ? z + shrink : 0.0);
                const double delta = w_next[c] - m.weights[c];
                model += g[c] * delta;
                dist2 += delta * delta;
            }
            b_next = m.intercept - step * g[X.cols];
            const double delta_b = b_next - m.intercept;
            model += g[X.cols] * delta_b + (dist2 + delta_b * delta_b) / (2.0 * step);
            smooth_next = logistic_loss(X, y, w_next, b_next);
            if (smooth_next <= model) break;
            step *= 0.5;
            if (step < 1e-20) throw NumericalError("line search failed in l1-logistic fit");
        }
        const double next = smooth_next + reg * l1_norm(w_next);
        if (!std::isfinite(next)) throw NumericalError("l1-logistic objective became non-finite");
        ++m.iterations;
        if (next > objective) {
            m.converged = true;
            break;
        }
        const double change = (objective - next) / std::max(std::abs(objective), 1e-300);
        m.weights = w_next;
        m.intercept = b_next;
        smooth = smooth_next;
        objective = next;
        m.objective_trace.push_back(objective);
        if (change < tolerance) {
            m.converged = true;
            break;
        }
    }
    return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    require_both_classes(labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the mid-rank keeps every quantity an exact integer.
    double positive_rank2 = 0.0;
    std::size_t positives = 0;
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
        const double rank2 = static_cast<double>(lo + 1 + hi);
        for (std::size_t q = lo; q < hi; ++q)
            if (labels[order[q]] != 0) {
                positive_rank2 += rank2;
                ++positives;
            }
        lo = hi;
    }
    const double pos = static_cast<double>(positives);
    const double neg = static_cast<double>(n - positives);
    const double u2 = positive_rank2 - pos * (pos + 1.0);
    return (u2 / 2.0) / (pos * neg);
}

namespace {

struct Split {
    std::vector<std::size_t> train, test;
};

bool both_classes(const std::vector<std::size_t>& idx, std::span<const int> labels) {
    bool pos = false, neg = false;
    for (std::size_t r : idx) (labels[r] ? pos : neg) = true;
    return pos && neg;
}

std::vector<int> gather(std::span<const int> labels, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    for (std::size_t r : idx) out.push_back(labels[r]);
    return out;
}

double held_out_auc(const DesignMatrix& X, std::span<const int> labels, const std::vector<std::size_t>& train,
                    const std::vector<std::size_t>& test, double reg) {
    const auto Xtr = X.select_rows(train);
    const auto ytr = gather(labels, train);
    const auto model = fit_l1_logistic(Xtr, ytr, reg);
    std::vector<double> scores;
    for (std::size_t r : test) scores.push_back(model.linear_score(X.row(r)));
    return auc(scores, gather(labels, test));
}

}  // namespace

DownstreamResult downstream_auc(const PanelDataset& ds, const CompletedMatrix& imputed, std::span<const int> labels,
                                std::uint64_t split_seed, std::optional<double> reg) {
    if (labels.size() != ds.n_individuals()) throw InvalidArgument("need one label per individual");
    require_both_classes(labels);
    DesignMatrix X = latest_observation_matrix(imputed, ds);

    Split split;
    bool ok = false;
    for (std::uint32_t attempt = 0; attempt < 10 && !ok; ++attempt) {
        std::seed_seq seq{static_cast<std::uint32_t>(split_seed), static_cast<std::uint32_t>(split_seed >> 32), attempt};
        std::mt19937_64 rng(seq);
        split = {};
        for (int cls = 0; cls <= 1; ++cls) {
            std::vector<std::size_t> members;
            for (std::size_t r = 0; r < labels.size(); ++r)
                if ((labels[r] != 0) == (cls == 1)) members.push_back(r);
            std::shuffle(members.begin(), members.end(), rng);
            const auto n_train = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(members.size()) + 0.5));
            split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
            split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
        }
        std::sort(split.train.begin(), split.train.end());
        std::sort(split.test.begin(), split.test.end());
        ok = both_classes(split.train, labels) && both_classes(split.test, labels);
    }
    if (!ok) throw DataError("could not draw a train/test split with both classes on each side");

    standardize_columns(X, X.select_rows(split.train));

    double chosen = reg.value_or(0.0);
    if (!reg) {
        // Stratified 3-fold selection over the training individuals.
        constexpr std::size_t inner_folds = 3;
        std::vector<std::vector<std::size_t>> folds(inner_folds);
        std::mt19937_64 rng(split_seed ^ 0x9e3779b97f4a7c15ULL);
        for (int cls = 0; cls <= 1; ++cls) {
            std::vector<std::size_t> members;
            for (std::size_t r : split.train)
                if ((labels[r] != 0) == (cls == 1)) members.push_back(r);
            std::shuffle(members.begin(), members.end(), rng);
            for (std::size_t q = 0; q < members.size(); ++q) folds[q % inner_folds].push_back(members[q]);
        }
        double best = -1.0;
        for (double candidate : default_reg_grid) {
            double total = 0.0;
            std::size_t used = 0;
            for (std::size_t f = 0; f < inner_folds; ++f) {
                std::vector<std::size_t> fit;
                for (std::size_t g = 0; g < inner_folds; ++g)
                    if (g != f) fit.insert(fit.end(), folds[g].begin(), folds[g].end());
                std::sort(fit.begin(), fit.end());
                if (!both_classes(fit, labels) || !both_classes(folds[f], labels)) continue;
                total += held_out_auc(X, labels, fit, folds[f], candidate);
                ++used;
            }
            const double mean = used ? total / static_cast<double>(used) : 0.0;
            if (mean >= best) {
                best = mean;
                chosen = candidate;
            }
        }
    }
    return {held_out_auc(X, labels, split.train, split.test, chosen), chosen};
}

}  // namespace medimpute
