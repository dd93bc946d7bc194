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
#include <string>
#include <vector>

#include "medimpute/knn.hpp"
#include "medimpute/panel.hpp"

namespace medimpute {

struct MetricReport {
    /// Mean absolute error over masked continuous cells (data units, i.e.
    /// standardized units for standardized panels). NaN when none were masked.
    double mae = 0.0;
    /// Indexed by feature; NaN for features without masked cells or categorical features.
    std::vector<double> feature_mae;
    double misclassification = 0.0;
    std::size_t continuous_cells = 0;
    std::size_t categorical_cells = 0;
};

MetricReport imputation_error(const CompletedMatrix& imputed, const MaskRecord& record);

/// Dense row-major design matrix with one row per individual.
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::size_t> individual;
    std::vector<std::string> column_names;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    DesignMatrix select_rows(std::span<const std::size_t> rows) const;
};

/// Each individual's most recent row; categorical features become indicator
/// columns for codes 1..L-1 (code 0 is the reference level).
DesignMatrix latest_observation_matrix(const CompletedMatrix& imputed, const PanelDataset& ds);

/// Column means and sds (sd 0 -> 1) computed on `fit_rows` and applied in place.
void standardize_columns(DesignMatrix& X, const DesignMatrix& fit_rows);

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double reg = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Penalized objective at the start and after every accepted step.
    std::vector<double> objective_trace;

    double linear_score(std::span<const double> x) const;
};

/// Mean log-loss of labels y in {0,1} under scores Xw + b.
double logistic_loss(const DesignMatrix& X, std::span<const int> y, std::span<const double> w, double b);
/// Gradient of logistic_loss: weights first, intercept last.
std::vector<double> logistic_loss_gradient(const DesignMatrix& X, std::span<const int> y,
                                           std::span<const double> w, double b);

/// Minimizes logistic_loss + reg * |w|_1 (intercept unpenalized) by proximal
/// gradient with backtracking. Stops when the relative objective change drops
/// below 1e-8 or after 10,000 iterations. Throws InvalidArgument on single-class labels.
LogisticModel fit_l1_logistic(const DesignMatrix& X, std::span<const int> y, double reg);

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Throws InvalidArgument when a class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Regularization strengths tried on inner folds when downstream_auc gets no explicit reg.
inline constexpr double default_reg_grid[] = {1e-3, 1e-2, 1e-1};

struct DownstreamResult {
    double auc = 0.0;
    double reg = 0.0;
};

/// Stratified 70/30 split of individuals, l1-logistic fit on the training
/// rows of latest_observation_matrix, AUC on the test rows. Without an
/// explicit reg, the strength is chosen by 3-fold AUC on the training rows.
/// `labels` holds one 0/1 entry per individual.
DownstreamResult downstream_auc(const PanelDataset& ds, const CompletedMatrix& imputed, std::span<const int> labels,
                                std::uint64_t split_seed, std::optional<double> reg = std::nullopt);

}  // namespace medimpute
