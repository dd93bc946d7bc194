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
#include <string>
#include <vector>

#include <json.hpp>

#include "medimpute/model_selection.hpp"
#include "medimpute/solver.hpp"
#include "medimpute/synth.hpp"

namespace medimpute {

enum class Method { mean, opt_impute, med_impute };

const char* to_string(Method m);
/// Accepts mean | opt | opt_impute | med | med_impute.
Method parse_method(const std::string& s);

struct CsvSource {
    std::string csv;
    std::string schema;
    /// CSV with columns id,label (one row per individual).
    std::string labels;
};

/// Experiment description, read from the `bench` JSON config.
struct ExperimentConfig {
    std::optional<SynthConfig> synthetic;
    std::optional<CsvSource> csv;
    std::vector<Method> methods{Method::mean, Method::opt_impute, Method::med_impute};
    std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<std::size_t> opp{1, 2, 4, 10};
    /// Missing fraction held fixed during the observations-per-patient sweep.
    double opp_fraction = 0.5;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<std::string> sweeps{"missingness", "opp"};

    /// Solver settings; hyper.alpha/lambda are taken from med_alpha/med_lambda when CV is off.
    SolverConfig solver{Hyperparams{{}, {}, 10}, 50, 1e-6, 5, 0};
    double med_alpha = 0.5;
    double med_lambda = 0.5;

    bool cv_enabled = true;
    std::size_t cv_folds = 3;
    HyperGrid grid;
    std::size_t cv_restarts = 0;
    std::size_t cv_max_sweeps = 20;

    /// Downstream l1 strength; nullopt selects it on inner folds.
    std::optional<double> downstream_reg;
    std::size_t threads = 0;  ///< 0 = hardware concurrency

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct ReportRow {
    std::string sweep;
    Method method = Method::mean;
    double fraction = 0.0;
    std::size_t opp = 0;
    std::uint64_t seed = 0;
    double mae = 0.0;
    double misclassification = 0.0;
    double auc = 0.0;
    double seconds = 0.0;
    /// Hyperparameters used (NaN / 0 for mean imputation).
    double alpha = 0.0;
    double lambda = 0.0;
    std::size_t k = 0;
    std::size_t masked_cells = 0;
    std::size_t excluded_individuals = 0;
};

struct Aggregate {
    std::string sweep;
    Method method = Method::mean;
    double fraction = 0.0;
    std::size_t opp = 0;
    std::size_t count = 0;
    double mae_mean = 0.0, mae_sd = 0.0;
    double misclassification_mean = 0.0, misclassification_sd = 0.0;
    double auc_mean = 0.0, auc_sd = 0.0;
};

struct ExperimentReport {
    nlohmann::json config;
    std::vector<ReportRow> rows;

    /// Mean and sample sd over seeds per (sweep, method, fraction, opp), in first-appearance order.
    std::vector<Aggregate> aggregates() const;
    void append(const ExperimentReport& other);
};

/// Loads or generates the ground-truth panel (continuous columns standardized)
/// and its per-individual labels.
struct ExperimentData {
    PanelDataset data;
    std::vector<int> labels;
};
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// One condition: mask the panel with (fraction, seed), run each method on the
/// identical mask, score imputation error and downstream AUC.
std::vector<ReportRow> run_condition(const ExperimentConfig& cfg, const ExperimentData& data, double fraction,
                                     std::uint64_t seed);

ExperimentReport run_missingness_sweep(const ExperimentConfig& cfg);
ExperimentReport run_opp_sweep(const ExperimentConfig& cfg);
/// Runs the sweeps named in cfg.sweeps.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

nlohmann::json report_to_json(const ExperimentReport& report);
/// Writes report.json, report.csv and curves.csv into dir (created if absent).
void emit_report(const ExperimentReport& report, const std::string& dir);

}  // namespace medimpute
