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

// medimpute command-line interface.
//
// Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medimpute/bench.hpp"
#include "medimpute/csv_io.hpp"
#include "medimpute/errors.hpp"
#include "medimpute/model_selection.hpp"
#include "medimpute/panel.hpp"
#include "medimpute/solver.hpp"
#include "medimpute/synth.hpp"

namespace {

using namespace medimpute;

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numerical = 3;

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path + " is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

// A scalar broadcasts to every feature; a comma-separated list is given in
// schema feature order and mapped onto the dataset's feature order.
std::vector<double> per_feature_values(const std::string& text, const Schema& schema, const PanelDataset& ds,
                                       const char* what) {
    std::vector<double> values;
    for (const auto& tok : split_csv_line(text)) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidArgument(std::string("--") + what + ": '" + tok + "' is not a number");
        }
    }
    if (values.size() == 1) return std::vector<double>(ds.n_features(), values.front());
    if (values.size() != ds.n_features())
        throw InvalidArgument(std::string("--") + what + " needs 1 or " + std::to_string(ds.n_features()) + " values");
    std::vector<double> out(ds.n_features());
    for (std::size_t d = 0; d < ds.n_features(); ++d)
        for (std::size_t f = 0; f < schema.features.size(); ++f)
            if (schema.features[f].name == ds.feature(d).name) out[d] = values[f];
    return out;
}

struct ImputeArgs {
    std::string input, schema, output, mask_output, method = "med", alpha = "0.5", lambda = "0.5";
    std::size_t k = 10, restarts = 5, max_sweeps = 50;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
};

void run_impute(const ImputeArgs& a) {
    const auto schema = Schema::load(a.schema);
    const auto raw = load_csv(a.input, schema);
    const auto std_panel = standardize(raw);
    const auto& ds = std_panel.data;
    const Method method = parse_method(a.method);

    SolverConfig cfg;
    cfg.hyper.alpha = per_feature_values(a.alpha, schema, ds, "alpha");
    cfg.hyper.lambda = per_feature_values(a.lambda, schema, ds, "lambda");
    cfg.hyper.k = a.k;
    cfg.n_restarts = a.restarts;
    cfg.max_sweeps = a.max_sweeps;
    cfg.rel_tolerance = a.tolerance;
    cfg.seed = a.seed;

    ImputationResult result;
    switch (method) {
        case Method::mean: result = mean_impute(ds); break;
        case Method::opt_impute: result = opt_impute(ds, cfg); break;
        case Method::med_impute: result = med_impute(ds, cfg); break;
    }
    const auto completed = std_panel.params.invert(result.completed.to_dataset(ds));
    save_csv(a.output, completed);

    std::string mask_path = a.mask_output;
    if (mask_path.empty()) {
        mask_path = a.output;
        if (mask_path.size() > 4 && mask_path.substr(mask_path.size() - 4) == ".csv") mask_path.resize(mask_path.size() - 4);
        mask_path += ".mask.csv";
    }
    std::ofstream mask(mask_path, std::ios::binary);
    if (!mask) throw DataError("cannot write " + mask_path);
    write_mask_csv(mask, raw);
}

struct CvArgs {
    std::string input, schema, grid, output;
    std::size_t folds = 3, restarts = 5, max_sweeps = 50;
    std::uint64_t seed = 0;
};

void run_cv(const CvArgs& a) {
    const auto schema = Schema::load(a.schema);
    const auto ds = standardize(load_csv(a.input, schema)).data;
    const HyperGrid grid = a.grid.empty() ? HyperGrid{} : HyperGrid::from_json(read_json(a.grid));
    SolverConfig cfg;
    cfg.hyper = Hyperparams::shared(ds.n_features(), 0.0, 1.0, grid.ks.front());
    cfg.n_restarts = a.restarts;
    cfg.max_sweeps = a.max_sweeps;
    cfg.seed = a.seed;
    const auto report = cross_validate(ds, grid, a.folds, a.seed, cfg);
    nlohmann::json j = report.to_json();
    j["grid"] = grid.to_json();
    j["seed"] = a.seed;
    write_text(a.output, j.dump(2) + "\n");
}

struct MaskArgs {
    std::string input, schema, output, truth_output;
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

void run_mask(const MaskArgs& a) {
    const auto schema = Schema::load(a.schema);
    const auto ds = load_csv(a.input, schema);
    const auto masked = apply_mcar_mask(ds, a.fraction, a.seed);
    save_csv(a.output, masked.data);

    std::ofstream truth(a.truth_output, std::ios::binary);
    if (!truth) throw DataError("cannot write " + a.truth_output);
    truth << ds.id_column() << ',' << ds.time_column() << ",feature,value\n";
    for (const auto& mc : masked.record.cells) {
        const auto [i, d] = mc.cell;
        truth << ds.individual_label(ds.individual(i)) << ',' << format_number(ds.timestamp(i)) << ','
              << ds.feature(d).name << ',';
        if (ds.is_continuous(d))
            truth << format_number(mc.true_value);
        else
            truth << ds.feature(d).levels[static_cast<std::size_t>(mc.true_value)];
        truth << '\n';
    }
}

struct SynthArgs {
    std::string config, output, labels_output, schema_output;
    std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
    auto cfg = SynthConfig::from_json(read_json(a.config));
    if (a.seed) cfg.seed = *a.seed;
    const auto panel = synth_panel(cfg);
    save_csv(a.output, panel.data);
    std::ofstream labels(a.labels_output, std::ios::binary);
    if (!labels) throw DataError("cannot write " + a.labels_output);
    labels << panel.data.id_column() << ",label\n";
    for (std::size_t ind = 0; ind < panel.data.n_individuals(); ++ind)
        labels << panel.data.individual_label(ind) << ',' << panel.labels[ind] << '\n';
    if (!a.schema_output.empty()) write_text(a.schema_output, panel.data.schema().to_json().dump(2) + "\n");
}

void run_bench(const std::string& config, const std::string& out_dir) {
    const auto cfg = ExperimentConfig::from_json(read_json(config));
    emit_report(run_experiment(cfg), out_dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Longitudinal K-NN imputation (med.impute) and benchmarking"};
    app.require_subcommand(1);

    ImputeArgs imp;
    auto* impute = app.add_subcommand("impute", "Impute missing cells of a panel CSV");
    impute->add_option("--input", imp.input, "Panel CSV")->required();
    impute->add_option("--schema", imp.schema, "Schema JSON")->required();
    impute->add_option("--k", imp.k, "Neighbor count")->capture_default_str();
    impute->add_option("--alpha", imp.alpha, "Time-series weight: scalar or per-feature list")->capture_default_str();
    impute->add_option("--lambda", imp.lambda, "Decay per time unit: scalar or per-feature list")->capture_default_str();
    impute->add_option("--restarts", imp.restarts, "Randomized restarts")->capture_default_str();
    impute->add_option("--seed", imp.seed, "Random seed")->capture_default_str();
    impute->add_option("--method", imp.method, "mean | opt | med")->capture_default_str();
    impute->add_option("--output", imp.output, "Imputed CSV")->required();
    impute->add_option("--mask-output", imp.mask_output, "Imputed-cell flags CSV (default <output>.mask.csv)");
    impute->add_option("--max-sweeps", imp.max_sweeps, "Coordinate-descent iterations")->capture_default_str();
    impute->add_option("--tolerance", imp.tolerance, "Relative objective tolerance")->capture_default_str();

    CvArgs cva;
    auto* cv = app.add_subcommand("cv", "Cross-validate alpha, lambda and k");
    cv->add_option("--input", cva.input, "Panel CSV")->required();
    cv->add_option("--schema", cva.schema, "Schema JSON")->required();
    cv->add_option("--folds", cva.folds, "Cell-level folds")->capture_default_str();
    cv->add_option("--grid", cva.grid, "Grid JSON {alphas, lambdas, ks, per_feature}");
    cv->add_option("--seed", cva.seed, "Random seed")->capture_default_str();
    cv->add_option("--output", cva.output, "Report JSON")->required();
    cv->add_option("--restarts", cva.restarts, "Randomized restarts per solve")->capture_default_str();
    cv->add_option("--max-sweeps", cva.max_sweeps, "Coordinate-descent iterations per solve")->capture_default_str();

    MaskArgs ma;
    auto* mask = app.add_subcommand("mask", "Hide observed cells completely at random");
    mask->add_option("--input", ma.input, "Panel CSV")->required();
    mask->add_option("--schema", ma.schema, "Schema JSON")->required();
    mask->add_option("--fraction", ma.fraction, "Fraction of observed cells to hide")->required();
    mask->add_option("--seed", ma.seed, "Random seed")->capture_default_str();
    mask->add_option("--output", ma.output, "Masked CSV")->required();
    mask->add_option("--truth-output", ma.truth_output, "Hidden values CSV")->required();

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic longitudinal panel");
    synth->add_option("--config", sa.config, "Generator JSON")->required();
    synth->add_option("--seed", sa.seed, "Overrides the config seed");
    synth->add_option("--output", sa.output, "Panel CSV")->required();
    synth->add_option("--labels-output", sa.labels_output, "Outcome labels CSV")->required();
    synth->add_option("--schema-output", sa.schema_output, "Schema JSON for the generated CSV");

    std::string bench_config, bench_dir;
    auto* bench = app.add_subcommand("bench", "Run the missingness and observations-per-patient sweeps");
    bench->add_option("--config", bench_config, "Experiment JSON")->required();
    bench->add_option("--out-dir", bench_dir, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*impute) run_impute(imp);
        if (*cv) run_cv(cva);
        if (*mask) run_mask(ma);
        if (*synth) run_synth(sa);
        if (*bench) run_bench(bench_config, bench_dir);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
    return 0;
}
