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

#include "medimpute/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "medimpute/csv_io.hpp"
#include "medimpute/downstream.hpp"
#include "medimpute/errors.hpp"

namespace medimpute {

const char* to_string(Method m) {
    switch (m) {
        case Method::mean: return "mean";
        case Method::opt_impute: return "opt_impute";
        case Method::med_impute: return "med_impute";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "mean") return Method::mean;
    if (s == "opt" || s == "opt_impute") return Method::opt_impute;
    if (s == "med" || s == "med_impute") return Method::med_impute;
    throw InvalidArgument("unknown method '" + s + "' (expected mean, opt or med)");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        const auto& ds = j.at("dataset");
        if (ds.contains("synthetic")) {
            c.synthetic = SynthConfig::from_json(ds.at("synthetic"));
        } else {
            c.csv = CsvSource{ds.at("csv").get<std::string>(), ds.at("schema").get<std::string>(),
                              ds.at("labels").get<std::string>()};
        }
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (j.contains("fractions")) c.fractions = j.at("fractions").get<std::vector<double>>();
        if (j.contains("opp")) c.opp = j.at("opp").get<std::vector<std::size_t>>();
        c.opp_fraction = j.value("opp_fraction", c.opp_fraction);
        if (j.contains("seeds")) {
            c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } else if (j.contains("n_seeds")) {
            c.seeds.clear();
            for (std::uint64_t s = 0; s < j.at("n_seeds").get<std::uint64_t>(); ++s) c.seeds.push_back(s);
        }
        if (j.contains("sweeps")) c.sweeps = j.at("sweeps").get<std::vector<std::string>>();
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            c.solver.hyper.k = s.value("k", c.solver.hyper.k);
            c.solver.max_sweeps = s.value("max_sweeps", c.solver.max_sweeps);
            c.solver.rel_tolerance = s.value("rel_tolerance", c.solver.rel_tolerance);
            c.solver.n_restarts = s.value("restarts", c.solver.n_restarts);
        }
        if (j.contains("med")) {
            c.med_alpha = j.at("med").value("alpha", c.med_alpha);
            c.med_lambda = j.at("med").value("lambda", c.med_lambda);
        }
        if (j.contains("cv")) {
            const auto& cv = j.at("cv");
            c.cv_enabled = cv.value("enabled", c.cv_enabled);
            c.cv_folds = cv.value("folds", c.cv_folds);
            c.cv_restarts = cv.value("restarts", c.cv_restarts);
            c.cv_max_sweeps = cv.value("max_sweeps", c.cv_max_sweeps);
            if (cv.contains("grid")) c.grid = HyperGrid::from_json(cv.at("grid"));
        }
        if (j.contains("downstream") && j.at("downstream").contains("reg") && !j.at("downstream").at("reg").is_null())
            c.downstream_reg = j.at("downstream").at("reg").get<double>();
        c.threads = j.value("threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    if (synthetic) j["dataset"] = {{"synthetic", synthetic->to_json()}};
    if (csv) j["dataset"] = {{"csv", csv->csv}, {"schema", csv->schema}, {"labels", csv->labels}};
    j["methods"] = nlohmann::json::array();
    for (Method m : methods) j["methods"].push_back(to_string(m));
    j["fractions"] = fractions;
    j["opp"] = opp;
    j["opp_fraction"] = opp_fraction;
    j["seeds"] = seeds;
    j["sweeps"] = sweeps;
    j["solver"] = {{"k", solver.hyper.k},
                   {"max_sweeps", solver.max_sweeps},
                   {"rel_tolerance", solver.rel_tolerance},
                   {"restarts", solver.n_restarts}};
    j["med"] = {{"alpha", med_alpha}, {"lambda", med_lambda}};
    j["cv"] = {{"enabled", cv_enabled},
               {"folds", cv_folds},
               {"restarts", cv_restarts},
               {"max_sweeps", cv_max_sweeps},
               {"grid", grid.to_json()}};
    j["downstream"] = {{"reg", downstream_reg ? nlohmann::json(*downstream_reg) : nlohmann::json(nullptr)}};
    j["threads"] = threads;
    return j;
}

void ExperimentConfig::validate() const {
    if (synthetic.has_value() == csv.has_value()) throw InvalidArgument("config needs exactly one dataset source");
    if (methods.empty()) throw InvalidArgument("methods list must not be empty");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("missing fractions must lie in (0, 1]");
    if (!(opp_fraction > 0.0 && opp_fraction <= 1.0)) throw InvalidArgument("opp_fraction must lie in (0, 1]");
    for (std::size_t o : opp)
        if (o == 0) throw InvalidArgument("observations per patient must be >= 1");
    if (seeds.empty()) throw InvalidArgument("seeds list must not be empty");
    for (const auto& s : sweeps)
        if (s != "missingness" && s != "opp") throw InvalidArgument("unknown sweep '" + s + "'");
    if (solver.max_sweeps == 0 || !(solver.rel_tolerance > 0.0)) throw InvalidArgument("invalid solver settings");
    if (cv_enabled && cv_folds < 2) throw InvalidArgument("cv needs at least 2 folds");
    grid.validate();
}

std::vector<Aggregate> ExperimentReport::aggregates() const {
    std::vector<Aggregate> out;
    std::vector<std::vector<const ReportRow*>> members;
    for (const auto& row : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
            return a.sweep == row.sweep && a.method == row.method && a.fraction == row.fraction && a.opp == row.opp;
        });
        if (it == out.end()) {
            out.push_back({row.sweep, row.method, row.fraction, row.opp});
            members.emplace_back();
            it = out.end() - 1;
        }
        members[static_cast<std::size_t>(it - out.begin())].push_back(&row);
    }
    auto moments = [](const std::vector<const ReportRow*>& rs, double ReportRow::*field) {
        double sum = 0.0;
        for (const auto* r : rs) sum += r->*field;
        const double mean = sum / static_cast<double>(rs.size());
        double ss = 0.0;
        for (const auto* r : rs) ss += (r->*field - mean) * (r->*field - mean);
        const double sd = rs.size() > 1 ? std::sqrt(ss / static_cast<double>(rs.size() - 1)) : 0.0;
        return std::pair{mean, sd};
    };
    for (std::size_t a = 0; a < out.size(); ++a) {
        out[a].count = members[a].size();
        std::tie(out[a].mae_mean, out[a].mae_sd) = moments(members[a], &ReportRow::mae);
        std::tie(out[a].misclassification_mean, out[a].misclassification_sd) =
            moments(members[a], &ReportRow::misclassification);
        std::tie(out[a].auc_mean, out[a].auc_sd) = moments(members[a], &ReportRow::auc);
    }
    return out;
}

void ExperimentReport::append(const ExperimentReport& other) {
    if (config.is_null()) config = other.config;
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    if (cfg.synthetic) {
        auto panel = synth_panel(*cfg.synthetic);
        return {standardize(panel.data).data, std::move(panel.labels)};
    }
    const auto schema = Schema::load(cfg.csv->schema);
    auto data = standardize(load_csv(cfg.csv->csv, schema)).data;

    std::ifstream in(cfg.csv->labels);
    if (!in) throw DataError("cannot open labels file " + cfg.csv->labels);
    std::string line;
    std::getline(in, line);
    std::unordered_map<std::string, int> by_id;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2 || (fields[1] != "0" && fields[1] != "1"))
            throw DataError("labels file rows must be 'id,0|1': " + line);
        by_id[fields[0]] = fields[1] == "1" ? 1 : 0;
    }
    std::vector<int> labels;
    for (std::size_t ind = 0; ind < data.n_individuals(); ++ind) {
        auto it = by_id.find(data.individual_label(ind));
        if (it == by_id.end()) throw DataError("no label for individual '" + data.individual_label(ind) + "'");
        labels.push_back(it->second);
    }
    return {std::move(data), std::move(labels)};
}

namespace {

template <class E>
[[noreturn]] void rethrow_annotated(const E& e, const std::string& where) {
    throw E(where + ": " + e.what());
}

std::string condition_name(double fraction, std::uint64_t seed, std::size_t opp) {
    std::ostringstream os;
    os << "condition fraction=" << fraction << " opp=" << opp << " seed=" << seed;
    return os.str();
}

std::size_t max_observations(const PanelDataset& ds) {
    std::size_t best = 0;
    for (std::size_t ind = 0; ind < ds.n_individuals(); ++ind) {
        const auto [b, e] = ds.individual_rows(ind);
        best = std::max(best, e - b);
    }
    return best;
}

// Runs tasks on a small pool; results keep task order.
template <class T>
std::vector<T> run_pool(std::size_t n_tasks, std::size_t threads, const std::function<T(std::size_t)>& task) {
    std::vector<T> results(n_tasks);
    std::vector<std::exception_ptr> errors(n_tasks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) {
            try {
                results[t] = task(t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(n_tasks, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace

std::vector<ReportRow> run_condition(const ExperimentConfig& cfg, const ExperimentData& data, double fraction,
                                     std::uint64_t seed) {
    const std::size_t opp = max_observations(data.data);
    const std::string where = condition_name(fraction, seed, opp);
    try {
        const auto masked = apply_mcar_mask(data.data, fraction, seed);
        const std::size_t p = data.data.n_features();
        std::vector<ReportRow> rows;
        for (Method method : cfg.methods) {
            const auto start = std::chrono::steady_clock::now();
            ReportRow row;
            row.method = method;
            row.fraction = fraction;
            row.opp = opp;
            row.seed = seed;
            row.masked_cells = masked.record.cells.size();

            ImputationResult result;
            SolverConfig solver = cfg.solver;
            solver.seed = seed;
            if (method == Method::mean) {
                result = mean_impute(masked.data);
                row.alpha = std::numeric_limits<double>::quiet_NaN();
                row.lambda = std::numeric_limits<double>::quiet_NaN();
            } else if (method == Method::opt_impute) {
                solver.hyper = Hyperparams::shared(p, 0.0, 1.0, cfg.solver.hyper.k);
                result = opt_impute(masked.data, solver);
            } else {
                if (cfg.cv_enabled) {
                    SolverConfig cv_solver = solver;
                    cv_solver.hyper = Hyperparams::shared(p, 0.0, 1.0, cfg.solver.hyper.k);
                    cv_solver.n_restarts = cfg.cv_restarts;
                    cv_solver.max_sweeps = cfg.cv_max_sweeps;
                    solver.hyper = cross_validate(masked.data, cfg.grid, cfg.cv_folds, seed, cv_solver).selected;
                } else {
                    solver.hyper = Hyperparams::shared(p, cfg.med_alpha, cfg.med_lambda, cfg.solver.hyper.k);
                }
                result = med_impute(masked.data, solver);
            }
            if (method != Method::mean) {
                row.alpha = solver.hyper.alpha.front();
                row.lambda = solver.hyper.lambda.front();
                row.k = solver.hyper.k;
            }
            const auto metrics = imputation_error(result.completed, masked.record);
            row.mae = metrics.mae;
            row.misclassification = metrics.misclassification;
            row.auc = downstream_auc(masked.data, result.completed, data.labels, seed, cfg.downstream_reg).auc;
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            rows.push_back(std::move(row));
        }
        return rows;
    } catch (const InvalidArgument& e) {
        rethrow_annotated(e, where);
    } catch (const DataError& e) {
        rethrow_annotated(e, where);
    } catch (const NumericalError& e) {
        rethrow_annotated(e, where);
    }
}

ExperimentReport run_missingness_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto data = load_experiment_data(cfg);
    const std::size_t n_tasks = cfg.fractions.size() * cfg.seeds.size();
    auto per_condition = run_pool<std::vector<ReportRow>>(n_tasks, cfg.threads, [&](std::size_t t) {
        return run_condition(cfg, data, cfg.fractions[t / cfg.seeds.size()], cfg.seeds[t % cfg.seeds.size()]);
    });
    ExperimentReport report;
    report.config = cfg.to_json();
    for (auto& rows : per_condition)
        for (auto& row : rows) {
            row.sweep = "missingness";
            report.rows.push_back(std::move(row));
        }
    return report;
}

ExperimentReport run_opp_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto data = load_experiment_data(cfg);
    std::vector<ExperimentData> truncated;
    std::vector<std::size_t> excluded;
    for (std::size_t k : cfg.opp) {
        auto t = keep_recent_observations(data.data, k);
        std::vector<int> labels;
        for (std::size_t ind : t.source_individual) labels.push_back(data.labels[ind]);
        truncated.push_back({std::move(t.data), std::move(labels)});
        excluded.push_back(t.excluded);
    }
    const std::size_t n_tasks = cfg.opp.size() * cfg.seeds.size();
    auto per_condition = run_pool<std::vector<ReportRow>>(n_tasks, cfg.threads, [&](std::size_t t) {
        return run_condition(cfg, truncated[t / cfg.seeds.size()], cfg.opp_fraction, cfg.seeds[t % cfg.seeds.size()]);
    });
    ExperimentReport report;
    report.config = cfg.to_json();
    for (std::size_t t = 0; t < n_tasks; ++t)
        for (auto& row : per_condition[t]) {
            row.sweep = "opp";
            row.opp = cfg.opp[t / cfg.seeds.size()];
            row.excluded_individuals = excluded[t / cfg.seeds.size()];
            report.rows.push_back(std::move(row));
        }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.config = cfg.to_json();
    for (const auto& sweep : cfg.sweeps) report.append(sweep == "missingness" ? run_missingness_sweep(cfg) : run_opp_sweep(cfg));
    return report;
}

namespace {

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

std::string csv_number(double x) { return std::isfinite(x) ? format_number(x) : std::string("NA"); }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"sweep", r.sweep},
                        {"method", to_string(r.method)},
                        {"fraction", r.fraction},
                        {"opp", r.opp},
                        {"seed", r.seed},
                        {"mae", number_or_null(r.mae)},
                        {"misclassification", number_or_null(r.misclassification)},
                        {"auc", number_or_null(r.auc)},
                        {"alpha", number_or_null(r.alpha)},
                        {"lambda", number_or_null(r.lambda)},
                        {"k", r.k},
                        {"masked_cells", r.masked_cells},
                        {"excluded_individuals", r.excluded_individuals},
                        {"seconds", r.seconds}});
    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : report.aggregates())
        aggs.push_back({{"sweep", a.sweep},
                        {"method", to_string(a.method)},
                        {"fraction", a.fraction},
                        {"opp", a.opp},
                        {"count", a.count},
                        {"mae_mean", number_or_null(a.mae_mean)},
                        {"mae_sd", number_or_null(a.mae_sd)},
                        {"misclassification_mean", number_or_null(a.misclassification_mean)},
                        {"misclassification_sd", number_or_null(a.misclassification_sd)},
                        {"auc_mean", number_or_null(a.auc_mean)},
                        {"auc_sd", number_or_null(a.auc_sd)}});
    nlohmann::json seeds = report.config.is_object() && report.config.contains("seeds") ? report.config["seeds"]
                                                                                        : nlohmann::json::array();
    return {{"software", {{"name", "medimpute"}, {"version", MEDIMPUTE_VERSION}}},
            {"generated_at", utc_timestamp()},
            {"config", report.config},
            {"seeds", seeds},
            {"rows", rows},
            {"aggregates", aggs}};
}

void emit_report(const ExperimentReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw DataError("cannot write " + (fs::path(dir) / name).string());
        return out;
    };

    {
        auto out = open("report.json");
        out << report_to_json(report).dump(2) << '\n';
    }
    {
        auto out = open("report.csv");
        out << "sweep,method,fraction,opp,seed,mae,misclassification,auc,alpha,lambda,k,masked_cells,"
               "excluded_individuals,seconds\n";
        for (const auto& r : report.rows)
            out << r.sweep << ',' << to_string(r.method) << ',' << csv_number(r.fraction) << ',' << r.opp << ','
                << r.seed << ',' << csv_number(r.mae) << ',' << csv_number(r.misclassification) << ','
                << csv_number(r.auc) << ',' << csv_number(r.alpha) << ',' << csv_number(r.lambda) << ',' << r.k << ','
                << r.masked_cells << ',' << r.excluded_individuals << ',' << csv_number(r.seconds) << '\n';
    }
    {
        auto out = open("curves.csv");
        out << "sweep,method,x_variable,x,metric,mean,sd,n\n";
        for (const auto& a : report.aggregates()) {
            const bool by_fraction = a.sweep == "missingness";
            const std::string x = by_fraction ? csv_number(a.fraction) : std::to_string(a.opp);
            const std::pair<const char*, std::pair<double, double>> metrics[] = {
                {"mae", {a.mae_mean, a.mae_sd}},
                {"misclassification", {a.misclassification_mean, a.misclassification_sd}},
                {"auc", {a.auc_mean, a.auc_sd}}};
            for (const auto& [name, ms] : metrics)
                out << a.sweep << ',' << to_string(a.method) << ',' << (by_fraction ? "fraction" : "opp") << ',' << x
                    << ',' << name << ',' << csv_number(ms.first) << ',' << csv_number(ms.second) << ',' << a.count
                    << '\n';
        }
    }
}

}  // namespace medimpute
