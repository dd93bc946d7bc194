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

#include "medimpute/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medimpute/errors.hpp"

namespace medimpute {

namespace {

constexpr std::size_t latent_rank = 2;
constexpr double loading_scale = 0.8;
constexpr double idiosyncratic_sd = 0.6;
constexpr double category_sharpness = 1.5;
constexpr double outcome_coefficient = 1.5;

}  // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.individuals = j.value("individuals", c.individuals);
    c.obs_per_individual = j.value("obs_per_individual", c.obs_per_individual);
    c.continuous = j.value("continuous", c.continuous);
    c.categorical = j.value("categorical", c.categorical);
    c.categorical_levels = j.value("categorical_levels", c.categorical_levels);
    c.rho = j.value("rho", c.rho);
    c.time_step = j.value("time_step", c.time_step);
    c.time_unit = j.value("time_unit", c.time_unit);
    c.outcome_sparsity = j.value("outcome_sparsity", c.outcome_sparsity);
    c.seed = j.value("seed", c.seed);
    return c;
}

nlohmann::json SynthConfig::to_json() const {
    return {{"individuals", individuals},
            {"obs_per_individual", obs_per_individual},
            {"continuous", continuous},
            {"categorical", categorical},
            {"categorical_levels", categorical_levels},
            {"rho", rho},
            {"time_step", time_step},
            {"time_unit", time_unit},
            {"outcome_sparsity", outcome_sparsity},
            {"seed", seed}};
}

SynthPanel synth_panel(const SynthConfig& cfg) {
    if (cfg.individuals == 0 || cfg.obs_per_individual == 0)
        throw InvalidArgument("synthetic panel needs at least one individual and one observation");
    if (cfg.continuous + cfg.categorical == 0) throw InvalidArgument("synthetic panel needs at least one feature");
    if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw InvalidArgument("autocorrelation must lie in [0, 1)");
    if (!(cfg.time_step > 0.0)) throw InvalidArgument("time step must be positive");
    if (cfg.categorical > 0 && cfg.categorical_levels < 2) throw InvalidArgument("categorical features need >= 2 levels");
    if (cfg.outcome_sparsity > cfg.continuous)
        throw InvalidArgument("outcome sparsity exceeds the number of continuous features");

    const std::size_t m_count = cfg.individuals;
    const std::size_t k = cfg.obs_per_individual;
    const std::size_t p0 = cfg.continuous;
    const std::size_t p1 = cfg.categorical;
    const std::size_t p = p0 + p1;
    const auto levels = static_cast<std::size_t>(cfg.categorical_levels);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> level_loading(p0 * latent_rank), innovation_loading(p0 * latent_rank);
    for (auto& a : level_loading) a = loading_scale * normal(rng);
    for (auto& b : innovation_loading) b = loading_scale * normal(rng);
    std::vector<double> category_loading(p1 * latent_rank);
    for (auto& a : category_loading) a = normal(rng);

    PanelDataset::Storage s;
    s.id_column = "id";
    s.time_column = "time";
    s.time_unit = cfg.time_unit;
    for (std::size_t d = 0; d < p0; ++d) s.features.push_back({"cont" + std::to_string(d + 1), FeatureKind::continuous, {}});
    for (std::size_t c = 0; c < p1; ++c) {
        Feature f{"cat" + std::to_string(c + 1), FeatureKind::categorical, {}};
        for (std::size_t l = 0; l < levels; ++l) f.levels.push_back("c" + std::to_string(l));
        s.features.push_back(std::move(f));
    }
    s.missing.assign(m_count * k * p, 0);

    const double innovation_scale = std::sqrt(1.0 - cfg.rho * cfg.rho);
    auto draw_innovation = [&](std::vector<double>& eta) {
        double xi[latent_rank];
        for (auto& x : xi) x = normal(rng);
        for (std::size_t d = 0; d < p0; ++d) {
            double v = idiosyncratic_sd * normal(rng);
            for (std::size_t r = 0; r < latent_rank; ++r) v += innovation_loading[d * latent_rank + r] * xi[r];
            eta[d] = v;
        }
    };

    std::vector<double> final_obs(m_count * p0);
    std::vector<double> mu(p0), dev(p0), eta(p0), probs(levels);
    std::vector<int> state(p1);
    for (std::size_t m = 0; m < m_count; ++m) {
        s.individual_labels.push_back(std::to_string(m + 1));
        double g[latent_rank];
        for (auto& x : g) x = normal(rng);
        for (std::size_t d = 0; d < p0; ++d) {
            double v = idiosyncratic_sd * normal(rng);
            for (std::size_t r = 0; r < latent_rank; ++r) v += level_loading[d * latent_rank + r] * g[r];
            mu[d] = v;
        }
        // Individual-specific categorical distributions, tilted by the latent level.
        std::vector<std::discrete_distribution<int>> category_dist;
        for (std::size_t c = 0; c < p1; ++c) {
            double score = 0.0;
            for (std::size_t r = 0; r < latent_rank; ++r) score += category_loading[c * latent_rank + r] * g[r];
            for (std::size_t l = 0; l < levels; ++l) {
                const double centered = static_cast<double>(l) - 0.5 * static_cast<double>(levels - 1);
                probs[l] = std::exp(category_sharpness * centered * score);
            }
            category_dist.emplace_back(probs.begin(), probs.end());
        }

        for (std::size_t t = 0; t < k; ++t) {
            draw_innovation(eta);
            for (std::size_t d = 0; d < p0; ++d) dev[d] = t == 0 ? eta[d] : cfg.rho * dev[d] + innovation_scale * eta[d];
            for (std::size_t c = 0; c < p1; ++c) {
                const bool stay = t > 0 && unif(rng) < cfg.rho;
                if (!stay) state[c] = category_dist[c](rng);
            }
            s.individual.push_back(m);
            s.timestamp.push_back(static_cast<double>(t) * cfg.time_step);
            for (std::size_t d = 0; d < p0; ++d) s.continuous.push_back(mu[d] + dev[d]);
            s.categorical.insert(s.categorical.end(), state.begin(), state.end());
        }
        for (std::size_t d = 0; d < p0; ++d) final_obs[m * p0 + d] = mu[d] + dev[d];
    }

    std::vector<std::size_t> active(p0);
    std::iota(active.begin(), active.end(), std::size_t{0});
    std::shuffle(active.begin(), active.end(), rng);
    active.resize(cfg.outcome_sparsity);
    std::vector<double> coef(p0, 0.0);
    for (std::size_t d : active) coef[d] = unif(rng) < 0.5 ? -outcome_coefficient : outcome_coefficient;

    std::vector<double> col_mean(p0, 0.0), col_sd(p0, 1.0);
    for (std::size_t d = 0; d < p0; ++d) {
        double sum = 0.0, ss = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) sum += final_obs[m * p0 + d];
        col_mean[d] = sum / static_cast<double>(m_count);
        for (std::size_t m = 0; m < m_count; ++m) ss += std::pow(final_obs[m * p0 + d] - col_mean[d], 2);
        const double sd = m_count > 1 ? std::sqrt(ss / static_cast<double>(m_count - 1)) : 0.0;
        col_sd[d] = sd > 0.0 ? sd : 1.0;
    }
    SynthPanel out;
    out.labels.resize(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        double eta_out = 0.0;
        for (std::size_t d : active) eta_out += coef[d] * (final_obs[m * p0 + d] - col_mean[d]) / col_sd[d];
        const double prob = 1.0 / (1.0 + std::exp(-eta_out));
        out.labels[m] = unif(rng) < prob ? 1 : 0;
    }
    out.data = PanelDataset(std::move(s));
    return out;
}

}  // namespace medimpute
