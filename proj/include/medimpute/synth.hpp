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

#include <json.hpp>

#include "medimpute/panel.hpp"

namespace medimpute {

/// Synthetic longitudinal panel generator.
///
/// Continuous feature d of individual m follows x_t = mu_md + e_t with
/// e_t = rho e_{t-1} + sqrt(1 - rho^2) eta_t, so every trajectory is a
/// stationary AR(1) around the individual's level. Levels and innovations
/// share a low-rank factor structure, which correlates the features.
/// Categorical features are sticky Markov chains (stay with probability
/// rho, otherwise redraw from an individual-specific distribution tied to
/// the same latent factors). The binary outcome is a logistic draw on a
/// sparse subset of each individual's final-observation covariates.
struct SynthConfig {
    std::size_t individuals = 150;
    std::size_t obs_per_individual = 10;
    std::size_t continuous = 9;
    std::size_t categorical = 4;
    int categorical_levels = 3;
    double rho = 0.8;
    double time_step = 2.0;
    std::string time_unit = "years";
    /// Number of continuous features with a non-zero outcome coefficient.
    std::size_t outcome_sparsity = 3;
    std::uint64_t seed = 0;

    static SynthConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct SynthPanel {
    PanelDataset data;
    /// One 0/1 label per individual.
    std::vector<int> labels;
};

SynthPanel synth_panel(const SynthConfig& cfg);

}  // namespace medimpute
