#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsepanel/model_types.hpp"

namespace sparsepanel {

struct RunConfig {
    std::string command;           // simulate | estimate | montecarlo | forecast | decompose
    std::string model = "m1";      // m1 | m2
    std::string variant;           // empty: model default
    std::string data;              // panel CSV
    std::string chain;             // chain directory (decompose)
    std::string design;            // Monte Carlo design JSON
    std::string out = "out";
    int draws = 5000;
    int burnin = 2500;
    int thin = 1;
    std::uint64_t seed = 0;
    int threads = 0;               // 0: OpenMP default
    int nsim = 0;                  // 0: take n_sim from the design
    std::vector<int> horizons{1};
    std::string scenario = "all";  // param_unc | no_param_unc | individual | all
    int holdout = 1;               // forecast: trailing columns held out for scoring
    std::string future_variance = "carry_forward";  // or prior_draw
    int N = 100;                   // simulate / decompose
    int T = 8;
    nlohmann::json theta = nlohmann::json::object();  // truth overrides for simulate
    nlohmann::json prior = nlohmann::json::object();  // hyperparameter overrides

    nlohmann::json to_json() const;
};

struct ConfigCheck {
    RunConfig config;
    std::vector<std::string> errors;    // "field: constraint"
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

// Resolves defaults and collects every problem; never stops at the first.
ConfigCheck validate_config(const nlohmann::json& raw);

// Hyperparameters for the configured model with `prior` overrides applied.
HyperParams hyper_from_json(const std::string& model, int k, const nlohmann::json& prior);
// Truth for simulation: defaults for the model overlaid with `theta`.
CommonState theta_from_json(const std::string& model, int k, int T, const nlohmann::json& theta);
nlohmann::json theta_to_json(const CommonState& c);

}  // namespace sparsepanel
