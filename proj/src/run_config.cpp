#include "sparsepanel/run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <set>
#include <type_traits>

#include "sparsepanel/forecast_eval.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/m2_sampler.hpp"
#include "sparsepanel/mc_harness.hpp"

namespace sparsepanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
const std::set<std::string> kCommands{"simulate", "estimate", "montecarlo", "forecast", "decompose"};
const std::set<std::string> kKeys{"command", "model",  "variant", "data",     "chain",   "design",
                                  "out",     "draws",  "burnin",  "thin",     "seed",    "threads",
                                  "nsim",    "horizons", "scenario", "holdout", "N",     "T",
                                  "theta",   "prior",  "future_variance"};
const std::set<std::string> kPriorKeys{
    "mu_alpha", "v_alpha",       "mu_rho",          "v_rho",           "sigma2",
    "sigma2_u", "sigma2_eps",    "q",               "v_delta_alpha",   "v_delta_alpha_iw",
    "v_delta_rho", "v_delta_sigma", "v_delta_sigma_u", "v_delta_sigma_eps", "mu_s0_mean",
    "mu_s0_var", "v_s0"};

InverseGammaSpec ig_from_json(const json& j) { return {j.at("nu").get<double>(), j.at("tau").get<double>()}; }

Eigen::VectorXd vec_from_json(const json& j) {
    if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd mat_from_json(const json& j) {
    if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    const auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(m.cols())) throw std::invalid_argument("ragged matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

template <class T>
void read_field(const json& raw, const char* key, T& dst, std::vector<std::string>& errors,
                const std::string& expect) {
    if (!raw.contains(key)) return;
    const json& v = raw.at(key);
    bool ok = true;
    if constexpr (std::is_integral_v<T>) {
        ok = v.is_number_integer() &&
             (!std::is_unsigned_v<T> || v.is_number_unsigned() || v.get<long long>() >= 0);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
        ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); });
    }
    if (!ok) {
        errors.push_back(std::string(key) + ": must be " + expect);
        return;
    }
    try {
        dst = v.get<T>();
    } catch (const std::exception&) {
        errors.push_back(std::string(key) + ": must be " + expect);
    }
}
}  // namespace

json RunConfig::to_json() const {
    return {{"command", command}, {"model", model},       {"variant", variant},   {"data", data},
            {"chain", chain},     {"design", design},     {"out", out},           {"draws", draws},
            {"burnin", burnin},   {"thin", thin},         {"seed", seed},         {"threads", threads},
            {"nsim", nsim},       {"horizons", horizons}, {"scenario", scenario}, {"holdout", holdout},
            {"N", N},             {"T", T},               {"theta", theta},       {"prior", prior},
            {"future_variance", future_variance}};
}

HyperParams hyper_from_json(const std::string& model, int k, const json& prior) {
    HyperParams h = model == "m2" ? HyperParams::m2_default(k) : HyperParams::m1_default();
    for (const auto& [key, v] : prior.items()) {
        if (key == "mu_alpha") h.mu_alpha = vec_from_json(v);
        else if (key == "v_alpha") h.v_alpha = mat_from_json(v);
        else if (key == "mu_rho") h.mu_rho = v.get<double>();
        else if (key == "v_rho") h.v_rho = v.get<double>();
        else if (key == "sigma2") h.sigma2 = ig_from_json(v);
        else if (key == "sigma2_u") h.sigma2_u = ig_from_json(v);
        else if (key == "sigma2_eps") h.sigma2_eps = ig_from_json(v);
        else if (key == "q") h.q_prior = {v.at("a").get<double>(), v.at("b").get<double>()};
        else if (key == "v_delta_alpha") h.v_delta_alpha = ig_from_json(v);
        else if (key == "v_delta_alpha_iw")
            h.v_delta_alpha_iw = {v.at("dof").get<double>(), mat_from_json(v.at("scale"))};
        else if (key == "v_delta_rho") h.v_delta_rho = ig_from_json(v);
        else if (key == "v_delta_sigma") h.v_delta_sigma = ig_from_json(v);
        else if (key == "v_delta_sigma_u") h.v_delta_sigma_u = ig_from_json(v);
        else if (key == "v_delta_sigma_eps") h.v_delta_sigma_eps = ig_from_json(v);
        else if (key == "mu_s0_mean") h.mu_s0_mean = v.get<double>();
        else if (key == "mu_s0_var") h.mu_s0_var = v.get<double>();
        else if (key == "v_s0") h.v_s0 = ig_from_json(v);
        else throw ConfigError("prior." + key + ": unknown hyperparameter");
    }
    return h;
}

CommonState theta_from_json(const std::string& model, int k, int T, const json& theta) {
    CommonState c;
    if (model == "m2") {
        c.alpha = Eigen::VectorXd::Zero(k);
        if (k >= 2) c.alpha(1) = 0.2;
        c.rho = 0.8;
        c.sigma2_u = Eigen::VectorXd::Constant(T, 0.05);
        c.sigma2_eps = Eigen::VectorXd::Constant(T, 0.05);
        c.q_alpha = 0.3;
        c.q_rho = 0.0;
        c.q_sigma_u = c.q_sigma_eps = 0.5;
        c.v_delta_alpha = Eigen::MatrixXd::Identity(k, k) * 0.048;
        c.v_delta_alpha(0, 0) = 0.24;
        c.v_delta_rho = 0.25;
        c.v_delta_sigma_u = c.v_delta_sigma_eps = 0.5;
        c.mu_s0 = 0.0;
        c.v_s0 = 0.05;
    } else {
        c = MCDesign{}.cell_theta(0.4, 0.5);
    }
    for (const auto& [key, v] : theta.items()) {
        if (key == "alpha") c.alpha = vec_from_json(v);
        else if (key == "rho") c.rho = v.get<double>();
        else if (key == "sigma2") c.sigma2 = v.get<double>();
        else if (key == "sigma2_u")
            c.sigma2_u = v.is_number() ? Eigen::VectorXd::Constant(T, v.get<double>()) : vec_from_json(v);
        else if (key == "sigma2_eps")
            c.sigma2_eps = v.is_number() ? Eigen::VectorXd::Constant(T, v.get<double>()) : vec_from_json(v);
        else if (key == "q_alpha") c.q_alpha = v.get<double>();
        else if (key == "q_rho") c.q_rho = v.get<double>();
        else if (key == "q_sigma") c.q_sigma = v.get<double>();
        else if (key == "q_sigma_u") c.q_sigma_u = v.get<double>();
        else if (key == "q_sigma_eps") c.q_sigma_eps = v.get<double>();
        else if (key == "v_delta_alpha") c.v_delta_alpha = mat_from_json(v);
        else if (key == "v_delta_rho") c.v_delta_rho = v.get<double>();
        else if (key == "v_delta_sigma") c.v_delta_sigma = v.get<double>();
        else if (key == "v_delta_sigma_u") c.v_delta_sigma_u = v.get<double>();
        else if (key == "v_delta_sigma_eps") c.v_delta_sigma_eps = v.get<double>();
        else if (key == "mu_s0") c.mu_s0 = v.get<double>();
        else if (key == "v_s0") c.v_s0 = v.get<double>();
        else throw ConfigError("theta." + key + ": unknown parameter");
    }
    return c;
}

json theta_to_json(const CommonState& c) {
    json j = {{"alpha", std::vector<double>(c.alpha.data(), c.alpha.data() + c.alpha.size())},
              {"rho", c.rho},
              {"sigma2", c.sigma2},
              {"q_alpha", c.q_alpha},
              {"q_rho", c.q_rho},
              {"q_sigma", c.q_sigma},
              {"q_sigma_u", c.q_sigma_u},
              {"q_sigma_eps", c.q_sigma_eps},
              {"v_delta_alpha", mat_to_json(c.v_delta_alpha)},
              {"v_delta_rho", c.v_delta_rho},
              {"v_delta_sigma", c.v_delta_sigma},
              {"v_delta_sigma_u", c.v_delta_sigma_u},
              {"v_delta_sigma_eps", c.v_delta_sigma_eps},
              {"mu_s0", c.mu_s0},
              {"v_s0", c.v_s0}};
    if (c.sigma2_u.size())
        j["sigma2_u"] = std::vector<double>(c.sigma2_u.data(), c.sigma2_u.data() + c.sigma2_u.size());
    if (c.sigma2_eps.size())
        j["sigma2_eps"] = std::vector<double>(c.sigma2_eps.data(), c.sigma2_eps.data() + c.sigma2_eps.size());
    return j;
}

ConfigCheck validate_config(const json& raw) {
    ConfigCheck out;
    RunConfig& c = out.config;
    auto& errors = out.errors;
    if (!raw.is_object()) {
        errors.push_back("config: must be a JSON object");
        return out;
    }
    for (const auto& [key, v] : raw.items())
        if (!kKeys.count(key)) errors.push_back(key + ": unknown field");

    read_field(raw, "command", c.command, errors, "a string");
    read_field(raw, "model", c.model, errors, "a string");
    read_field(raw, "variant", c.variant, errors, "a string");
    read_field(raw, "data", c.data, errors, "a path");
    read_field(raw, "chain", c.chain, errors, "a path");
    read_field(raw, "design", c.design, errors, "a path");
    read_field(raw, "out", c.out, errors, "a path");
    read_field(raw, "draws", c.draws, errors, "an integer");
    read_field(raw, "burnin", c.burnin, errors, "an integer");
    read_field(raw, "thin", c.thin, errors, "an integer");
    read_field(raw, "seed", c.seed, errors, "a non-negative integer");
    read_field(raw, "threads", c.threads, errors, "an integer");
    read_field(raw, "nsim", c.nsim, errors, "an integer");
    read_field(raw, "horizons", c.horizons, errors, "a list of integers");
    read_field(raw, "scenario", c.scenario, errors, "a string");
    read_field(raw, "holdout", c.holdout, errors, "an integer");
    read_field(raw, "future_variance", c.future_variance, errors, "a string");
    read_field(raw, "N", c.N, errors, "an integer");
    read_field(raw, "T", c.T, errors, "an integer");
    if (raw.contains("theta")) {
        if (raw["theta"].is_object()) c.theta = raw["theta"];
        else errors.push_back("theta: must be an object");
    }
    if (raw.contains("prior")) {
        if (raw["prior"].is_object()) c.prior = raw["prior"];
        else errors.push_back("prior: must be an object");
    }

    if (!kCommands.count(c.command))
        errors.push_back("command: must be one of simulate, estimate, montecarlo, forecast, decompose");
    if (c.model != "m1" && c.model != "m2") errors.push_back("model: must be m1 or m2");
    if (!raw.contains("seed")) errors.push_back("seed: required");

    // Forecasting and the decomposition exist only for M2.
    if (!raw.contains("model") && (c.command == "forecast" || c.command == "decompose")) c.model = "m2";

    // Variant default and parse.
    if (c.variant.empty()) c.variant = c.model == "m2" ? "baseline" : "ss_homosk";
    try {
        if (c.model == "m2") parse_m2_variant(c.variant);
        else if (c.model == "m1") parse_m1_variant(c.variant);
    } catch (const std::exception&) {
        errors.push_back("variant: '" + c.variant + "' is not a variant of model " + c.model);
    }

    if (c.draws < 1) errors.push_back("draws: must be >= 1");
    if (c.burnin < 0) errors.push_back("burnin: must be >= 0");
    if (c.burnin >= c.draws) errors.push_back("burnin, draws: burnin must be < draws");
    if (c.thin < 1) errors.push_back("thin: must be >= 1");
    if (c.threads < 0) errors.push_back("threads: must be >= 0");
    if (c.nsim < 0) errors.push_back("nsim: must be >= 0");
    if (c.N < 1) errors.push_back("N: must be >= 1");
    if (c.T < 2) errors.push_back("T: must be >= 2");
    if (c.holdout < 0) errors.push_back("holdout: must be >= 0");
    if (c.horizons.empty()) errors.push_back("horizons: must not be empty");
    for (int h : c.horizons)
        if (h < 1) {
            errors.push_back("horizons: every horizon must be >= 1");
            break;
        }
    if (c.scenario != "all") {
        try {
            parse_scenario(c.scenario);
        } catch (const std::exception&) {
            errors.push_back("scenario: must be param_unc, no_param_unc, individual or all");
        }
    }
    if (c.future_variance != "carry_forward" && c.future_variance != "prior_draw")
        errors.push_back("future_variance: must be carry_forward or prior_draw");
    for (const auto& [key, v] : c.prior.items())
        if (!kPriorKeys.count(key)) errors.push_back("prior." + key + ": unknown hyperparameter");

    auto need_file = [&](const std::string& field, const std::string& path) {
        if (path.empty()) errors.push_back(field + ": required for " + c.command);
        else if (!fs::exists(path)) errors.push_back(field + ": '" + path + "' does not exist");
    };
    if (c.command == "estimate" || c.command == "forecast") need_file("data", c.data);
    if (c.command == "montecarlo" && !c.design.empty() && !fs::exists(c.design))
        errors.push_back("design: '" + c.design + "' does not exist");
    if (c.command == "decompose" && !c.chain.empty() && !fs::exists(c.chain))
        errors.push_back("chain: '" + c.chain + "' does not exist");
    if (c.command == "forecast" && c.model != "m2") errors.push_back("model: forecast requires m2");
    if (c.command == "decompose" && c.model != "m2") errors.push_back("model: decompose requires m2");
    if (c.command == "montecarlo" && c.model != "m1") errors.push_back("model: montecarlo requires m1");

    // Restricted variants pin some slab probabilities; a prior for them has no effect.
    if (c.prior.contains("q")) {
        const std::string& v = c.variant;
        if (v == "rip" || v == "hip")
            out.warnings.push_back("prior.q: ignored for q_alpha and q_rho under the " + v + " restriction");
        if (v == "homogeneous" || v == "q0" || v == "full_hetero_homosk" || v == "full_hetero_hetsk" ||
            v == "q1")
            out.warnings.push_back("prior.q: ignored under the " + v + " restriction");
    }
    return out;
}

}  // namespace sparsepanel
