#pragma once

// Joint-distribution test: moments of the parameters from independent prior
// draws against those of a chain that alternates a posterior sweep with a
// fresh draw of the data.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/m2_sampler.hpp"
#include "sparsepanel/panel_data.hpp"
#include "stat_checks.hpp"

namespace sptest {

struct GewekeStat {
    std::string name;
    double z = 0.0;
};

struct GewekeResult {
    std::vector<GewekeStat> stats;
    int within(double bound) const {
        int c = 0;
        for (const auto& s : stats) c += std::abs(s.z) <= bound;
        return c;
    }
    double fraction_within(double bound) const {
        return stats.empty() ? 0.0 : static_cast<double>(within(bound)) / stats.size();
    }
};

template <class State>
using Functional = std::pair<std::string, std::function<double(const State&)>>;

struct M1Snapshot {
    sparsepanel::CommonState c;
    std::vector<sparsepanel::UnitState> u;
};

struct M2Snapshot {
    sparsepanel::CommonState c;
    std::vector<sparsepanel::UnitState> u;
};

namespace detail {
template <class State>
GewekeResult compare(const std::vector<Functional<State>>& fs,
                     const std::vector<std::vector<double>>& mc,
                     const std::vector<std::vector<double>>& sc, int batches) {
    GewekeResult r;
    for (std::size_t f = 0; f < fs.size(); ++f) {
        const double se_mc2 = variance(mc[f]) / mc[f].size();
        const double se_sc = batch_means_se(sc[f], batches);
        const double denom = std::sqrt(se_mc2 + se_sc * se_sc);
        const double diff = mean(mc[f]) - mean(sc[f]);
        r.stats.push_back({fs[f].first, denom > 0 ? diff / denom : (diff == 0 ? 0.0 : 1e9)});
    }
    return r;
}

template <class State>
std::vector<Functional<State>> common_functionals(bool m2) {
    std::vector<Functional<State>> f;
    auto add = [&](std::string n, std::function<double(const State&)> g) { f.emplace_back(std::move(n), std::move(g)); };
    add("alpha", [](const State& s) { return s.c.alpha(0); });
    add("alpha^2", [](const State& s) { return s.c.alpha(0) * s.c.alpha(0); });
    add("rho", [](const State& s) { return s.c.rho; });
    add("rho^2", [](const State& s) { return s.c.rho * s.c.rho; });
    add("q_alpha", [](const State& s) { return s.c.q_alpha; });
    add("q_rho", [](const State& s) { return s.c.q_rho; });
    add("log v_delta_alpha", [](const State& s) { return std::log(s.c.v_delta_alpha(0, 0)); });
    add("log v_delta_rho", [](const State& s) { return std::log(s.c.v_delta_rho); });
    add("z_alpha[0]", [](const State& s) { return double(s.u[0].z_alpha); });
    add("z_rho[0]", [](const State& s) { return double(s.u[0].z_rho); });
    add("delta_alpha[0]", [](const State& s) { return s.u[0].delta_alpha(0); });
    add("delta_rho[0]", [](const State& s) { return s.u[0].delta_rho; });
    add("delta_rho[1]^2", [](const State& s) { return s.u[1].delta_rho * s.u[1].delta_rho; });
    if (!m2) {
        add("log sigma2", [](const State& s) { return std::log(s.c.sigma2); });
    } else {
        add("log sigma2_u[0]", [](const State& s) { return std::log(s.c.sigma2_u(0)); });
        add("log sigma2_u[2]", [](const State& s) { return std::log(s.c.sigma2_u(2)); });
        add("log sigma2_eps[0]", [](const State& s) { return std::log(s.c.sigma2_eps(0)); });
        add("log sigma2_eps[2]", [](const State& s) { return std::log(s.c.sigma2_eps(2)); });
        add("q_sigma_u", [](const State& s) { return s.c.q_sigma_u; });
        add("q_sigma_eps", [](const State& s) { return s.c.q_sigma_eps; });
        add("log v_delta_sigma_u", [](const State& s) { return std::log(s.c.v_delta_sigma_u); });
        add("log v_delta_sigma_eps", [](const State& s) { return std::log(s.c.v_delta_sigma_eps); });
        add("mu_s0", [](const State& s) { return s.c.mu_s0; });
        add("log v_s0", [](const State& s) { return std::log(s.c.v_s0); });
        add("z_sigma_u[0]", [](const State& s) { return double(s.u[0].z_sigma_u); });
        add("log delta_sigma_u[0]", [](const State& s) { return std::log(s.u[0].delta_sigma_u); });
        add("z_sigma_eps[1]", [](const State& s) { return double(s.u[1].z_sigma_eps); });
        add("log delta_sigma_eps[1]", [](const State& s) { return std::log(s.u[1].delta_sigma_eps); });
        add("s0[0]", [](const State& s) { return s.u[0].s(0); });
        add("s_last[2]", [](const State& s) { return s.u[2].s(s.u[2].s.size() - 1); });
    }
    return f;
}
}  // namespace detail

// ss_homosk on N units and T + 1 columns.
inline GewekeResult geweke_m1(int N, int T, int n_marginal, int n_successive, std::uint64_t seed,
                              int batches = 100) {
    using namespace sparsepanel;
    const auto fs = detail::common_functionals<M1Snapshot>(false);
    const HyperParams hyper = HyperParams::m1_default();
    const M1Variant variant = M1Variant::ss_homosk;
    std::vector<std::vector<double>> mc(fs.size()), sc(fs.size());

    RngStream rng(seed, 0);
    auto prior_state = [&](M1Snapshot& s) {
        s.c = draw_prior_m1(hyper, variant, rng);
        s.u.clear();
        for (int i = 0; i < N; ++i) s.u.push_back(draw_m1_unit(s.c, rng));
    };
    M1Snapshot s;
    for (int d = 0; d < n_marginal; ++d) {
        prior_state(s);
        for (std::size_t f = 0; f < fs.size(); ++f) mc[f].push_back(fs[f].second(s));
    }

    prior_state(s);
    std::vector<RngStream> data_rngs;
    for (int i = 0; i < N; ++i) data_rngs.emplace_back(seed + 1, i);
    PanelData data = simulate_m1_given(s.c, s.u, T, data_rngs);
    M1Config cfg;
    cfg.variant = variant;
    cfg.hyper = hyper;
    cfg.seed = seed + 2;
    cfg.n_draws = 2;
    cfg.burn_in = 1;
    M1Sampler sampler(data, cfg);
    sampler.set_state(s.c, s.u);
    for (int d = 0; d < n_successive; ++d) {
        sampler.sweep(false);
        s.c = sampler.common();
        s.u = sampler.units();
        for (std::size_t f = 0; f < fs.size(); ++f) sc[f].push_back(fs[f].second(s));
        sampler.set_data(simulate_m1_given(s.c, s.u, T, data_rngs));
    }
    return detail::compare(fs, mc, sc, batches);
}

// M2 baseline with k = 1 (constant regressor), N units and T columns.
inline GewekeResult geweke_m2(int N, int T, int n_marginal, int n_successive, std::uint64_t seed,
                              int batches = 100) {
    using namespace sparsepanel;
    const auto fs = detail::common_functionals<M2Snapshot>(true);
    const HyperParams hyper = HyperParams::m2_default(1);
    const M2Variant variant = M2Variant::baseline;
    const std::vector<Eigen::MatrixXd> x{Eigen::MatrixXd::Ones(N, T)};
    std::vector<std::vector<double>> mc(fs.size()), sc(fs.size());

    RngStream rng(seed, 0);
    std::vector<RngStream> data_rngs;
    for (int i = 0; i < N; ++i) data_rngs.emplace_back(seed + 1, i);
    auto prior_state = [&](M2Snapshot& s) {
        s.c = draw_prior_m2(hyper, T, variant, rng);
        s.u.clear();
        for (int i = 0; i < N; ++i) s.u.push_back(draw_m2_unit(s.c, rng));
    };
    M2Snapshot s;
    for (int d = 0; d < n_marginal; ++d) {
        prior_state(s);
        simulate_m2_given(s.c, s.u, x, data_rngs);  // fills the state paths
        for (std::size_t f = 0; f < fs.size(); ++f) mc[f].push_back(fs[f].second(s));
    }

    prior_state(s);
    PanelData data = simulate_m2_given(s.c, s.u, x, data_rngs);
    M2Config cfg;
    cfg.variant = variant;
    cfg.hyper = hyper;
    cfg.seed = seed + 2;
    cfg.n_draws = 2;
    cfg.burn_in = 1;
    M2Sampler sampler(data, cfg);
    sampler.set_state(s.c, s.u);
    for (int d = 0; d < n_successive; ++d) {
        sampler.sweep(false);
        s.c = sampler.common();
        s.u = sampler.units();
        for (std::size_t f = 0; f < fs.size(); ++f) sc[f].push_back(fs[f].second(s));
        // Redraw (states, y) given s_0 and the parameters: both are prior conditionals.
        std::vector<UnitState> u = s.u;
        sampler.set_data(simulate_m2_given(s.c, u, x, data_rngs));
        sampler.set_state(s.c, u);
    }
    return detail::compare(fs, mc, sc, batches);
}

}  // namespace sptest
