#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsepanel/chain_output.hpp"
#include "sparsepanel/gibbs_blocks.hpp"
#include "sparsepanel/model_types.hpp"
#include "sparsepanel/panel_data.hpp"
#include "sparsepanel/parallel.hpp"

namespace sparsepanel {

enum class M1Variant { ss_homosk, ss_hetsk, homogeneous, full_hetero_homosk, full_hetero_hetsk };

std::string to_string(M1Variant v);
M1Variant parse_m1_variant(const std::string& s);
bool is_heteroskedastic(M1Variant v);

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct M1Config {
    M1Variant variant = M1Variant::ss_homosk;
    int n_draws = 5000;  // total sweeps, burn-in included
    int burn_in = 2500;
    int thin = 1;
    HyperParams hyper = HyperParams::m1_default();
    std::uint64_t seed = 0;
    bool adapt_after_burnin = false;
    // Randomise the alpha/rho order inside the unit loop.
    bool randomize_unit_blocks = false;
    // Sweep order as a permutation of {0 beta, 1 hyper, 2 units, 3 sigma2}; empty keeps it.
    std::vector<int> block_order;
    // Oracle mode: every common parameter is held at `truth`; only (z, delta) move.
    bool fix_common = false;
    CommonState truth;
    // Per-unit stream ids (default: unit index).
    std::vector<std::uint64_t> stream_ids;
    Exec exec = Exec::serial();

    void validate() const;
    int stored_draws() const { return (n_draws - burn_in) / thin; }
};

// Per-unit sufficient statistics over the usable (y_{t-1}, y_t) pairs.
struct M1UnitStats {
    int n = 0;
    double sy = 0.0, sy1 = 0.0, syy = 0.0, s11 = 0.0, sy1y = 0.0;
    double rss(double a, double r) const;
};

std::vector<M1UnitStats> m1_unit_stats(const PanelData& data);

// Prior draw of the common parameters for a variant (restricted blocks at their forced values).
CommonState draw_prior_m1(const HyperParams& hyper, M1Variant variant, RngStream& rng);

class M1Sampler {
public:
    M1Sampler(const PanelData& data, M1Config config);

    void set_data(const PanelData& data);
    void initialize();
    void set_state(const CommonState& common, const std::vector<UnitState>& units);
    void sweep(bool adapt);

    const CommonState& common() const { return common_; }
    const std::vector<UnitState>& units() const { return units_; }
    const RwmhAdaptState& rwmh() const { return rwmh_; }
    const M1Config& config() const { return config_; }

    ChainOutput run();

private:
    void draw_beta();
    void draw_hyper(bool adapt);
    void draw_units();
    void draw_sigma2();
    void apply_restrictions();

    M1Config config_;
    std::vector<std::string> unit_ids_;
    std::vector<M1UnitStats> stats_;
    CommonState common_;
    std::vector<UnitState> units_;
    RwmhAdaptState rwmh_;
    RngStream common_rng_;
    std::vector<RngStream> unit_rngs_;
    std::vector<int> order_;
};

ChainOutput run_m1(const PanelData& data, const M1Config& config);

}  // namespace sparsepanel
