#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsepanel/chain_output.hpp"
#include "sparsepanel/gibbs_blocks.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/model_types.hpp"
#include "sparsepanel/panel_data.hpp"
#include "sparsepanel/parallel.hpp"
#include "sparsepanel/state_space.hpp"

namespace sparsepanel {

enum class M2Variant { baseline, homosk, rip, hip };

std::string to_string(M2Variant v);
M2Variant parse_m2_variant(const std::string& s);

struct M2Config {
    M2Variant variant = M2Variant::baseline;
    int n_draws = 5000;
    int burn_in = 2500;
    int thin = 1;
    HyperParams hyper = HyperParams::m2_default(2);
    std::uint64_t seed = 0;
    bool adapt_after_burnin = false;
    // Sweep order as a permutation of {0 alpha, 1 rho, 2 hyper, 3 unit deviations,
    // 4 s0 hyper, 5 joint block with s0, 6 period variances}; empty keeps it.
    std::vector<int> block_order;
    std::vector<std::uint64_t> stream_ids;
    Exec exec = Exec::serial();

    void validate(int k) const;
    int stored_draws() const { return (n_draws - burn_in) / thin; }
};

// Observed rows of one unit inside its span [first, last] of panel columns.
struct M2UnitData {
    int first = -1;
    int last = -1;
    std::vector<int> obs_state;  // 0-based state index (column - first)
    std::vector<int> obs_col;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;  // n_obs x k
    int span() const { return last - first + 1; }
};

std::vector<M2UnitData> m2_unit_data(const PanelData& data);

// Prior draw of the common parameters with period variances over T columns.
CommonState draw_prior_m2(const HyperParams& hyper, int T, M2Variant variant, RngStream& rng);

class M2Sampler {
public:
    M2Sampler(const PanelData& data, M2Config config);

    void set_data(const PanelData& data);
    void initialize();
    void set_state(const CommonState& common, const std::vector<UnitState>& units);
    void sweep(bool adapt);

    const CommonState& common() const { return common_; }
    const std::vector<UnitState>& units() const { return units_; }
    const RwmhAdaptState& rwmh_u() const { return rwmh_u_; }
    const RwmhAdaptState& rwmh_eps() const { return rwmh_eps_; }
    const std::vector<M2UnitData>& unit_data() const { return data_; }

    ChainOutput run();

private:
    void apply_restrictions();
    void draw_alpha();
    void draw_rho();
    void draw_hyper(bool adapt);
    void draw_unit_deviations();
    void draw_s0_hyper();
    void draw_joint_and_s0();
    void draw_period_variances();
    double transition_var(int i, int j) const;  // Var(s_j | s_{j-1}), j >= 1

    M2Config config_;
    int k_ = 0;
    int T_ = 0;
    std::vector<std::string> unit_ids_;
    std::vector<M2UnitData> data_;
    CommonState common_;
    std::vector<UnitState> units_;
    RwmhAdaptState rwmh_u_, rwmh_eps_;
    RngStream common_rng_;
    std::vector<RngStream> unit_rngs_;
    std::vector<int> order_;
};

ChainOutput run_m2(const PanelData& data, const M2Config& config);

// Single-unit model with fixed priors: the unit's coefficients are N(0, v_alpha),
// rho_i ~ N(mu_rho, v_rho), time-constant variances IG, s_0 ~ N(mu_s0, v_s0).
struct IndividualPrior {
    Eigen::MatrixXd v_alpha;
    double mu_rho = 0.8;
    double v_rho = 0.25;
    InverseGammaSpec sigma2_u{4.02, 0.101};
    InverseGammaSpec sigma2_eps{4.02, 0.101};
    double mu_s0 = 0.0;
    double v_s0 = 0.05;

    static IndividualPrior defaults(int k);
};

struct IndividualConfig {
    int n_draws = 5000;
    int burn_in = 2500;
    int thin = 1;
    std::uint64_t seed = 0;
    IndividualPrior prior = IndividualPrior::defaults(2);
};

// Chain for one unit (row `unit` of `data`), stored in the M2 layout with the
// common parameters at their neutral values (alpha = 0, rho = 0, variances 1)
// so that unit fields carry the individual coefficients.
ChainOutput run_m2_individual(const PanelData& data, int unit, const IndividualConfig& config);

}  // namespace sparsepanel
