#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparsepanel/chain_output.hpp"
#include "sparsepanel/m2_sampler.hpp"
#include "sparsepanel/model_types.hpp"
#include "sparsepanel/panel_data.hpp"
#include "sparsepanel/parallel.hpp"

namespace sparsepanel {

enum class Scenario { param_unc, no_param_unc, individual };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

// Predictive draws for y_{i,T+h}. Index [h] follows `horizons`; each matrix is
// draws x units. `mean` and `var` are the conditional moments of each draw,
// used for the mixture density.
struct PredictiveDraws {
    Scenario scenario = Scenario::param_unc;
    std::vector<std::string> unit_ids;
    std::vector<int> horizons;
    std::vector<Eigen::MatrixXd> y;
    std::vector<Eigen::MatrixXd> mean;
    std::vector<Eigen::MatrixXd> var;

    int n_draws() const { return y.empty() ? 0 : static_cast<int>(y[0].rows()); }
    int n_units() const { return static_cast<int>(unit_ids.size()); }
    int horizon_index(int h) const;
};

// Period variances beyond the sample are not identified by the data.
struct FutureVariance {
    enum class Mode { carry_forward, prior_draw };
    Mode mode = Mode::carry_forward;
    InverseGammaSpec sigma2_u{};    // priors used by prior_draw
    InverseGammaSpec sigma2_eps{};
};

FutureVariance::Mode parse_future_variance(const std::string& s);

// Forward simulation from an M2 chain. Regressors beyond the last panel column
// are extrapolated linearly per unit. Out-of-sample period variances either
// repeat the last column or are drawn from their priors, per `future`.
// `no_param_unc` fixes parameters at their posterior means and draws the
// terminal state from its filtered distribution under those values.
PredictiveDraws predict(const ChainOutput& chain, const PanelData& data,
                        const std::vector<int>& horizons, Scenario scenario, std::uint64_t seed,
                        const Exec& exec = Exec::serial(), const FutureVariance& future = {});

// Individual-information scenario: one single-unit chain per unit.
PredictiveDraws predict_individual(const PanelData& data, const std::vector<int>& horizons,
                                   const IndividualConfig& config, std::uint64_t seed,
                                   const Exec& exec = Exec::serial());

struct ScoreReport {
    double mse = 0.0;
    double lps = 0.0;
    int n_units = 0;
    Eigen::VectorXd unit_sq_error;  // NaN where not scored
    Eigen::VectorXd unit_log_score;
    std::vector<std::string> zero_density_units;
};

// Scores horizon `h` against realized values (NaN entries are skipped).
ScoreReport score(const PredictiveDraws& pred, const Eigen::VectorXd& realized, int h = 1);
// Log of the mixture density (1/D) sum_d N(y; m_d, v_d).
double mixture_log_density(const Eigen::VectorXd& mean, const Eigen::VectorXd& var, double y);

// 100 (MSE(alt) - MSE(base)) / MSE(base); negative is an improvement.
double relative_mse(const ScoreReport& base, const ScoreReport& alt);
// LPS(base) - LPS(alt); negative is an improvement of alt.
double lps_differential(const ScoreReport& base, const ScoreReport& alt);

// Posterior probability that each unit sits at the spike for `z_field`.
Eigen::VectorXd core_probability(const ChainOutput& chain, const std::string& z_field = "z_alpha");

struct WidthRatios {
    Eigen::VectorXd ratio;  // NaN for excluded units
    std::vector<std::string> excluded;
    double mean_all = 0.0;
    double mean_core = 0.0;
    double mean_deviator = 0.0;
    int n_core = 0;
    int n_deviator = 0;
};

// Equal-tail interval width of `num` over that of `den` at horizon h. Units
// with P(z = 0) >= 0.5 count as core.
WidthRatios interval_width_ratios(const PredictiveDraws& num, const PredictiveDraws& den, int h,
                                  const Eigen::VectorXd& p_core, double level = 0.9);

struct DecompositionOptions {
    int N = 10000;
    int T = 20;
    double h1 = 1.0;  // initial experience
    std::uint64_t seed = 0;
};

struct DecompositionResult {
    Eigen::VectorXd v;               // V_t
    Eigen::VectorXd v_no_delta_alpha;  // V_t with delta_alpha = 0
    Eigen::VectorXd v_no_u;          // V_t with sigma2_u = 0
    Eigen::VectorXd ratio_delta_alpha;
    Eigen::VectorXd ratio_u;
};

// Cohort simulation with shared innovations. Regressors are [1, h/10] with
// h_t = h1 + t - 1; period variances beyond the supplied vectors repeat the last.
DecompositionResult inequality_decomposition(const CommonState& theta,
                                             const DecompositionOptions& opts = {});

// Posterior-mean parameters of an M2 chain.
CommonState posterior_mean_common(const ChainOutput& chain);

void write_fan_chart(const PredictiveDraws& pred, const std::string& path,
                     const std::vector<double>& quantiles = {0.05, 0.25, 0.5, 0.75, 0.95});
void write_scores(const std::map<std::string, ScoreReport>& reports, const std::string& baseline,
                  const std::string& path);
void write_decomposition(const DecompositionResult& d, const std::string& path);

}  // namespace sparsepanel
