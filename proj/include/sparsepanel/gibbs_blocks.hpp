#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/rng.hpp"

namespace sparsepanel {

// Normal linear block: prior N(m, V), likelihood summarised by
// XtWX = sum w x x' and XtWy = sum w x y.
struct NormalPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

NormalPosterior normal_linear_posterior(const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov,
                                        const Eigen::MatrixXd& XtWX, const Eigen::VectorXd& XtWy);
Eigen::VectorXd update_common_regression(const Eigen::VectorXd& prior_mean,
                                         const Eigen::MatrixXd& prior_cov,
                                         const Eigen::MatrixXd& XtWX, const Eigen::VectorXd& XtWy,
                                         RngStream& rng);

// Beta(a + ones, b + n - ones).
BetaSpec posterior_q_spec(int ones, int n, const BetaSpec& prior);
double update_q(int ones, int n, const BetaSpec& prior, RngStream& rng);

// IG(nu + ones, tau + sum of squared deviations), in the nu/tau convention.
InverseGammaSpec posterior_v_delta_spec(int ones, double sum_sq, const InverseGammaSpec& prior);
double update_v_delta_normal(int ones, double sum_sq, const InverseGammaSpec& prior,
                             RngStream& rng);
InverseWishartSpec posterior_v_delta_iw_spec(int ones, const Eigen::MatrixXd& sum_outer,
                                             const InverseWishartSpec& prior);
Eigen::MatrixXd update_v_delta_alpha_iw(int ones, const Eigen::MatrixXd& sum_outer,
                                        const InverseWishartSpec& prior, RngStream& rng);

// Probability of z = 1 from log odds, with the forced cases for q in {0, 1}.
double slab_probability(double log_odds);

struct NormalSlabDraw {
    int z = 0;
    double delta = 0.0;
    double log_odds = 0.0;
    double post_mean = 0.0;
    double post_var = 0.0;
};

// Normal slab N(0, v) against a spike at zero. The unit likelihood enters through
// prec = sum w x^2 and score = sum w x r, r the partial residual.
double normal_slab_log_odds(double q, double v, double prec, double score);
NormalSlabDraw update_indicator_and_deviation_normal(double prec, double score, double q,
                                                     double v, RngStream& rng);

struct IgSlabDraw {
    int z = 0;
    double delta = 1.0;
    double log_odds = 0.0;
    InverseGammaSpec posterior;  // slab posterior
};

// IG variance-multiplier slab with mean one and variance v against a spike at
// one. n residuals with scaled sum of squares S = sum r^2 / sigma_t^2.
double ig_slab_log_odds(double q, double v, int n, double S);
IgSlabDraw update_indicator_and_deviation_ig(int n, double S, double q, double v, RngStream& rng);

// Adaptive truncated-normal random walk for the slab variance of the IG block.
struct RwmhAdaptState {
    double log_step = 0.0;  // log c
    long iteration = 0;
    double target_accept = 0.44;
    double exponent_p = 0.55;
    double cap = 10.0;
    bool adapt = true;
    long proposed = 0;
    long accepted = 0;
    double sum_accept_prob = 0.0;
};

// Sufficient statistics of the z = 1 multipliers.
struct IgSlabStats {
    int n = 0;
    double sum_log = 0.0;
    double sum_inv = 0.0;
    void add(double delta) {
        ++n;
        sum_log += std::log(delta);
        sum_inv += 1.0 / delta;
    }
};

double log_posterior_v_delta_sigma(double omega, const IgSlabStats& stats,
                                   const InverseGammaSpec& prior);
// One MH step; returns the new omega and updates `adapt` (the acceptance
// probability is fed into the step-size recursion when adapt.adapt is set).
double update_v_delta_sigma_rwmh(double omega, const IgSlabStats& stats,
                                 const InverseGammaSpec& prior, RwmhAdaptState& adapt,
                                 RngStream& rng);
// g(x) = sign(x) min(|x|, cap).
double clip_log_step(double x, double cap);

// Conjugate updates for the initial-state hyperparameters.
NormalSpec posterior_mu_s0(const Eigen::VectorXd& s0, double v_s0, double prior_mean,
                           double prior_var);
InverseGammaSpec posterior_v_s0(const Eigen::VectorXd& s0, double mu_s0,
                                const InverseGammaSpec& prior);

}  // namespace sparsepanel
