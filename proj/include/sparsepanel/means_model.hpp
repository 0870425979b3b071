#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/rng.hpp"

namespace sparsepanel {

// Vector-of-means model: y_i = delta_i + N(0, 1), delta_i spike-and-slab with
// slab N(0, v_delta) and slab weight q.
struct MeansPosterior {
    double delta_star = 0.0;  // slab posterior mean
    double v_star = 0.0;      // slab posterior variance
    double q_star = 0.0;      // posterior slab weight
    double log_odds = 0.0;    // log q*/(1-q*); +-inf at the degenerate limits
};

MeansPosterior exact_posterior(double y, double q, double v_delta);
double posterior_mean(double y, double q, double v_delta);
// Median of the spike/slab mixture; bisection on the mixture CDF to 1e-12.
double posterior_median(double y, double q, double v_delta);
// Largest |y| at which the posterior median is exactly zero.
double median_zero_threshold(double q, double v_delta);

double log_marginal_likelihood(const Eigen::VectorXd& Y, double q, double v_delta);

// log p(Y, Z | q, v) with 0 * log 0 = 0.
double complete_log_likelihood(const Eigen::VectorXd& Y, const std::vector<int>& z, double q,
                               double v_delta);
// (q, v) that maximize the complete likelihood for a given Z.
std::pair<double, double> profile_q_v(const Eigen::VectorXd& Y, const std::vector<int>& z);

struct ArgmaxResult {
    double q_hat = 0.0;
    double v_hat = 0.0;
    std::vector<int> z_hat;
    double log_lik = 0.0;  // profiled complete log likelihood at z_hat
    bool converged = false;
    int iterations = 0;
    // Fixed point reached by the coordinate iteration (may be a local optimum).
    std::vector<int> z_fixed_point;
};

// Coordinate iteration from (q0, v0), then a scan of the N + 1 nested sets that
// flag the k largest |y_i|. The global maximiser lies among those sets, and ties
// are broken towards fewer ones and then the lexicographically smallest vector.
ArgmaxResult argmax_estimator(const Eigen::VectorXd& Y, double q0, double v0, int max_iter = 100);

struct MeansPrior {
    BetaSpec q{1.0, 1.0};
    InverseGammaSpec v_delta{6.0, 4.0};
    bool fix_q = false;
    bool fix_v = false;
    double q_fixed = 0.5;
    double v_fixed = 1.0;
};

struct MeansChain {
    Eigen::VectorXd q;      // draws
    Eigen::VectorXd v;      // draws
    Eigen::MatrixXi z;      // draws x N
    Eigen::MatrixXd delta;  // draws x N
};

MeansChain gibbs_means(const Eigen::VectorXd& Y, const MeansPrior& prior, int n_draws, int burn_in,
                       RngStream& rng);

}  // namespace sparsepanel
