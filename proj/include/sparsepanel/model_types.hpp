#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "sparsepanel/distributions.hpp"

namespace sparsepanel {

// Prior hyperparameters for M1 (scalar alpha) and M2 (k-vector alpha).
struct HyperParams {
    Eigen::VectorXd mu_alpha = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd v_alpha = Eigen::MatrixXd::Identity(1, 1);
    double mu_rho = 0.0;
    double v_rho = 0.25;

    InverseGammaSpec sigma2{12.0, 10.0};  // M1 common innovation variance
    InverseGammaSpec sigma2_u{6.0, 0.2};  // M2, per period
    InverseGammaSpec sigma2_eps{6.0, 0.2};

    BetaSpec q_prior{1.0, 1.0};

    InverseGammaSpec v_delta_alpha{6.0, 4.0};  // M1
    InverseWishartSpec v_delta_alpha_iw{5.05, Eigen::MatrixXd::Identity(1, 1)};  // M2
    InverseGammaSpec v_delta_rho{6.0, 2.0};
    InverseGammaSpec v_delta_sigma{12.0, 10.0};  // M1
    InverseGammaSpec v_delta_sigma_u{12.0, 10.0};
    InverseGammaSpec v_delta_sigma_eps{12.0, 10.0};

    double mu_s0_mean = 0.0;
    double mu_s0_var = 0.05;
    InverseGammaSpec v_s0{6.0, 0.2};

    // Monte Carlo prior for M1.
    static HyperParams m1_default();
    // Empirical prior for M2 with k regressors; k = 2 gives the experience-profile prior.
    static HyperParams m2_default(int k);
};

// Current draw of the common parameters.
struct CommonState {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(1);
    double rho = 0.0;
    double sigma2 = 1.0;
    Eigen::VectorXd sigma2_u;    // M2, indexed by panel column
    Eigen::VectorXd sigma2_eps;  // M2, indexed by panel column

    double q_alpha = 0.5;
    double q_rho = 0.5;
    double q_sigma = 0.5;
    double q_sigma_u = 0.5;
    double q_sigma_eps = 0.5;

    Eigen::MatrixXd v_delta_alpha = Eigen::MatrixXd::Identity(1, 1);
    double v_delta_rho = 0.5;
    double v_delta_sigma = 1.0;
    double v_delta_sigma_u = 1.0;
    double v_delta_sigma_eps = 1.0;

    double mu_s0 = 0.0;
    double v_s0 = 0.05;
};

// Per-unit draw. z = 0 means the unit sits at the spike: delta 0 for location
// blocks, 1 for variance multipliers.
struct UnitState {
    int z_alpha = 0;
    Eigen::VectorXd delta_alpha = Eigen::VectorXd::Zero(1);
    int z_rho = 0;
    double delta_rho = 0.0;
    int z_sigma = 0;
    double delta_sigma = 1.0;
    int z_sigma_u = 0;
    double delta_sigma_u = 1.0;
    int z_sigma_eps = 0;
    double delta_sigma_eps = 1.0;
    // M2 only: s(0) is the initial state, s(j) the state at the unit's j-th column.
    Eigen::VectorXd s;
};

// True when `order` lists 0..n-1 exactly once each.
inline bool is_order_permutation(const std::vector<int>& order, int n) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return static_cast<int>(order.size()) == n && std::is_permutation(order.begin(), order.end(), ids.begin());
}

}  // namespace sparsepanel
