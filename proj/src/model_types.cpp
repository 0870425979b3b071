#include "sparsepanel/model_types.hpp"

namespace sparsepanel {

HyperParams HyperParams::m1_default() {
    HyperParams h;
    h.mu_alpha = Eigen::VectorXd::Zero(1);
    h.v_alpha = Eigen::MatrixXd::Identity(1, 1);
    h.mu_rho = 0.0;
    h.v_rho = 0.25;
    h.sigma2 = {12.0, 10.0};
    h.q_prior = {1.0, 1.0};
    h.v_delta_alpha = {6.0, 4.0};
    h.v_delta_rho = {6.0, 2.0};
    h.v_delta_sigma = {12.0, 10.0};
    return h;
}

HyperParams HyperParams::m2_default(int k) {
    if (k < 1) throw DomainError("m2_default: k must be >= 1");
    HyperParams h;
    h.mu_alpha = Eigen::VectorXd::Zero(k);
    h.v_alpha = Eigen::MatrixXd::Identity(k, k);
    h.mu_rho = 0.8;
    h.v_rho = 1.0;
    h.sigma2_u = {6.0, 0.2};
    h.sigma2_eps = {6.0, 0.2};
    h.q_prior = {1.0, 1.0};
    Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(k, k) * 0.1;
    psi(0, 0) = 0.5;
    h.v_delta_alpha_iw = {5.05, psi};
    h.v_delta_rho = {16.5, 3.625};
    h.v_delta_sigma_u = {12.0, 10.0};
    h.v_delta_sigma_eps = {12.0, 10.0};
    h.mu_s0_mean = 0.0;
    h.mu_s0_var = 0.05;
    h.v_s0 = {6.0, 0.2};
    return h;
}

}  // namespace sparsepanel
