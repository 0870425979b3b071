#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/rng.hpp"

namespace sparsepanel {

// Dense prior covariance of s_1..s_T under s_t = phi s_{t-1} + e_t,
// Var(e_t) = w(t-1), Var(s_0) = v_s0. T = w.size(); T = 0 gives an empty matrix.
Eigen::MatrixXd build_state_prior_cov(double phi, const Eigen::VectorXd& w, double v_s0);

// Same prior in banded form: s_0 integrated out, so the innovation variances are
// d_1 = phi^2 v_s0 + w_1 and d_t = w_t, and the precision is tridiagonal.
struct StatePrior {
    Eigen::VectorXd mean;      // phi^t mu_s0
    Eigen::VectorXd prec_diag;
    Eigen::VectorXd prec_off;  // (t, t+1) entries
    double log_det_cov = 0.0;  // sum log d_t

    Eigen::MatrixXd dense_precision() const;
};

StatePrior make_state_prior(double phi, const Eigen::VectorXd& w, double mu_s0, double v_s0);

// Cholesky of the arrowhead matrix [[A, B], [B', C]] with A tridiagonal (L x L)
// and C dense (k x k). Cost is O(L k^2).
class ArrowCholesky {
public:
    bool compute(const Eigen::VectorXd& a_diag, const Eigen::VectorXd& a_off,
                 const Eigen::MatrixXd& B, const Eigen::MatrixXd& C);
    // L u = b
    Eigen::VectorXd forward(const Eigen::VectorXd& b) const;
    // L' x = u
    Eigen::VectorXd backward(const Eigen::VectorXd& u) const;
    double log_det() const;  // log |P|
    int size() const { return static_cast<int>(l_diag_.size() + k_); }

private:
    Eigen::VectorXd l_diag_;
    Eigen::VectorXd l_sub_;
    Eigen::MatrixXd G_;  // L_A^{-1} B
    Eigen::MatrixXd Ls_;
    int k_ = 0;
};

// One unit's joint (z^alpha, delta^alpha, s_1..s_L) block. Observation rows map to
// state positions; states without a row are latent gaps.
struct JointBlockInput {
    Eigen::MatrixXd X;          // n_obs x k
    std::vector<int> obs_state; // state index (0..L-1) of each row
    Eigen::VectorXd y_tilde;    // y - x' alpha
    Eigen::VectorXd obs_var;    // sigma2_u,t * delta_u
    StatePrior prior;           // over L states
    Eigen::MatrixXd v_delta_alpha;
    double q = 0.5;
};

struct JointBlockResult {
    int z = 0;
    Eigen::VectorXd delta_alpha;
    Eigen::VectorXd states;
    double log_odds = 0.0;
    double log_marginal_slab = 0.0;
    double log_marginal_spike = 0.0;
};

// Log marginal likelihood of y_tilde under either branch (k = 0 for the spike).
double joint_block_log_marginal(const JointBlockInput& in, bool slab);
JointBlockResult update_joint_indicator_delta_alpha_states(const JointBlockInput& in,
                                                           RngStream& rng);
// Posterior mean and covariance of one branch (dense; for tests).
void joint_block_posterior(const JointBlockInput& in, bool slab, Eigen::VectorXd& mean,
                           Eigen::MatrixXd& cov);

// s_0 | s_1 by one backward smoothing step.
NormalSpec s0_conditional(double phi, double s1, double mu_s0, double v_s0, double w1);
double update_s0(double phi, double s1, double mu_s0, double v_s0, double w1, RngStream& rng);

}  // namespace sparsepanel
