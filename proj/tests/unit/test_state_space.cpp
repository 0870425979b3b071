#include <gtest/gtest.h>

#include <cmath>

#include "sparsepanel/state_space.hpp"

using namespace sparsepanel;

TEST(StateSpace, BandedPrecisionInvertsDenseCovariance) {
    for (double phi : {0.0, 0.6, 0.97, 1.0}) {
        Eigen::VectorXd w(5);
        w << 0.1, 0.05, 0.2, 0.07, 0.12;
        const Eigen::MatrixXd cov = build_state_prior_cov(phi, w, 0.3);
        const StatePrior p = make_state_prior(phi, w, 0.4, 0.3);
        EXPECT_LT((p.dense_precision() * cov - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-9) << phi;
        EXPECT_NEAR(p.log_det_cov, std::log(cov.determinant()), 1e-9);
        for (int t = 0; t < 5; ++t) EXPECT_NEAR(p.mean(t), std::pow(phi, t + 1) * 0.4, 1e-14);
    }
}

TEST(StateSpace, MarginalVarianceRecursion) {
    const double phi = 0.8, v0 = 0.05;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(8, 0.03);
    const Eigen::MatrixXd cov = build_state_prior_cov(phi, w, v0);
    double v = v0;
    for (int t = 0; t < 8; ++t) {
        v = phi * phi * v + w(t);
        EXPECT_NEAR(cov(t, t), v, 1e-14);
    }
    EXPECT_EQ(build_state_prior_cov(phi, Eigen::VectorXd(0), v0).size(), 0);
}

TEST(StateSpace, ArrowCholeskyMatchesDense) {
    const int L = 6, k = 2;
    Eigen::VectorXd a(L), off(L - 1);
    for (int i = 0; i < L; ++i) a(i) = 4.0 + 0.3 * i;
    for (int i = 0; i < L - 1; ++i) off(i) = -1.0 + 0.1 * i;
    Eigen::MatrixXd B(L, k);
    for (int i = 0; i < L * k; ++i) B(i) = 0.2 * std::sin(i + 1.0);
    Eigen::MatrixXd C(k, k);
    C << 3.0, 0.4, 0.4, 2.0;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L + k, L + k);
    P.topLeftCorner(L, L).diagonal() = a;
    for (int i = 0; i < L - 1; ++i) P(i, i + 1) = P(i + 1, i) = off(i);
    P.topRightCorner(L, k) = B;
    P.bottomLeftCorner(k, L) = B.transpose();
    P.bottomRightCorner(k, k) = C;
    ArrowCholesky ch;
    ASSERT_TRUE(ch.compute(a, off, B, C));
    EXPECT_NEAR(ch.log_det(), std::log(P.determinant()), 1e-10);
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(L + k, -1.0, 2.0);
    const Eigen::VectorXd x = ch.backward(ch.forward(b));
    EXPECT_LT((P * x - b).norm(), 1e-10);
}

namespace {
JointBlockInput sample_input() {
    JointBlockInput in;
    in.obs_state = {0, 2, 3};
    in.X.resize(3, 2);
    in.X << 1, 0.1, 1, 0.3, 1, 0.4;
    in.y_tilde.resize(3);
    in.y_tilde << 0.2, -0.1, 0.5;
    in.obs_var = Eigen::Vector3d(0.05, 0.04, 0.06);
    in.prior = make_state_prior(0.9, Eigen::VectorXd::Constant(4, 0.03), 0.1, 0.05);
    in.v_delta_alpha = Eigen::Vector2d(0.24, 0.05).asDiagonal();
    in.q = 0.4;
    return in;
}

double dense_log_marginal(const JointBlockInput& in, bool slab) {
    const int L = static_cast<int>(in.prior.mean.size());
    const Eigen::MatrixXd S = in.prior.dense_precision().inverse();
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(in.X.rows(), L);
    for (int r = 0; r < in.X.rows(); ++r) sel(r, in.obs_state[r]) = 1.0;
    Eigen::MatrixXd cov = sel * S * sel.transpose();
    cov.diagonal() += in.obs_var;
    if (slab) cov += in.X * in.v_delta_alpha * in.X.transpose();
    const Eigen::VectorXd r = in.y_tilde - sel * in.prior.mean;
    const int n = static_cast<int>(r.size());
    return -0.5 * (n * std::log(2 * M_PI) + std::log(cov.determinant()) + r.dot(cov.inverse() * r));
}
}  // namespace

TEST(StateSpace, JointBlockLogMarginalMatchesDense) {
    const JointBlockInput in = sample_input();
    EXPECT_NEAR(joint_block_log_marginal(in, true), dense_log_marginal(in, true), 1e-9);
    EXPECT_NEAR(joint_block_log_marginal(in, false), dense_log_marginal(in, false), 1e-9);
}

TEST(StateSpace, JointBlockLogOddsAndShapes) {
    const JointBlockInput in = sample_input();
    RngStream rng(1, 0);
    const auto r = update_joint_indicator_delta_alpha_states(in, rng);
    EXPECT_NEAR(r.log_odds,
                std::log(0.4 / 0.6) + dense_log_marginal(in, true) - dense_log_marginal(in, false), 1e-9);
    EXPECT_EQ(r.states.size(), 4);
    EXPECT_EQ(r.delta_alpha.size(), 2);
    if (r.z == 0) EXPECT_EQ(r.delta_alpha.norm(), 0.0);
}

TEST(StateSpace, S0ConditionalIsGaussianConditioning) {
    const double phi = 0.7, s1 = 0.3, mu = 0.1, v = 0.05, w = 0.02;
    const NormalSpec c = s0_conditional(phi, s1, mu, v, w);
    const double cov01 = phi * v, var1 = phi * phi * v + w;
    EXPECT_NEAR(c.mean, mu + cov01 / var1 * (s1 - phi * mu), 1e-14);
    EXPECT_NEAR(c.var, v - cov01 * cov01 / var1, 1e-14);
}
