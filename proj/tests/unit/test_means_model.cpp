#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sparsepanel/means_model.hpp"
#include "stat_checks.hpp"

using namespace sparsepanel;

TEST(MeansModel, ExactPosteriorMatchesQuadrature) {
    for (double y : {-3.0, -0.4, 0.0, 1.2, 4.0})
        for (double q : {0.1, 0.5, 0.9})
            for (double v : {0.05, 1.0, 5.0}) {
                const auto [p1, m] = sptest::means_posterior_quadrature(y, q, v);
                const auto p = exact_posterior(y, q, v);
                EXPECT_NEAR(p.q_star, p1, 1e-8);
                EXPECT_NEAR(posterior_mean(y, q, v), m, 1e-8);
            }
}

TEST(MeansModel, DegenerateSlabProbabilities) {
    const auto p0 = exact_posterior(2.0, 0.0, 1.0);
    EXPECT_EQ(p0.q_star, 0.0);
    EXPECT_EQ(posterior_mean(2.0, 0.0, 1.0), 0.0);
    const auto p1 = exact_posterior(2.0, 1.0, 1.0);
    EXPECT_EQ(p1.q_star, 1.0);
    EXPECT_DOUBLE_EQ(posterior_mean(2.0, 1.0, 1.0), 1.0);
    EXPECT_THROW(exact_posterior(0.0, 1.5, 1.0), DomainError);
}

TEST(MeansModel, MedianIsZeroExactlyInsideThreshold) {
    for (double q : {0.1, 0.3, 0.5})
        for (double v : {0.5, 2.0}) {
            const double c = median_zero_threshold(q, v);
            ASSERT_TRUE(std::isfinite(c));
            for (double f : {0.0, 0.3, 0.9, 0.999}) {
                EXPECT_EQ(posterior_median(f * c, q, v), 0.0);
                EXPECT_EQ(posterior_median(-f * c, q, v), 0.0);
            }
            EXPECT_NE(posterior_median(c * 1.01 + 1e-9, q, v), 0.0);
            EXPECT_GT(posterior_median(c * 1.5, q, v), 0.0);
            EXPECT_LT(posterior_median(-c * 1.5, q, v), 0.0);
        }
}

TEST(MeansModel, ArgmaxAgreesWithExhaustiveSearch) {
    RngStream rng(11, 0);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 3 + rep % 6;
        Eigen::VectorXd Y(n);
        for (int i = 0; i < n; ++i) Y(i) = rng.normal() * (rng.uniform() < 0.3 ? 3.0 : 1.0);
        const auto res = argmax_estimator(Y, 0.5, 1.0);
        EXPECT_EQ(res.z_hat, sptest::exhaustive_argmax(Y)) << "instance " << rep;
    }
}

TEST(MeansModel, GibbsMatchesExactPosteriorWithFixedHyperparameters) {
    Eigen::VectorXd Y(3);
    Y << 0.2, 1.5, 3.0;
    MeansPrior prior;
    prior.fix_q = prior.fix_v = true;
    prior.q_fixed = 0.3;
    prior.v_fixed = 2.0;
    RngStream rng(12, 0);
    const MeansChain c = gibbs_means(Y, prior, 40000, 100, rng);
    for (int i = 0; i < 3; ++i) {
        const auto p = exact_posterior(Y(i), 0.3, 2.0);
        EXPECT_NEAR(c.z.col(i).cast<double>().mean(), p.q_star, 0.015);
        EXPECT_NEAR(c.delta.col(i).mean(), posterior_mean(Y(i), 0.3, 2.0), 0.03);
    }
}

TEST(MeansModel, MarginalLikelihoodSumsOverIndicators) {
    Eigen::VectorXd Y(2);
    Y << 0.7, -1.9;
    const double q = 0.4, v = 1.5;
    double total = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) total += std::exp(complete_log_likelihood(Y, {a, b}, q, v));
    EXPECT_NEAR(log_marginal_likelihood(Y, q, v), std::log(total), 1e-12);
}
