#include <gtest/gtest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/rng.hpp"
#include "stat_checks.hpp"

using namespace sparsepanel;
namespace bm = boost::math;

namespace {
constexpr int kDraws = 20000;
const double kKsCrit = 1.63 / std::sqrt(double(kDraws));  // 1% level

template <class Draw>
std::vector<double> draws(Draw&& f, int n = kDraws) {
    std::vector<double> x(n);
    for (auto& v : x) v = f();
    return x;
}
}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    RngStream a(42, 0), b(42, 0), c(42, 1);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    RngStream a2(42, 0);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a2.next_u64() == c.next_u64();
    EXPECT_EQ(same, 0);
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 1));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

TEST(Distributions, GammaMatchesReferenceCdf) {
    RngStream rng(1, 0);
    for (double shape : {0.3, 1.0, 4.5}) {
        const double rate = 2.0;
        auto x = draws([&] { return sample_gamma(shape, rate, rng); });
        bm::gamma_distribution<> ref(shape, 1.0 / rate);
        EXPECT_LT(sptest::ks_statistic(x, [&](double v) { return bm::cdf(ref, v); }), kKsCrit) << shape;
    }
}

TEST(Distributions, InverseGammaUsesHalfNuHalfTau) {
    RngStream rng(2, 0);
    const InverseGammaSpec spec{12.0, 10.0};
    auto x = draws([&] { return sample_inverse_gamma(spec, rng); });
    bm::inverse_gamma_distribution<> ref(6.0, 5.0);
    EXPECT_LT(sptest::ks_statistic(x, [&](double v) { return bm::cdf(ref, v); }), kKsCrit);
    EXPECT_NEAR(spec.mean(), 1.0, 1e-15);
    EXPECT_NEAR(spec.variance(), 0.25, 1e-15);
    EXPECT_NEAR(log_density(spec, 0.7), std::log(bm::pdf(ref, 0.7)), 1e-12);
}

TEST(Distributions, BetaMatchesReferenceCdf) {
    RngStream rng(3, 0);
    for (auto [a, b] : {std::pair{1.0, 1.0}, {0.5, 3.0}, {7.0, 2.0}}) {
        auto x = draws([&] { return sample_beta({a, b}, rng); });
        bm::beta_distribution<> ref(a, b);
        EXPECT_LT(sptest::ks_statistic(x, [&](double v) { return bm::cdf(ref, v); }), kKsCrit);
        EXPECT_NEAR(log_density(BetaSpec{a, b}, 0.3), std::log(bm::pdf(ref, 0.3)), 1e-12);
    }
}

TEST(Distributions, TruncatedNormalIncludingFarTail) {
    RngStream rng(4, 0);
    bm::normal_distribution<> z;
    for (auto [center, scale] : {std::pair{1.0, 1.0}, {-2.0, 0.5}, {-10.0, 1.0}}) {
        const TruncatedNormalSpec spec{center, 0.0, scale};
        auto x = draws([&] { return sample_truncated_normal(spec, rng); });
        for (double v : x) ASSERT_GT(v, 0.0);
        // Tail-stable CDF: 1 - Q((x - c)/s) / Q(-c/s).
        auto cdf = [&](double v) {
            return 1.0 - bm::cdf(bm::complement(z, (v - center) / scale)) /
                             bm::cdf(bm::complement(z, -center / scale));
        };
        EXPECT_LT(sptest::ks_statistic(x, cdf), kKsCrit) << center;
    }
}

TEST(Distributions, LogNormalCdfIsStableInTheTail) {
    bm::normal_distribution<> z;
    for (double x : {-1.0, -5.0, -20.0, -35.0})
        EXPECT_NEAR(log_normal_cdf(x), std::log(bm::cdf(z, x)), 1e-9 * std::abs(std::log(bm::cdf(z, x))));
    EXPECT_NEAR(log_normal_cdf(3.0), std::log(bm::cdf(z, 3.0)), 1e-14);
}

TEST(Distributions, IgReparameterisationHasMeanOneVarianceV) {
    for (double v : {0.25, 1.0, 4.0}) {
        const InverseGammaSpec s = ig_spec_from_variance(v);
        EXPECT_NEAR(s.nu, 2.0 / v + 4.0, 1e-14);
        EXPECT_NEAR(s.tau, 2.0 / v + 2.0, 1e-14);
        EXPECT_NEAR(s.mean(), 1.0, 1e-12);
        EXPECT_NEAR(s.variance(), v, 1e-12);
    }
    EXPECT_THROW(ig_spec_from_variance(0.0), DomainError);
    EXPECT_THROW(ig_spec_from_variance(-1.0), DomainError);
}

TEST(Distributions, InverseWishartMeanAndDensity) {
    RngStream rng(5, 0);
    Eigen::Matrix2d psi;
    psi << 0.5, 0.1, 0.1, 0.2;
    const InverseWishartSpec spec{9.0, psi};
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    const int n = 40000;
    for (int i = 0; i < n; ++i) acc += sample_inverse_wishart(spec, rng);
    acc /= n;
    const Eigen::MatrixXd expect = psi / (9.0 - 2 - 1);
    EXPECT_LT((acc - expect).cwiseAbs().maxCoeff(), 0.01);
    // 1x1 IW(nu, psi) is IG(nu/2, psi/2).
    const InverseWishartSpec one{7.0, Eigen::MatrixXd::Constant(1, 1, 3.0)};
    bm::inverse_gamma_distribution<> ref(3.5, 1.5);
    EXPECT_NEAR(log_density(one, Eigen::MatrixXd::Constant(1, 1, 0.8)), std::log(bm::pdf(ref, 0.8)), 1e-12);
    EXPECT_NEAR(log_mv_gamma(1, 3.3), std::lgamma(3.3), 1e-14);
}

TEST(Distributions, MvNormalPrecisionForm) {
    RngStream rng(6, 0);
    Eigen::Matrix2d P;
    P << 2.0, 0.6, 0.6, 1.0;
    const Eigen::Vector2d b(1.0, -1.0);
    const Eigen::Vector2d mu = P.ldlt().solve(b);
    const Eigen::Matrix2d S = P.inverse();
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d x = sample_mv_normal_precision(P, b, rng);
        m += x;
        c += x * x.transpose();
    }
    m /= n;
    c = c / n - m * m.transpose();
    EXPECT_LT((m - mu).cwiseAbs().maxCoeff(), 0.01);
    EXPECT_LT((c - S).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Distributions, DomainErrors) {
    RngStream rng(7, 0);
    EXPECT_THROW(sample_inverse_gamma({-1.0, 1.0}, rng), DomainError);
    EXPECT_THROW(sample_beta({0.0, 1.0}, rng), DomainError);
    EXPECT_THROW(sample_gamma(0.0, 1.0, rng), DomainError);
    EXPECT_THROW(sample_truncated_normal({0.0, 0.0, -1.0}, rng), DomainError);
    Eigen::Matrix2d bad;
    bad << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(sample_inverse_wishart({5.0, bad}, rng), std::exception);
    EXPECT_EQ(sample_bernoulli(0.0, rng), 0);
    EXPECT_EQ(sample_bernoulli(1.0, rng), 1);
}
