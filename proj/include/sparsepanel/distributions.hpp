#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "sparsepanel/rng.hpp"

namespace sparsepanel {

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MatrixDomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DecompositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// IG(nu/2, tau/2): shape nu/2, scale tau/2.
struct InverseGammaSpec {
    double nu = 6.0;
    double tau = 4.0;

    double shape() const { return 0.5 * nu; }
    double scale() const { return 0.5 * tau; }
    void validate() const;
    double mean() const;      // requires nu > 2
    double variance() const;  // requires nu > 4
};

// Prior for a variance multiplier with mean one and variance v.
InverseGammaSpec ig_spec_from_variance(double v);

struct InverseWishartSpec {
    double dof = 5.05;
    Eigen::MatrixXd scale;

    int dim() const { return static_cast<int>(scale.rows()); }
    void validate() const;
    Eigen::MatrixXd mean() const;  // requires dof > dim + 1
};

// Normal(center, scale^2) restricted to (lower_bound, inf).
struct TruncatedNormalSpec {
    double center = 0.0;
    double lower_bound = 0.0;
    double scale = 1.0;
    void validate() const;
};

struct NormalSpec {
    double mean = 0.0;
    double var = 1.0;
};

struct BetaSpec {
    double a = 1.0;
    double b = 1.0;
    void validate() const;
};

double sample_gamma(double shape, double rate, RngStream& rng);
double sample_inverse_gamma(const InverseGammaSpec& spec, RngStream& rng);
double sample_beta(const BetaSpec& spec, RngStream& rng);
int sample_bernoulli(double p, RngStream& rng);
Eigen::MatrixXd sample_inverse_wishart(const InverseWishartSpec& spec, RngStream& rng);
double sample_truncated_normal(const TruncatedNormalSpec& spec, RngStream& rng);

// Draw from N(mean, cov). A failed Cholesky is retried with diagonal jitter
// 1e-10 * trace / dim, up to three times.
Eigen::VectorXd sample_mv_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 RngStream& rng);

// Draw from N(P^{-1} b, P^{-1}) given a precision matrix P (same jitter policy).
Eigen::VectorXd sample_mv_normal_precision(const Eigen::MatrixXd& precision,
                                           const Eigen::VectorXd& b, RngStream& rng);

// Cholesky factor of an SPD matrix with the jitter fallback.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m);

// Log densities; -inf outside the support.
double log_density(const NormalSpec& d, double x);
double log_density(const InverseGammaSpec& d, double x);
double log_density(const BetaSpec& d, double x);
double log_density(const TruncatedNormalSpec& d, double x);
double log_density_gamma(double shape, double rate, double x);
double log_density_ig_shape_scale(double shape, double scale, double x);
double log_density(const InverseWishartSpec& d, const Eigen::MatrixXd& x);

double normal_cdf(double x);
double log_normal_cdf(double x);
// log of the d-variate multivariate gamma function.
double log_mv_gamma(int d, double a);

}  // namespace sparsepanel
