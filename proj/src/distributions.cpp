#include "sparsepanel/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sparsepanel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
    if (m.rows() != m.cols())
        throw MatrixDomainError(std::string(what) + ": matrix is not square");
    const double tol = 1e-10 * (1.0 + m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol)
        throw MatrixDomainError(std::string(what) + ": matrix is not symmetric");
}
}  // namespace

void InverseGammaSpec::validate() const {
    if (!finite_positive(nu) || !finite_positive(tau))
        throw DomainError("inverse gamma: nu and tau must be positive, got nu=" +
                          std::to_string(nu) + " tau=" + std::to_string(tau));
}

double InverseGammaSpec::mean() const {
    validate();
    if (nu <= 2.0) throw DomainError("inverse gamma mean requires nu > 2");
    return scale() / (shape() - 1.0);
}

double InverseGammaSpec::variance() const {
    validate();
    if (nu <= 4.0) throw DomainError("inverse gamma variance requires nu > 4");
    const double a = shape(), b = scale();
    return b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0));
}

InverseGammaSpec ig_spec_from_variance(double v) {
    if (!finite_positive(v))
        throw DomainError("ig_spec_from_variance: v must be positive, got " + std::to_string(v));
    return InverseGammaSpec{2.0 / v + 4.0, 2.0 / v + 2.0};
}

void InverseWishartSpec::validate() const {
    if (scale.size() == 0) throw DomainError("inverse Wishart: empty scale matrix");
    check_symmetric(scale, "inverse Wishart scale");
    if (!(dof > dim() - 1)) throw DomainError("inverse Wishart: dof must exceed dim - 1");
    Eigen::LLT<Eigen::MatrixXd> llt(scale);
    if (llt.info() != Eigen::Success)
        throw DomainError("inverse Wishart: scale is not positive definite");
}

Eigen::MatrixXd InverseWishartSpec::mean() const {
    validate();
    if (!(dof > dim() + 1)) throw DomainError("inverse Wishart mean requires dof > dim + 1");
    return scale / (dof - dim() - 1.0);
}

void TruncatedNormalSpec::validate() const {
    if (!finite_positive(scale) || !std::isfinite(center) || std::isnan(lower_bound))
        throw DomainError("truncated normal: scale must be positive and center finite");
}

void BetaSpec::validate() const {
    if (!finite_positive(a) || !finite_positive(b))
        throw DomainError("beta: a and b must be positive");
}

double sample_gamma(double shape, double rate, RngStream& rng) {
    if (!finite_positive(shape) || !finite_positive(rate))
        throw DomainError("gamma: shape and rate must be positive");
    return rng.gamma(shape) / rate;
}

double sample_inverse_gamma(const InverseGammaSpec& spec, RngStream& rng) {
    spec.validate();
    return spec.scale() / rng.gamma(spec.shape());
}

double sample_beta(const BetaSpec& spec, RngStream& rng) {
    spec.validate();
    const double x = rng.gamma(spec.a);
    const double y = rng.gamma(spec.b);
    const double s = x + y;
    if (s <= 0.0) return spec.a >= spec.b ? 1.0 : 0.0;  // both underflowed
    return x / s;
}

int sample_bernoulli(double p, RngStream& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli: p must lie in [0, 1]");
    return rng.uniform() < p ? 1 : 0;
}

Eigen::MatrixXd sample_inverse_wishart(const InverseWishartSpec& spec, RngStream& rng) {
    spec.validate();
    const int p = spec.dim();
    // Bartlett: W = C A A' C' ~ Wishart(dof, scale^{-1}) with C = chol(scale^{-1}).
    const Eigen::MatrixXd scale_inv = spec.scale.inverse();
    const Eigen::MatrixXd c = Eigen::LLT<Eigen::MatrixXd>(0.5 * (scale_inv + scale_inv.transpose())).matrixL();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (spec.dof - i)));
        for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    const Eigen::MatrixXd m = c * a;  // lower triangular
    const Eigen::MatrixXd m_inv =
        m.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd x = m_inv.transpose() * m_inv;
    return 0.5 * (x + x.transpose());
}

double sample_truncated_normal(const TruncatedNormalSpec& spec, RngStream& rng) {
    spec.validate();
    const double a = (spec.lower_bound - spec.center) / spec.scale;
    while (true) {
        double z;
        if (a < 0.45) {
            do {
                z = rng.normal();
            } while (!(z > a));
        } else {
            // Exponential rejection sampler for the far tail.
            const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
            while (true) {
                z = a - std::log(rng.uniform()) / lambda;
                const double d = z - lambda;
                if (rng.uniform() <= std::exp(-0.5 * d * d)) break;
            }
        }
        const double x = spec.center + spec.scale * z;
        if (x > spec.lower_bound) return x;
    }
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    const double jitter = 1e-10 * std::abs(m.trace()) / static_cast<double>(m.rows());
    Eigen::MatrixXd work = m;
    for (int attempt = 0; attempt < 3; ++attempt) {
        work.diagonal().array() += jitter;
        llt.compute(work);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw DecompositionError("Cholesky failed after 3 jitter attempts (matrix not positive definite)");
}

Eigen::VectorXd sample_mv_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 RngStream& rng) {
    if (cov.rows() != mean.size()) throw MatrixDomainError("mv normal: dimension mismatch");
    check_symmetric(cov, "mv normal covariance");
    if (cov.cwiseAbs().maxCoeff() == 0.0) return mean;
    const auto llt = cholesky_with_jitter(cov);
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mv_normal_precision(const Eigen::MatrixXd& precision,
                                           const Eigen::VectorXd& b, RngStream& rng) {
    if (precision.rows() != b.size()) throw MatrixDomainError("mv normal: dimension mismatch");
    check_symmetric(precision, "mv normal precision");
    const auto llt = cholesky_with_jitter(precision);
    const Eigen::VectorXd mean = llt.solve(b);
    Eigen::VectorXd z(b.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + llt.matrixU().solve(z);
}

double log_density(const NormalSpec& d, double x) {
    if (!(d.var > 0.0)) return x == d.mean ? std::numeric_limits<double>::infinity() : kNegInf;
    const double r = x - d.mean;
    return -0.5 * (kLog2Pi + std::log(d.var) + r * r / d.var);
}

double log_density_ig_shape_scale(double shape, double scale, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_density(const InverseGammaSpec& d, double x) {
    d.validate();
    return log_density_ig_shape_scale(d.shape(), d.scale(), x);
}

double log_density_gamma(double shape, double rate, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_density(const BetaSpec& d, double x) {
    d.validate();
    if (!(x > 0.0 && x < 1.0)) return kNegInf;
    return std::lgamma(d.a + d.b) - std::lgamma(d.a) - std::lgamma(d.b) +
           (d.a - 1.0) * std::log(x) + (d.b - 1.0) * std::log1p(-x);
}

double log_density(const TruncatedNormalSpec& d, double x) {
    d.validate();
    if (!(x > d.lower_bound)) return kNegInf;
    const double z = (x - d.center) / d.scale;
    return -0.5 * (kLog2Pi + z * z) - std::log(d.scale) -
           log_normal_cdf((d.center - d.lower_bound) / d.scale);
}

double log_mv_gamma(int d, double a) {
    double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
    for (int j = 0; j < d; ++j) out += std::lgamma(a - 0.5 * j);
    return out;
}

double log_density(const InverseWishartSpec& d, const Eigen::MatrixXd& x) {
    d.validate();
    const int p = d.dim();
    Eigen::LLT<Eigen::MatrixXd> llt(x);
    if (x.rows() != p || llt.info() != Eigen::Success) return kNegInf;
    const Eigen::MatrixXd lx = llt.matrixL();
    const double logdet_x = 2.0 * lx.diagonal().array().log().sum();
    const Eigen::MatrixXd ls = Eigen::LLT<Eigen::MatrixXd>(d.scale).matrixL();
    const double logdet_s = 2.0 * ls.diagonal().array().log().sum();
    const double tr = (d.scale * llt.solve(Eigen::MatrixXd::Identity(p, p))).trace();
    return 0.5 * d.dof * logdet_s - 0.5 * d.dof * p * std::log(2.0) - log_mv_gamma(p, 0.5 * d.dof) -
           0.5 * (d.dof + p + 1.0) * logdet_x - 0.5 * tr;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    // Asymptotic series for the far left tail.
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * kLog2Pi +
           std::log(1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

}  // namespace sparsepanel
