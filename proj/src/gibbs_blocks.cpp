#include "sparsepanel/gibbs_blocks.hpp"

#include <cmath>
#include <limits>

namespace sparsepanel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_prior_odds(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("slab probability q must lie in [0, 1]");
    if (q == 0.0) return -kInf;
    if (q == 1.0) return kInf;
    return std::log(q) - std::log1p(-q);
}
}  // namespace

NormalPosterior normal_linear_posterior(const Eigen::VectorXd& prior_mean,
                                        const Eigen::MatrixXd& prior_cov,
                                        const Eigen::MatrixXd& XtWX, const Eigen::VectorXd& XtWy) {
    const auto prior_llt = cholesky_with_jitter(prior_cov);
    const Eigen::MatrixXd prior_prec =
        prior_llt.solve(Eigen::MatrixXd::Identity(prior_cov.rows(), prior_cov.cols()));
    const Eigen::MatrixXd P = prior_prec + XtWX;
    const auto llt = cholesky_with_jitter(P);
    NormalPosterior out;
    out.cov = llt.solve(Eigen::MatrixXd::Identity(P.rows(), P.cols()));
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.mean = llt.solve(prior_prec * prior_mean + XtWy);
    return out;
}

Eigen::VectorXd update_common_regression(const Eigen::VectorXd& prior_mean,
                                         const Eigen::MatrixXd& prior_cov,
                                         const Eigen::MatrixXd& XtWX, const Eigen::VectorXd& XtWy,
                                         RngStream& rng) {
    const auto prior_llt = cholesky_with_jitter(prior_cov);
    const Eigen::MatrixXd prior_prec =
        prior_llt.solve(Eigen::MatrixXd::Identity(prior_cov.rows(), prior_cov.cols()));
    return sample_mv_normal_precision(prior_prec + XtWX, prior_prec * prior_mean + XtWy, rng);
}

BetaSpec posterior_q_spec(int ones, int n, const BetaSpec& prior) {
    prior.validate();
    if (ones < 0 || ones > n) throw DomainError("update_q: ones must lie in [0, n]");
    return {prior.a + ones, prior.b + (n - ones)};
}

double update_q(int ones, int n, const BetaSpec& prior, RngStream& rng) {
    return sample_beta(posterior_q_spec(ones, n, prior), rng);
}

InverseGammaSpec posterior_v_delta_spec(int ones, double sum_sq, const InverseGammaSpec& prior) {
    prior.validate();
    return {prior.nu + ones, prior.tau + sum_sq};
}

double update_v_delta_normal(int ones, double sum_sq, const InverseGammaSpec& prior,
                             RngStream& rng) {
    return sample_inverse_gamma(posterior_v_delta_spec(ones, sum_sq, prior), rng);
}

InverseWishartSpec posterior_v_delta_iw_spec(int ones, const Eigen::MatrixXd& sum_outer,
                                             const InverseWishartSpec& prior) {
    return {prior.dof + ones, prior.scale + sum_outer};
}

Eigen::MatrixXd update_v_delta_alpha_iw(int ones, const Eigen::MatrixXd& sum_outer,
                                        const InverseWishartSpec& prior, RngStream& rng) {
    return sample_inverse_wishart(posterior_v_delta_iw_spec(ones, sum_outer, prior), rng);
}

double slab_probability(double log_odds) {
    if (log_odds == kInf) return 1.0;
    if (log_odds == -kInf) return 0.0;
    if (log_odds >= 0) return 1.0 / (1.0 + std::exp(-log_odds));
    const double e = std::exp(log_odds);
    return e / (1.0 + e);
}

double normal_slab_log_odds(double q, double v, double prec, double score) {
    const double prior = log_prior_odds(q);
    if (std::isinf(prior)) return prior;
    if (!(v > 0.0)) throw DomainError("normal slab: v_delta must be positive");
    const double vbar = 1.0 / (1.0 / v + prec);
    const double dbar = vbar * score;
    return prior + 0.5 * std::log(vbar / v) + 0.5 * dbar * dbar / vbar;
}

NormalSlabDraw update_indicator_and_deviation_normal(double prec, double score, double q,
                                                     double v, RngStream& rng) {
    NormalSlabDraw d;
    d.log_odds = normal_slab_log_odds(q, v, prec, score);
    d.z = sample_bernoulli(slab_probability(d.log_odds), rng);
    if (d.z) {
        d.post_var = 1.0 / (1.0 / v + prec);
        d.post_mean = d.post_var * score;
        d.delta = d.post_mean + std::sqrt(d.post_var) * rng.normal();
    }
    return d;
}

double ig_slab_log_odds(double q, double v, int n, double S) {
    const double prior = log_prior_odds(q);
    if (std::isinf(prior)) return prior;
    if (!(v > 0.0)) throw DomainError("IG slab: v_delta must be positive");
    const double a0 = 1.0 / v + 2.0;  // prior shape
    const double b0 = 1.0 / v + 1.0;  // prior scale
    const double a1 = a0 + 0.5 * n;
    const double b1 = b0 + 0.5 * S;
    return prior + std::lgamma(a1) - std::lgamma(a0) + a0 * std::log(b0) - a1 * std::log(b1) +
           0.5 * S;
}

IgSlabDraw update_indicator_and_deviation_ig(int n, double S, double q, double v, RngStream& rng) {
    IgSlabDraw d;
    d.log_odds = ig_slab_log_odds(q, v, n, S);
    d.posterior = {2.0 / v + 4.0 + n, 2.0 / v + 2.0 + S};
    d.z = sample_bernoulli(slab_probability(d.log_odds), rng);
    if (d.z) d.delta = sample_inverse_gamma(d.posterior, rng);
    return d;
}

double log_posterior_v_delta_sigma(double omega, const IgSlabStats& stats,
                                   const InverseGammaSpec& prior) {
    if (!(omega > 0.0) || !std::isfinite(omega)) return -kInf;
    const double a = 1.0 / omega + 2.0;
    const double b = 1.0 / omega + 1.0;
    const double lik = stats.n * (a * std::log(b) - std::lgamma(a)) - (a + 1.0) * stats.sum_log -
                       b * stats.sum_inv;
    return lik + log_density(prior, omega);
}

double clip_log_step(double x, double cap) {
    return std::copysign(std::min(std::abs(x), cap), x);
}

double update_v_delta_sigma_rwmh(double omega, const IgSlabStats& stats,
                                 const InverseGammaSpec& prior, RwmhAdaptState& adapt,
                                 RngStream& rng) {
    const double c = std::exp(adapt.log_step);
    const double proposal = sample_truncated_normal({omega, 0.0, c}, rng);
    const double lp_new = log_posterior_v_delta_sigma(proposal, stats, prior);
    const double lp_old = log_posterior_v_delta_sigma(omega, stats, prior);
    double accept = 0.0;
    if (std::isfinite(lp_new)) {
        const double log_ratio =
            lp_new - lp_old - (log_normal_cdf(proposal / c) - log_normal_cdf(omega / c));
        accept = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    }
    ++adapt.proposed;
    adapt.sum_accept_prob += accept;
    double out = omega;
    if (rng.uniform() < accept) {
        out = proposal;
        ++adapt.accepted;
    }
    ++adapt.iteration;
    if (adapt.adapt) {
        const double gain = std::pow(static_cast<double>(adapt.iteration), -adapt.exponent_p);
        adapt.log_step =
            clip_log_step(adapt.log_step + gain * (accept - adapt.target_accept), adapt.cap);
    }
    return out;
}

NormalSpec posterior_mu_s0(const Eigen::VectorXd& s0, double v_s0, double prior_mean,
                           double prior_var) {
    const double n = static_cast<double>(s0.size());
    const double var = 1.0 / (1.0 / prior_var + n / v_s0);
    return {var * (prior_mean / prior_var + s0.sum() / v_s0), var};
}

InverseGammaSpec posterior_v_s0(const Eigen::VectorXd& s0, double mu_s0,
                                const InverseGammaSpec& prior) {
    return {prior.nu + static_cast<double>(s0.size()),
            prior.tau + (s0.array() - mu_s0).square().sum()};
}

}  // namespace sparsepanel
