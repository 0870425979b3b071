#pragma once

// Draw-level checks of each Gibbs block against an independently evaluated
// conditional: closed forms from Boost, quadrature, or a numerical grid.

#include <Eigen/Dense>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>
#include <vector>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/gibbs_blocks.hpp"
#include "sparsepanel/rng.hpp"
#include "sparsepanel/state_space.hpp"
#include "stat_checks.hpp"

namespace sptest {

struct BlockCheck {
    std::string name;
    double ks = 0.0;         // KS distance of the continuous part
    double z_score = 0.0;    // standardized error of the indicator frequency (0 if none)
};

namespace detail {
namespace bm = boost::math;
using namespace sparsepanel;

inline double normal_cdf(double x, double mean, double var) {
    return bm::cdf(bm::normal_distribution<>(mean, std::sqrt(var)), x);
}

inline double ig_cdf(double x, double shape, double scale) {
    return x <= 0.0 ? 0.0 : bm::cdf(bm::inverse_gamma_distribution<>(shape, scale), x);
}

inline double freq_z(int ones, int n, double p) {
    if (p <= 0.0 || p >= 1.0) return ones == (p >= 1.0 ? n : 0) ? 0.0 : 1e9;
    return (ones - n * p) / std::sqrt(n * p * (1.0 - p));
}

// log of integral over the slab for the normal block, by quadrature.
inline double log_normal_slab_evidence(double prec, double score, double v) {
    bm::quadrature::gauss_kronrod<double, 61> gk;
    const double m = score / (prec + 1.0 / v), sd = 1.0 / std::sqrt(prec + 1.0 / v);
    const double shift = 0.5 * m * m * (prec + 1.0 / v);
    auto f = [&](double d) {
        return std::exp(-0.5 * prec * d * d + score * d - shift) * std::exp(-0.5 * d * d / v) /
               std::sqrt(2 * M_PI * v);
    };
    return std::log(gk.integrate(f, m - 40 * sd, m + 40 * sd, 15, 1e-13)) + shift;
}

inline double log_ig_slab_evidence(int n, double S, double v) {
    const double a0 = 1.0 / v + 2.0, b0 = 1.0 / v + 1.0;
    bm::inverse_gamma_distribution<> prior(a0, b0);
    // Integrand scaled by its value at the posterior mode to avoid underflow.
    const double mode = (b0 + 0.5 * S) / (a0 + 0.5 * n + 1.0);
    auto loglik = [&](double d) { return -0.5 * n * std::log(d) - 0.5 * S / d; };
    const double ref = loglik(mode);
    bm::quadrature::gauss_kronrod<double, 61> gk;
    auto f = [&](double d) { return d <= 0 ? 0.0 : std::exp(loglik(d) - ref) * bm::pdf(prior, d); };
    const double hi = 200.0 * std::max(1.0, mode);
    double total = gk.integrate(f, 0.0, mode, 15, 1e-13) + gk.integrate(f, mode, hi, 15, 1e-13);
    return std::log(total) + ref;
}
}  // namespace detail

// `instance` selects the randomized inputs; draws per check = n.
inline std::vector<BlockCheck> run_block_checks(int n, std::uint64_t seed, int instance) {
    using namespace sparsepanel;
    using namespace detail;
    std::vector<BlockCheck> out;
    RngStream gen(seed, 1000 + instance);  // inputs
    RngStream rng(seed, instance);         // block draws
    const std::string tag = " #" + std::to_string(instance);

    // Common regression coefficients (2-d normal linear block).
    {
        Eigen::MatrixXd X(6, 2);
        Eigen::VectorXd y(6), w(6);
        for (int i = 0; i < 6; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = gen.normal();
            y(i) = 0.5 + 0.8 * X(i, 1) + gen.normal();
            w(i) = 0.5 + gen.uniform();
        }
        const Eigen::Vector2d m0(0.0, 0.0);
        const Eigen::Matrix2d V0 = Eigen::Vector2d(1.0, 0.25).asDiagonal();
        const Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
        const Eigen::VectorXd XtWy = X.transpose() * w.asDiagonal() * y;
        // Covariance-form oracle: Sigma = (V0^-1 + X'WX)^-1 via Woodbury.
        const Eigen::MatrixXd W = w.asDiagonal();
        const Eigen::MatrixXd K = V0 * X.transpose() *
                                  (X * V0 * X.transpose() + Eigen::MatrixXd(W.inverse())).inverse();
        const Eigen::VectorXd mean = m0 + K * (y - X * m0);
        const Eigen::MatrixXd cov = V0 - K * X * V0;
        std::vector<double> a(n), b(n);
        for (int d = 0; d < n; ++d) {
            const Eigen::VectorXd x = update_common_regression(m0, V0, XtWX, XtWy, rng);
            a[d] = x(0);
            b[d] = x(1);
        }
        out.push_back({"common_regression[0]" + tag,
                       ks_statistic(a, [&](double x) { return normal_cdf(x, mean(0), cov(0, 0)); })});
        out.push_back({"common_regression[1]" + tag,
                       ks_statistic(b, [&](double x) { return normal_cdf(x, mean(1), cov(1, 1)); })});
    }
    // Slab probability q.
    {
        const int N = 5 + static_cast<int>(gen.uniform() * 30), ones = static_cast<int>(gen.uniform() * N);
        const BetaSpec prior{0.5 + gen.uniform(), 0.5 + gen.uniform()};
        std::vector<double> x(n);
        for (auto& v : x) v = update_q(ones, N, prior, rng);
        bm::beta_distribution<> ref(prior.a + ones, prior.b + N - ones);
        out.push_back({"q" + tag, ks_statistic(x, [&](double v) { return bm::cdf(ref, v); })});
    }
    // Slab variance v_delta (normal slab).
    {
        const int ones = 1 + static_cast<int>(gen.uniform() * 20);
        const double ss = 0.1 + 3.0 * gen.uniform();
        const InverseGammaSpec prior{6.0, 4.0};
        std::vector<double> x(n);
        for (auto& v : x) v = update_v_delta_normal(ones, ss, prior, rng);
        out.push_back({"v_delta" + tag, ks_statistic(x, [&](double v) {
                           return ig_cdf(v, 0.5 * (6.0 + ones), 0.5 * (4.0 + ss));
                       })});
    }
    // Inverse Wishart slab covariance: diagonal marginals are inverse gamma.
    {
        const int ones = 1 + static_cast<int>(gen.uniform() * 10);
        Eigen::MatrixXd A(2, 3);
        for (int i = 0; i < 6; ++i) A(i) = gen.normal();
        const Eigen::MatrixXd sum_outer = A * A.transpose();
        Eigen::Matrix2d psi;
        psi << 0.5, 0.05, 0.05, 0.1;
        const InverseWishartSpec prior{5.05, psi};
        const Eigen::MatrixXd post = psi + sum_outer;
        const double dof = 5.05 + ones;
        std::vector<double> x0(n), x1(n);
        for (int d = 0; d < n; ++d) {
            const Eigen::MatrixXd S = update_v_delta_alpha_iw(ones, sum_outer, prior, rng);
            x0[d] = S(0, 0);
            x1[d] = S(1, 1);
        }
        const double shape = 0.5 * (dof - 1.0);
        out.push_back({"v_delta_alpha_iw[0,0]" + tag,
                       ks_statistic(x0, [&](double v) { return ig_cdf(v, shape, 0.5 * post(0, 0)); })});
        out.push_back({"v_delta_alpha_iw[1,1]" + tag,
                       ks_statistic(x1, [&](double v) { return ig_cdf(v, shape, 0.5 * post(1, 1)); })});
    }
    // Indicator and deviation, normal slab.
    {
        const double prec = 0.5 + 5.0 * gen.uniform(), score = 3.0 * gen.normal();
        const double q = 0.2 + 0.6 * gen.uniform(), v = 0.1 + 2.0 * gen.uniform();
        const double lo = std::log(q) + log_normal_slab_evidence(prec, score, v) - std::log(1.0 - q);
        const double p1 = 1.0 / (1.0 + std::exp(-lo));
        std::vector<double> x;
        int ones = 0;
        for (int d = 0; d < n; ++d) {
            const auto r = update_indicator_and_deviation_normal(prec, score, q, v, rng);
            if (r.z) {
                ++ones;
                x.push_back(r.delta);
            } else if (r.delta != 0.0) {
                ones = -n;  // spike must be exactly zero
            }
        }
        // Slab conditional from the unnormalised density on a grid.
        const double sd = 1.0 / std::sqrt(prec + 1.0 / v), m = score * sd * sd;
        GridCdf cdf([&](double d) { return -0.5 * prec * d * d + score * d - 0.5 * d * d / v; },
                    m - 12 * sd, m + 12 * sd);
        out.push_back({"indicator_normal" + tag, ks_statistic(x, cdf), freq_z(ones, n, p1)});
    }
    // Indicator and deviation, inverse-gamma variance multiplier.
    {
        const int cnt = 2 + static_cast<int>(gen.uniform() * 10);
        const double S = cnt * (0.3 + 2.0 * gen.uniform());
        const double q = 0.2 + 0.6 * gen.uniform(), v = 0.25 + 2.0 * gen.uniform();
        const double lo = std::log(q) - std::log(1.0 - q) + log_ig_slab_evidence(cnt, S, v) + 0.5 * S;
        const double p1 = 1.0 / (1.0 + std::exp(-lo));
        std::vector<double> x;
        int ones = 0;
        for (int d = 0; d < n; ++d) {
            const auto r = update_indicator_and_deviation_ig(cnt, S, q, v, rng);
            if (r.z) {
                ++ones;
                x.push_back(r.delta);
            } else if (r.delta != 1.0) {
                ones = -n;
            }
        }
        const double a0 = 1.0 / v + 2.0, b0 = 1.0 / v + 1.0;
        const double mode = (b0 + 0.5 * S) / (a0 + 0.5 * cnt + 1.0);
        GridCdf cdf([&](double d) {
                        return d <= 0 ? -HUGE_VAL
                                      : -0.5 * cnt * std::log(d) - 0.5 * S / d - (a0 + 1) * std::log(d) - b0 / d;
                    },
                    1e-6, 60.0 * mode, 200001);
        out.push_back({"indicator_ig" + tag, ks_statistic(x, cdf), freq_z(ones, n, p1)});
    }
    // Adaptive RWMH for the IG slab variance: stationary law after adaptation stops.
    {
        IgSlabStats stats;
        const int m = 3 + static_cast<int>(gen.uniform() * 20);
        const InverseGammaSpec truth = ig_spec_from_variance(0.5 + gen.uniform());
        for (int i = 0; i < m; ++i) stats.add(sample_inverse_gamma(truth, gen));
        const InverseGammaSpec prior{12.0, 10.0};
        RwmhAdaptState st;
        double omega = 1.0;
        for (int it = 0; it < 5000; ++it) omega = update_v_delta_sigma_rwmh(omega, stats, prior, st, rng);
        st.adapt = false;
        std::vector<double> x(n);
        for (int d = 0; d < n; ++d) {
            for (int k = 0; k < 5; ++k) omega = update_v_delta_sigma_rwmh(omega, stats, prior, st, rng);
            x[d] = omega;
        }
        // Target written from the model: IG prior on omega times the IG(1/w + 2, 1/w + 1) likelihood.
        bm::inverse_gamma_distribution<> pr(6.0, 5.0);
        GridCdf cdf([&](double w) {
                        if (w <= 0) return -HUGE_VAL;
                        const double a = 1.0 / w + 2.0, b = 1.0 / w + 1.0;
                        double l = std::log(bm::pdf(pr, w));
                        l += stats.n * (a * std::log(b) - std::lgamma(a)) - (a + 1) * stats.sum_log -
                             b * stats.sum_inv;
                        return l;
                    },
                    1e-4, 20.0, 200001);
        out.push_back({"v_delta_sigma_rwmh" + tag, ks_statistic(x, cdf)});
    }
    // Initial-state hyperparameters.
    {
        const int N = 3 + static_cast<int>(gen.uniform() * 20);
        Eigen::VectorXd s0(N);
        for (int i = 0; i < N; ++i) s0(i) = 0.1 + 0.3 * gen.normal();
        const double v_s0 = 0.02 + 0.1 * gen.uniform();
        const NormalSpec pm = posterior_mu_s0(s0, v_s0, 0.0, 0.05);
        std::vector<double> x(n), y(n);
        for (int d = 0; d < n; ++d) x[d] = pm.mean + std::sqrt(pm.var) * rng.normal();
        const double prec = 1.0 / 0.05 + N / v_s0;
        const double mean = (s0.sum() / v_s0) / prec;
        out.push_back({"mu_s0" + tag, ks_statistic(x, [&](double v) { return normal_cdf(v, mean, 1.0 / prec); })});
        const InverseGammaSpec prior{6.0, 0.2};
        const InverseGammaSpec pv = posterior_v_s0(s0, 0.1, prior);
        for (int d = 0; d < n; ++d) y[d] = sample_inverse_gamma(pv, rng);
        const double ss = (s0.array() - 0.1).square().sum();
        out.push_back({"v_s0" + tag,
                       ks_statistic(y, [&](double v) { return ig_cdf(v, 0.5 * (6.0 + N), 0.5 * (0.2 + ss)); })});
    }
    // s_0 given s_1: bivariate normal conditioning.
    {
        const double phi = 0.5 + 0.5 * gen.uniform(), mu = 0.2 * gen.normal(), v = 0.05 + 0.2 * gen.uniform();
        const double w = 0.02 + 0.1 * gen.uniform(), s1 = 0.5 * gen.normal();
        Eigen::Matrix2d C;
        C << v, phi * v, phi * v, phi * phi * v + w;
        const double mean = mu + C(0, 1) / C(1, 1) * (s1 - phi * mu);
        const double var = C(0, 0) - C(0, 1) * C(0, 1) / C(1, 1);
        std::vector<double> x(n);
        for (auto& e : x) e = update_s0(phi, s1, mu, v, w, rng);
        out.push_back({"s0" + tag, ks_statistic(x, [&](double e) { return normal_cdf(e, mean, var); })});
    }
    // Joint (z, delta^alpha, states) block against dense Gaussian algebra.
    {
        const int L = 4, k = 2;
        JointBlockInput in;
        in.obs_state = {0, 1, 3};  // state 2 is a gap
        in.X.resize(3, k);
        in.y_tilde.resize(3);
        in.obs_var.resize(3);
        for (int r = 0; r < 3; ++r) {
            in.X(r, 0) = 1.0;
            in.X(r, 1) = 0.1 * (r + 1) + 0.5 * gen.uniform();
            in.y_tilde(r) = 0.4 * gen.normal();
            in.obs_var(r) = 0.03 + 0.05 * gen.uniform();
        }
        const double phi = 0.6 + 0.35 * gen.uniform();
        const Eigen::VectorXd w = (0.02 + 0.05 * gen.uniform()) * Eigen::VectorXd::Ones(L);
        const double mu_s0 = 0.1 * gen.normal(), v_s0 = 0.05;
        in.prior = make_state_prior(phi, w, mu_s0, v_s0);
        in.v_delta_alpha = Eigen::Vector2d(0.24, 0.05).asDiagonal();
        in.q = 0.3 + 0.4 * gen.uniform();

        // Dense oracle built from the state recursion directly.
        Eigen::MatrixXd Ss = Eigen::MatrixXd::Zero(L, L);
        Eigen::VectorXd ms(L);
        double var_prev = v_s0, mean_prev = mu_s0;
        std::vector<double> vars(L);
        for (int t = 0; t < L; ++t) {
            vars[t] = phi * phi * var_prev + w(t);
            ms(t) = phi * mean_prev;
            var_prev = vars[t];
            mean_prev = ms(t);
        }
        for (int t = 0; t < L; ++t)
            for (int s = t; s < L; ++s) Ss(t, s) = Ss(s, t) = std::pow(phi, s - t) * vars[t];
        Eigen::MatrixXd Sel = Eigen::MatrixXd::Zero(3, L);
        for (int r = 0; r < 3; ++r) Sel(r, in.obs_state[r]) = 1.0;
        const Eigen::MatrixXd D = in.obs_var.asDiagonal();
        auto log_evidence = [&](bool slab) {
            Eigen::MatrixXd cov = Sel * Ss * Sel.transpose() + D;
            if (slab) cov += in.X * in.v_delta_alpha * in.X.transpose();
            const Eigen::VectorXd r = in.y_tilde - Sel * ms;
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            return -0.5 * (3 * std::log(2 * M_PI) + logdet + r.dot(llt.solve(r)));
        };
        const double lo = std::log(in.q) - std::log(1 - in.q) + log_evidence(true) - log_evidence(false);
        const double p1 = 1.0 / (1.0 + std::exp(-lo));
        // Slab posterior of (delta, s): prior cov blockdiag(V, Ss), obs y = [X Sel] theta + u.
        Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(k + L, k + L);
        P0.topLeftCorner(k, k) = in.v_delta_alpha;
        P0.bottomRightCorner(L, L) = Ss;
        Eigen::VectorXd m0 = Eigen::VectorXd::Zero(k + L);
        m0.tail(L) = ms;
        Eigen::MatrixXd H(3, k + L);
        H << in.X, Sel;
        const Eigen::MatrixXd Kg = P0 * H.transpose() * (H * P0 * H.transpose() + D).inverse();
        const Eigen::VectorXd post_m = m0 + Kg * (in.y_tilde - H * m0);
        const Eigen::MatrixXd post_c = P0 - Kg * H * P0;
        // Spike posterior of s.
        const Eigen::MatrixXd Ks = Ss * Sel.transpose() * (Sel * Ss * Sel.transpose() + D).inverse();
        const Eigen::VectorXd spike_m = ms + Ks * (in.y_tilde - Sel * ms);
        const Eigen::MatrixXd spike_c = Ss - Ks * Sel * Ss;

        std::vector<double> d1, gap_slab, gap_spike;
        int ones = 0;
        for (int d = 0; d < n; ++d) {
            const auto r = update_joint_indicator_delta_alpha_states(in, rng);
            if (r.z) {
                ++ones;
                d1.push_back(r.delta_alpha(1));
                gap_slab.push_back(r.states(2));
            } else {
                gap_spike.push_back(r.states(2));
            }
        }
        out.push_back({"joint_delta_alpha[1]" + tag,
                       ks_statistic(d1, [&](double x) { return normal_cdf(x, post_m(1), post_c(1, 1)); }),
                       freq_z(ones, n, p1)});
        out.push_back({"joint_gap_state_slab" + tag, ks_statistic(gap_slab, [&](double x) {
                           return normal_cdf(x, post_m(k + 2), post_c(k + 2, k + 2));
                       })});
        out.push_back({"joint_gap_state_spike" + tag, ks_statistic(gap_spike, [&](double x) {
                           return normal_cdf(x, spike_m(2), spike_c(2, 2));
                       })});
    }
    return out;
}

}  // namespace sptest
