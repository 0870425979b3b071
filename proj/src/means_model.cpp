#include "sparsepanel/means_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sparsepanel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_q_v(double q, double v) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("means model: q must lie in [0, 1]");
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("means model: v_delta must be >= 0");
}
}  // namespace

MeansPosterior exact_posterior(double y, double q, double v_delta) {
    check_q_v(q, v_delta);
    MeansPosterior p;
    p.v_star = 1.0 / (1.0 / v_delta + 1.0);
    p.delta_star = y * p.v_star;
    if (q == 0.0) {
        p.q_star = 0.0;
        p.log_odds = -kInf;
        return p;
    }
    if (q == 1.0) {
        p.q_star = 1.0;
        p.log_odds = kInf;
        return p;
    }
    p.log_odds = std::log(q) - std::log1p(-q) - 0.5 * std::log1p(v_delta) +
                 0.5 * v_delta / (v_delta + 1.0) * y * y;
    p.q_star = logistic(p.log_odds);
    return p;
}

double posterior_mean(double y, double q, double v_delta) {
    const auto p = exact_posterior(y, q, v_delta);
    return p.q_star * p.delta_star;
}

namespace {
struct MixtureCdf {
    MeansPosterior p;
    double sd;
    double cont(double x) const {
        if (sd == 0.0) return x >= p.delta_star ? 1.0 : 0.0;
        return normal_cdf((x - p.delta_star) / sd);
    }
    double operator()(double x) const {
        return p.q_star * cont(x) + (x >= 0.0 ? 1.0 - p.q_star : 0.0);
    }
};

double bisect(const MixtureCdf& F, double lo, double hi, double target) {
    for (int it = 0; it < 400 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (F(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}
}  // namespace

double posterior_median(double y, double q, double v_delta) {
    MixtureCdf F{exact_posterior(y, q, v_delta), 0.0};
    F.sd = std::sqrt(F.p.v_star);
    if (F.sd == 0.0) return F.p.q_star > 0.5 ? F.p.delta_star : 0.0;
    const double below = F.p.q_star * F.cont(0.0);
    const double at = below + (1.0 - F.p.q_star);
    if (below <= 0.5 && at >= 0.5) return 0.0;
    const double span = std::abs(F.p.delta_star) + 40.0 * F.sd + 1.0;
    if (below > 0.5) return bisect(F, -span, 0.0, 0.5);
    return bisect(F, 0.0, span, 0.5);
}

double median_zero_threshold(double q, double v_delta) {
    check_q_v(q, v_delta);
    if (posterior_median(0.0, q, v_delta) != 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (posterior_median(hi, q, v_delta) == 0.0) {
        hi *= 2.0;
        if (hi > 1e6) return kInf;
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (posterior_median(mid, q, v_delta) == 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double log_marginal_likelihood(const Eigen::VectorXd& Y, double q, double v_delta) {
    check_q_v(q, v_delta);
    double total = 0.0;
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
        const double y2 = Y(i) * Y(i);
        const double slab = q > 0.0 ? std::log(q) - 0.5 * std::log1p(v_delta) -
                                          0.5 * y2 / (1.0 + v_delta)
                                    : -kInf;
        const double spike = q < 1.0 ? std::log1p(-q) - 0.5 * y2 : -kInf;
        total += log_sum_exp(slab, spike);
    }
    return total - 0.5 * static_cast<double>(Y.size()) * kLog2Pi;
}

double complete_log_likelihood(const Eigen::VectorXd& Y, const std::vector<int>& z, double q,
                               double v_delta) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
        const double y2 = Y(i) * Y(i);
        if (z[i]) {
            if (q <= 0.0) return -kInf;
            total += std::log(q) - 0.5 * (kLog2Pi + std::log1p(v_delta) + y2 / (1.0 + v_delta));
        } else {
            if (q >= 1.0) return -kInf;
            total += std::log1p(-q) - 0.5 * (kLog2Pi + y2);
        }
    }
    return total;
}

std::pair<double, double> profile_q_v(const Eigen::VectorXd& Y, const std::vector<int>& z) {
    const int n = static_cast<int>(Y.size());
    int ones = 0;
    double m2 = 0.0;
    for (int i = 0; i < n; ++i)
        if (z[i]) {
            ++ones;
            m2 += Y(i) * Y(i);
        }
    if (ones == 0) return {0.0, 0.0};
    return {static_cast<double>(ones) / n, std::max(0.0, m2 / ones - 1.0)};
}

namespace {
double profiled(const Eigen::VectorXd& Y, const std::vector<int>& z) {
    const auto [q, v] = profile_q_v(Y, z);
    return complete_log_likelihood(Y, z, q, v);
}

// a is preferred over b at equal likelihood.
bool tie_preferred(const std::vector<int>& a, const std::vector<int>& b) {
    const int ca = std::accumulate(a.begin(), a.end(), 0);
    const int cb = std::accumulate(b.begin(), b.end(), 0);
    if (ca != cb) return ca < cb;
    return a < b;
}
}  // namespace

ArgmaxResult argmax_estimator(const Eigen::VectorXd& Y, double q0, double v0, int max_iter) {
    const int n = static_cast<int>(Y.size());
    if (n < 1) throw DomainError("argmax_estimator: Y must be nonempty");
    check_q_v(q0, v0);
    ArgmaxResult out;

    auto assign = [&](double q, double v) {
        std::vector<int> z(n, 0);
        if (q <= 0.0) return z;
        for (int i = 0; i < n; ++i) {
            if (q >= 1.0) {
                z[i] = 1;
                continue;
            }
            const double log_ratio = std::log(q) - std::log1p(-q) - 0.5 * std::log1p(v) +
                                     0.5 * v * Y(i) * Y(i) / (1.0 + v);
            z[i] = log_ratio >= 0.0 ? 1 : 0;
        }
        return z;
    };

    double q = q0, v = v0;
    std::vector<int> z = assign(q, v);
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        std::tie(q, v) = profile_q_v(Y, z);
        if (q == 0.0) {
            out.converged = true;
            break;
        }
        auto next = assign(q, v);
        if (next == z) {
            out.converged = true;
            break;
        }
        z = std::move(next);
    }
    out.iterations = std::min(out.iterations, max_iter);
    out.z_fixed_point = z;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ya = Y(a) * Y(a), yb = Y(b) * Y(b);
        if (ya != yb) return ya > yb;
        return a > b;
    });
    std::vector<int> best = z;
    double best_ll = profiled(Y, z);
    std::vector<int> cand(n, 0);
    for (int k = 0; k <= n; ++k) {
        if (k > 0) cand[order[k - 1]] = 1;
        const double ll = profiled(Y, cand);
        const double tol = 1e-10 * std::max(1.0, std::abs(best_ll));
        if (ll > best_ll + tol || (std::abs(ll - best_ll) <= tol && tie_preferred(cand, best))) {
            best = cand;
            best_ll = ll;
        }
    }
    out.z_hat = best;
    std::tie(out.q_hat, out.v_hat) = profile_q_v(Y, best);
    out.log_lik = best_ll;
    return out;
}

MeansChain gibbs_means(const Eigen::VectorXd& Y, const MeansPrior& prior, int n_draws, int burn_in,
                       RngStream& rng) {
    if (n_draws < 1 || burn_in < 0) throw DomainError("gibbs_means: invalid chain length");
    const int n = static_cast<int>(Y.size());
    double q = prior.fix_q ? prior.q_fixed : 0.5;
    double v = prior.fix_v ? prior.v_fixed : prior.v_delta.mean();
    std::vector<int> z(n, 0);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);

    MeansChain out;
    out.q.resize(n_draws);
    out.v.resize(n_draws);
    out.z.resize(n_draws, n);
    out.delta.resize(n_draws, n);
    for (int it = 0; it < burn_in + n_draws; ++it) {
        int ones = 0;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto p = exact_posterior(Y(i), q, v);
            z[i] = sample_bernoulli(p.q_star, rng);
            delta(i) = z[i] ? p.delta_star + std::sqrt(p.v_star) * rng.normal() : 0.0;
            if (z[i]) {
                ++ones;
                ss += delta(i) * delta(i);
            }
        }
        if (!prior.fix_q) q = sample_beta({prior.q.a + ones, prior.q.b + n - ones}, rng);
        if (!prior.fix_v)
            v = sample_inverse_gamma({prior.v_delta.nu + ones, prior.v_delta.tau + ss}, rng);
        if (it >= burn_in) {
            const int d = it - burn_in;
            out.q(d) = q;
            out.v(d) = v;
            for (int i = 0; i < n; ++i) out.z(d, i) = z[i];
            out.delta.row(d) = delta.transpose();
        }
    }
    return out;
}

}  // namespace sparsepanel
