#include "sparsepanel/forecast_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sparsepanel/distributions.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/rng.hpp"

namespace sparsepanel {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Regressor row at `col` (possibly beyond the panel), extrapolated linearly in
// the column index from the unit's last two columns with finite regressors.
Eigen::VectorXd regressors_at(const PanelData& data, int i, int col) {
    const int k = data.k();
    std::vector<int> cols;
    for (int t = data.n_periods() - 1; t >= 0 && cols.size() < 2; --t) {
        bool ok = true;
        for (int j = 0; j < k; ++j) ok = ok && std::isfinite(data.x[j](i, t));
        if (ok) cols.push_back(t);
    }
    if (cols.empty()) throw DomainError("predict: unit " + data.unit_ids[i] + " has no regressors");
    const Eigen::VectorXd last = data.x_row(i, cols[0]);
    if (col <= cols[0] && col >= 0) {
        bool ok = true;
        for (int j = 0; j < k; ++j) ok = ok && std::isfinite(data.x[j](i, col));
        if (ok) return data.x_row(i, col);
    }
    if (cols.size() < 2) return last;
    const Eigen::VectorXd slope = (last - data.x_row(i, cols[1])) / double(cols[0] - cols[1]);
    return last + slope * double(col - cols[0]);
}

int find_column(const ChainOutput& chain, const std::string& name) {
    if (!chain.has_common(name)) throw DomainError("predict: chain has no column '" + name + "'");
    return chain.common_index(name);
}

int chain_k(const ChainOutput& chain) {
    int k = 0;
    while (chain.has_common("alpha_" + std::to_string(k))) ++k;
    if (k == 0) throw DomainError("predict: chain is not an M2 chain (no alpha_j columns)");
    return k;
}
}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::param_unc: return "param_unc";
        case Scenario::no_param_unc: return "no_param_unc";
        case Scenario::individual: return "individual";
    }
    return "unknown";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "param_unc" || s == "full_info_param_unc") return Scenario::param_unc;
    if (s == "no_param_unc" || s == "full_info_no_param_unc") return Scenario::no_param_unc;
    if (s == "individual" || s == "individual_info") return Scenario::individual;
    throw ConfigError("unknown scenario '" + s + "'");
}

int PredictiveDraws::horizon_index(int h) const {
    for (std::size_t j = 0; j < horizons.size(); ++j)
        if (horizons[j] == h) return static_cast<int>(j);
    throw std::out_of_range("predictive draws have no horizon " + std::to_string(h));
}

CommonState posterior_mean_common(const ChainOutput& chain) {
    const int k = chain_k(chain);
    CommonState c;
    c.alpha.resize(k);
    for (int j = 0; j < k; ++j) c.alpha(j) = chain.common_column("alpha_" + std::to_string(j)).mean();
    c.rho = chain.common_column("rho").mean();
    int T = 0;
    while (chain.has_common("sigma2_u_" + std::to_string(T + 1))) ++T;
    c.sigma2_u.resize(T);
    c.sigma2_eps.resize(T);
    for (int t = 0; t < T; ++t) {
        c.sigma2_u(t) = chain.common_column("sigma2_u_" + std::to_string(t + 1)).mean();
        c.sigma2_eps(t) = chain.common_column("sigma2_eps_" + std::to_string(t + 1)).mean();
    }
    auto mean_or = [&](const std::string& n, double fallback) {
        return chain.has_common(n) ? chain.common_column(n).mean() : fallback;
    };
    c.q_alpha = mean_or("q_alpha", c.q_alpha);
    c.q_rho = mean_or("q_rho", c.q_rho);
    c.q_sigma_u = mean_or("q_sigma_u", c.q_sigma_u);
    c.q_sigma_eps = mean_or("q_sigma_eps", c.q_sigma_eps);
    c.v_delta_alpha.resize(k, k);
    for (int r = 0; r < k; ++r)
        for (int cc = 0; cc < k; ++cc)
            c.v_delta_alpha(r, cc) = mean_or(
                "v_delta_alpha_" + std::to_string(r) + "_" + std::to_string(cc), r == cc ? 1.0 : 0.0);
    c.v_delta_rho = mean_or("v_delta_rho", c.v_delta_rho);
    c.v_delta_sigma_u = mean_or("v_delta_sigma_u", c.v_delta_sigma_u);
    c.v_delta_sigma_eps = mean_or("v_delta_sigma_eps", c.v_delta_sigma_eps);
    c.mu_s0 = mean_or("mu_s0", c.mu_s0);
    c.v_s0 = mean_or("v_s0", c.v_s0);
    return c;
}

FutureVariance::Mode parse_future_variance(const std::string& s) {
    if (s == "carry_forward") return FutureVariance::Mode::carry_forward;
    if (s == "prior_draw") return FutureVariance::Mode::prior_draw;
    throw ConfigError("unknown future variance mode '" + s + "'");
}

PredictiveDraws predict(const ChainOutput& chain, const PanelData& data,
                        const std::vector<int>& horizons, Scenario scenario, std::uint64_t seed,
                        const Exec& exec, const FutureVariance& future) {
    const bool prior_draw = future.mode == FutureVariance::Mode::prior_draw;
    if (prior_draw) {
        future.sigma2_u.validate();
        future.sigma2_eps.validate();
    }
    if (scenario == Scenario::individual)
        throw ConfigError("predict: the individual scenario needs predict_individual");
    if (horizons.empty()) throw ConfigError("predict: no horizons requested");
    for (int h : horizons)
        if (h < 1) throw ConfigError("predict: horizons must be >= 1");
    if (!chain.has_unit("s_last")) throw DomainError("predict: chain has no terminal state draws");
    const int k = chain_k(chain);
    if (data.k() != k) throw DomainError("predict: chain and data regressor counts differ");
    const int T = data.n_periods();
    for (int t = 1; t <= T; ++t) {
        find_column(chain, "sigma2_u_" + std::to_string(t));
        find_column(chain, "sigma2_eps_" + std::to_string(t));
    }
    const int D = chain.n_draws();
    const int N = chain.n_units();

    // Map chain units onto panel rows.
    std::vector<int> rows(N);
    for (int i = 0; i < N; ++i) {
        auto it = std::find(data.unit_ids.begin(), data.unit_ids.end(), chain.unit_ids[i]);
        if (it == data.unit_ids.end())
            throw DomainError("predict: unit " + chain.unit_ids[i] + " is not in the data");
        rows[i] = static_cast<int>(it - data.unit_ids.begin());
    }

    const int h_max = *std::max_element(horizons.begin(), horizons.end());
    PredictiveDraws out;
    out.scenario = scenario;
    out.unit_ids = chain.unit_ids;
    out.horizons = horizons;
    out.y.assign(horizons.size(), Eigen::MatrixXd(D, N));
    out.mean.assign(horizons.size(), Eigen::MatrixXd(D, N));
    out.var.assign(horizons.size(), Eigen::MatrixXd(D, N));

    // Posterior means for the fixed-parameter scenario.
    Eigen::MatrixXd common_mean = chain.common.colwise().mean();
    const bool fixed = scenario == Scenario::no_param_unc;
    auto common_at = [&](int d, int c) { return fixed ? common_mean(0, c) : chain.common(d, c); };
    std::vector<const Eigen::MatrixXd*> f_delta_alpha(k);
    std::vector<int> c_alpha(k);
    for (int j = 0; j < k; ++j) {
        c_alpha[j] = chain.common_index("alpha_" + std::to_string(j));
        f_delta_alpha[j] = &chain.unit.at("delta_alpha_" + std::to_string(j));
    }
    const int c_rho = chain.common_index("rho");
    const int c_su = chain.common_index("sigma2_u_" + std::to_string(T));
    std::vector<int> c_se(T), c_su_t(T);
    for (int t = 0; t < T; ++t) {
        c_se[t] = chain.common_index("sigma2_eps_" + std::to_string(t + 1));
        c_su_t[t] = chain.common_index("sigma2_u_" + std::to_string(t + 1));
    }
    const int c_mu_s0 = chain.has_common("mu_s0") ? chain.common_index("mu_s0") : -1;
    const int c_v_s0 = chain.has_common("v_s0") ? chain.common_index("v_s0") : -1;
    const Eigen::MatrixXd& f_rho = chain.unit.at("delta_rho");
    const Eigen::MatrixXd& f_su = chain.unit.at("delta_sigma_u");
    const Eigen::MatrixXd& f_se = chain.unit.at("delta_sigma_eps");
    std::map<const Eigen::MatrixXd*, Eigen::RowVectorXd> unit_mean;
    for (const auto& [name, m] : chain.unit) unit_mean[&m] = m.colwise().mean();
    auto unit_at = [&](int d, int i, const Eigen::MatrixXd& f) {
        return fixed ? unit_mean.at(&f)(i) : f(d, i);
    };

    parallel_for(N, exec, [&](std::ptrdiff_t ii) {
        const int i = static_cast<int>(ii);
        const int row = rows[i];
        const int last = data.span(row).second;
        if (last < 0) throw DomainError("predict: unit " + chain.unit_ids[i] + " has no observations");
        RngStream rng(derive_seed(seed, 4), static_cast<std::uint64_t>(row));
        const int steps_max = (T - 1 - last) + h_max;
        std::vector<Eigen::VectorXd> x_at(steps_max + 1);
        for (int g = 1; g <= steps_max; ++g) x_at[g] = regressors_at(data, row, last + g);
        const Eigen::MatrixXd& sl = chain.unit.at("s_last");
        // With parameters fixed, the terminal state comes from the Kalman filter under those
        // parameters; reusing joint draws would break its dependence on delta^alpha.
        double filt_m = 0.0, filt_v = 0.0;
        if (fixed) {
            Eigen::VectorXd beta(k);
            for (int j = 0; j < k; ++j) beta(j) = common_mean(0, c_alpha[j]) + unit_mean.at(f_delta_alpha[j])(i);
            const double phi = common_mean(0, c_rho) + unit_mean.at(&f_rho)(i);
            const double de = unit_mean.at(&f_se)(i), du = unit_mean.at(&f_su)(i);
            filt_m = c_mu_s0 >= 0 ? common_mean(0, c_mu_s0) : 0.0;
            filt_v = c_v_s0 >= 0 ? common_mean(0, c_v_s0) : 0.0;
            for (int col = data.span(row).first; col <= last; ++col) {
                filt_m = phi * filt_m;
                filt_v = phi * phi * filt_v + common_mean(0, c_se[col]) * de;
                if (!data.is_observed(row, col) || !(filt_v > 0.0)) continue;
                const double r = data.y(row, col) - data.x_row(row, col).dot(beta) - filt_m;
                const double f = filt_v + common_mean(0, c_su_t[col]) * du;
                const double gain = filt_v / f;
                filt_m += gain * r;
                filt_v *= 1.0 - gain;
            }
        }
        for (int d = 0; d < D; ++d) {
            Eigen::VectorXd beta(k);
            for (int j = 0; j < k; ++j)
                beta(j) = common_at(d, c_alpha[j]) + unit_at(d, i, *f_delta_alpha[j]);
            const double phi = common_at(d, c_rho) + unit_at(d, i, f_rho);
            const double de = unit_at(d, i, f_se);
            const double du = unit_at(d, i, f_su);
            const double var_u_T = common_at(d, c_su) * du;
            double s = fixed ? filt_m + std::sqrt(std::max(filt_v, 0.0)) * rng.normal() : sl(d, i);
            double m_s = fixed ? filt_m : s, v_s = fixed ? filt_v : 0.0;
            std::size_t next = 0;
            for (int g = 1; g <= steps_max; ++g) {
                const bool beyond = last + g >= T;
                const double s2e = beyond && prior_draw
                                       ? sample_inverse_gamma(future.sigma2_eps, rng)
                                       : common_at(d, c_se[std::min(last + g, T - 1)]);
                const double var_e = s2e * de;
                s = phi * s + std::sqrt(std::max(var_e, 0.0)) * rng.normal();
                m_s = phi * m_s;
                v_s = phi * phi * v_s + var_e;
                const int h = g - (T - 1 - last);
                if (h < 1) continue;
                const double var_u =
                    prior_draw ? sample_inverse_gamma(future.sigma2_u, rng) * du : var_u_T;
                const double u = std::sqrt(std::max(var_u, 0.0)) * rng.normal();
                const double xb = x_at[g].dot(beta);
                for (next = 0; next < horizons.size(); ++next) {
                    if (horizons[next] != h) continue;
                    out.y[next](d, i) = xb + s + u;
                    out.mean[next](d, i) = xb + m_s;
                    out.var[next](d, i) = v_s + var_u;
                }
            }
        }
    });
    return out;
}

PredictiveDraws predict_individual(const PanelData& data, const std::vector<int>& horizons,
                                   const IndividualConfig& config, std::uint64_t seed,
                                   const Exec& exec) {
    const int N = data.n_units();
    std::vector<PredictiveDraws> parts(N);
    parallel_for_dynamic(N, exec, [&](std::ptrdiff_t i) {
        const ChainOutput chain = run_m2_individual(data, static_cast<int>(i), config);
        parts[i] = predict(chain, data.select_units({static_cast<int>(i)}), horizons,
                           Scenario::param_unc, derive_seed(seed, 5, static_cast<std::uint64_t>(i)));
    });
    PredictiveDraws out;
    out.scenario = Scenario::individual;
    out.unit_ids = data.unit_ids;
    out.horizons = horizons;
    const int D = parts.empty() ? 0 : parts[0].n_draws();
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        out.y.emplace_back(D, N);
        out.mean.emplace_back(D, N);
        out.var.emplace_back(D, N);
        for (int i = 0; i < N; ++i) {
            out.y[h].col(i) = parts[i].y[h].col(0);
            out.mean[h].col(i) = parts[i].mean[h].col(0);
            out.var[h].col(i) = parts[i].var[h].col(0);
        }
    }
    return out;
}

double mixture_log_density(const Eigen::VectorXd& mean, const Eigen::VectorXd& var, double y) {
    const int D = static_cast<int>(mean.size());
    if (D == 0) throw DomainError("mixture_log_density: no draws");
    constexpr double half_log_2pi = 0.91893853320467274178;
    double mx = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd lp(D);
    for (int d = 0; d < D; ++d) {
        if (var(d) > 0.0) {
            const double z = y - mean(d);
            lp(d) = -half_log_2pi - 0.5 * std::log(var(d)) - 0.5 * z * z / var(d);
        } else {
            lp(d) = y == mean(d) ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
        }
        mx = std::max(mx, lp(d));
    }
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (int d = 0; d < D; ++d) s += std::exp(lp(d) - mx);
    return mx + std::log(s / D);
}

ScoreReport score(const PredictiveDraws& pred, const Eigen::VectorXd& realized, int h) {
    const int N = pred.n_units();
    if (realized.size() != N) throw DomainError("score: realized values do not match the units");
    const int hi = pred.horizon_index(h);
    ScoreReport r;
    r.unit_sq_error = Eigen::VectorXd::Constant(N, kNaN);
    r.unit_log_score = Eigen::VectorXd::Constant(N, kNaN);
    double se = 0.0, ls = 0.0;
    for (int i = 0; i < N; ++i) {
        if (!std::isfinite(realized(i))) continue;
        const double yhat = pred.y[hi].col(i).mean();
        const double e = yhat - realized(i);
        r.unit_sq_error(i) = e * e;
        r.unit_log_score(i) = mixture_log_density(pred.mean[hi].col(i), pred.var[hi].col(i), realized(i));
        if (r.unit_log_score(i) == -std::numeric_limits<double>::infinity())
            r.zero_density_units.push_back(pred.unit_ids[i]);
        se += e * e;
        ls += r.unit_log_score(i);
        ++r.n_units;
    }
    if (r.n_units == 0) throw DomainError("score: no realized values");
    r.mse = se / r.n_units;
    r.lps = ls / r.n_units;
    return r;
}

double relative_mse(const ScoreReport& base, const ScoreReport& alt) {
    return 100.0 * (alt.mse - base.mse) / base.mse;
}

double lps_differential(const ScoreReport& base, const ScoreReport& alt) { return base.lps - alt.lps; }

Eigen::VectorXd core_probability(const ChainOutput& chain, const std::string& z_field) {
    return (1.0 - slab_frequency(chain, z_field).array()).matrix();
}

WidthRatios interval_width_ratios(const PredictiveDraws& num, const PredictiveDraws& den, int h,
                                  const Eigen::VectorXd& p_core, double level) {
    const int N = num.n_units();
    if (den.n_units() != N || p_core.size() != N)
        throw DomainError("interval_width_ratios: unit counts differ");
    const int hn = num.horizon_index(h), hd = den.horizon_index(h);
    WidthRatios w;
    w.ratio = Eigen::VectorXd::Constant(N, kNaN);
    double s_all = 0.0, s_core = 0.0, s_dev = 0.0;
    int n_all = 0;
    for (int i = 0; i < N; ++i) {
        const auto a = equal_tail_interval(num.y[hn].col(i), level);
        const auto b = equal_tail_interval(den.y[hd].col(i), level);
        const double wd = b.second - b.first;
        if (!(wd > 0.0)) {
            w.excluded.push_back(num.unit_ids[i]);
            continue;
        }
        w.ratio(i) = (a.second - a.first) / wd;
        s_all += w.ratio(i);
        ++n_all;
        if (p_core(i) >= 0.5) {
            s_core += w.ratio(i);
            ++w.n_core;
        } else {
            s_dev += w.ratio(i);
            ++w.n_deviator;
        }
    }
    w.mean_all = n_all ? s_all / n_all : kNaN;
    w.mean_core = w.n_core ? s_core / w.n_core : kNaN;
    w.mean_deviator = w.n_deviator ? s_dev / w.n_deviator : kNaN;
    return w;
}

DecompositionResult inequality_decomposition(const CommonState& theta, const DecompositionOptions& opts) {
    if (opts.N < 2 || opts.T < 1) throw DomainError("inequality_decomposition: need N >= 2 and T >= 1");
    if (theta.alpha.size() != 2)
        throw DomainError("inequality_decomposition: alpha must have an intercept and a slope");
    if (theta.sigma2_u.size() == 0 || theta.sigma2_eps.size() == 0)
        throw DomainError("inequality_decomposition: period variances are required");
    const int N = opts.N, T = opts.T;
    auto period = [](const Eigen::VectorXd& v, int t) { return v(std::min<int>(t, v.size() - 1)); };

    // Three coupled paths per unit, all driven by the same draws.
    Eigen::MatrixXd y_base(N, T), y_no_da(N, T), y_no_u(N, T);
    for (int i = 0; i < N; ++i) {
        RngStream rng(derive_seed(opts.seed, 6), static_cast<std::uint64_t>(i));
        const UnitState u = draw_m2_unit(theta, rng);
        const double phi = theta.rho + u.delta_rho;
        double s = u.s(0);
        for (int t = 0; t < T; ++t) {
            const double e = rng.normal(), v = rng.normal();
            s = phi * s + std::sqrt(std::max(period(theta.sigma2_eps, t) * u.delta_sigma_eps, 0.0)) * e;
            const double x1 = (opts.h1 + t) / 10.0;
            const double common = theta.alpha(0) + theta.alpha(1) * x1;
            const double dev = u.delta_alpha(0) + u.delta_alpha(1) * x1;
            const double trans = std::sqrt(std::max(period(theta.sigma2_u, t) * u.delta_sigma_u, 0.0)) * v;
            y_base(i, t) = common + dev + s + trans;
            y_no_da(i, t) = common + s + trans;
            y_no_u(i, t) = common + dev + s;
        }
    }
    // Cross-sectional variance, shifted by the first unit so equal values give exactly 0.
    auto cs_var = [&](const Eigen::MatrixXd& y) {
        Eigen::VectorXd v(T);
        for (int t = 0; t < T; ++t) {
            const Eigen::ArrayXd d = y.col(t).array() - y(0, t);
            const double m = d.mean();
            v(t) = ((d - m).square().sum()) / (N - 1.0);
        }
        return v;
    };
    DecompositionResult r;
    r.v = cs_var(y_base);
    r.v_no_delta_alpha = cs_var(y_no_da);
    r.v_no_u = cs_var(y_no_u);
    r.ratio_delta_alpha = Eigen::VectorXd::Constant(T, kNaN);
    r.ratio_u = Eigen::VectorXd::Constant(T, kNaN);
    for (int t = 0; t < T; ++t) {
        if (!(r.v(t) > 0.0)) continue;
        r.ratio_delta_alpha(t) = 1.0 - r.v_no_delta_alpha(t) / r.v(t);
        r.ratio_u(t) = 1.0 - r.v_no_u(t) / r.v(t);
    }
    return r;
}

void write_fan_chart(const PredictiveDraws& pred, const std::string& path,
                     const std::vector<double>& quantiles) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "unit,horizon,quantile,value\n";
    for (int i = 0; i < pred.n_units(); ++i)
        for (std::size_t h = 0; h < pred.horizons.size(); ++h) {
            std::vector<double> v(pred.y[h].col(i).data(), pred.y[h].col(i).data() + pred.n_draws());
            std::sort(v.begin(), v.end());
            for (double q : quantiles)
                out << pred.unit_ids[i] << ',' << pred.horizons[h] << ',' << format_double(q) << ','
                    << format_double(quantile_sorted(v, q)) << '\n';
        }
}

void write_scores(const std::map<std::string, ScoreReport>& reports, const std::string& baseline,
                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "model,units,mse,lps,relative_mse,lps_differential\n";
    const ScoreReport* base = reports.count(baseline) ? &reports.at(baseline) : nullptr;
    for (const auto& [name, r] : reports) {
        out << name << ',' << r.n_units << ',' << format_double(r.mse) << ',' << format_double(r.lps)
            << ',' << (base ? format_double(relative_mse(*base, r)) : "") << ','
            << (base ? format_double(lps_differential(*base, r)) : "") << '\n';
    }
}

void write_decomposition(const DecompositionResult& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,v,v_no_delta_alpha,v_no_u,ratio_delta_alpha,ratio_u\n";
    for (int t = 0; t < d.v.size(); ++t)
        out << t + 1 << ',' << format_double(d.v(t)) << ',' << format_double(d.v_no_delta_alpha(t))
            << ',' << format_double(d.v_no_u(t)) << ',' << format_double(d.ratio_delta_alpha(t)) << ','
            << format_double(d.ratio_u(t)) << '\n';
}

}  // namespace sparsepanel
