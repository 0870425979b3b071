#include "sparsepanel/m1_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sparsepanel {

std::string to_string(M1Variant v) {
    switch (v) {
        case M1Variant::ss_homosk: return "ss_homosk";
        case M1Variant::ss_hetsk: return "ss_hetsk";
        case M1Variant::homogeneous: return "homogeneous";
        case M1Variant::full_hetero_homosk: return "full_hetero_homosk";
        case M1Variant::full_hetero_hetsk: return "full_hetero_hetsk";
    }
    return "unknown";
}

M1Variant parse_m1_variant(const std::string& s) {
    for (auto v : {M1Variant::ss_homosk, M1Variant::ss_hetsk, M1Variant::homogeneous,
                   M1Variant::full_hetero_homosk, M1Variant::full_hetero_hetsk})
        if (to_string(v) == s) return v;
    if (s == "q0") return M1Variant::homogeneous;
    if (s == "q1") return M1Variant::full_hetero_homosk;
    throw ConfigError("unknown M1 variant '" + s + "'");
}

bool is_heteroskedastic(M1Variant v) {
    return v == M1Variant::ss_hetsk || v == M1Variant::full_hetero_hetsk;
}

namespace {
bool is_ss(M1Variant v) { return v == M1Variant::ss_homosk || v == M1Variant::ss_hetsk; }
bool is_full(M1Variant v) {
    return v == M1Variant::full_hetero_homosk || v == M1Variant::full_hetero_hetsk;
}

double prior_mean_or(const InverseGammaSpec& s, double fallback) {
    return s.nu > 2.0 ? s.mean() : fallback;
}
}  // namespace

void M1Config::validate() const {
    std::vector<std::string> errors;
    if (n_draws < 1) errors.push_back("n_draws: must be >= 1");
    if (burn_in < 0) errors.push_back("burn_in: must be >= 0");
    if (burn_in >= n_draws) errors.push_back("burn_in, n_draws: burn_in must be < n_draws");
    if (thin < 1) errors.push_back("thin: must be >= 1");
    if (!block_order.empty() && !is_order_permutation(block_order, 4))
        errors.push_back("block_order: must be a permutation of 0..3");
    if (hyper.mu_alpha.size() != 1 || hyper.v_alpha.rows() != 1 || hyper.v_alpha.cols() != 1)
        errors.push_back("hyper.alpha: M1 has a scalar intercept");
    if (!(hyper.v_alpha(0, 0) > 0.0)) errors.push_back("hyper.v_alpha: must be > 0");
    if (!(hyper.v_rho > 0.0)) errors.push_back("hyper.v_rho: must be > 0");
    auto check = [&](const char* name, auto&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            errors.push_back(std::string(name) + ": " + e.what());
        }
    };
    check("hyper.sigma2", [&] { hyper.sigma2.validate(); });
    check("hyper.q_prior", [&] { hyper.q_prior.validate(); });
    check("hyper.v_delta_alpha", [&] { hyper.v_delta_alpha.validate(); });
    check("hyper.v_delta_rho", [&] { hyper.v_delta_rho.validate(); });
    check("hyper.v_delta_sigma", [&] { hyper.v_delta_sigma.validate(); });
    if (fix_common && truth.alpha.size() != 1) errors.push_back("truth.alpha: must have length 1");
    if (!errors.empty()) {
        std::ostringstream os;
        os << "invalid M1 configuration:";
        for (const auto& e : errors) os << "\n  " << e;
        throw ConfigError(os.str());
    }
}

double M1UnitStats::rss(double a, double r) const {
    const double v = syy - 2.0 * a * sy - 2.0 * r * sy1y + n * a * a + 2.0 * a * r * sy1 + r * r * s11;
    return std::max(v, 0.0);
}

std::vector<M1UnitStats> m1_unit_stats(const PanelData& data) {
    std::vector<M1UnitStats> out(data.n_units());
    for (int i = 0; i < data.n_units(); ++i) {
        M1UnitStats& s = out[i];
        for (int t = 1; t < data.n_periods(); ++t) {
            if (!data.observed(i, t) || !data.observed(i, t - 1)) continue;
            const double y = data.y(i, t), y1 = data.y(i, t - 1);
            ++s.n;
            s.sy += y;
            s.sy1 += y1;
            s.syy += y * y;
            s.s11 += y1 * y1;
            s.sy1y += y1 * y;
        }
    }
    return out;
}

CommonState draw_prior_m1(const HyperParams& hyper, M1Variant variant, RngStream& rng) {
    CommonState c;
    c.alpha = Eigen::VectorXd::Constant(1, hyper.mu_alpha(0) +
                                               std::sqrt(hyper.v_alpha(0, 0)) * rng.normal());
    c.rho = hyper.mu_rho + std::sqrt(hyper.v_rho) * rng.normal();
    c.sigma2 = sample_inverse_gamma(hyper.sigma2, rng);
    c.q_alpha = sample_beta(hyper.q_prior, rng);
    c.q_rho = sample_beta(hyper.q_prior, rng);
    c.q_sigma = sample_beta(hyper.q_prior, rng);
    c.v_delta_alpha = Eigen::MatrixXd::Constant(1, 1, sample_inverse_gamma(hyper.v_delta_alpha, rng));
    c.v_delta_rho = sample_inverse_gamma(hyper.v_delta_rho, rng);
    c.v_delta_sigma = sample_inverse_gamma(hyper.v_delta_sigma, rng);
    if (variant == M1Variant::homogeneous) c.q_alpha = c.q_rho = 0.0;
    if (is_full(variant)) c.q_alpha = c.q_rho = 1.0;
    if (!is_heteroskedastic(variant)) c.q_sigma = 0.0;
    if (variant == M1Variant::full_hetero_hetsk) c.q_sigma = 1.0;
    return c;
}

M1Sampler::M1Sampler(const PanelData& data, M1Config config) : config_(std::move(config)) {
    config_.validate();
    set_data(data);
    const int N = static_cast<int>(stats_.size());
    if (!config_.stream_ids.empty() && static_cast<int>(config_.stream_ids.size()) != N)
        throw ConfigError("stream_ids: length must equal the number of units");
    common_rng_ = RngStream(derive_seed(config_.seed, 1), 0);
    unit_rngs_.clear();
    unit_rngs_.reserve(N);
    for (int i = 0; i < N; ++i)
        unit_rngs_.emplace_back(derive_seed(config_.seed, 2),
                                config_.stream_ids.empty() ? static_cast<std::uint64_t>(i)
                                                           : config_.stream_ids[i]);
    // Reductions run in stream-id order so that relabelling units together with
    // their streams leaves every sum bit-identical.
    order_.resize(N);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
        return unit_rngs_[a].stream_id() < unit_rngs_[b].stream_id();
    });
    initialize();
}

void M1Sampler::set_data(const PanelData& data) {
    if (data.n_periods() < 3) throw DomainError("M1: at least three periods (T >= 2) are required");
    if (!stats_.empty() && data.n_units() != static_cast<int>(stats_.size()))
        throw DomainError("M1: replacement data must keep the number of units");
    unit_ids_ = data.unit_ids;
    stats_ = m1_unit_stats(data);
}

void M1Sampler::apply_restrictions() {
    const M1Variant v = config_.variant;
    if (v == M1Variant::homogeneous) common_.q_alpha = common_.q_rho = 0.0;
    if (is_full(v)) common_.q_alpha = common_.q_rho = 1.0;
    if (!is_heteroskedastic(v)) common_.q_sigma = 0.0;
    if (v == M1Variant::full_hetero_hetsk) common_.q_sigma = 1.0;
}

void M1Sampler::initialize() {
    const HyperParams& h = config_.hyper;
    const int N = static_cast<int>(stats_.size());
    if (config_.fix_common) {
        common_ = config_.truth;
    } else {
        common_ = CommonState{};
        common_.alpha = h.mu_alpha;
        common_.rho = h.mu_rho;
        common_.sigma2 = prior_mean_or(h.sigma2, 1.0);
        const double qm = h.q_prior.a / (h.q_prior.a + h.q_prior.b);
        common_.q_alpha = common_.q_rho = common_.q_sigma = qm;
        common_.v_delta_alpha = Eigen::MatrixXd::Constant(1, 1, prior_mean_or(h.v_delta_alpha, 1.0));
        common_.v_delta_rho = prior_mean_or(h.v_delta_rho, 0.5);
        common_.v_delta_sigma = prior_mean_or(h.v_delta_sigma, 1.0);
        apply_restrictions();
    }
    units_.assign(N, UnitState{});
    if (is_full(config_.variant)) {
        for (auto& u : units_) {
            u.z_alpha = u.z_rho = 1;
            if (config_.variant == M1Variant::full_hetero_hetsk) u.z_sigma = 1;
        }
    }
    rwmh_ = RwmhAdaptState{};
}

void M1Sampler::set_state(const CommonState& common, const std::vector<UnitState>& units) {
    if (units.size() != stats_.size()) throw DomainError("M1: unit state count mismatch");
    common_ = common;
    units_ = units;
}

void M1Sampler::draw_beta() {
    Eigen::Matrix2d XtWX = Eigen::Matrix2d::Zero();
    Eigen::Vector2d XtWy = Eigen::Vector2d::Zero();
    for (int i : order_) {
        const M1UnitStats& s = stats_[i];
        const UnitState& u = units_[i];
        const double w = 1.0 / (common_.sigma2 * u.delta_sigma);
        const double da = u.delta_alpha(0), dr = u.delta_rho;
        XtWX(0, 0) += w * s.n;
        XtWX(0, 1) += w * s.sy1;
        XtWX(1, 1) += w * s.s11;
        XtWy(0) += w * (s.sy - da * s.n - dr * s.sy1);
        XtWy(1) += w * (s.sy1y - da * s.sy1 - dr * s.s11);
    }
    XtWX(1, 0) = XtWX(0, 1);
    const Eigen::Vector2d m(config_.hyper.mu_alpha(0), config_.hyper.mu_rho);
    const Eigen::Matrix2d V = Eigen::Vector2d(config_.hyper.v_alpha(0, 0), config_.hyper.v_rho).asDiagonal();
    const Eigen::VectorXd beta = update_common_regression(m, V, XtWX, XtWy, common_rng_);
    common_.alpha(0) = beta(0);
    common_.rho = beta(1);
}

void M1Sampler::draw_hyper(bool adapt) {
    const M1Variant v = config_.variant;
    const HyperParams& h = config_.hyper;
    const int N = static_cast<int>(units_.size());
    if (v == M1Variant::homogeneous) return;
    int za = 0, zr = 0, zs = 0;
    double sa = 0.0, sr = 0.0;
    IgSlabStats sig;
    for (int i : order_) {
        const UnitState& u = units_[i];
        if (u.z_alpha) {
            ++za;
            sa += u.delta_alpha(0) * u.delta_alpha(0);
        }
        if (u.z_rho) {
            ++zr;
            sr += u.delta_rho * u.delta_rho;
        }
        if (u.z_sigma) {
            ++zs;
            sig.add(u.delta_sigma);
        }
    }
    if (is_ss(v)) {
        common_.q_alpha = update_q(za, N, h.q_prior, common_rng_);
        common_.q_rho = update_q(zr, N, h.q_prior, common_rng_);
        if (v == M1Variant::ss_hetsk) common_.q_sigma = update_q(zs, N, h.q_prior, common_rng_);
    }
    common_.v_delta_alpha(0, 0) = update_v_delta_normal(za, sa, h.v_delta_alpha, common_rng_);
    common_.v_delta_rho = update_v_delta_normal(zr, sr, h.v_delta_rho, common_rng_);
    if (is_heteroskedastic(v)) {
        rwmh_.adapt = adapt;
        common_.v_delta_sigma =
            update_v_delta_sigma_rwmh(common_.v_delta_sigma, sig, h.v_delta_sigma, rwmh_, common_rng_);
    }
}

void M1Sampler::draw_units() {
    const M1Variant v = config_.variant;
    if (v == M1Variant::homogeneous) return;
    const CommonState& c = common_;
    const double alpha = c.alpha(0);
    parallel_for(static_cast<std::ptrdiff_t>(units_.size()), config_.exec, [&](std::ptrdiff_t i) {
        const M1UnitStats& s = stats_[i];
        UnitState& u = units_[i];
        RngStream& rng = unit_rngs_[i];
        const double s2 = c.sigma2 * u.delta_sigma;
        if (is_full(v)) {
            Eigen::Matrix2d P;
            P << 1.0 / c.v_delta_alpha(0, 0) + s.n / s2, s.sy1 / s2, s.sy1 / s2,
                1.0 / c.v_delta_rho + s.s11 / s2;
            const Eigen::Vector2d b((s.sy - alpha * s.n - c.rho * s.sy1) / s2,
                                    (s.sy1y - alpha * s.sy1 - c.rho * s.s11) / s2);
            const Eigen::VectorXd d = sample_mv_normal_precision(P, b, rng);
            u.z_alpha = u.z_rho = 1;
            u.delta_alpha(0) = d(0);
            u.delta_rho = d(1);
        } else {
            auto alpha_block = [&] {
                const double phi = c.rho + u.delta_rho;
                const auto d = update_indicator_and_deviation_normal(
                    s.n / s2, (s.sy - alpha * s.n - phi * s.sy1) / s2, c.q_alpha,
                    c.v_delta_alpha(0, 0), rng);
                u.z_alpha = d.z;
                u.delta_alpha(0) = d.delta;
            };
            auto rho_block = [&] {
                const double a = alpha + u.delta_alpha(0);
                const auto d = update_indicator_and_deviation_normal(
                    s.s11 / s2, (s.sy1y - a * s.sy1 - c.rho * s.s11) / s2, c.q_rho, c.v_delta_rho,
                    rng);
                u.z_rho = d.z;
                u.delta_rho = d.delta;
            };
            if (config_.randomize_unit_blocks && rng.uniform() < 0.5) {
                rho_block();
                alpha_block();
            } else {
                alpha_block();
                rho_block();
            }
        }
        if (is_heteroskedastic(v)) {
            const double S = s.rss(alpha + u.delta_alpha(0), c.rho + u.delta_rho) / c.sigma2;
            if (v == M1Variant::full_hetero_hetsk) {
                const double w = c.v_delta_sigma;
                u.z_sigma = 1;
                u.delta_sigma = sample_inverse_gamma({2.0 / w + 4.0 + s.n, 2.0 / w + 2.0 + S}, rng);
            } else {
                const auto d = update_indicator_and_deviation_ig(s.n, S, c.q_sigma, c.v_delta_sigma, rng);
                u.z_sigma = d.z;
                u.delta_sigma = d.delta;
            }
        }
    });
}

void M1Sampler::draw_sigma2() {
    double n = 0.0, ss = 0.0;
    for (int i : order_) {
        const UnitState& u = units_[i];
        n += stats_[i].n;
        ss += stats_[i].rss(common_.alpha(0) + u.delta_alpha(0), common_.rho + u.delta_rho) /
              u.delta_sigma;
    }
    common_.sigma2 = sample_inverse_gamma(
        {config_.hyper.sigma2.nu + n, config_.hyper.sigma2.tau + ss}, common_rng_);
}

void M1Sampler::sweep(bool adapt) {
    static const std::vector<int> kDefault{0, 1, 2, 3};
    for (int b : config_.block_order.empty() ? kDefault : config_.block_order) {
        if (b == 2) draw_units();
        else if (config_.fix_common) continue;
        else if (b == 0) draw_beta();
        else if (b == 1) draw_hyper(adapt);
        else draw_sigma2();
    }
}

ChainOutput M1Sampler::run() {
    initialize();
    const int N = static_cast<int>(units_.size());
    const int kept = config_.stored_draws();
    ChainOutput out;
    out.model = "m1";
    out.variant = to_string(config_.variant) + (config_.fix_common ? "_oracle" : "");
    out.seed = config_.seed;
    out.config = {{"n_draws", config_.n_draws},
                  {"burn_in", config_.burn_in},
                  {"thin", config_.thin},
                  {"adapt_after_burnin", config_.adapt_after_burnin}};
    out.common_names = {"alpha",   "rho",           "sigma2",      "q_alpha",      "q_rho",
                        "q_sigma", "v_delta_alpha", "v_delta_rho", "v_delta_sigma"};
    out.common.resize(kept, static_cast<int>(out.common_names.size()));
    out.unit_ids = unit_ids_;
    for (const char* f : {"z_alpha", "delta_alpha", "z_rho", "delta_rho", "z_sigma", "delta_sigma"})
        out.unit[f].resize(kept, N);
    auto& za = out.unit["z_alpha"];
    auto& da = out.unit["delta_alpha"];
    auto& zr = out.unit["z_rho"];
    auto& dr = out.unit["delta_rho"];
    auto& zs = out.unit["z_sigma"];
    auto& ds = out.unit["delta_sigma"];

    int row = 0;
    for (int it = 0; it < config_.n_draws; ++it) {
        sweep(it < config_.burn_in || config_.adapt_after_burnin);
        if (it < config_.burn_in || (it - config_.burn_in + 1) % config_.thin != 0 || row >= kept)
            continue;
        const CommonState& c = common_;
        out.common.row(row) << c.alpha(0), c.rho, c.sigma2, c.q_alpha, c.q_rho, c.q_sigma,
            c.v_delta_alpha(0, 0), c.v_delta_rho, c.v_delta_sigma;
        for (int i = 0; i < N; ++i) {
            const UnitState& u = units_[i];
            za(row, i) = u.z_alpha;
            da(row, i) = u.delta_alpha(0);
            zr(row, i) = u.z_rho;
            dr(row, i) = u.delta_rho;
            zs(row, i) = u.z_sigma;
            ds(row, i) = u.delta_sigma;
        }
        ++row;
    }
    if (!out.common.allFinite()) throw std::runtime_error("M1 chain produced non-finite draws");
    out.diagnostics["rwmh_proposed"] = rwmh_.proposed;
    out.diagnostics["rwmh_accept_rate"] =
        rwmh_.proposed ? static_cast<double>(rwmh_.accepted) / rwmh_.proposed : 0.0;
    out.diagnostics["rwmh_step"] = std::exp(rwmh_.log_step);
    return out;
}

ChainOutput run_m1(const PanelData& data, const M1Config& config) {
    M1Sampler sampler(data, config);
    return sampler.run();
}

}  // namespace sparsepanel
