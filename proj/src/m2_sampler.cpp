#include "sparsepanel/m2_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sparsepanel {

std::string to_string(M2Variant v) {
    switch (v) {
        case M2Variant::baseline: return "baseline";
        case M2Variant::homosk: return "homosk";
        case M2Variant::rip: return "rip";
        case M2Variant::hip: return "hip";
    }
    return "unknown";
}

M2Variant parse_m2_variant(const std::string& s) {
    for (auto v : {M2Variant::baseline, M2Variant::homosk, M2Variant::rip, M2Variant::hip})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown M2 variant '" + s + "'");
}

void M2Config::validate(int k) const {
    std::vector<std::string> errors;
    if (n_draws < 1) errors.push_back("n_draws: must be >= 1");
    if (burn_in < 0) errors.push_back("burn_in: must be >= 0");
    if (burn_in >= n_draws) errors.push_back("burn_in, n_draws: burn_in must be < n_draws");
    if (thin < 1) errors.push_back("thin: must be >= 1");
    if (!block_order.empty() && !is_order_permutation(block_order, 7))
        errors.push_back("block_order: must be a permutation of 0..6");
    if (hyper.mu_alpha.size() != k) errors.push_back("hyper.mu_alpha: length must equal k");
    if (hyper.v_alpha.rows() != k || hyper.v_alpha.cols() != k)
        errors.push_back("hyper.v_alpha: must be k x k");
    if (hyper.v_delta_alpha_iw.scale.rows() != k || hyper.v_delta_alpha_iw.scale.cols() != k)
        errors.push_back("hyper.v_delta_alpha_iw: scale must be k x k");
    if (!(hyper.v_rho > 0.0)) errors.push_back("hyper.v_rho: must be > 0");
    if (!(hyper.mu_s0_var > 0.0)) errors.push_back("hyper.mu_s0_var: must be > 0");
    auto check = [&](const char* name, auto&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            errors.push_back(std::string(name) + ": " + e.what());
        }
    };
    check("hyper.sigma2_u", [&] { hyper.sigma2_u.validate(); });
    check("hyper.sigma2_eps", [&] { hyper.sigma2_eps.validate(); });
    check("hyper.q_prior", [&] { hyper.q_prior.validate(); });
    if (hyper.v_delta_alpha_iw.scale.rows() == k)
        check("hyper.v_delta_alpha_iw", [&] { hyper.v_delta_alpha_iw.validate(); });
    check("hyper.v_delta_rho", [&] { hyper.v_delta_rho.validate(); });
    check("hyper.v_delta_sigma_u", [&] { hyper.v_delta_sigma_u.validate(); });
    check("hyper.v_delta_sigma_eps", [&] { hyper.v_delta_sigma_eps.validate(); });
    check("hyper.v_s0", [&] { hyper.v_s0.validate(); });
    if (!errors.empty()) {
        std::ostringstream os;
        os << "invalid M2 configuration:";
        for (const auto& e : errors) os << "\n  " << e;
        throw ConfigError(os.str());
    }
}

std::vector<M2UnitData> m2_unit_data(const PanelData& data) {
    const int N = data.n_units();
    const int k = data.k();
    std::vector<M2UnitData> out(N);
    for (int i = 0; i < N; ++i) {
        M2UnitData& u = out[i];
        std::tie(u.first, u.last) = data.span(i);
        if (u.first < 0) throw DomainError("M2: unit " + data.unit_ids[i] + " has no observations");
        const int n = data.count_observed(i);
        u.y.resize(n);
        u.X.resize(n, k);
        int r = 0;
        for (int t = u.first; t <= u.last; ++t) {
            if (!data.observed(i, t)) continue;
            u.obs_state.push_back(t - u.first);
            u.obs_col.push_back(t);
            u.y(r) = data.y(i, t);
            for (int j = 0; j < k; ++j) u.X(r, j) = data.x[j](i, t);
            ++r;
        }
    }
    return out;
}

namespace {
double ig_mean_or(const InverseGammaSpec& s, double fallback) {
    return s.nu > 2.0 ? s.mean() : fallback;
}

bool ss_location(M2Variant v) { return v == M2Variant::baseline || v == M2Variant::homosk; }
bool hetsk(M2Variant v) { return v != M2Variant::homosk; }

void restrict_common(CommonState& c, M2Variant v) {
    if (v == M2Variant::homosk) c.q_sigma_u = c.q_sigma_eps = 0.0;
    if (v == M2Variant::rip) c.q_alpha = c.q_rho = 0.0;
    if (v == M2Variant::hip) c.q_alpha = c.q_rho = 1.0;
}
}  // namespace

CommonState draw_prior_m2(const HyperParams& h, int T, M2Variant variant, RngStream& rng) {
    CommonState c;
    c.alpha = sample_mv_normal(h.mu_alpha, h.v_alpha, rng);
    c.rho = h.mu_rho + std::sqrt(h.v_rho) * rng.normal();
    c.sigma2_u.resize(T);
    c.sigma2_eps.resize(T);
    for (int t = 0; t < T; ++t) {
        c.sigma2_u(t) = sample_inverse_gamma(h.sigma2_u, rng);
        c.sigma2_eps(t) = sample_inverse_gamma(h.sigma2_eps, rng);
    }
    c.q_alpha = sample_beta(h.q_prior, rng);
    c.q_rho = sample_beta(h.q_prior, rng);
    c.q_sigma_u = sample_beta(h.q_prior, rng);
    c.q_sigma_eps = sample_beta(h.q_prior, rng);
    c.q_sigma = 0.0;
    c.v_delta_alpha = sample_inverse_wishart(h.v_delta_alpha_iw, rng);
    c.v_delta_rho = sample_inverse_gamma(h.v_delta_rho, rng);
    c.v_delta_sigma_u = sample_inverse_gamma(h.v_delta_sigma_u, rng);
    c.v_delta_sigma_eps = sample_inverse_gamma(h.v_delta_sigma_eps, rng);
    c.mu_s0 = h.mu_s0_mean + std::sqrt(h.mu_s0_var) * rng.normal();
    c.v_s0 = sample_inverse_gamma(h.v_s0, rng);
    restrict_common(c, variant);
    return c;
}

M2Sampler::M2Sampler(const PanelData& data, M2Config config) : config_(std::move(config)) {
    k_ = data.k();
    if (k_ < 1) throw DomainError("M2: at least one regressor is required");
    config_.validate(k_);
    set_data(data);
    const int N = static_cast<int>(data_.size());
    if (!config_.stream_ids.empty() && static_cast<int>(config_.stream_ids.size()) != N)
        throw ConfigError("stream_ids: length must equal the number of units");
    common_rng_ = RngStream(derive_seed(config_.seed, 1), 0);
    unit_rngs_.clear();
    unit_rngs_.reserve(N);
    for (int i = 0; i < N; ++i)
        unit_rngs_.emplace_back(derive_seed(config_.seed, 2),
                                config_.stream_ids.empty() ? static_cast<std::uint64_t>(i)
                                                           : config_.stream_ids[i]);
    order_.resize(N);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
        return unit_rngs_[a].stream_id() < unit_rngs_[b].stream_id();
    });
    initialize();
}

void M2Sampler::set_data(const PanelData& data) {
    if (data.k() != k_) throw DomainError("M2: regressor count changed");
    auto fresh = m2_unit_data(data);
    if (!data_.empty()) {
        if (fresh.size() != data_.size()) throw DomainError("M2: unit count changed");
        for (std::size_t i = 0; i < fresh.size(); ++i)
            if (fresh[i].first != data_[i].first || fresh[i].last != data_[i].last)
                throw DomainError("M2: replacement data must keep every unit's span");
    }
    data_ = std::move(fresh);
    unit_ids_ = data.unit_ids;
    T_ = data.n_periods();
}

void M2Sampler::apply_restrictions() { restrict_common(common_, config_.variant); }

void M2Sampler::initialize() {
    const HyperParams& h = config_.hyper;
    common_ = CommonState{};
    common_.alpha = h.mu_alpha;
    common_.rho = h.mu_rho;
    common_.sigma2_u = Eigen::VectorXd::Constant(T_, ig_mean_or(h.sigma2_u, 0.05));
    common_.sigma2_eps = Eigen::VectorXd::Constant(T_, ig_mean_or(h.sigma2_eps, 0.05));
    const double qm = h.q_prior.a / (h.q_prior.a + h.q_prior.b);
    common_.q_alpha = common_.q_rho = common_.q_sigma_u = common_.q_sigma_eps = qm;
    common_.q_sigma = 0.0;
    const auto& iw = h.v_delta_alpha_iw;
    common_.v_delta_alpha = iw.dof > k_ + 1 ? iw.mean() : iw.scale;
    common_.v_delta_rho = ig_mean_or(h.v_delta_rho, 0.25);
    common_.v_delta_sigma_u = ig_mean_or(h.v_delta_sigma_u, 1.0);
    common_.v_delta_sigma_eps = ig_mean_or(h.v_delta_sigma_eps, 1.0);
    common_.mu_s0 = h.mu_s0_mean;
    common_.v_s0 = ig_mean_or(h.v_s0, 0.05);
    apply_restrictions();

    units_.assign(data_.size(), UnitState{});
    for (std::size_t i = 0; i < data_.size(); ++i) {
        UnitState& u = units_[i];
        u.delta_alpha = Eigen::VectorXd::Zero(k_);
        u.s = Eigen::VectorXd::Zero(data_[i].span() + 1);
        u.s(0) = common_.mu_s0;
        if (config_.variant == M2Variant::hip) u.z_alpha = u.z_rho = 1;
    }
    rwmh_u_ = RwmhAdaptState{};
    rwmh_eps_ = RwmhAdaptState{};
}

void M2Sampler::set_state(const CommonState& common, const std::vector<UnitState>& units) {
    if (units.size() != data_.size()) throw DomainError("M2: unit state count mismatch");
    for (std::size_t i = 0; i < units.size(); ++i)
        if (units[i].s.size() != data_[i].span() + 1)
            throw DomainError("M2: state path length must be span + 1");
    common_ = common;
    units_ = units;
}

double M2Sampler::transition_var(int i, int j) const {
    return common_.sigma2_eps(data_[i].first + j - 1) * units_[i].delta_sigma_eps;
}

void M2Sampler::draw_alpha() {
    Eigen::MatrixXd XtWX = Eigen::MatrixXd::Zero(k_, k_);
    Eigen::VectorXd XtWy = Eigen::VectorXd::Zero(k_);
    for (int i : order_) {
        const M2UnitData& d = data_[i];
        const UnitState& u = units_[i];
        for (int r = 0; r < d.y.size(); ++r) {
            const double w = 1.0 / (common_.sigma2_u(d.obs_col[r]) * u.delta_sigma_u);
            const Eigen::VectorXd x = d.X.row(r).transpose();
            const double yc = d.y(r) - x.dot(u.delta_alpha) - u.s(d.obs_state[r] + 1);
            XtWX.noalias() += w * x * x.transpose();
            XtWy.noalias() += w * yc * x;
        }
    }
    common_.alpha = update_common_regression(config_.hyper.mu_alpha, config_.hyper.v_alpha, XtWX,
                                             XtWy, common_rng_);
}

void M2Sampler::draw_rho() {
    double prec = 1.0 / config_.hyper.v_rho;
    double b = config_.hyper.mu_rho / config_.hyper.v_rho;
    for (int i : order_) {
        const UnitState& u = units_[i];
        for (int j = 1; j <= data_[i].span(); ++j) {
            const double w = 1.0 / transition_var(i, j);
            prec += w * u.s(j - 1) * u.s(j - 1);
            b += w * u.s(j - 1) * (u.s(j) - u.delta_rho * u.s(j - 1));
        }
    }
    const double var = 1.0 / prec;
    common_.rho = var * b + std::sqrt(var) * common_rng_.normal();
}

void M2Sampler::draw_hyper(bool adapt) {
    const HyperParams& h = config_.hyper;
    const M2Variant v = config_.variant;
    const int N = static_cast<int>(units_.size());
    int za = 0, zr = 0, zu = 0, ze = 0;
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(k_, k_);
    double sr = 0.0;
    IgSlabStats su, se;
    for (int i : order_) {
        const UnitState& u = units_[i];
        if (u.z_alpha) {
            ++za;
            outer.noalias() += u.delta_alpha * u.delta_alpha.transpose();
        }
        if (u.z_rho) {
            ++zr;
            sr += u.delta_rho * u.delta_rho;
        }
        if (u.z_sigma_u) {
            ++zu;
            su.add(u.delta_sigma_u);
        }
        if (u.z_sigma_eps) {
            ++ze;
            se.add(u.delta_sigma_eps);
        }
    }
    if (ss_location(v)) {
        common_.q_alpha = update_q(za, N, h.q_prior, common_rng_);
        common_.q_rho = update_q(zr, N, h.q_prior, common_rng_);
    }
    if (hetsk(v)) {
        common_.q_sigma_u = update_q(zu, N, h.q_prior, common_rng_);
        common_.q_sigma_eps = update_q(ze, N, h.q_prior, common_rng_);
    }
    common_.v_delta_alpha = update_v_delta_alpha_iw(za, outer, h.v_delta_alpha_iw, common_rng_);
    common_.v_delta_rho = update_v_delta_normal(zr, sr, h.v_delta_rho, common_rng_);
    if (hetsk(v)) {
        rwmh_u_.adapt = adapt;
        rwmh_eps_.adapt = adapt;
        common_.v_delta_sigma_u = update_v_delta_sigma_rwmh(common_.v_delta_sigma_u, su,
                                                            h.v_delta_sigma_u, rwmh_u_, common_rng_);
        common_.v_delta_sigma_eps = update_v_delta_sigma_rwmh(
            common_.v_delta_sigma_eps, se, h.v_delta_sigma_eps, rwmh_eps_, common_rng_);
    } else {
        // Prior draws keep the joint distribution intact when the blocks are switched off.
        common_.v_delta_sigma_u = sample_inverse_gamma(h.v_delta_sigma_u, common_rng_);
        common_.v_delta_sigma_eps = sample_inverse_gamma(h.v_delta_sigma_eps, common_rng_);
    }
}

void M2Sampler::draw_unit_deviations() {
    const M2Variant v = config_.variant;
    const CommonState& c = common_;
    parallel_for(static_cast<std::ptrdiff_t>(units_.size()), config_.exec, [&](std::ptrdiff_t i) {
        const M2UnitData& d = data_[i];
        UnitState& u = units_[i];
        RngStream& rng = unit_rngs_[i];
        const int L = d.span();
        if (v != M2Variant::rip) {
            double prec = 0.0, score = 0.0;
            for (int j = 1; j <= L; ++j) {
                const double w = 1.0 / transition_var(static_cast<int>(i), j);
                prec += w * u.s(j - 1) * u.s(j - 1);
                score += w * u.s(j - 1) * (u.s(j) - c.rho * u.s(j - 1));
            }
            const double q = v == M2Variant::hip ? 1.0 : c.q_rho;
            const auto draw = update_indicator_and_deviation_normal(prec, score, q, c.v_delta_rho, rng);
            u.z_rho = draw.z;
            u.delta_rho = draw.delta;
        }
        if (hetsk(v)) {
            double S = 0.0;
            for (int r = 0; r < d.y.size(); ++r) {
                const double e = d.y(r) - d.X.row(r).dot(c.alpha + u.delta_alpha) -
                                 u.s(d.obs_state[r] + 1);
                S += e * e / c.sigma2_u(d.obs_col[r]);
            }
            auto du = update_indicator_and_deviation_ig(static_cast<int>(d.y.size()), S, c.q_sigma_u,
                                                        c.v_delta_sigma_u, rng);
            u.z_sigma_u = du.z;
            u.delta_sigma_u = du.delta;

            const double phi = c.rho + u.delta_rho;
            S = 0.0;
            for (int j = 1; j <= L; ++j) {
                const double e = u.s(j) - phi * u.s(j - 1);
                S += e * e / c.sigma2_eps(d.first + j - 1);
            }
            auto de = update_indicator_and_deviation_ig(L, S, c.q_sigma_eps, c.v_delta_sigma_eps, rng);
            u.z_sigma_eps = de.z;
            u.delta_sigma_eps = de.delta;
        }
    });
}

void M2Sampler::draw_s0_hyper() {
    Eigen::VectorXd s0(static_cast<int>(units_.size()));
    int r = 0;
    for (int i : order_) s0(r++) = units_[i].s(0);
    const HyperParams& h = config_.hyper;
    const NormalSpec m = posterior_mu_s0(s0, common_.v_s0, h.mu_s0_mean, h.mu_s0_var);
    common_.mu_s0 = m.mean + std::sqrt(m.var) * common_rng_.normal();
    common_.v_s0 = sample_inverse_gamma(posterior_v_s0(s0, common_.mu_s0, h.v_s0), common_rng_);
}

void M2Sampler::draw_joint_and_s0() {
    const M2Variant v = config_.variant;
    const CommonState& c = common_;
    const double q = v == M2Variant::rip ? 0.0 : v == M2Variant::hip ? 1.0 : c.q_alpha;
    parallel_for(static_cast<std::ptrdiff_t>(units_.size()), config_.exec, [&](std::ptrdiff_t i) {
        const M2UnitData& d = data_[i];
        UnitState& u = units_[i];
        const int L = d.span();
        const double phi = c.rho + u.delta_rho;
        Eigen::VectorXd w(L);
        for (int j = 1; j <= L; ++j) w(j - 1) = transition_var(static_cast<int>(i), j);
        JointBlockInput in;
        in.X = d.X;
        in.obs_state = d.obs_state;
        in.y_tilde = d.y - d.X * c.alpha;
        in.obs_var.resize(d.y.size());
        for (int r = 0; r < d.y.size(); ++r)
            in.obs_var(r) = c.sigma2_u(d.obs_col[r]) * u.delta_sigma_u;
        in.prior = make_state_prior(phi, w, c.mu_s0, c.v_s0);
        in.v_delta_alpha = c.v_delta_alpha;
        in.q = q;
        const auto res = update_joint_indicator_delta_alpha_states(in, unit_rngs_[i]);
        u.z_alpha = res.z;
        u.delta_alpha = res.delta_alpha;
        u.s.segment(1, L) = res.states;
        u.s(0) = update_s0(phi, u.s(1), c.mu_s0, c.v_s0, w(0), unit_rngs_[i]);
    });
}

void M2Sampler::draw_period_variances() {
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(T_), su = Eigen::VectorXd::Zero(T_);
    Eigen::VectorXd ne = Eigen::VectorXd::Zero(T_), se = Eigen::VectorXd::Zero(T_);
    for (int i : order_) {
        const M2UnitData& d = data_[i];
        const UnitState& u = units_[i];
        for (int r = 0; r < d.y.size(); ++r) {
            const double e = d.y(r) - d.X.row(r).dot(common_.alpha + u.delta_alpha) -
                             u.s(d.obs_state[r] + 1);
            nu(d.obs_col[r]) += 1.0;
            su(d.obs_col[r]) += e * e / u.delta_sigma_u;
        }
        const double phi = common_.rho + u.delta_rho;
        for (int j = 1; j <= d.span(); ++j) {
            const double e = u.s(j) - phi * u.s(j - 1);
            ne(d.first + j - 1) += 1.0;
            se(d.first + j - 1) += e * e / u.delta_sigma_eps;
        }
    }
    const HyperParams& h = config_.hyper;
    for (int t = 0; t < T_; ++t) {
        common_.sigma2_u(t) =
            sample_inverse_gamma({h.sigma2_u.nu + nu(t), h.sigma2_u.tau + su(t)}, common_rng_);
        common_.sigma2_eps(t) =
            sample_inverse_gamma({h.sigma2_eps.nu + ne(t), h.sigma2_eps.tau + se(t)}, common_rng_);
    }
}

void M2Sampler::sweep(bool adapt) {
    static const std::vector<int> kDefault{0, 1, 2, 3, 4, 5, 6};
    for (int b : config_.block_order.empty() ? kDefault : config_.block_order) {
        switch (b) {
            case 0: draw_alpha(); break;
            case 1: draw_rho(); break;
            case 2: draw_hyper(adapt); break;
            case 3: draw_unit_deviations(); break;
            case 4: draw_s0_hyper(); break;
            case 5: draw_joint_and_s0(); break;
            default: draw_period_variances(); break;
        }
    }
}

namespace {
std::vector<std::string> m2_common_names(int k, int T) {
    std::vector<std::string> names;
    for (int j = 0; j < k; ++j) names.push_back("alpha_" + std::to_string(j));
    names.push_back("rho");
    for (int t = 1; t <= T; ++t) names.push_back("sigma2_u_" + std::to_string(t));
    for (int t = 1; t <= T; ++t) names.push_back("sigma2_eps_" + std::to_string(t));
    for (const char* n : {"q_alpha", "q_rho", "q_sigma_u", "q_sigma_eps"}) names.push_back(n);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c)
            names.push_back("v_delta_alpha_" + std::to_string(r) + "_" + std::to_string(c));
    for (const char* n : {"v_delta_rho", "v_delta_sigma_u", "v_delta_sigma_eps", "mu_s0", "v_s0"})
        names.push_back(n);
    return names;
}

std::vector<std::string> m2_unit_fields(int k) {
    std::vector<std::string> f = {"z_alpha"};
    for (int j = 0; j < k; ++j) f.push_back("delta_alpha_" + std::to_string(j));
    for (const char* n : {"z_rho", "delta_rho", "z_sigma_u", "delta_sigma_u", "z_sigma_eps",
                          "delta_sigma_eps", "s_0", "s_last"})
        f.push_back(n);
    return f;
}

void store_m2_draw(ChainOutput& out, int row, const CommonState& c,
                   const std::vector<UnitState>& units, int k, int T) {
    int col = 0;
    auto put = [&](double v) { out.common(row, col++) = v; };
    for (int j = 0; j < k; ++j) put(c.alpha(j));
    put(c.rho);
    for (int t = 0; t < T; ++t) put(c.sigma2_u(t));
    for (int t = 0; t < T; ++t) put(c.sigma2_eps(t));
    put(c.q_alpha);
    put(c.q_rho);
    put(c.q_sigma_u);
    put(c.q_sigma_eps);
    for (int r = 0; r < k; ++r)
        for (int cc = 0; cc < k; ++cc) put(c.v_delta_alpha(r, cc));
    put(c.v_delta_rho);
    put(c.v_delta_sigma_u);
    put(c.v_delta_sigma_eps);
    put(c.mu_s0);
    put(c.v_s0);
    auto& za = out.unit["z_alpha"];
    auto& zr = out.unit["z_rho"];
    auto& dr = out.unit["delta_rho"];
    auto& zu = out.unit["z_sigma_u"];
    auto& du = out.unit["delta_sigma_u"];
    auto& ze = out.unit["z_sigma_eps"];
    auto& de = out.unit["delta_sigma_eps"];
    auto& s0 = out.unit["s_0"];
    auto& sl = out.unit["s_last"];
    for (std::size_t i = 0; i < units.size(); ++i) {
        const UnitState& u = units[i];
        za(row, i) = u.z_alpha;
        for (int j = 0; j < k; ++j) out.unit["delta_alpha_" + std::to_string(j)](row, i) = u.delta_alpha(j);
        zr(row, i) = u.z_rho;
        dr(row, i) = u.delta_rho;
        zu(row, i) = u.z_sigma_u;
        du(row, i) = u.delta_sigma_u;
        ze(row, i) = u.z_sigma_eps;
        de(row, i) = u.delta_sigma_eps;
        s0(row, i) = u.s(0);
        sl(row, i) = u.s(u.s.size() - 1);
    }
}

ChainOutput make_m2_output(int kept, int k, int T, const std::vector<std::string>& ids) {
    ChainOutput out;
    out.model = "m2";
    out.common_names = m2_common_names(k, T);
    out.common.resize(kept, static_cast<int>(out.common_names.size()));
    out.unit_ids = ids;
    for (const auto& f : m2_unit_fields(k)) out.unit[f].resize(kept, static_cast<int>(ids.size()));
    return out;
}

nlohmann::json span_json(const std::vector<M2UnitData>& data) {
    nlohmann::json first = nlohmann::json::array(), last = nlohmann::json::array();
    for (const auto& d : data) {
        first.push_back(d.first);
        last.push_back(d.last);
    }
    return {{"first", first}, {"last", last}};
}
}  // namespace

ChainOutput M2Sampler::run() {
    initialize();
    const int kept = config_.stored_draws();
    ChainOutput out = make_m2_output(kept, k_, T_, unit_ids_);
    out.variant = to_string(config_.variant);
    out.seed = config_.seed;
    out.config = {{"n_draws", config_.n_draws},
                  {"burn_in", config_.burn_in},
                  {"thin", config_.thin},
                  {"k", k_},
                  {"periods", T_},
                  {"adapt_after_burnin", config_.adapt_after_burnin}};
    int row = 0;
    for (int it = 0; it < config_.n_draws; ++it) {
        sweep(it < config_.burn_in || config_.adapt_after_burnin);
        if (it < config_.burn_in || (it - config_.burn_in + 1) % config_.thin != 0 || row >= kept)
            continue;
        store_m2_draw(out, row++, common_, units_, k_, T_);
    }
    if (!out.common.allFinite()) throw std::runtime_error("M2 chain produced non-finite draws");
    out.diagnostics["span"] = span_json(data_);
    for (const auto& [name, st] : {std::pair<const char*, const RwmhAdaptState*>{"rwmh_u", &rwmh_u_},
                                   {"rwmh_eps", &rwmh_eps_}}) {
        out.diagnostics[name] = {
            {"proposed", st->proposed},
            {"accept_rate", st->proposed ? static_cast<double>(st->accepted) / st->proposed : 0.0},
            {"step", std::exp(st->log_step)}};
    }
    return out;
}

ChainOutput run_m2(const PanelData& data, const M2Config& config) {
    M2Sampler sampler(data, config);
    return sampler.run();
}

IndividualPrior IndividualPrior::defaults(int k) {
    IndividualPrior p;
    p.v_alpha = Eigen::MatrixXd::Zero(k, k);
    if (k >= 1) p.v_alpha(0, 0) = 0.24;
    for (int j = 1; j < k; ++j) p.v_alpha(j, j) = 0.05;
    return p;
}

ChainOutput run_m2_individual(const PanelData& data, int unit, const IndividualConfig& config) {
    if (unit < 0 || unit >= data.n_units()) throw DomainError("individual model: unit out of range");
    const PanelData one = data.select_units({unit});
    const int k = one.k();
    const int T = one.n_periods();
    const IndividualPrior& p = config.prior;
    if (k < 1) throw DomainError("individual model: at least one regressor is required");
    if (p.v_alpha.rows() != k || p.v_alpha.cols() != k)
        throw ConfigError("individual prior: v_alpha must be k x k");
    if (config.burn_in >= config.n_draws || config.thin < 1 || config.burn_in < 0)
        throw ConfigError("individual model: need 0 <= burn_in < n_draws and thin >= 1");
    p.sigma2_u.validate();
    p.sigma2_eps.validate();
    const M2UnitData d = m2_unit_data(one)[0];
    if (d.y.size() < 3)
        throw DomainError("individual model: unit " + one.unit_ids[0] +
                          " has fewer than three observations");
    const int L = d.span();
    RngStream rng(derive_seed(config.seed, 3), static_cast<std::uint64_t>(unit));

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double rho = p.mu_rho;
    double su = ig_mean_or(p.sigma2_u, 0.05);
    double se = ig_mean_or(p.sigma2_eps, 0.05);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(L + 1);
    s(0) = p.mu_s0;

    const int kept = (config.n_draws - config.burn_in) / config.thin;
    ChainOutput out = make_m2_output(kept, k, T, one.unit_ids);
    out.variant = "individual";
    out.seed = config.seed;
    out.config = {{"n_draws", config.n_draws}, {"burn_in", config.burn_in},
                  {"thin", config.thin},       {"k", k},
                  {"periods", T},              {"unit", one.unit_ids[0]}};
    CommonState neutral;
    neutral.alpha = Eigen::VectorXd::Zero(k);
    neutral.rho = 0.0;
    neutral.sigma2_u = Eigen::VectorXd::Ones(T);
    neutral.sigma2_eps = Eigen::VectorXd::Ones(T);
    neutral.q_alpha = neutral.q_rho = neutral.q_sigma_u = neutral.q_sigma_eps = 1.0;
    neutral.v_delta_alpha = p.v_alpha;
    neutral.v_delta_rho = p.v_rho;
    neutral.mu_s0 = p.mu_s0;
    neutral.v_s0 = p.v_s0;

    int row = 0;
    for (int it = 0; it < config.n_draws; ++it) {
        // Coefficients and states jointly.
        JointBlockInput in;
        in.X = d.X;
        in.obs_state = d.obs_state;
        in.y_tilde = d.y;
        in.obs_var = Eigen::VectorXd::Constant(d.y.size(), su);
        in.prior = make_state_prior(rho, Eigen::VectorXd::Constant(L, se), p.mu_s0, p.v_s0);
        in.v_delta_alpha = p.v_alpha;
        in.q = 1.0;
        const auto res = update_joint_indicator_delta_alpha_states(in, rng);
        beta = res.delta_alpha;
        s.segment(1, L) = res.states;
        s(0) = update_s0(rho, s(1), p.mu_s0, p.v_s0, se, rng);
        // rho_i.
        double prec = 1.0 / p.v_rho, b = p.mu_rho / p.v_rho;
        for (int j = 1; j <= L; ++j) {
            prec += s(j - 1) * s(j - 1) / se;
            b += s(j - 1) * s(j) / se;
        }
        rho = b / prec + std::sqrt(1.0 / prec) * rng.normal();
        // Variances.
        double ssu = 0.0;
        for (int r = 0; r < d.y.size(); ++r) {
            const double e = d.y(r) - d.X.row(r).dot(beta) - s(d.obs_state[r] + 1);
            ssu += e * e;
        }
        su = sample_inverse_gamma({p.sigma2_u.nu + d.y.size(), p.sigma2_u.tau + ssu}, rng);
        double sse = 0.0;
        for (int j = 1; j <= L; ++j) sse += (s(j) - rho * s(j - 1)) * (s(j) - rho * s(j - 1));
        se = sample_inverse_gamma({p.sigma2_eps.nu + L, p.sigma2_eps.tau + sse}, rng);

        if (it < config.burn_in || (it - config.burn_in + 1) % config.thin != 0 || row >= kept)
            continue;
        UnitState u;
        u.z_alpha = u.z_rho = u.z_sigma_u = u.z_sigma_eps = 1;
        u.delta_alpha = beta;
        u.delta_rho = rho;
        u.delta_sigma_u = su;
        u.delta_sigma_eps = se;
        u.s = s;
        store_m2_draw(out, row++, neutral, {u}, k, T);
    }
    out.diagnostics["span"] = span_json({d});
    return out;
}

}  // namespace sparsepanel
