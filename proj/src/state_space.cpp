#include "sparsepanel/state_space.hpp"

#include <cmath>

namespace sparsepanel {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

Eigen::MatrixXd build_state_prior_cov(double phi, const Eigen::VectorXd& w, double v_s0) {
    const int T = static_cast<int>(w.size());
    Eigen::MatrixXd V(T, T);
    if (T == 0) return V;
    Eigen::VectorXd diag(T);
    double prev = v_s0;
    for (int t = 0; t < T; ++t) {
        if (!(w(t) >= 0.0)) throw DomainError("state prior: innovation variances must be >= 0");
        diag(t) = phi * phi * prev + w(t);
        prev = diag(t);
    }
    for (int t = 0; t < T; ++t) {
        V(t, t) = diag(t);
        double f = 1.0;
        for (int s = t + 1; s < T; ++s) {
            f *= phi;
            V(t, s) = V(s, t) = f * diag(t);
        }
    }
    return V;
}

StatePrior make_state_prior(double phi, const Eigen::VectorXd& w, double mu_s0, double v_s0) {
    const int L = static_cast<int>(w.size());
    StatePrior p;
    p.mean.resize(L);
    p.prec_diag = Eigen::VectorXd::Zero(L);
    p.prec_off = Eigen::VectorXd::Zero(std::max(L - 1, 0));
    Eigen::VectorXd d(L);
    double m = mu_s0;
    for (int t = 0; t < L; ++t) {
        d(t) = t == 0 ? phi * phi * v_s0 + w(0) : w(t);
        if (!(d(t) > 0.0)) throw DomainError("state prior: innovation variances must be positive");
        m *= phi;
        p.mean(t) = m;
    }
    for (int t = 0; t < L; ++t) {
        p.prec_diag(t) += 1.0 / d(t);
        if (t + 1 < L) {
            p.prec_diag(t) += phi * phi / d(t + 1);
            p.prec_off(t) = -phi / d(t + 1);
        }
    }
    p.log_det_cov = d.array().log().sum();
    return p;
}

Eigen::MatrixXd StatePrior::dense_precision() const {
    const int L = static_cast<int>(prec_diag.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(L, L);
    for (int t = 0; t < L; ++t) {
        Q(t, t) = prec_diag(t);
        if (t + 1 < L) Q(t, t + 1) = Q(t + 1, t) = prec_off(t);
    }
    return Q;
}

bool ArrowCholesky::compute(const Eigen::VectorXd& a_diag, const Eigen::VectorXd& a_off,
                            const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) {
    const int L = static_cast<int>(a_diag.size());
    k_ = static_cast<int>(C.rows());
    l_diag_.resize(L);
    l_sub_.resize(std::max(L - 1, 0));
    for (int t = 0; t < L; ++t) {
        double a = a_diag(t);
        if (t > 0) a -= l_sub_(t - 1) * l_sub_(t - 1);
        if (!(a > 0.0)) return false;
        l_diag_(t) = std::sqrt(a);
        if (t + 1 < L) l_sub_(t) = a_off(t) / l_diag_(t);
    }
    G_.resize(L, k_);
    for (int j = 0; j < k_; ++j) {
        for (int t = 0; t < L; ++t) {
            double v = B(t, j);
            if (t > 0) v -= l_sub_(t - 1) * G_(t - 1, j);
            G_(t, j) = v / l_diag_(t);
        }
    }
    if (k_ > 0) {
        const Eigen::MatrixXd S = C - G_.transpose() * G_;
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) return false;
        Ls_ = llt.matrixL();
    }
    return true;
}

Eigen::VectorXd ArrowCholesky::forward(const Eigen::VectorXd& b) const {
    const int L = static_cast<int>(l_diag_.size());
    Eigen::VectorXd u(L + k_);
    for (int t = 0; t < L; ++t) {
        double v = b(t);
        if (t > 0) v -= l_sub_(t - 1) * u(t - 1);
        u(t) = v / l_diag_(t);
    }
    if (k_ > 0) {
        const Eigen::VectorXd rhs = b.tail(k_) - G_.transpose() * u.head(L);
        u.tail(k_) = Ls_.triangularView<Eigen::Lower>().solve(rhs);
    }
    return u;
}

Eigen::VectorXd ArrowCholesky::backward(const Eigen::VectorXd& u) const {
    const int L = static_cast<int>(l_diag_.size());
    Eigen::VectorXd x(L + k_);
    Eigen::VectorXd top = u.head(L);
    if (k_ > 0) {
        x.tail(k_) = Ls_.transpose().triangularView<Eigen::Upper>().solve(u.tail(k_));
        top -= G_ * x.tail(k_);
    }
    for (int t = L - 1; t >= 0; --t) {
        double v = top(t);
        if (t + 1 < L) v -= l_sub_(t) * x(t + 1);
        x(t) = v / l_diag_(t);
    }
    return x;
}

double ArrowCholesky::log_det() const {
    double s = 2.0 * l_diag_.array().log().sum();
    if (k_ > 0) s += 2.0 * Ls_.diagonal().array().log().sum();
    return s;
}

namespace {
struct BranchSystem {
    Eigen::VectorXd a_diag, a_off, b;
    Eigen::MatrixXd B, C;
    double log_det_prior = 0.0;
    double mQm = 0.0;
};

BranchSystem build_branch(const JointBlockInput& in, bool slab) {
    const int L = static_cast<int>(in.prior.prec_diag.size());
    const int k = slab ? static_cast<int>(in.X.cols()) : 0;
    BranchSystem s;
    s.a_diag = in.prior.prec_diag;
    s.a_off = in.prior.prec_off;
    s.B = Eigen::MatrixXd::Zero(L, k);
    s.b = Eigen::VectorXd::Zero(L + k);
    // Q m for the prior mean of the states.
    const Eigen::VectorXd& m = in.prior.mean;
    for (int t = 0; t < L; ++t) {
        double qm = in.prior.prec_diag(t) * m(t);
        if (t > 0) qm += in.prior.prec_off(t - 1) * m(t - 1);
        if (t + 1 < L) qm += in.prior.prec_off(t) * m(t + 1);
        s.b(t) = qm;
        s.mQm += m(t) * qm;
    }
    s.log_det_prior = in.prior.log_det_cov;
    if (slab) {
        const auto llt = cholesky_with_jitter(in.v_delta_alpha);
        s.C = llt.solve(Eigen::MatrixXd::Identity(k, k));
        s.log_det_prior += 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    } else {
        s.C.resize(0, 0);
    }
    for (int r = 0; r < static_cast<int>(in.y_tilde.size()); ++r) {
        const int t = in.obs_state[r];
        const double w = 1.0 / in.obs_var(r);
        s.a_diag(t) += w;
        s.b(t) += w * in.y_tilde(r);
        if (slab) {
            const Eigen::VectorXd x = in.X.row(r).transpose();
            s.B.row(t) += w * x.transpose();
            s.C.noalias() += w * x * x.transpose();
            s.b.tail(k) += w * in.y_tilde(r) * x;
        }
    }
    return s;
}

void factor(BranchSystem& s, ArrowCholesky& chol) {
    for (int attempt = 0; attempt <= 3; ++attempt) {
        if (chol.compute(s.a_diag, s.a_off, s.B, s.C)) return;
        const double scale = s.a_diag.array().abs().mean();
        s.a_diag.array() += 1e-10 * scale;
        if (s.C.size() > 0)
            s.C.diagonal().array() += 1e-10 * s.C.diagonal().array().abs().mean();
    }
    throw DecompositionError("joint state block: posterior precision is not positive definite");
}

double branch_log_marginal(const JointBlockInput& in, const BranchSystem& s,
                           const ArrowCholesky& chol, const Eigen::VectorXd& u) {
    const int n = static_cast<int>(in.y_tilde.size());
    double yy = 0.0, log_det_obs = 0.0;
    for (int r = 0; r < n; ++r) {
        yy += in.y_tilde(r) * in.y_tilde(r) / in.obs_var(r);
        log_det_obs += std::log(in.obs_var(r));
    }
    return -0.5 * n * kLog2Pi - 0.5 * log_det_obs - 0.5 * s.log_det_prior - 0.5 * chol.log_det() -
           0.5 * (yy + s.mQm - u.squaredNorm());
}

void check_input(const JointBlockInput& in) {
    const int n = static_cast<int>(in.y_tilde.size());
    if (static_cast<int>(in.obs_state.size()) != n || in.obs_var.size() != n || in.X.rows() != n)
        throw DomainError("joint state block: observation arrays differ in length");
    const int L = static_cast<int>(in.prior.prec_diag.size());
    for (int t : in.obs_state)
        if (t < 0 || t >= L) throw DomainError("joint state block: state index out of range");
    for (int r = 0; r < n; ++r)
        if (!(in.obs_var(r) > 0.0))
            throw DomainError("joint state block: observation variances must be positive");
}
}  // namespace

double joint_block_log_marginal(const JointBlockInput& in, bool slab) {
    check_input(in);
    BranchSystem s = build_branch(in, slab);
    ArrowCholesky chol;
    factor(s, chol);
    return branch_log_marginal(in, s, chol, chol.forward(s.b));
}

void joint_block_posterior(const JointBlockInput& in, bool slab, Eigen::VectorXd& mean,
                           Eigen::MatrixXd& cov) {
    check_input(in);
    BranchSystem s = build_branch(in, slab);
    const int L = static_cast<int>(s.a_diag.size());
    const int k = static_cast<int>(s.C.rows());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L + k, L + k);
    for (int t = 0; t < L; ++t) {
        P(t, t) = s.a_diag(t);
        if (t + 1 < L) P(t, t + 1) = P(t + 1, t) = s.a_off(t);
    }
    if (k > 0) {
        P.topRightCorner(L, k) = s.B;
        P.bottomLeftCorner(k, L) = s.B.transpose();
        P.bottomRightCorner(k, k) = s.C;
    }
    const auto llt = cholesky_with_jitter(P);
    cov = llt.solve(Eigen::MatrixXd::Identity(L + k, L + k));
    mean = llt.solve(s.b);
}

JointBlockResult update_joint_indicator_delta_alpha_states(const JointBlockInput& in,
                                                           RngStream& rng) {
    check_input(in);
    const int k = static_cast<int>(in.X.cols());
    const int L = static_cast<int>(in.prior.prec_diag.size());
    JointBlockResult out;

    BranchSystem spike = build_branch(in, false);
    ArrowCholesky chol_spike;
    factor(spike, chol_spike);
    const Eigen::VectorXd u_spike = chol_spike.forward(spike.b);
    out.log_marginal_spike = branch_log_marginal(in, spike, chol_spike, u_spike);

    if (!(in.q >= 0.0 && in.q <= 1.0)) throw DomainError("joint state block: q must lie in [0, 1]");
    BranchSystem slab;
    ArrowCholesky chol_slab;
    Eigen::VectorXd u_slab;
    if (in.q > 0.0) {
        slab = build_branch(in, true);
        factor(slab, chol_slab);
        u_slab = chol_slab.forward(slab.b);
        out.log_marginal_slab = branch_log_marginal(in, slab, chol_slab, u_slab);
    }
    if (in.q == 0.0) {
        out.log_odds = -std::numeric_limits<double>::infinity();
        out.z = 0;
    } else if (in.q == 1.0) {
        out.log_odds = std::numeric_limits<double>::infinity();
        out.z = 1;
    } else {
        out.log_odds = std::log(in.q) - std::log1p(-in.q) + out.log_marginal_slab -
                       out.log_marginal_spike;
        const double p = out.log_odds >= 0 ? 1.0 / (1.0 + std::exp(-out.log_odds))
                                           : std::exp(out.log_odds) / (1.0 + std::exp(out.log_odds));
        out.z = sample_bernoulli(p, rng);
    }

    const ArrowCholesky& chol = out.z ? chol_slab : chol_spike;
    const Eigen::VectorXd& u = out.z ? u_slab : u_spike;
    const int dim = out.z ? L + k : L;
    Eigen::VectorXd e(dim);
    for (int j = 0; j < dim; ++j) e(j) = rng.normal();
    const Eigen::VectorXd draw = chol.backward(u + e);
    out.states = draw.head(L);
    out.delta_alpha = out.z ? Eigen::VectorXd(draw.tail(k)) : Eigen::VectorXd::Zero(k);
    return out;
}

NormalSpec s0_conditional(double phi, double s1, double mu_s0, double v_s0, double w1) {
    const double p10 = phi * phi * v_s0 + w1;
    if (!(p10 > 0.0)) return {mu_s0, v_s0};
    const double gain = v_s0 * phi / p10;
    return {mu_s0 + gain * (s1 - phi * mu_s0), v_s0 * w1 / p10};
}

double update_s0(double phi, double s1, double mu_s0, double v_s0, double w1, RngStream& rng) {
    const auto c = s0_conditional(phi, s1, mu_s0, v_s0, w1);
    return c.mean + std::sqrt(std::max(c.var, 0.0)) * rng.normal();
}

}  // namespace sparsepanel
