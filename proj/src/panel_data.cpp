#include "sparsepanel/panel_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace sparsepanel {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

bool parse_long(const std::string& s, long& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}
}  // namespace

Eigen::VectorXd PanelData::x_row(int i, int t) const {
    Eigen::VectorXd r(k());
    for (int j = 0; j < k(); ++j) r(j) = x[j](i, t);
    return r;
}

std::pair<int, int> PanelData::span(int i) const {
    int first = -1, last = -1;
    for (int t = 0; t < n_periods(); ++t) {
        if (observed(i, t)) {
            if (first < 0) first = t;
            last = t;
        }
    }
    return {first, last};
}

int PanelData::longest_run(int i) const {
    int best = 0, run = 0;
    for (int t = 0; t < n_periods(); ++t) {
        run = observed(i, t) ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

int PanelData::count_observed(int i) const {
    return static_cast<int>(observed.row(i).count());
}

PanelData PanelData::select_units(const std::vector<int>& rows) const {
    PanelData out;
    const int n = static_cast<int>(rows.size());
    out.times = times;
    out.x_names = x_names;
    out.y.resize(n, n_periods());
    out.observed.resize(n, n_periods());
    out.x.assign(k(), Eigen::MatrixXd(n, n_periods()));
    for (int r = 0; r < n; ++r) {
        const int i = rows[r];
        out.unit_ids.push_back(unit_ids.at(i));
        out.y.row(r) = y.row(i);
        out.observed.row(r) = observed.row(i);
        for (int j = 0; j < k(); ++j) out.x[j].row(r) = x[j].row(i);
    }
    return out;
}

PanelData PanelData::select_columns(int first, int count) const {
    PanelData out;
    out.unit_ids = unit_ids;
    out.x_names = x_names;
    out.times.assign(times.begin() + first, times.begin() + first + count);
    out.y = y.middleCols(first, count);
    out.observed = observed.middleCols(first, count);
    for (const auto& m : x) out.x.push_back(m.middleCols(first, count));
    return out;
}

void PanelData::validate() const {
    const int n = n_units(), p = n_periods();
    if (y.rows() != n || y.cols() != p || observed.rows() != n || observed.cols() != p)
        throw IngestionError("panel: y/mask dimensions do not match ids and times");
    if (static_cast<int>(x_names.size()) != k())
        throw IngestionError("panel: regressor names do not match regressor count");
    for (const auto& m : x)
        if (m.rows() != n || m.cols() != p)
            throw IngestionError("panel: regressor matrix has wrong dimensions");
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < p; ++t) {
            if (observed(i, t) != std::isfinite(y(i, t)))
                throw IngestionError("panel: mask disagrees with y at unit " + unit_ids[i]);
            if (observed(i, t))
                for (int j = 0; j < k(); ++j)
                    if (!std::isfinite(x[j](i, t)))
                        throw IngestionError("panel: regressor " + x_names[j] +
                                             " is missing where y is present for unit " +
                                             unit_ids[i] + ", time " + std::to_string(times[t]));
        }
}

PanelData make_panel(std::vector<std::string> unit_ids, std::vector<long> times, Eigen::MatrixXd y,
                     std::vector<Eigen::MatrixXd> x, std::vector<std::string> x_names) {
    PanelData d;
    d.unit_ids = std::move(unit_ids);
    d.times = std::move(times);
    d.observed = y.array().isFinite();
    d.y = std::move(y);
    if (x_names.empty())
        for (std::size_t j = 0; j < x.size(); ++j) x_names.push_back("x" + std::to_string(j + 1));
    d.x = std::move(x);
    d.x_names = std::move(x_names);
    d.validate();
    return d;
}

PanelData parse_panel(const std::string& text, const PanelSchema& schema) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IngestionError("panel csv: empty input");
    const auto header = split_csv_line(line);
    const int c_unit = column_index(header, schema.unit_col);
    const int c_time = column_index(header, schema.time_col);
    const int c_y = column_index(header, schema.y_col);
    if (c_unit < 0 || c_time < 0 || c_y < 0)
        throw IngestionError("panel csv: header must contain '" + schema.unit_col + "', '" +
                             schema.time_col + "' and '" + schema.y_col + "'");
    std::vector<int> c_x;
    std::vector<std::string> x_names = schema.x_cols;
    if (x_names.empty()) {
        for (int c = 0; c < static_cast<int>(header.size()); ++c)
            if (c != c_unit && c != c_time && c != c_y) x_names.push_back(header[c]);
    }
    for (const auto& name : x_names) {
        const int c = column_index(header, name);
        if (c < 0) throw IngestionError("panel csv: missing regressor column '" + name + "'");
        c_x.push_back(c);
    }

    struct Row {
        std::string unit;
        long time;
        double y;
        std::vector<double> x;
    };
    std::vector<Row> rows;
    std::set<std::pair<std::string, long>> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw IngestionError("panel csv: line " + std::to_string(line_no) + " has " +
                                 std::to_string(f.size()) + " fields, expected " +
                                 std::to_string(header.size()));
        Row r;
        r.unit = f[c_unit];
        if (!parse_long(f[c_time], r.time))
            throw IngestionError("panel csv: non-integer time '" + f[c_time] + "' on line " +
                                 std::to_string(line_no));
        if (f[c_y].empty()) {
            r.y = kNaN;
        } else if (!parse_double(f[c_y], r.y) || !std::isfinite(r.y)) {
            throw IngestionError("panel csv: non-numeric y '" + f[c_y] + "' at (unit " + r.unit +
                                 ", time " + std::to_string(r.time) + ")");
        }
        for (std::size_t j = 0; j < c_x.size(); ++j) {
            double v = kNaN;
            const auto& s = f[c_x[j]];
            if (!s.empty() && !parse_double(s, v))
                throw IngestionError("panel csv: non-numeric " + x_names[j] + " '" + s +
                                     "' at (unit " + r.unit + ", time " + std::to_string(r.time) +
                                     ")");
            r.x.push_back(v);
        }
        if (!seen.insert({r.unit, r.time}).second)
            throw IngestionError("panel csv: duplicate observation for (unit " + r.unit +
                                 ", time " + std::to_string(r.time) + ")");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw IngestionError("panel csv: no data rows");

    std::vector<std::string> ids;
    std::vector<long> times;
    {
        std::set<std::string> id_set;
        std::set<long> time_set;
        for (const auto& r : rows) {
            id_set.insert(r.unit);
            time_set.insert(r.time);
        }
        ids.assign(id_set.begin(), id_set.end());
        times.assign(time_set.begin(), time_set.end());
        bool numeric = true;
        for (const auto& id : ids) {
            long v;
            if (!parse_long(id, v)) {
                numeric = false;
                break;
            }
        }
        if (numeric)
            std::sort(ids.begin(), ids.end(),
                      [](const std::string& a, const std::string& b) {
                          return std::stol(a) < std::stol(b);
                      });
    }
    std::map<std::string, int> id_index;
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) id_index[ids[i]] = i;
    std::map<long, int> time_index;
    for (int t = 0; t < static_cast<int>(times.size()); ++t) time_index[times[t]] = t;

    const int n = static_cast<int>(ids.size()), p = static_cast<int>(times.size());
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, p, kNaN);
    std::vector<Eigen::MatrixXd> x(x_names.size(), Eigen::MatrixXd::Constant(n, p, kNaN));
    for (const auto& r : rows) {
        const int i = id_index[r.unit], t = time_index[r.time];
        y(i, t) = r.y;
        for (std::size_t j = 0; j < r.x.size(); ++j) x[j](i, t) = r.x[j];
    }
    PanelData d;
    d.unit_ids = std::move(ids);
    d.times = std::move(times);
    d.observed = y.array().isFinite();
    d.y = std::move(y);
    d.x = std::move(x);
    d.x_names = std::move(x_names);
    d.validate();
    return d;
}

PanelData load_panel(const std::string& path, const PanelSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("panel csv: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_panel(ss.str(), schema);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_panel(const PanelData& data) {
    std::string out = "unit,time,y";
    for (const auto& name : data.x_names) out += "," + name;
    out += "\n";
    for (int i = 0; i < data.n_units(); ++i)
        for (int t = 0; t < data.n_periods(); ++t) {
            bool any_x = false;
            for (const auto& m : data.x) any_x = any_x || std::isfinite(m(i, t));
            if (!data.observed(i, t) && !any_x) continue;
            out += data.unit_ids[i] + "," + std::to_string(data.times[t]) + "," +
                   format_double(data.y(i, t));
            for (const auto& m : data.x) out += "," + format_double(m(i, t));
            out += "\n";
        }
    return out;
}

void write_panel(const PanelData& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("panel csv: cannot write '" + path + "'");
    out << format_panel(data);
}

SampleSpec SampleSpec::balanced(int T, long last_period, int holdout) {
    SampleSpec s;
    s.kind = Kind::balanced;
    s.T = T;
    s.last_period = last_period;
    s.holdout_periods = holdout;
    return s;
}

SampleSpec SampleSpec::unbalanced(int min_consecutive, int holdout) {
    SampleSpec s;
    s.kind = Kind::unbalanced;
    s.min_consecutive = min_consecutive;
    s.holdout_periods = holdout;
    return s;
}

EstimationSample make_estimation_sample(const PanelData& data, const SampleSpec& spec) {
    if (spec.holdout_periods < 0) throw DomainError("sample spec: holdout_periods must be >= 0");
    PanelData window;
    std::vector<int> keep;
    if (spec.kind == SampleSpec::Kind::balanced) {
        if (spec.T < 1) throw DomainError("sample spec: balanced T must be >= 1");
        if (spec.holdout_periods >= spec.T)
            throw DomainError("sample spec: holdout_periods must be < T");
        const long first_period = spec.last_period - spec.T;
        auto lo = std::lower_bound(data.times.begin(), data.times.end(), first_period);
        auto hi = std::upper_bound(data.times.begin(), data.times.end(), spec.last_period);
        const int first = static_cast<int>(lo - data.times.begin());
        const int count = static_cast<int>(hi - lo);
        if (count != spec.T + 1)
            throw EmptySampleError("balanced sample: periods " + std::to_string(first_period) +
                                   ".." + std::to_string(spec.last_period) +
                                   " are not all present in the panel");
        window = data.select_columns(first, count);
        for (int i = 0; i < window.n_units(); ++i)
            if (window.observed.row(i).all()) keep.push_back(i);
    } else {
        if (spec.min_consecutive < 2) throw DomainError("sample spec: min_consecutive must be >= 2");
        if (spec.holdout_periods >= data.n_periods())
            throw DomainError("sample spec: holdout_periods must be < number of periods");
        window = data;
        const int est_cols = data.n_periods() - spec.holdout_periods;
        for (int i = 0; i < data.n_units(); ++i) {
            if (data.longest_run(i) < spec.min_consecutive) continue;
            if (data.observed.row(i).head(est_cols).count() < 2) continue;
            keep.push_back(i);
        }
    }
    if (keep.empty()) throw EmptySampleError("estimation sample is empty after filtering");
    const PanelData kept = window.select_units(keep);
    const int est_cols = kept.n_periods() - spec.holdout_periods;
    EstimationSample out;
    out.estimation = kept.select_columns(0, est_cols);
    out.holdout = kept.select_columns(est_cols, spec.holdout_periods);
    return out;
}

ResidualizeResult residualize(const PanelData& data, const Eigen::MatrixXd& dummies) {
    const int n_obs = static_cast<int>(data.observed.count());
    if (dummies.rows() != n_obs)
        throw DomainError("residualize: dummies have " + std::to_string(dummies.rows()) +
                          " rows but the panel has " + std::to_string(n_obs) + " observations");
    Eigen::VectorXd stacked(n_obs);
    int r = 0;
    for (int i = 0; i < data.n_units(); ++i)
        for (int t = 0; t < data.n_periods(); ++t)
            if (data.observed(i, t)) stacked(r++) = data.y(i, t);

    ResidualizeResult out;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(dummies);
    out.rank = static_cast<int>(cod.rank());
    if (out.rank < dummies.cols())
        out.warnings.push_back("residualize: dummy matrix has rank " + std::to_string(out.rank) +
                               " < " + std::to_string(dummies.cols()) +
                               " columns; minimum-norm solution used");
    const Eigen::VectorXd coef = cod.solve(stacked);
    const Eigen::VectorXd resid = stacked - dummies * coef;

    out.data = data;
    r = 0;
    for (int i = 0; i < data.n_units(); ++i)
        for (int t = 0; t < data.n_periods(); ++t)
            if (data.observed(i, t)) out.data.y(i, t) = resid(r++);
    return out;
}

Eigen::MatrixXd period_dummies(const PanelData& data) {
    const int n_obs = static_cast<int>(data.observed.count());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_obs, data.n_periods());
    int r = 0;
    for (int i = 0; i < data.n_units(); ++i)
        for (int t = 0; t < data.n_periods(); ++t)
            if (data.observed(i, t)) d(r++, t) = 1.0;
    return d;
}

UnitState draw_m1_unit(const CommonState& theta, RngStream& rng) {
    UnitState u;
    u.z_alpha = sample_bernoulli(theta.q_alpha, rng);
    const double va = theta.v_delta_alpha(0, 0);
    u.delta_alpha = Eigen::VectorXd::Zero(1);
    if (u.z_alpha) u.delta_alpha(0) = std::sqrt(va) * rng.normal();
    u.z_rho = sample_bernoulli(theta.q_rho, rng);
    u.delta_rho = u.z_rho ? std::sqrt(theta.v_delta_rho) * rng.normal() : 0.0;
    u.z_sigma = sample_bernoulli(theta.q_sigma, rng);
    u.delta_sigma =
        u.z_sigma ? sample_inverse_gamma(ig_spec_from_variance(theta.v_delta_sigma), rng) : 1.0;
    return u;
}

UnitState draw_m2_unit(const CommonState& theta, RngStream& rng) {
    UnitState u;
    const int k = static_cast<int>(theta.alpha.size());
    u.z_alpha = sample_bernoulli(theta.q_alpha, rng);
    u.delta_alpha = Eigen::VectorXd::Zero(k);
    if (u.z_alpha)
        u.delta_alpha = sample_mv_normal(Eigen::VectorXd::Zero(k), theta.v_delta_alpha, rng);
    u.z_rho = sample_bernoulli(theta.q_rho, rng);
    u.delta_rho = u.z_rho ? std::sqrt(theta.v_delta_rho) * rng.normal() : 0.0;
    u.z_sigma_u = sample_bernoulli(theta.q_sigma_u, rng);
    u.delta_sigma_u =
        u.z_sigma_u ? sample_inverse_gamma(ig_spec_from_variance(theta.v_delta_sigma_u), rng) : 1.0;
    u.z_sigma_eps = sample_bernoulli(theta.q_sigma_eps, rng);
    u.delta_sigma_eps =
        u.z_sigma_eps ? sample_inverse_gamma(ig_spec_from_variance(theta.v_delta_sigma_eps), rng)
                      : 1.0;
    u.s = Eigen::VectorXd::Zero(1);
    u.s(0) = theta.mu_s0 + std::sqrt(std::max(theta.v_s0, 0.0)) * rng.normal();
    return u;
}

PanelData simulate_m1_given(const CommonState& theta, const std::vector<UnitState>& units, int T,
                            std::vector<RngStream>& rngs, const Exec& exec) {
    const int N = static_cast<int>(units.size());
    if (T < 1) throw DomainError("simulate_m1: T must be >= 1");
    if (!(theta.sigma2 >= 0.0)) throw DomainError("simulate_m1: sigma2 must be >= 0");
    Eigen::MatrixXd y(N, T + 1);
    parallel_for(N, exec, [&](std::ptrdiff_t i) {
        const UnitState& u = units[i];
        const double a = theta.alpha(0) + u.delta_alpha(0);
        const double r = theta.rho + u.delta_rho;
        const double sd = std::sqrt(theta.sigma2 * u.delta_sigma);
        y(i, 0) = 0.0;
        for (int t = 1; t <= T; ++t) y(i, t) = a + r * y(i, t - 1) + sd * rngs[i].normal();
    });
    std::vector<std::string> ids(N);
    for (int i = 0; i < N; ++i) ids[i] = std::to_string(i + 1);
    std::vector<long> times(T + 1);
    for (int t = 0; t <= T; ++t) times[t] = t;
    return make_panel(std::move(ids), std::move(times), std::move(y));
}

SimulatedPanel simulate_m1(const CommonState& theta, int N, int T, std::uint64_t seed,
                           const Exec& exec) {
    if (N < 1) throw DomainError("simulate_m1: N must be >= 1");
    std::vector<RngStream> rngs;
    rngs.reserve(N);
    for (int i = 0; i < N; ++i) rngs.emplace_back(seed, static_cast<std::uint64_t>(i));
    SimulatedPanel out;
    out.truth.resize(N);
    parallel_for(N, exec, [&](std::ptrdiff_t i) { out.truth[i] = draw_m1_unit(theta, rngs[i]); });
    out.data = simulate_m1_given(theta, out.truth, T, rngs, exec);
    return out;
}

PanelData simulate_m2_given(const CommonState& theta, std::vector<UnitState>& units,
                            const std::vector<Eigen::MatrixXd>& x, std::vector<RngStream>& rngs,
                            const Exec& exec) {
    const int N = static_cast<int>(units.size());
    const int k = static_cast<int>(theta.alpha.size());
    if (static_cast<int>(x.size()) != k)
        throw DomainError("simulate_m2: regressor count does not match alpha");
    const int T = static_cast<int>(x.at(0).cols());
    if (theta.sigma2_u.size() != T || theta.sigma2_eps.size() != T)
        throw DomainError("simulate_m2: period variances must have length T");
    Eigen::MatrixXd y(N, T);
    parallel_for(N, exec, [&](std::ptrdiff_t i) {
        UnitState& u = units[i];
        const double phi = theta.rho + u.delta_rho;
        const double s0 = u.s.size() > 0 ? u.s(0) : 0.0;
        u.s.resize(T + 1);
        u.s(0) = s0;
        for (int t = 1; t <= T; ++t) {
            const double sd_e = std::sqrt(theta.sigma2_eps(t - 1) * u.delta_sigma_eps);
            u.s(t) = phi * u.s(t - 1) + sd_e * rngs[i].normal();
        }
        for (int t = 0; t < T; ++t) {
            double mean = u.s(t + 1);
            for (int j = 0; j < k; ++j) mean += x[j](i, t) * (theta.alpha(j) + u.delta_alpha(j));
            const double sd_u = std::sqrt(theta.sigma2_u(t) * u.delta_sigma_u);
            y(i, t) = mean + sd_u * rngs[i].normal();
        }
    });
    std::vector<std::string> ids(N);
    for (int i = 0; i < N; ++i) ids[i] = std::to_string(i + 1);
    std::vector<long> times(T);
    for (int t = 0; t < T; ++t) times[t] = t + 1;
    std::vector<std::string> names;
    for (int j = 0; j < k; ++j) names.push_back(j == 0 ? "x1" : "x" + std::to_string(j + 1));
    return make_panel(std::move(ids), std::move(times), std::move(y), x, names);
}

SimulatedPanel simulate_m2(const CommonState& theta, const std::vector<Eigen::MatrixXd>& x,
                           std::uint64_t seed, const Exec& exec) {
    if (x.empty()) throw DomainError("simulate_m2: at least one regressor is required");
    const int N = static_cast<int>(x[0].rows());
    std::vector<RngStream> rngs;
    rngs.reserve(N);
    for (int i = 0; i < N; ++i) rngs.emplace_back(seed, static_cast<std::uint64_t>(i));
    SimulatedPanel out;
    out.truth.resize(N);
    parallel_for(N, exec, [&](std::ptrdiff_t i) { out.truth[i] = draw_m2_unit(theta, rngs[i]); });
    out.data = simulate_m2_given(theta, out.truth, x, rngs, exec);
    return out;
}

std::vector<Eigen::MatrixXd> experience_regressors(const Eigen::MatrixXd& experience) {
    return {Eigen::MatrixXd::Ones(experience.rows(), experience.cols()), experience / 10.0};
}

}  // namespace sparsepanel
