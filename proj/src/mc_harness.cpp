#include "sparsepanel/mc_harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparsepanel/panel_data.hpp"

namespace sparsepanel {

namespace fs = std::filesystem;

std::string to_string(MCModel m) { return m == MCModel::m1_homosk ? "m1_homosk" : "m1_hetsk"; }

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::ss: return "ss";
        case Estimator::q0: return "q0";
        case Estimator::q1: return "q1";
        case Estimator::oracle: return "oracle";
        case Estimator::ss_homosk_misspec: return "ss_homosk_misspec";
    }
    return "unknown";
}

MCModel parse_mc_model(const std::string& s) {
    if (s == "m1_homosk") return MCModel::m1_homosk;
    if (s == "m1_hetsk") return MCModel::m1_hetsk;
    throw ConfigError("unknown Monte Carlo model '" + s + "'");
}

Estimator parse_estimator(const std::string& s) {
    for (auto e : {Estimator::ss, Estimator::q0, Estimator::q1, Estimator::oracle,
                   Estimator::ss_homosk_misspec})
        if (to_string(e) == s) return e;
    throw ConfigError("unknown estimator '" + s + "'");
}

M1Variant estimator_variant(MCModel model, Estimator e) {
    const bool het = model == MCModel::m1_hetsk;
    switch (e) {
        case Estimator::ss:
        case Estimator::oracle: return het ? M1Variant::ss_hetsk : M1Variant::ss_homosk;
        case Estimator::q0: return M1Variant::homogeneous;
        case Estimator::q1: return het ? M1Variant::full_hetero_hetsk : M1Variant::full_hetero_homosk;
        case Estimator::ss_homosk_misspec: return M1Variant::ss_homosk;
    }
    return M1Variant::ss_homosk;
}

CommonState MCDesign::base_theta() {
    CommonState c;
    c.alpha = Eigen::VectorXd::Constant(1, 1.0);
    c.rho = 0.6;
    c.sigma2 = 0.8;
    c.v_delta_rho = 0.09;
    c.v_delta_sigma = 1.0;
    c.q_alpha = c.q_rho = 0.0;
    c.q_sigma = 0.0;
    c.v_delta_alpha = Eigen::MatrixXd::Constant(1, 1, 1.0);
    return c;
}

CommonState MCDesign::cell_theta(double q, double v) const {
    CommonState c = theta;
    c.q_alpha = c.q_rho = q;
    c.q_sigma = model == MCModel::m1_hetsk ? q : 0.0;
    c.v_delta_alpha = Eigen::MatrixXd::Constant(1, 1, v);
    return c;
}

void MCDesign::validate() const {
    std::vector<std::string> errors;
    if (n_sim < 1) errors.push_back("n_sim: must be >= 1");
    if (N < 1) errors.push_back("N: must be >= 1");
    if (T < 2) errors.push_back("T: must be >= 2");
    if (q_grid.empty()) errors.push_back("q_grid: must not be empty");
    if (v_grid.empty()) errors.push_back("v_grid: must not be empty");
    for (double q : q_grid)
        if (!(q >= 0.0 && q <= 1.0)) errors.push_back("q_grid: values must lie in [0, 1]");
    for (double v : v_grid)
        if (!(v > 0.0)) errors.push_back("v_grid: values must be > 0");
    if (estimators.empty()) errors.push_back("estimators: must not be empty");
    if (burn_in >= n_draws) errors.push_back("burn_in, n_draws: burn_in must be < n_draws");
    if (!(theta.sigma2 >= 0.0)) errors.push_back("theta.sigma2: must be >= 0");
    if (!errors.empty()) {
        std::ostringstream os;
        os << "invalid Monte Carlo design:";
        for (const auto& e : errors) os << "\n  " << e;
        throw ConfigError(os.str());
    }
}

nlohmann::json MCDesign::to_json() const {
    nlohmann::json est = nlohmann::json::array();
    for (auto e : estimators) est.push_back(to_string(e));
    return {{"model", to_string(model)},
            {"theta",
             {{"alpha", theta.alpha(0)},
              {"rho", theta.rho},
              {"sigma2", theta.sigma2},
              {"v_delta_rho", theta.v_delta_rho},
              {"v_delta_sigma", theta.v_delta_sigma}}},
            {"q_grid", q_grid},
            {"v_grid", v_grid},
            {"N", N},
            {"T", T},
            {"n_sim", n_sim},
            {"estimators", est},
            {"n_draws", n_draws},
            {"burn_in", burn_in}};
}

MCDesign MCDesign::from_json(const nlohmann::json& j) {
    MCDesign d;
    if (j.contains("model")) d.model = parse_mc_model(j.at("model").get<std::string>());
    if (j.contains("theta")) {
        const auto& t = j.at("theta");
        if (t.contains("alpha")) d.theta.alpha(0) = t.at("alpha").get<double>();
        d.theta.rho = t.value("rho", d.theta.rho);
        d.theta.sigma2 = t.value("sigma2", d.theta.sigma2);
        d.theta.v_delta_rho = t.value("v_delta_rho", d.theta.v_delta_rho);
        d.theta.v_delta_sigma = t.value("v_delta_sigma", d.theta.v_delta_sigma);
    }
    if (j.contains("q_grid")) d.q_grid = j.at("q_grid").get<std::vector<double>>();
    if (j.contains("v_grid")) d.v_grid = j.at("v_grid").get<std::vector<double>>();
    d.N = j.value("N", d.N);
    d.T = j.value("T", d.T);
    d.n_sim = j.value("n_sim", d.n_sim);
    d.n_draws = j.value("n_draws", d.n_draws);
    d.burn_in = j.value("burn_in", d.burn_in);
    if (j.contains("estimators")) {
        d.estimators.clear();
        for (const auto& e : j.at("estimators")) d.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    return d;
}

const RiskCell& RiskTable::find(double q, double v, Estimator e, const std::string& target) const {
    for (const auto& c : cells)
        if (c.q == q && c.v == v && c.estimator == e && c.target == target) return c;
    throw std::out_of_range("risk table has no cell (" + std::to_string(q) + ", " +
                            std::to_string(v) + ", " + to_string(e) + ", " + target + ")");
}

SimulatedPanel mc_replication_panel(const MCDesign& design, double q, double v, std::uint64_t seed,
                                    int cell, int rep) {
    return simulate_m1(design.cell_theta(q, v), design.N, design.T,
                       derive_seed(seed, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(rep)));
}

std::map<std::string, Eigen::VectorXd> oracle_estimator(const PanelData& data,
                                                         const CommonState& truth, M1Variant variant,
                                                         int n_draws, int burn_in,
                                                         std::uint64_t seed) {
    M1Config cfg;
    cfg.variant = variant;
    cfg.n_draws = n_draws;
    cfg.burn_in = burn_in;
    cfg.seed = seed;
    cfg.fix_common = true;
    cfg.truth = truth;
    return point_estimates(run_m1(data, cfg), PointRule::mean);
}

namespace {
struct JobResult {
    bool done = false;
    std::vector<double> loss_alpha, loss_rho;  // per estimator
    std::vector<char> ok;
};
}  // namespace

RiskTable run_experiment(const MCDesign& design, std::uint64_t seed, const MCRunOptions& opts) {
    design.validate();
    const int nq = static_cast<int>(design.q_grid.size());
    const int nv = static_cast<int>(design.v_grid.size());
    const int n_cells = nq * nv;
    const int ne = static_cast<int>(design.estimators.size());
    const int n_jobs = n_cells * design.n_sim;
    std::vector<JobResult> results(n_jobs);
    std::atomic<int> done{0};

    parallel_for_dynamic(n_jobs, opts.exec, [&](std::ptrdiff_t job) {
        if (opts.stop && opts.stop->load()) return;
        const int cell = static_cast<int>(job / design.n_sim);
        const int rep = static_cast<int>(job % design.n_sim);
        const double v = design.v_grid[cell / nq];
        const double q = design.q_grid[cell % nq];
        const SimulatedPanel sim = mc_replication_panel(design, q, v, seed, cell, rep);
        const CommonState truth = design.cell_theta(q, v);
        JobResult& res = results[job];
        res.loss_alpha.assign(ne, 0.0);
        res.loss_rho.assign(ne, 0.0);
        res.ok.assign(ne, 0);
        const std::uint64_t chain_base = derive_seed(seed, static_cast<std::uint64_t>(cell),
                                                     static_cast<std::uint64_t>(rep) + (1ull << 32));
        for (int e = 0; e < ne; ++e) {
            const Estimator est = design.estimators[e];
            try {
                M1Config cfg;
                cfg.variant = estimator_variant(design.model, est);
                cfg.n_draws = design.n_draws;
                cfg.burn_in = design.burn_in;
                cfg.hyper = design.hyper;
                cfg.seed = derive_seed(chain_base, static_cast<std::uint64_t>(est));
                if (est == Estimator::oracle) {
                    cfg.fix_common = true;
                    cfg.truth = truth;
                }
                const auto pe = point_estimates(run_m1(sim.data, cfg), PointRule::mean);
                const auto& a = pe.at("alpha");
                const auto& r = pe.at("rho");
                double la = 0.0, lr = 0.0;
                for (int i = 0; i < design.N; ++i) {
                    const double ta = truth.alpha(0) + sim.truth[i].delta_alpha(0);
                    const double tr = truth.rho + sim.truth[i].delta_rho;
                    la += (a(i) - ta) * (a(i) - ta);
                    lr += (r(i) - tr) * (r(i) - tr);
                }
                res.loss_alpha[e] = la / design.N;
                res.loss_rho[e] = lr / design.N;
                res.ok[e] = std::isfinite(la) && std::isfinite(lr);
            } catch (const std::exception&) {
                res.ok[e] = 0;
            }
        }
        res.done = true;
        const int d = ++done;
        if (opts.progress) {
#pragma omp critical(sparsepanel_mc_progress)
            opts.progress(d, n_jobs);
        }
    });

    RiskTable table;
    for (int cell = 0; cell < n_cells; ++cell) {
        const double v = design.v_grid[cell / nq];
        const double q = design.q_grid[cell % nq];
        for (int e = 0; e < ne; ++e) {
            for (const char* target : {"alpha", "rho"}) {
                const bool is_alpha = target[0] == 'a';
                double sum = 0.0, sum2 = 0.0;
                int n = 0;
                for (int rep = 0; rep < design.n_sim; ++rep) {
                    const JobResult& r = results[cell * design.n_sim + rep];
                    if (!r.done) {
                        table.partial = true;
                        continue;
                    }
                    if (is_alpha) {
                        ++table.attempted;
                        if (!r.ok[e]) ++table.failed;
                    }
                    if (!r.ok[e]) continue;
                    const double l = is_alpha ? r.loss_alpha[e] : r.loss_rho[e];
                    sum += l;
                    sum2 += l * l;
                    ++n;
                }
                RiskCell c;
                c.q = q;
                c.v = v;
                c.estimator = design.estimators[e];
                c.target = target;
                c.replications = n;
                c.risk = n ? sum / n : std::nan("");
                c.se = n > 1 ? std::sqrt(std::max(sum2 / n - c.risk * c.risk, 0.0) * n / (n - 1.0) / n)
                             : std::nan("");
                table.cells.push_back(c);
            }
        }
    }
    return table;
}

std::string format_risk_table(const RiskTable& table) {
    std::vector<double> qs, vs;
    std::vector<Estimator> es;
    for (const auto& c : table.cells) {
        if (std::find(qs.begin(), qs.end(), c.q) == qs.end()) qs.push_back(c.q);
        if (std::find(vs.begin(), vs.end(), c.v) == vs.end()) vs.push_back(c.v);
        if (std::find(es.begin(), es.end(), c.estimator) == es.end()) es.push_back(c.estimator);
    }
    std::ostringstream os;
    os << "target,v_delta_alpha,estimator";
    for (double q : qs) os << ",q=" << format_double(q) << ",se(q=" << format_double(q) << ")";
    os << '\n';
    for (const char* target : {"alpha", "rho"})
        for (double v : vs)
            for (auto e : es) {
                os << target << ',' << format_double(v) << ',' << to_string(e);
                for (double q : qs) {
                    const auto& c = table.find(q, v, e, target);
                    os << ',' << format_double(c.risk) << ',' << format_double(c.se);
                }
                os << '\n';
            }
    return os.str();
}

void write_risk_table(const RiskTable& table, const MCDesign& design, std::uint64_t seed,
                      const std::string& dir, const nlohmann::json& run_info) {
    fs::create_directories(dir);
    const std::string csv = format_risk_table(table);
    {
        std::ofstream out(fs::path(dir) / "risk.csv");
        out << csv;
    }
    nlohmann::json m;
    m["design"] = design.to_json();
    m["seed"] = seed;
    m["failed"] = table.failed;
    m["attempted"] = table.attempted;
    m["partial"] = table.partial;
    m["ok"] = table.ok();
    m["files"] = {{"risk.csv", git_blob_hash(csv)}};
    if (!run_info.empty()) m["run"] = run_info;
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << m.dump(2) << '\n';
    if (table.partial) std::ofstream(fs::path(dir) / "PARTIAL") << "interrupted\n";
}

Histogram make_histogram(const Eigen::VectorXd& values, int bins) {
    if (values.size() == 0) throw std::invalid_argument("histogram of an empty vector");
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    const double lo = values.minCoeff(), hi = values.maxCoeff();
    Histogram h;
    if (!(hi > lo)) {
        h.edges = {lo, hi};
        h.counts = {static_cast<int>(values.size())};
        return h;
    }
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
    h.counts.assign(bins, 0);
    for (int i = 0; i < values.size(); ++i) {
        int b = static_cast<int>((values(i) - lo) / (hi - lo) * bins);
        h.counts[std::clamp(b, 0, bins - 1)]++;
    }
    return h;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unit_interval_density(const Eigen::VectorXd& draws,
                                                                   int points) {
    if (draws.size() == 0) throw std::invalid_argument("density of an empty sample");
    if (points < 2) throw std::invalid_argument("density grid needs at least two points");
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, 0.0, 1.0);
    const double n = static_cast<double>(draws.size());
    const double mean = draws.mean();
    const double sd = n > 1 ? std::sqrt((draws.array() - mean).square().sum() / (n - 1.0)) : 0.0;
    const double h = std::max(1.06 * sd * std::pow(n, -0.2), 2.0 / (points - 1));
    Eigen::VectorXd dens = Eigen::VectorXd::Zero(points);
    for (int g = 0; g < points; ++g) {
        double s = 0.0;
        for (int i = 0; i < draws.size(); ++i) {
            const double x = draws(i);
            for (double c : {x, -x, 2.0 - x}) {
                const double z = (grid(g) - c) / h;
                s += std::exp(-0.5 * z * z);
            }
        }
        dens(g) = s;
    }
    const double dx = 1.0 / (points - 1);
    const double area = dx * (dens.sum() - 0.5 * (dens(0) + dens(points - 1)));
    if (area > 0.0) dens /= area;
    return {grid, dens};
}

HistogramExport histogram_export(const ChainOutput& chain, PointRule rule, double threshold,
                                 int bins) {
    HistogramExport out;
    out.estimates = point_estimates(chain, rule, threshold);
    for (const auto& [name, est] : out.estimates) out.histograms[name] = make_histogram(est, bins);
    for (const char* q : {"q_alpha", "q_rho", "q_sigma", "q_sigma_u", "q_sigma_eps"}) {
        if (!chain.has_common(q)) continue;
        auto [grid, dens] = unit_interval_density(chain.common_column(q));
        out.grid = grid;
        out.q_density[q] = dens;
    }
    return out;
}

void write_histogram_export(const HistogramExport& h, const std::vector<std::string>& unit_ids,
                            const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "estimates.csv");
        out << "unit";
        for (const auto& [name, v] : h.estimates) out << ',' << name;
        out << '\n';
        for (std::size_t i = 0; i < unit_ids.size(); ++i) {
            out << unit_ids[i];
            for (const auto& [name, v] : h.estimates) out << ',' << format_double(v(i));
            out << '\n';
        }
    }
    {
        std::ofstream out(fs::path(dir) / "histogram.csv");
        out << "parameter,bin_lo,bin_hi,count\n";
        for (const auto& [name, hist] : h.histograms)
            for (std::size_t b = 0; b < hist.counts.size(); ++b)
                out << name << ',' << format_double(hist.edges[b]) << ','
                    << format_double(hist.edges[b + 1]) << ',' << hist.counts[b] << '\n';
    }
    {
        std::ofstream out(fs::path(dir) / "q_density.csv");
        out << "q";
        for (const auto& [name, d] : h.q_density) out << ',' << name;
        out << '\n';
        for (int g = 0; g < h.grid.size(); ++g) {
            out << format_double(h.grid(g));
            for (const auto& [name, d] : h.q_density) out << ',' << format_double(d(g));
            out << '\n';
        }
    }
}

}  // namespace sparsepanel
