#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparsepanel/chain_output.hpp"
#include "sparsepanel/forecast_eval.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/m2_sampler.hpp"
#include "sparsepanel/mc_harness.hpp"
#include "sparsepanel/panel_data.hpp"
#include "sparsepanel/run_config.hpp"

#ifndef SPARSEPANEL_VERSION
#define SPARSEPANEL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsepanel;

namespace {

std::atomic<bool> g_stop{false};
extern "C" void on_sigint(int) { g_stop.store(true); }

struct Flags {
    std::string config;
    std::optional<std::string> model, variant, data, out, design, scenario, chain;
    std::optional<int> draws, burnin, thin, threads, nsim;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<int>> horizons;
};

void add_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run configuration; flags override its fields");
    app->add_option("--model", f.model, "m1 or m2");
    app->add_option("--variant", f.variant, "model variant");
    app->add_option("--data", f.data, "panel CSV (unit,time,y[,x...])");
    app->add_option("--draws", f.draws, "total sweeps, burn-in included");
    app->add_option("--burnin", f.burnin, "discarded sweeps");
    app->add_option("--thin", f.thin, "keep every n-th sweep after burn-in");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--threads", f.threads, "worker threads (default: $SPARSEPANEL_THREADS)");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--design", f.design, "Monte Carlo design JSON");
    app->add_option("--nsim", f.nsim, "Monte Carlo replications per cell");
    app->add_option("--horizons", f.horizons, "forecast horizons")->delimiter(',');
    app->add_option("--scenario", f.scenario, "param_unc, no_param_unc, individual or all");
    app->add_option("--chain", f.chain, "chain directory (decompose)");
}

json merged_config(const std::string& command, const Flags& f) {
    json raw = json::object();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw std::runtime_error("cannot read config file " + f.config);
        raw = json::parse(in);
    }
    raw["command"] = command;
    auto set = [&](const char* key, const auto& opt) {
        if (opt) raw[key] = *opt;
    };
    set("model", f.model);
    set("variant", f.variant);
    set("data", f.data);
    set("out", f.out);
    set("design", f.design);
    set("scenario", f.scenario);
    set("chain", f.chain);
    set("draws", f.draws);
    set("burnin", f.burnin);
    set("thin", f.thin);
    set("threads", f.threads);
    set("nsim", f.nsim);
    set("seed", f.seed);
    set("horizons", f.horizons);
    if (!raw.contains("threads")) {
        if (const char* env = std::getenv("SPARSEPANEL_THREADS")) raw["threads"] = std::atoi(env);
    }
    return raw;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json versions() {
    json v = {{"sparsepanel", SPARSEPANEL_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                            "." + std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
#ifdef _OPENMP
    v["openmp"] = _OPENMP;
#endif
    return v;
}

struct RunContext {
    RunConfig cfg;
    Exec exec;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    json run_info() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return {{"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"versions", versions()},
                {"started", utc_now()},
                {"wall_seconds", wall}};
    }
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Manifest for directories not written by write_chain: run info plus file hashes.
void write_manifest(const RunContext& ctx, const fs::path& dir, const json& extra = json::object()) {
    json files = json::object();
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        files[e.path().filename().string()] = git_blob_hash(slurp(e.path()));
    }
    json m = {{"command", ctx.cfg.command}, {"files", files}, {"run", ctx.run_info()}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_simulate(RunContext& ctx, const json& raw) {
    const RunConfig& c = ctx.cfg;
    fs::create_directories(c.out);
    const int k = 2;
    const CommonState theta = theta_from_json(c.model, k, c.T, c.theta);
    SimulatedPanel sim;
    if (c.model == "m1") {
        sim = simulate_m1(theta, c.N, c.T, c.seed, ctx.exec);
    } else {
        // Entry experience 1..20, then one year per period.
        RngStream rng(derive_seed(c.seed, 7), 0);
        Eigen::MatrixXd h(c.N, c.T);
        for (int i = 0; i < c.N; ++i) {
            const double h1 = 1.0 + std::floor(rng.uniform() * 20.0);
            for (int t = 0; t < c.T; ++t) h(i, t) = h1 + t;
        }
        sim = simulate_m2(theta, experience_regressors(h), c.seed, ctx.exec);
    }
    write_panel(sim.data, (fs::path(c.out) / "panel.csv").string());
    std::ofstream truth(fs::path(c.out) / "truth.csv");
    truth << "unit,z_alpha,delta_alpha,z_rho,delta_rho,z_sigma,delta_sigma,z_sigma_u,delta_sigma_u,"
             "z_sigma_eps,delta_sigma_eps\n";
    for (std::size_t i = 0; i < sim.truth.size(); ++i) {
        const UnitState& u = sim.truth[i];
        std::string da;
        for (int j = 0; j < u.delta_alpha.size(); ++j) da += (j ? ";" : "") + format_double(u.delta_alpha(j));
        truth << sim.data.unit_ids[i] << ',' << u.z_alpha << ',' << da << ',' << u.z_rho << ','
              << format_double(u.delta_rho) << ',' << u.z_sigma << ',' << format_double(u.delta_sigma)
              << ',' << u.z_sigma_u << ',' << format_double(u.delta_sigma_u) << ',' << u.z_sigma_eps
              << ',' << format_double(u.delta_sigma_eps) << '\n';
    }
    truth.close();
    write_manifest(ctx, c.out, {{"theta", theta_to_json(theta)}});
    (void)raw;
    std::cout << json{{"command", "simulate"}, {"out", c.out}, {"units", c.N}}.dump() << '\n';
    return 0;
}

ChainOutput estimate_chain(const RunContext& ctx, const PanelData& data) {
    const RunConfig& c = ctx.cfg;
    if (c.model == "m1") {
        M1Config mc;
        mc.variant = parse_m1_variant(c.variant);
        mc.n_draws = c.draws;
        mc.burn_in = c.burnin;
        mc.thin = c.thin;
        mc.hyper = hyper_from_json("m1", 1, c.prior);
        mc.seed = c.seed;
        mc.exec = ctx.exec;
        return run_m1(data, mc);
    }
    M2Config mc;
    mc.variant = parse_m2_variant(c.variant);
    mc.n_draws = c.draws;
    mc.burn_in = c.burnin;
    mc.thin = c.thin;
    mc.hyper = hyper_from_json("m2", data.k(), c.prior);
    mc.seed = c.seed;
    mc.exec = ctx.exec;
    return run_m2(data, mc);
}

int cmd_estimate(RunContext& ctx, const json&) {
    const RunConfig& c = ctx.cfg;
    const PanelData data = load_panel(c.data);
    std::cerr << "estimating " << c.model << "/" << c.variant << " on " << data.n_units() << " units\n";
    const ChainOutput chain = estimate_chain(ctx, data);
    write_chain(chain, c.out, ctx.run_info());
    if (c.model == "m1") {
        const auto h = histogram_export(chain);
        write_histogram_export(h, chain.unit_ids, (fs::path(c.out) / "histogram").string());
    }
    std::cout << json{{"command", "estimate"}, {"out", c.out}, {"draws", chain.n_draws()},
                      {"units", chain.n_units()}}.dump()
              << '\n';
    return 0;
}

int cmd_montecarlo(RunContext& ctx, const json& raw) {
    const RunConfig& c = ctx.cfg;
    MCDesign design;
    if (!c.design.empty()) {
        std::ifstream in(c.design);
        design = MCDesign::from_json(json::parse(in));
    }
    if (c.nsim > 0) design.n_sim = c.nsim;
    if (raw.contains("draws")) design.n_draws = c.draws;
    if (raw.contains("burnin")) design.burn_in = c.burnin;
    if (!c.prior.empty()) design.hyper = hyper_from_json("m1", 1, c.prior);
    design.validate();

    MCRunOptions opts;
    opts.exec = ctx.exec;
    opts.stop = &g_stop;
    opts.progress = [](int done, int total) {
        std::cerr << "\rreplications " << done << "/" << total << std::flush;
    };
    std::signal(SIGINT, on_sigint);
    const RiskTable table = run_experiment(design, c.seed, opts);
    std::cerr << '\n';
    json info = ctx.run_info();
    write_risk_table(table, design, c.seed, c.out, info);
    std::cout << format_risk_table(table);
    if (table.partial) {
        std::cerr << "interrupted: partial results written to " << c.out << '\n';
        return 1;
    }
    if (!table.ok()) {
        std::cerr << "error: " << table.failed << " of " << table.attempted
                  << " replications failed (limit 5%)\n";
        return 1;
    }
    return 0;
}

int cmd_forecast(RunContext& ctx, const json&) {
    const RunConfig& c = ctx.cfg;
    const PanelData full = load_panel(c.data);
    const int T_est = full.n_periods() - c.holdout;
    if (T_est < 3) throw DomainError("forecast: fewer than three estimation periods after the holdout");
    const PanelData est = full.select_columns(0, T_est);
    fs::create_directories(c.out);

    std::vector<Scenario> scenarios;
    if (c.scenario == "all") scenarios = {Scenario::param_unc, Scenario::no_param_unc, Scenario::individual};
    else scenarios = {parse_scenario(c.scenario)};

    std::optional<ChainOutput> chain;
    auto need_chain = [&]() -> const ChainOutput& {
        if (!chain) {
            std::cerr << "estimating m2/" << c.variant << " on " << est.n_units() << " units\n";
            chain = estimate_chain(ctx, est);
            write_chain(*chain, (fs::path(c.out) / "chain").string(), ctx.run_info());
        }
        return *chain;
    };

    std::map<std::string, PredictiveDraws> preds;
    for (Scenario s : scenarios) {
        std::cerr << "predicting " << to_string(s) << '\n';
        if (s == Scenario::individual) {
            IndividualConfig ic;
            ic.n_draws = c.draws;
            ic.burn_in = c.burnin;
            ic.thin = c.thin;
            ic.seed = c.seed;
            ic.prior = IndividualPrior::defaults(est.k());
            preds[to_string(s)] = predict_individual(est, c.horizons, ic, c.seed, ctx.exec);
        } else {
            const HyperParams h = hyper_from_json("m2", est.k(), c.prior);
            FutureVariance fv;
            fv.mode = parse_future_variance(c.future_variance);
            fv.sigma2_u = h.sigma2_u;
            fv.sigma2_eps = h.sigma2_eps;
            preds[to_string(s)] = predict(need_chain(), est, c.horizons, s, c.seed, ctx.exec, fv);
        }
        write_fan_chart(preds[to_string(s)], (fs::path(c.out) / ("fan_chart_" + to_string(s) + ".csv")).string());
    }

    json summary = {{"command", "forecast"}, {"out", c.out}};
    if (c.holdout >= 1 && std::count(c.horizons.begin(), c.horizons.end(), 1)) {
        Eigen::VectorXd realized(est.n_units());
        for (int i = 0; i < est.n_units(); ++i) realized(i) = full.y(i, T_est);
        std::map<std::string, ScoreReport> reports;
        for (const auto& [name, p] : preds) {
            reports[name] = score(p, realized, 1);
            summary["mse"][name] = reports[name].mse;
            summary["lps"][name] = reports[name].lps;
            if (!reports[name].zero_density_units.empty())
                summary["zero_density_units"][name] = reports[name].zero_density_units;
        }
        write_scores(reports, preds.count("param_unc") ? "param_unc" : preds.begin()->first,
                     (fs::path(c.out) / "scores.csv").string());
    }
    if (preds.count("param_unc")) {
        const Eigen::VectorXd p_core = core_probability(need_chain());
        std::ofstream out(fs::path(c.out) / "width_ratios.csv");
        out << "horizon,numerator,unit,ratio,p_core\n";
        for (const auto& [name, p] : preds) {
            if (name == "param_unc") continue;
            for (int h : c.horizons) {
                const WidthRatios w = interval_width_ratios(p, preds.at("param_unc"), h, p_core);
                for (int i = 0; i < w.ratio.size(); ++i)
                    out << h << ',' << name << ',' << p.unit_ids[i] << ',' << format_double(w.ratio(i))
                        << ',' << format_double(p_core(i)) << '\n';
                summary["width_ratio"][name][std::to_string(h)] = {
                    {"all", w.mean_all}, {"core", w.mean_core}, {"deviator", w.mean_deviator}};
            }
        }
    }
    write_manifest(ctx, c.out);
    std::cout << summary.dump() << '\n';
    return 0;
}

int cmd_decompose(RunContext& ctx, const json& raw) {
    const RunConfig& c = ctx.cfg;
    DecompositionOptions opts;
    opts.N = raw.contains("N") ? c.N : 10000;
    opts.T = raw.contains("T") ? c.T : 20;
    opts.seed = c.seed;
    CommonState theta;
    if (!c.chain.empty()) theta = posterior_mean_common(load_chain(c.chain));
    else theta = theta_from_json("m2", 2, opts.T, c.theta);
    const DecompositionResult d = inequality_decomposition(theta, opts);
    fs::create_directories(c.out);
    write_decomposition(d, (fs::path(c.out) / "decomposition.csv").string());
    write_manifest(ctx, c.out, {{"theta", theta_to_json(theta)}});
    std::cout << json{{"command", "decompose"}, {"out", c.out}, {"periods", opts.T}}.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spike-and-slab Bayesian estimation for dynamic panel data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SPARSEPANEL_VERSION);
    Flags flags;
    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const char* name : {"simulate", "estimate", "montecarlo", "forecast", "decompose"}) {
        CLI::App* sub = app.add_subcommand(name);
        add_flags(sub, flags);
        subs.emplace_back(name, sub);
    }
    subs[0].second->description("simulate a panel from a model (writes panel.csv and truth.csv)");
    subs[1].second->description("run the Gibbs sampler and write the chain");
    subs[2].second->description("Monte Carlo compound-risk experiment");
    subs[3].second->description("fit M2, predict held-out periods and score the forecasts");
    subs[4].second->description("cohort inequality decomposition");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        const json raw = merged_config(command, flags);
        const ConfigCheck check = validate_config(raw);
        for (const auto& w : check.warnings) std::cerr << "warning: " << w << '\n';
        if (!check.ok()) {
            std::cerr << "invalid configuration:\n";
            for (const auto& e : check.errors) std::cerr << "  " << e << '\n';
            return 2;
        }
        RunContext ctx;
        ctx.cfg = check.config;
        ctx.exec = Exec::openmp(ctx.cfg.threads);
        if (command == "simulate") return cmd_simulate(ctx, raw);
        if (command == "estimate") return cmd_estimate(ctx, raw);
        if (command == "montecarlo") return cmd_montecarlo(ctx, raw);
        if (command == "forecast") return cmd_forecast(ctx, raw);
        return cmd_decompose(ctx, raw);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
