#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/mc_harness.hpp"
#include "stat_checks.hpp"

using namespace sparsepanel;
namespace fs = std::filesystem;

namespace {
MCDesign tiny_design() {
    MCDesign d;
    d.q_grid = {0.0, 0.4};
    d.v_grid = {0.5};
    d.N = 30;
    d.T = 5;
    d.n_sim = 2;
    d.n_draws = 150;
    d.burn_in = 50;
    return d;
}
}  // namespace

TEST(MCHarness, ReplicationsAreDeterministicAcrossPolicies) {
    const MCDesign d = tiny_design();
    MCRunOptions serial;
    serial.exec = Exec::serial();
    MCRunOptions omp;
    omp.exec = Exec::openmp(3);
    const RiskTable a = run_experiment(d, 42, serial);
    const RiskTable b = run_experiment(d, 42, omp);
    EXPECT_EQ(format_risk_table(a), format_risk_table(b));
    EXPECT_EQ(a.attempted, 2 * 2 * 4);
    EXPECT_EQ(a.failed, 0);
    EXPECT_EQ(mc_replication_panel(d, 0.4, 0.5, 42, 1, 1).data.y,
              mc_replication_panel(d, 0.4, 0.5, 42, 1, 1).data.y);
    EXPECT_NE(mc_replication_panel(d, 0.4, 0.5, 42, 1, 0).data.y,
              mc_replication_panel(d, 0.4, 0.5, 42, 1, 1).data.y);
}

TEST(MCHarness, OracleRiskIsZeroWithoutHeterogeneity) {
    MCDesign d = tiny_design();
    d.q_grid = {0.0};
    d.n_sim = 1;
    d.theta.sigma2 = 1e-10;
    d.estimators = {Estimator::oracle};
    const RiskTable t = run_experiment(d, 1);
    EXPECT_EQ(t.find(0.0, 0.5, Estimator::oracle, "alpha").risk, 0.0);
    EXPECT_EQ(t.find(0.0, 0.5, Estimator::oracle, "rho").risk, 0.0);
}

TEST(MCHarness, StopFlagLeavesAPartialTable) {
    std::atomic<bool> stop{true};
    MCRunOptions o;
    o.stop = &stop;
    const RiskTable t = run_experiment(tiny_design(), 3, o);
    EXPECT_TRUE(t.partial);
    EXPECT_EQ(t.attempted, 0);
}

TEST(MCHarness, RiskTableManifestHashesTheCsv) {
    const MCDesign d = tiny_design();
    const RiskTable t = run_experiment(d, 5);
    const fs::path dir = fs::temp_directory_path() / "sparsepanel_mc_test";
    fs::remove_all(dir);
    write_risk_table(t, d, 5, dir.string());
    std::ifstream csv(dir / "risk.csv");
    std::stringstream ss;
    ss << csv.rdbuf();
    const auto m = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
    EXPECT_EQ(m["files"]["risk.csv"], git_blob_hash(ss.str()));
    EXPECT_EQ(m["seed"], 5);
    EXPECT_EQ(MCDesign::from_json(m["design"]).to_json(), d.to_json());
    EXPECT_FALSE(fs::exists(dir / "PARTIAL"));
    fs::remove_all(dir);
}

TEST(MCHarness, GitBlobHashMatchesGit) {
    // `printf 'hello\n' | git hash-object --stdin`
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(MCHarness, DesignValidationCollectsErrors) {
    MCDesign d;
    d.n_sim = 0;
    d.q_grid = {1.5};
    try {
        d.validate();
        FAIL();
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("n_sim"), std::string::npos);
        EXPECT_NE(msg.find("q_grid"), std::string::npos);
    }
}

TEST(Histogram, ConstantValuesFallInOneBin) {
    const Histogram h = make_histogram(Eigen::VectorXd::Constant(50, 0.6));
    ASSERT_EQ(h.counts.size(), 1u);
    EXPECT_EQ(h.counts[0], 50);
}

TEST(Histogram, CountsCoverEveryValue) {
    const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(101, -1.0, 1.0);
    const Histogram h = make_histogram(v, 10);
    int total = 0;
    for (int c : h.counts) total += c;
    EXPECT_EQ(total, 101);
    EXPECT_EQ(h.edges.front(), -1.0);
    EXPECT_EQ(h.edges.back(), 1.0);
}

TEST(Histogram, UnitIntervalDensityIntegratesToOne) {
    sparsepanel::RngStream rng(1, 0);
    for (double a : {0.3, 2.0, 20.0}) {
        Eigen::VectorXd x(4000);
        for (auto& v : x) v = sample_beta({a, 80.0 - a > 0 ? 80.0 - a : 1.0}, rng);
        const auto [grid, dens] = unit_interval_density(x);
        double integral = 0.0;
        for (int i = 1; i < grid.size(); ++i) integral += 0.5 * (dens(i) + dens(i - 1)) * (grid(i) - grid(i - 1));
        EXPECT_NEAR(integral, 1.0, 1e-3) << a;
        EXPECT_GE(dens.minCoeff(), 0.0);
    }
    sparsepanel::RngStream rng2(2, 0);
    Eigen::VectorXd x(4000);
    for (auto& v : x) v = sample_beta({20.0, 80.0}, rng2);
    const auto [grid, dens] = unit_interval_density(x);
    Eigen::Index arg;
    dens.maxCoeff(&arg);
    EXPECT_NEAR(grid(arg), 0.2, 0.03);
}

TEST(Histogram, SparseHeterogeneityPilesEstimatesAtTheCommonValue) {
    const MCDesign d;
    const CommonState th = d.cell_theta(0.2, 0.5);
    const auto sim = simulate_m1(th, 200, 8, 77);
    M1Config c;
    c.n_draws = 2000;
    c.burn_in = 1000;
    c.seed = 4;
    const ChainOutput ch = run_m1(sim.data, c);
    const HistogramExport h = histogram_export(ch);
    const Histogram& ha = h.histograms.at("alpha");
    const auto top = std::max_element(ha.counts.begin(), ha.counts.end()) - ha.counts.begin();
    EXPECT_LE(ha.edges[top], th.alpha(0) + 0.1);
    EXPECT_GE(ha.edges[top + 1], th.alpha(0) - 0.1);
    EXPECT_GT(ha.counts[top], 100);
    ASSERT_TRUE(h.q_density.count("q_alpha"));
    Eigen::Index arg;
    h.q_density.at("q_alpha").maxCoeff(&arg);
    EXPECT_LT(h.grid(arg), 0.45);
}
