#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsepanel/chain_output.hpp"
#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/model_types.hpp"
#include "sparsepanel/parallel.hpp"

namespace sparsepanel {

enum class MCModel { m1_homosk, m1_hetsk };
enum class Estimator { ss, q0, q1, oracle, ss_homosk_misspec };

std::string to_string(MCModel m);
std::string to_string(Estimator e);
MCModel parse_mc_model(const std::string& s);
Estimator parse_estimator(const std::string& s);

// Sampler variant (and oracle flag) behind an estimator for a given design.
M1Variant estimator_variant(MCModel model, Estimator e);

struct MCDesign {
    MCModel model = MCModel::m1_homosk;
    // Truth; q_alpha = q_rho (= q_sigma when heteroskedastic) = q and
    // v_delta_alpha = v are overwritten per grid cell.
    CommonState theta = base_theta();
    std::vector<double> q_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> v_grid{0.05, 0.5, 1.0};
    int N = 500;
    int T = 8;
    int n_sim = 100;
    std::vector<Estimator> estimators{Estimator::ss, Estimator::q0, Estimator::q1, Estimator::oracle};
    int n_draws = 5000;
    int burn_in = 2500;
    HyperParams hyper = HyperParams::m1_default();

    static CommonState base_theta();
    CommonState cell_theta(double q, double v) const;
    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults.
    static MCDesign from_json(const nlohmann::json& j);
};

struct RiskCell {
    double q = 0.0;
    double v = 0.0;
    Estimator estimator = Estimator::ss;
    std::string target;  // "alpha" or "rho"
    double risk = 0.0;
    double se = 0.0;  // Monte Carlo standard error
    int replications = 0;
};

struct RiskTable {
    std::vector<RiskCell> cells;
    int failed = 0;     // (replication, estimator) pairs excluded
    int attempted = 0;
    bool partial = false;
    bool ok() const { return attempted == 0 || failed <= 0.05 * attempted; }
    const RiskCell& find(double q, double v, Estimator e, const std::string& target) const;
};

struct MCRunOptions {
    Exec exec = Exec::openmp();
    // Checked before each job; a set flag leaves the remaining jobs undone.
    const std::atomic<bool>* stop = nullptr;
    std::function<void(int done, int total)> progress;
};

RiskTable run_experiment(const MCDesign& design, std::uint64_t seed, const MCRunOptions& opts = {});

// Replication r of cell c: the simulated panel with its truth.
SimulatedPanel mc_replication_panel(const MCDesign& design, double q, double v, std::uint64_t seed,
                                    int cell, int rep);

// Posterior means of alpha_i and rho_i with every common parameter at `truth`.
std::map<std::string, Eigen::VectorXd> oracle_estimator(const PanelData& data,
                                                         const CommonState& truth, M1Variant variant,
                                                         int n_draws, int burn_in,
                                                         std::uint64_t seed);

// Rows v x estimator x target, one column per q: value and stderr.
std::string format_risk_table(const RiskTable& table);
void write_risk_table(const RiskTable& table, const MCDesign& design, std::uint64_t seed,
                      const std::string& dir, const nlohmann::json& run_info = nlohmann::json::object());

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<int> counts;
};

// Equal-width bins over [min, max]; a zero range gives one bin.
Histogram make_histogram(const Eigen::VectorXd& values, int bins = 30);
// Gaussian kernel density on `points` grid nodes over [0, 1] with reflection at
// both ends, normalised to integrate to one by the trapezoid rule.
std::pair<Eigen::VectorXd, Eigen::VectorXd> unit_interval_density(const Eigen::VectorXd& draws,
                                                                   int points = 512);

struct HistogramExport {
    std::map<std::string, Eigen::VectorXd> estimates;
    std::map<std::string, Histogram> histograms;
    Eigen::VectorXd grid;
    std::map<std::string, Eigen::VectorXd> q_density;
};

HistogramExport histogram_export(const ChainOutput& chain,
                                 PointRule rule = PointRule::median_spike_adjust,
                                 double threshold = 0.8, int bins = 30);
void write_histogram_export(const HistogramExport& h, const std::vector<std::string>& unit_ids,
                            const std::string& dir);

}  // namespace sparsepanel
