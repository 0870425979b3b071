#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace sparsepanel {

// Retained draws of one chain. Common parameters are columns of `common`;
// unit-level fields are draws x N matrices keyed by name (z_alpha, delta_rho, ...).
struct ChainOutput {
    std::string model;
    std::string variant;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();

    std::vector<std::string> common_names;
    Eigen::MatrixXd common;

    std::vector<std::string> unit_ids;
    std::map<std::string, Eigen::MatrixXd> unit;

    nlohmann::json diagnostics = nlohmann::json::object();

    int n_draws() const { return static_cast<int>(common.rows()); }
    int n_units() const { return static_cast<int>(unit_ids.size()); }
    bool has_common(const std::string& name) const;
    int common_index(const std::string& name) const;
    Eigen::VectorXd common_column(const std::string& name) const;
    bool has_unit(const std::string& name) const { return unit.count(name) > 0; }
    const Eigen::MatrixXd& unit_field(const std::string& name) const;
};

double quantile_sorted(const std::vector<double>& sorted, double p);
std::pair<double, double> equal_tail_interval(const Eigen::VectorXd& draws, double level = 0.9);
// Shortest interval covering ceil(level * n) sorted draws.
std::pair<double, double> hpd_interval(const Eigen::VectorXd& draws, double level = 0.9);

struct Summary {
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double eq_lo = 0.0, eq_hi = 0.0;
    double hpd_lo = 0.0, hpd_hi = 0.0;
};

Summary summarize(const Eigen::VectorXd& draws, double level = 0.9);
// One row per common parameter.
std::map<std::string, Summary> summarize_common(const ChainOutput& chain, double level = 0.9);

enum class PointRule { mean, median, median_spike_adjust };
PointRule parse_point_rule(const std::string& s);

// Unit-level estimates of l + delta_i^l (alpha_j, rho) and sigma2 * delta_i^sigma (M1).
// Keys: "alpha" (M1) or "alpha_j" (M2), "rho", "sigma2" (M1 only).
std::map<std::string, Eigen::VectorXd> point_estimates(const ChainOutput& chain, PointRule rule,
                                                       double spike_threshold = 0.8);

// Posterior P(z_i = 1) per unit for the named indicator field.
Eigen::VectorXd slab_frequency(const ChainOutput& chain, const std::string& z_field);

// Git blob hash (SHA-1 of "blob <size>\0" + content), lower-case hex.
std::string git_blob_hash(const std::string& content);

// Writes common.csv, unit_<field>.csv and manifest.json. `extra` is merged into
// the manifest under "run".
void write_chain(const ChainOutput& chain, const std::string& dir,
                 const nlohmann::json& extra = nlohmann::json::object());
ChainOutput load_chain(const std::string& dir);

}  // namespace sparsepanel
