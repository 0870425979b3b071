#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsepanel/model_types.hpp"
#include "sparsepanel/parallel.hpp"

namespace sparsepanel {

struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptySampleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wide panel: unit i, column t. Missing y is NaN with observed(i, t) == false.
struct PanelData {
    std::vector<std::string> unit_ids;
    std::vector<long> times;
    Eigen::MatrixXd y;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
    // One N x n_periods matrix per regressor.
    std::vector<Eigen::MatrixXd> x;
    std::vector<std::string> x_names;

    int n_units() const { return static_cast<int>(unit_ids.size()); }
    int n_periods() const { return static_cast<int>(times.size()); }
    int k() const { return static_cast<int>(x.size()); }
    bool is_observed(int i, int t) const { return observed(i, t); }
    Eigen::VectorXd x_row(int i, int t) const;
    bool balanced() const { return observed.all(); }

    // First and last observed column of a unit, or (-1, -1).
    std::pair<int, int> span(int i) const;
    // Longest run of consecutive observed columns.
    int longest_run(int i) const;
    int count_observed(int i) const;

    PanelData select_units(const std::vector<int>& rows) const;
    PanelData select_columns(int first, int count) const;
    void validate() const;
};

PanelData make_panel(std::vector<std::string> unit_ids, std::vector<long> times, Eigen::MatrixXd y,
                     std::vector<Eigen::MatrixXd> x = {}, std::vector<std::string> x_names = {});

struct PanelSchema {
    std::string unit_col = "unit";
    std::string time_col = "time";
    std::string y_col = "y";
    // Empty: every remaining column is a regressor, in file order.
    std::vector<std::string> x_cols;
};

PanelData load_panel(const std::string& path, const PanelSchema& schema = {});
PanelData parse_panel(const std::string& text, const PanelSchema& schema = {});
void write_panel(const PanelData& data, const std::string& path);
std::string format_panel(const PanelData& data);
// %.17g: shortest form that round-trips every double.
std::string format_double(double v);

struct SampleSpec {
    enum class Kind { balanced, unbalanced };
    Kind kind = Kind::balanced;
    int T = 0;                 // balanced: T + 1 periods ending at last_period
    long last_period = 0;      // balanced
    int min_consecutive = 2;   // unbalanced
    int holdout_periods = 0;

    static SampleSpec balanced(int T, long last_period, int holdout = 0);
    static SampleSpec unbalanced(int min_consecutive, int holdout = 0);
};

struct EstimationSample {
    PanelData estimation;
    PanelData holdout;
};

EstimationSample make_estimation_sample(const PanelData& data, const SampleSpec& spec);

struct ResidualizeResult {
    PanelData data;
    int rank = 0;
    std::vector<std::string> warnings;
};

// Pooled OLS of y on the dummy matrix. Rows of `dummies` follow the stacked
// observed cells in (unit, column) order.
ResidualizeResult residualize(const PanelData& data, const Eigen::MatrixXd& dummies);
// Identity-coded period dummies for the observed cells.
Eigen::MatrixXd period_dummies(const PanelData& data);

struct SimulatedPanel {
    PanelData data;
    std::vector<UnitState> truth;
};

// Draw unit deviations from the spike-and-slab priors given theta.
UnitState draw_m1_unit(const CommonState& theta, RngStream& rng);
UnitState draw_m2_unit(const CommonState& theta, RngStream& rng);

// M1: y_i0 = 0, columns t = 0..T. Unit i uses stream (seed, i).
SimulatedPanel simulate_m1(const CommonState& theta, int N, int T, std::uint64_t seed,
                           const Exec& exec = Exec::serial());
// y | parameters for given unit draws (used by the joint-distribution tests).
PanelData simulate_m1_given(const CommonState& theta, const std::vector<UnitState>& units, int T,
                            std::vector<RngStream>& rngs, const Exec& exec = Exec::serial());

// M2 with regressors x (k matrices, N x T); columns t = 1..T.
SimulatedPanel simulate_m2(const CommonState& theta, const std::vector<Eigen::MatrixXd>& x,
                           std::uint64_t seed, const Exec& exec = Exec::serial());
// Draws states and y given the unit draws (s(0) must be set).
PanelData simulate_m2_given(const CommonState& theta, std::vector<UnitState>& units,
                            const std::vector<Eigen::MatrixXd>& x, std::vector<RngStream>& rngs,
                            const Exec& exec = Exec::serial());

// x_it = [1, h_it / 10].
std::vector<Eigen::MatrixXd> experience_regressors(const Eigen::MatrixXd& experience);

}  // namespace sparsepanel
