#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "sparsepanel/mc_harness.hpp"
#include "sparsepanel/panel_data.hpp"

using namespace sparsepanel;

namespace {
const char* kCsv =
    "unit,time,y,exp\n"
    "b,2001,0.5,1\n"
    "a,2000,1.25,3\n"
    "a,2001,-0.75,4\n"
    "b,2003,2,3\n"
    "a,2002,,5\n";
}

TEST(PanelData, ParsesLongFormatIntoWideArrays) {
    const PanelData d = parse_panel(kCsv);
    ASSERT_EQ(d.n_units(), 2);
    EXPECT_EQ(d.unit_ids[0], "a");
    EXPECT_EQ(d.times, (std::vector<long>{2000, 2001, 2002, 2003}));
    EXPECT_EQ(d.y(0, 1), -0.75);
    EXPECT_FALSE(d.is_observed(0, 2));
    EXPECT_EQ(d.x[0](0, 2), 5.0);  // regressor kept where y is missing
    EXPECT_EQ(d.span(1), std::make_pair(1, 3));
    EXPECT_EQ(d.longest_run(0), 2);
    EXPECT_EQ(d.count_observed(1), 2);
    EXPECT_FALSE(d.balanced());
}

TEST(PanelData, RoundTripsThroughCsvExactly) {
    const auto sim = simulate_m1(MCDesign{}.cell_theta(0.4, 0.5), 7, 4, 9);
    const PanelData back = parse_panel(format_panel(sim.data));
    EXPECT_EQ(back.unit_ids, sim.data.unit_ids);
    EXPECT_EQ(back.y, sim.data.y);
    const auto path = std::filesystem::temp_directory_path() / "sparsepanel_roundtrip.csv";
    write_panel(sim.data, path.string());
    EXPECT_EQ(load_panel(path.string()).y, sim.data.y);
    std::filesystem::remove(path);
}

TEST(PanelData, IngestionErrorsNameTheProblem) {
    EXPECT_THROW(parse_panel(""), IngestionError);
    EXPECT_THROW(parse_panel("unit,y\nx,1\n"), IngestionError);
    EXPECT_THROW(parse_panel("unit,time,y\na,1,2\na,1,3\n"), IngestionError);
    EXPECT_THROW(parse_panel("unit,time,y\na,x,2\n"), IngestionError);
    try {
        parse_panel("unit,time,y\na,1,abc\n");
        FAIL();
    } catch (const IngestionError& e) {
        EXPECT_NE(std::string(e.what()).find("abc"), std::string::npos);
    }
    EXPECT_THROW(load_panel("/nonexistent/panel.csv"), IngestionError);
}

TEST(PanelData, BalancedSampleKeepsCompleteUnitsOnly) {
    const PanelData d = parse_panel(
        "unit,time,y\n"
        "a,1,1\na,2,2\na,3,3\n"
        "b,1,1\nb,3,3\n"
        "c,1,4\nc,2,5\nc,3,6\n");
    const auto s = make_estimation_sample(d, SampleSpec::balanced(2, 3, 1));
    EXPECT_EQ(s.estimation.unit_ids, (std::vector<std::string>{"a", "c"}));
    EXPECT_EQ(s.estimation.n_periods(), 2);
    EXPECT_EQ(s.holdout.n_periods(), 1);
    EXPECT_EQ(s.holdout.y(1, 0), 6.0);
    EXPECT_THROW(make_estimation_sample(d, SampleSpec::balanced(5, 3)), EmptySampleError);
}

TEST(PanelData, UnbalancedSampleFiltersShortRuns) {
    const PanelData d = parse_panel(
        "unit,time,y\n"
        "a,1,1\na,3,3\n"
        "b,2,1\nb,3,3\nb,4,3\n");
    const auto s = make_estimation_sample(d, SampleSpec::unbalanced(2));
    EXPECT_EQ(s.estimation.unit_ids, (std::vector<std::string>{"b"}));
    EXPECT_THROW(make_estimation_sample(parse_panel("unit,time,y\na,1,1\na,3,3\nb,2,7\n"), SampleSpec::unbalanced(2)),
                 EmptySampleError);
}

TEST(PanelData, ResidualizeRemovesPeriodMeans) {
    const PanelData d = parse_panel("unit,time,y\na,1,1\na,2,5\nb,1,3\nb,2,9\nc,2,1\n");
    const auto r = residualize(d, period_dummies(d));
    EXPECT_EQ(r.rank, 2);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_NEAR(r.data.y(0, 0), -1.0, 1e-12);
    EXPECT_NEAR(r.data.y(1, 1), 4.0, 1e-12);
    EXPECT_NEAR(r.data.y(2, 1), -4.0, 1e-12);
    Eigen::MatrixXd dup(5, 3);
    dup << period_dummies(d), period_dummies(d).col(0);
    EXPECT_FALSE(residualize(d, dup).warnings.empty());
    EXPECT_THROW(residualize(d, Eigen::MatrixXd::Ones(4, 1)), DomainError);
}

TEST(PanelData, SimulationIsDeterministicAcrossExecutionPolicies) {
    const CommonState th = MCDesign{}.cell_theta(0.4, 0.5);
    const auto a = simulate_m1(th, 50, 8, 3, Exec::serial());
    const auto b = simulate_m1(th, 50, 8, 3, Exec::openmp(3));
    EXPECT_EQ(a.data.y, b.data.y);
    EXPECT_EQ(a.data.y.col(0).cwiseAbs().sum(), 0.0);  // y_i0 = 0
    EXPECT_EQ(a.data.n_periods(), 9);
}

TEST(PanelData, ExperienceRegressors) {
    Eigen::MatrixXd h(1, 2);
    h << 5, 6;
    const auto x = experience_regressors(h);
    ASSERT_EQ(x.size(), 2u);
    EXPECT_EQ(x[0](0, 1), 1.0);
    EXPECT_DOUBLE_EQ(x[1](0, 1), 0.6);
}
