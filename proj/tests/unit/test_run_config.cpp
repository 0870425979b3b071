#include <gtest/gtest.h>

#include <algorithm>

#include "sparsepanel/run_config.hpp"

using namespace sparsepanel;
using nlohmann::json;

namespace {
bool mentions(const std::vector<std::string>& v, const std::string& s) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& e) { return e.find(s) != std::string::npos; });
}
}  // namespace

TEST(RunConfig, CollectsEveryError) {
    const ConfigCheck c = validate_config(
        json{{"command", "estimate"}, {"draws", -1}, {"thin", 0}, {"bogus", 1}, {"model", "m3"}});
    EXPECT_FALSE(c.ok());
    EXPECT_TRUE(mentions(c.errors, "draws"));
    EXPECT_TRUE(mentions(c.errors, "thin"));
    EXPECT_TRUE(mentions(c.errors, "bogus"));
    EXPECT_TRUE(mentions(c.errors, "model"));
    EXPECT_TRUE(mentions(c.errors, "seed"));
    EXPECT_TRUE(mentions(c.errors, "data"));
}

TEST(RunConfig, BurninNotBelowDrawsNamesBothFields) {
    const ConfigCheck c =
        validate_config(json{{"command", "simulate"}, {"seed", 1}, {"draws", 100}, {"burnin", 100}});
    ASSERT_FALSE(c.ok());
    EXPECT_TRUE(mentions(c.errors, "burnin, draws"));
}

TEST(RunConfig, TypeErrorsAreReported) {
    const ConfigCheck c = validate_config(json{{"command", "simulate"}, {"seed", "abc"}, {"N", 2.5}});
    EXPECT_TRUE(mentions(c.errors, "seed"));
    EXPECT_TRUE(mentions(c.errors, "N"));
}

TEST(RunConfig, WarnsWhenRestrictionOverridesThePrior) {
    const ConfigCheck c = validate_config(json{{"command", "simulate"},
                                               {"seed", 1},
                                               {"model", "m2"},
                                               {"variant", "rip"},
                                               {"prior", {{"q", {{"a", 2}, {"b", 3}}}}}});
    EXPECT_TRUE(c.ok());
    EXPECT_TRUE(mentions(c.warnings, "prior.q"));
    const ConfigCheck none =
        validate_config(json{{"command", "simulate"}, {"seed", 1}, {"model", "m2"}, {"variant", "rip"}});
    EXPECT_TRUE(none.warnings.empty());
}

TEST(RunConfig, EmptySimulateConfigEchoesDefaults) {
    const ConfigCheck c = validate_config(json{{"command", "simulate"}});
    EXPECT_EQ(c.errors, std::vector<std::string>{"seed: required"});
    const json echo = c.config.to_json();
    EXPECT_EQ(echo["model"], "m1");
    EXPECT_EQ(echo["variant"], "ss_homosk");
    EXPECT_EQ(echo["draws"], 5000);
    EXPECT_EQ(echo["burnin"], 2500);
    EXPECT_EQ(echo["thin"], 1);
    EXPECT_EQ(echo["N"], 100);
    const ConfigCheck m2 = validate_config(json{{"command", "simulate"}, {"seed", 4}, {"model", "m2"}});
    EXPECT_TRUE(m2.ok());
    EXPECT_EQ(m2.config.variant, "baseline");
}

TEST(RunConfig, CommandModelCompatibility) {
    EXPECT_TRUE(mentions(validate_config(json{{"command", "montecarlo"}, {"seed", 1}, {"model", "m2"}}).errors,
                         "model"));
    EXPECT_TRUE(mentions(
        validate_config(json{{"command", "decompose"}, {"seed", 1}, {"model", "m1"}}).errors, "model"));
}

TEST(RunConfig, ForecastDefaultsToTheStateSpaceModel) {
    const ConfigCheck c = validate_config(json{{"command", "forecast"}, {"seed", 1}, {"data", "p.csv"}});
    EXPECT_EQ(c.config.model, "m2");
    EXPECT_EQ(validate_config(json{{"command", "estimate"}, {"seed", 1}}).config.model, "m1");
}

TEST(RunConfig, HyperparameterOverrides) {
    const HyperParams h = hyper_from_json(
        "m2", 2, json{{"v_rho", 0.5}, {"q", {{"a", 2.0}, {"b", 8.0}}}, {"sigma2_u", {{"nu", 7.0}, {"tau", 0.3}}}});
    EXPECT_EQ(h.v_rho, 0.5);
    EXPECT_EQ(h.q_prior.a, 2.0);
    EXPECT_EQ(h.q_prior.b, 8.0);
    EXPECT_EQ(h.sigma2_u.nu, 7.0);
    EXPECT_EQ(h.mu_rho, HyperParams::m2_default(2).mu_rho);
}

TEST(RunConfig, ThetaRoundTrip) {
    const CommonState a = theta_from_json("m2", 2, 6, json{{"rho", 0.9}});
    EXPECT_EQ(a.rho, 0.9);
    EXPECT_EQ(a.sigma2_u.size(), 6);
    const CommonState b = theta_from_json("m2", 2, 6, theta_to_json(a));
    EXPECT_EQ(theta_to_json(a), theta_to_json(b));
}

TEST(RunConfig, FutureVarianceMode) {
    EXPECT_TRUE(mentions(validate_config(json{{"command", "forecast"}, {"seed", 1}, {"data", "p.csv"},
                                              {"future_variance", "rw"}})
                             .errors,
                         "future_variance"));
}
