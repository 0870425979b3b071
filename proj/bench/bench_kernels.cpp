#include <benchmark/benchmark.h>

#include "sparsepanel/m1_sampler.hpp"
#include "sparsepanel/m2_sampler.hpp"
#include "sparsepanel/mc_harness.hpp"
#include "sparsepanel/panel_data.hpp"

using namespace sparsepanel;

namespace {

Exec exec_for(int mode) { return mode == 0 ? Exec::serial() : Exec::openmp(); }

PanelData m1_panel(int N) {
    return simulate_m1(MCDesign{}.cell_theta(0.4, 0.5), N, 8, 11).data;
}

PanelData m2_panel(int N, int T) {
    CommonState theta;
    theta.alpha = Eigen::Vector2d(0.0, 0.2);
    theta.rho = 0.8;
    theta.sigma2_u = Eigen::VectorXd::Constant(T, 0.05);
    theta.sigma2_eps = Eigen::VectorXd::Constant(T, 0.05);
    theta.q_alpha = 0.3;
    theta.q_rho = 0.0;
    theta.v_delta_alpha = Eigen::Vector2d(0.24, 0.048).asDiagonal();
    theta.v_delta_rho = 0.25;
    theta.v_delta_sigma_u = theta.v_delta_sigma_eps = 0.5;
    Eigen::MatrixXd h(N, T);
    for (int i = 0; i < N; ++i)
        for (int t = 0; t < T; ++t) h(i, t) = 1 + i % 20 + t;
    return simulate_m2(theta, experience_regressors(h), 12).data;
}

// Arg 0: units; arg 1: 0 = serial, 1 = OpenMP.
void BM_M1Sweep(benchmark::State& state) {
    const PanelData data = m1_panel(static_cast<int>(state.range(0)));
    M1Config cfg;
    cfg.variant = M1Variant::ss_hetsk;
    cfg.exec = exec_for(static_cast<int>(state.range(1)));
    M1Sampler s(data, cfg);
    s.initialize();
    for (auto _ : state) s.sweep(true);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_M1Sweep)->ArgsProduct({{1000, 10000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_M2Sweep(benchmark::State& state) {
    const PanelData data = m2_panel(static_cast<int>(state.range(0)), 20);
    M2Config cfg;
    cfg.exec = exec_for(static_cast<int>(state.range(1)));
    M2Sampler s(data, cfg);
    s.initialize();
    for (auto _ : state) s.sweep(true);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_M2Sweep)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
    const CommonState theta = MCDesign{}.cell_theta(0.4, 0.5);
    const Exec exec = exec_for(static_cast<int>(state.range(1)));
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_m1(theta, static_cast<int>(state.range(0)), 8, 3, exec));
}
BENCHMARK(BM_Simulate)->ArgsProduct({{100000}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
