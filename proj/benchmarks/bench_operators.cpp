#include "gpdhp/decompose.hpp"
#include "gpdhp/linops.hpp"
#include "gpdhp/map_inference.hpp"
#include "gpdhp/simulate.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace gpdhp;

std::vector<std::int64_t> counts_for(std::size_t T) {
    BaselineFamilySpec mu;
    mu.a = 0.8;
    mu.c = 0.3;
    SimConfig cfg;
    cfg.T = T;
    cfg.seed = 1;
    const auto sim = simulate_dhp(mu, ExcitationFamilySpec::negative_binomial(0.5, 0.5, 2.0, 100), cfg);
    return {sim.series.counts().begin(), sim.series.counts().end()};
}

KernelHyperparams hyper(std::size_t T) {
    KernelHyperparams hp;
    hp.baseline.ell_per = 5.0;
    hp.baseline.sigma_lin = 1e-2;
    hp.excitation.beta = 0.2;
    hp.excitation.d_max = default_d_max(T);
    return hp;
}

Eigen::VectorXd probe(std::size_t n) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = z(rng);
    return v;
}

void BM_CollapsedMvm(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const CollapsedKernelOperator K(counts, hyper(T));
    const Eigen::VectorXd v = probe(T);
    for (auto _ : state) benchmark::DoNotOptimize(collapsed_mvm(K, v));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CollapsedMvm)->RangeMultiplier(2)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oNLogN);

void BM_CollapsedMvmExact(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const CollapsedKernelOperator K(counts, hyper(T), {ExcitationMode::exact});
    const Eigen::VectorXd v = probe(T);
    for (auto _ : state) benchmark::DoNotOptimize(collapsed_mvm(K, v));
}
BENCHMARK(BM_CollapsedMvmExact)->RangeMultiplier(4)->Range(1 << 10, 1 << 14);

void BM_DenseMvm(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const Eigen::MatrixXd K = build_dense_collapsed(counts, hyper(T));
    const Eigen::VectorXd v = probe(T);
    for (auto _ : state) benchmark::DoNotOptimize(Eigen::VectorXd(K * v));
}
BENCHMARK(BM_DenseMvm)->RangeMultiplier(2)->Range(1 << 8, 1 << 11);

void BM_LagDesign(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const LagDesignOperator X(counts, default_d_max(T));
    const Eigen::VectorXd w = probe(T);
    for (auto _ : state) benchmark::DoNotOptimize(X.apply_transpose(w));
}
BENCHMARK(BM_LagDesign)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);

void BM_PriorSolve(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const CollapsedKernelOperator K(counts, hyper(T));
    const Eigen::VectorXd b = probe(T);
    CgResult r;
    for (auto _ : state) {
        r = cg_solve(K, b, {1e-6, 2000});
        benchmark::DoNotOptimize(r.x);
    }
    state.counters["cg_iterations"] = r.iterations;
    state.counters["residual"] = r.relative_residual;
    state.counters["converged"] = r.converged;
}
BENCHMARK(BM_PriorSolve)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_FitMap(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const auto counts = counts_for(T);
    const CollapsedKernelOperator K(counts, hyper(T));
    int newton = 0;
    for (auto _ : state) {
        const LatentFit fit = fit_map(counts, K);
        newton = fit.stats.newton_iterations;
        benchmark::DoNotOptimize(fit.ell_star);
    }
    state.counters["newton_iterations"] = newton;
}
BENCHMARK(BM_FitMap)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

void BM_LaplaceBands(benchmark::State& state) {
    const std::size_t T = 1000;
    const auto counts = counts_for(T);
    const CollapsedKernelOperator K(counts, hyper(T));
    const LatentFit fit = fit_map(counts, K);
    LaplaceOptions lo;
    lo.n_samples = static_cast<int>(state.range(0));
    lo.force_iterative = state.range(1) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(laplace_bands(fit, counts, K, lo));
}
BENCHMARK(BM_LaplaceBands)->Args({100, 0})->Args({100, 1})->UseRealTime()->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
