// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//
//   gpdhp_acceptance                 run every criterion
//   gpdhp_acceptance --criterion 7   run one (repeatable)
//
// Exit status: 0 when every selected criterion passes, 77 when the only
// selected criterion was skipped, 1 otherwise.

#include "gpdhp/decompose.hpp"
#include "gpdhp/evaluation.hpp"
#include "gpdhp/linops.hpp"
#include "gpdhp/map_inference.hpp"
#include "gpdhp/parametric.hpp"
#include "gpdhp/rng.hpp"
#include "gpdhp/simulate.hpp"
#include "gpdhp_cli/cli.hpp"
#include "gpdhp_cli/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gpdhp;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 3) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::vector<std::int64_t> random_counts(std::size_t T, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution zero(0.5);
    std::uniform_int_distribution<int> burst(1, 6);
    std::vector<std::int64_t> out(T);
    for (auto& c : out) c = zero(rng) ? 0 : burst(rng);
    return out;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

KernelHyperparams hyper(std::size_t d_max, double jitter) {
    KernelHyperparams hp;
    hp.baseline.sigma_per = 1.0;
    hp.baseline.ell_per = 5.0;
    hp.baseline.period = 52.0;
    hp.baseline.sigma_lin = 1e-2;
    hp.baseline.eps_b = jitter;
    hp.excitation.sigma_f = 1.0;
    hp.excitation.ell_f = 10.0;
    hp.excitation.beta = 0.2;
    hp.excitation.eps_f = jitter;
    hp.excitation.d_max = d_max;
    return hp;
}

// Base kernel for the recovery experiments: grid axes other than beta and
// ell_f are pinned to these values.
KernelHyperparams recovery_base() {
    KernelHyperparams hp = hyper(100, kDefaultJitter);
    hp.excitation.beta = 0.2;
    return hp;
}

// 1. Collapsed operator against the dense prior matrix, using the exact lag
// covariance in place of the inducing-grid interpolation.
Outcome operator_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0, ski_worst = 0.0;
    for (std::size_t T : {64u, 128u, 256u}) {
        const auto counts = random_counts(T, 1000 + T);
        const KernelHyperparams hp = hyper(T - 1, kDefaultJitter);
        const Eigen::MatrixXd dense = build_dense_collapsed(counts, hp);
        const CollapsedKernelOperator exact(counts, hp, {ExcitationMode::exact});
        const CollapsedKernelOperator ski(counts, hp);
        for (std::uint64_t probe = 0; probe < 5; ++probe) {
            const Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(T), 7 * T + probe);
            const Eigen::VectorXd ref = dense * v;
            worst = std::max(worst, (collapsed_mvm(exact, v) - ref).norm() / ref.norm());
            ski_worst = std::max(ski_worst, (collapsed_mvm(ski, v) - ref).norm() / ref.norm());
        }
    }
    const double secs = seconds_since(t0);
    return verdict(worst < 1e-10 && secs < 10.0, "max relative error " + fmt(worst) + " (< 1e-10), " + fmt(secs) +
                                                     " s (< 10 s); default SKI for reference " + fmt(ski_worst));
}

// 2. Adjointness of X and symmetry of K on random instances.
Outcome adjoint_symmetry() {
    double adj = 0.0, sym = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t T = 50 + 37 * seed;
        const std::size_t D = std::min<std::size_t>(T - 1, 20 + 9 * seed);
        const auto counts = random_counts(T, 300 + seed);
        const LagDesignOperator X(counts, D);
        const Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(D), 400 + seed);
        const Eigen::VectorXd w = random_vector(static_cast<Eigen::Index>(T), 500 + seed);
        const Eigen::VectorXd Xv = X.apply(v);
        const Eigen::VectorXd Xtw = X.apply_transpose(w);
        adj = std::max(adj, std::abs(Xv.dot(w) - v.dot(Xtw)) / (Xv.norm() * w.norm()));

        KernelHyperparams hp = hyper(D, kDefaultJitter);
        hp.excitation.beta = 0.05 * static_cast<double>(seed % 5);
        const CollapsedKernelOperator K(counts, hp);
        const Eigen::VectorXd x = random_vector(static_cast<Eigen::Index>(T), 600 + seed);
        const Eigen::VectorXd y = random_vector(static_cast<Eigen::Index>(T), 700 + seed);
        const Eigen::VectorXd Kx = K.apply(x);
        const Eigen::VectorXd Ky = K.apply(y);
        sym = std::max(sym, std::abs(Kx.dot(y) - x.dot(Ky)) / std::max(Kx.norm() * y.norm(), x.norm() * Ky.norm()));
    }
    return verdict(adj < 1e-10 && sym < 1e-10,
                   "adjointness " + fmt(adj) + ", symmetry " + fmt(sym) + " over 20 instances each (< 1e-10)");
}

// 3. MAP gradient against central differences.
Outcome gradient_check() {
    const std::size_t T = 128;
    const auto counts = random_counts(T, 8);
    // The inner solve's error is about cond(K) * tol, so the prior is given
    // unit jitter to keep that floor well below the tolerance checked here.
    const CollapsedKernelOperator K(counts, hyper(60, 1.0));
    ObjectiveOptions oo;
    oo.cg = {1e-10, 5000};
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.5, 5.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
        Eigen::VectorXd ell(static_cast<Eigen::Index>(T));
        for (auto& x : ell) x = u(rng);
        const Eigen::VectorXd g = map_gradient(ell, counts, K, oo);
        Eigen::VectorXd fd(ell.size());
        for (Eigen::Index i = 0; i < ell.size(); ++i) {
            Eigen::VectorXd up = ell, dn = ell;
            up[i] += h;
            dn[i] -= h;
            fd[i] = (map_objective(up, counts, K, oo) - map_objective(dn, counts, K, oo)) / (2.0 * h);
        }
        worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff());
    }
    return verdict(worst < 1e-5, "max relative error " + fmt(worst) + " at 10 points (< 1e-5)");
}

// 4. Constrained-optimum properties of the projection on T = 128.
Outcome projection_optimality() {
    const std::size_t T = 128, D = 60;
    const auto counts = random_counts(T, 31);
    const KernelHyperparams hp = hyper(D, kDefaultJitter);
    const CollapsedKernelOperator K(counts, hp, {ExcitationMode::exact});
    const LatentFit fit = fit_map(counts, K);
    const Decomposition dec = project_components(fit, K);

    const Eigen::MatrixXd X = K.design().to_dense();
    const Eigen::MatrixXd Kb = build_dense_baseline(T, hp.baseline);
    const Eigen::MatrixXd Kf = build_dense_excitation(hp.excitation);
    const Eigen::MatrixXd Kd = build_dense_collapsed(counts, hp);
    const double quad = 0.5 * fit.ell_star.dot(Kd.ldlt().solve(fit.ell_star));
    const double energy = decomposition_energy(dec.b_hat, dec.f_hat, Kb, Kf);
    const double value_err = std::abs(energy - quad) / quad;

    int worse = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd df(static_cast<Eigen::Index>(D));
        for (auto& x : df) x = 0.05 * n01(rng);
        const Eigen::VectorXd f2 = dec.f_hat + df;
        const Eigen::VectorXd b2 = dec.b_hat - X * df;
        const double e2 = decomposition_energy(b2, f2, Kb, Kf);
        worse += e2 > energy;
        min_gap = std::min(min_gap, e2 - energy);
    }
    const bool ok = dec.reconstruction_residual < 1e-8 && value_err < 1e-8 && worse == 20;
    return verdict(ok, "residual " + fmt(dec.reconstruction_residual) + ", min-value error " + fmt(value_err) +
                           ", " + std::to_string(worse) + "/20 perturbations worse (smallest gap " + fmt(min_gap) +
                           ")");
}

// 5. Stationary mean rate of the simulator.
Outcome simulator_mean() {
    const auto t0 = Clock::now();
    const double mu0 = 0.4;
    const std::size_t T = 200000, burn = 1000;
    std::string detail;
    bool ok = true;
    for (double kappa : {0.3, 0.6, 0.86}) {
        BaselineFamilySpec mu;
        mu.a = mu0;
        SimConfig cfg;
        cfg.T = T;
        cfg.seed = 4242;
        const auto sim = simulate_dhp(mu, ExcitationFamilySpec::geometric(kappa, 0.4, 200), cfg);
        const double k = sim.kernel_mass;
        double sum = 0.0;
        for (std::size_t i = burn; i < T; ++i) sum += static_cast<double>(sim.series[i]);
        const double n = static_cast<double>(T - burn);
        const double mean = sum / n;
        // Long-run variance of the per-bin count is mu0 / (1 - kappa)^3.
        const double se = std::sqrt(mu0 / std::pow(1.0 - k, 3) / n);
        const double z = (mean - mu0 / (1.0 - k)) / se;
        ok = ok && std::abs(z) <= 3.0;
        detail += "kappa " + fmt(kappa) + ": z = " + fmt(z) + "; ";
    }
    const double secs = seconds_since(t0);
    return verdict(ok && secs < 30.0, detail + fmt(secs) + " s (< 30 s)");
}

// 6. Near-linear scaling of the collapsed multiply.
Outcome mvm_scaling() {
    const auto t0 = Clock::now();
    auto per_call = [](std::size_t T) {
        const auto counts = random_counts(T, T);
        const CollapsedKernelOperator K(counts, hyper(default_d_max(T), kDefaultJitter));
        const Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(T), 5);
        Eigen::VectorXd sink = K.apply(v);
        std::vector<double> batches;
        for (int b = 0; b < 7; ++b) {
            const auto s = Clock::now();
            for (int r = 0; r < 20; ++r) sink = K.apply(sink / sink.norm());
            batches.push_back(seconds_since(s) / 20.0);
        }
        std::nth_element(batches.begin(), batches.begin() + 3, batches.end());
        return batches[3];
    };
    const double small = per_call(1u << 13);
    const double large = per_call(1u << 14);
    const double ratio = large / small;
    const double secs = seconds_since(t0);
    return verdict(ratio < 2.5 && secs < 60.0, "t(2^14) / t(2^13) = " + fmt(ratio) + " (< 2.5), " +
                                                   fmt(1e3 * small) + " ms vs " + fmt(1e3 * large) + " ms per call");
}

cli::RecoveryOptions recovery_options(std::uint64_t seed) {
    cli::RecoveryOptions ro;
    ro.T = 4000;
    ro.train_end = 3000;
    ro.seed = seed;
    ro.search = cli::SearchMode::axes;
    ro.base = recovery_base();
    ro.d_max = 100;
    ro.lags_scored = 30;
    return ro;
}

// 7. Excitation recovery after CV over the beta and ell_f axes.
Outcome excitation_recovery() {
    bool ok = true;
    std::string detail;
    std::uint64_t seed = 7001;
    for (const char* name : {"geom_p06", "nb_r2"}) {
        const auto t0 = Clock::now();
        const cli::RecoveryResult r = cli::run_recovery(cli::find_scenario(name), recovery_options(seed++));
        const double secs = seconds_since(t0);
        const double dk = std::abs(r.kappa_hat - r.kappa_true);
        ok = ok && r.f_rel_l2 < 0.35 && dk < 0.15 && secs < 1200.0;
        detail += std::string(name) + ": L2 " + fmt(r.f_rel_l2) + ", |dkappa| " + fmt(dk) + " (beta " +
                  fmt(r.chosen.excitation.beta) + ", ell_f " + fmt(r.chosen.excitation.ell_f) + ", " + fmt(secs) +
                  " s); ";
    }
    return verdict(ok, detail + "thresholds 0.35 / 0.15");
}

// 8. Baseline recovery and stability of the excitation across baselines.
Outcome baseline_recovery() {
    std::vector<cli::RecoveryResult> runs;
    std::uint64_t seed = 8001;
    for (const auto& s : cli::baseline_scenarios()) runs.push_back(cli::run_recovery(s, recovery_options(seed++)));
    bool ok = true;
    std::string detail;
    for (const auto& r : runs) {
        // Pearson r is undefined for a flat true baseline.
        if (std::isnan(r.baseline_corr)) {
            const double rel = (r.model.components.b_hat - r.b_true).norm() / r.b_true.norm();
            detail += r.scenario.name + ": r undefined (flat), relative L2 " + fmt(rel) + "; ";
            continue;
        }
        ok = ok && r.baseline_corr > 0.9;
        detail += r.scenario.name + ": r " + fmt(r.baseline_corr) + "; ";
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (std::size_t j = i + 1; j < runs.size(); ++j) {
            const Eigen::VectorXd& a = runs[i].model.components.f_hat;
            const Eigen::VectorXd& b = runs[j].model.components.f_hat;
            const double d = std::max(cli::relative_l2(a, b, 30), cli::relative_l2(b, a, 30));
            worst = std::max(worst, d);
        }
    }
    ok = ok && worst < 0.3;
    return verdict(ok, detail + "max pairwise f_hat L2 " + fmt(worst) + " (< 0.3)");
}

fs::path source_dir() { return fs::path(GPDHP_SOURCE_DIR); }

// 9. Held-out pLL on weekly cryptosporidiosis counts.
Outcome crypto_ordering() {
    fs::path data;
    if (const char* env = std::getenv("GPDHP_CRYPTO_CSV")) data = env;
    else data = source_dir() / "tests" / "data" / "cryptosporidiosis.csv";
    if (!fs::exists(data)) {
        return {Status::skip, "dataset not available (set GPDHP_CRYPTO_CSV or add tests/data/cryptosporidiosis.csv)"};
    }
    const CountSeries series = load_counts(data);
    const std::size_t T = series.size();
    SplitSpec split{T * 60 / 100, T * 80 / 100, T};
    if (const char* env = std::getenv("GPDHP_CRYPTO_SPLIT")) {
        std::string s = env;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream is(s);
        is >> split.train_end >> split.valid_end >> split.test_end;
    }
    cli::BenchOptions bo;
    bo.period = 52.0;
    bo.search = cli::SearchMode::grid;
    bo.base = recovery_base();
    const cli::BenchResult res = cli::run_bench(series, split, bo);
    const double gp = res.rows[4].pll;
    const double dhp = res.rows[0].pll;
    const bool ordered = gp > dhp;
    const bool near = std::abs(gp + 285.1) < 10.0 && std::abs(dhp + 287.1) < 10.0;
    return verdict(ordered && near, "GP-DHP " + fmt(gp, 5) + " vs Discrete DHP " + fmt(dhp, 5) +
                                        " (targets -285.1 / -287.1, tolerance 10)");
}

// 10. Five-model benchmark on a synthetic stand-in, end to end through the CLI.
Outcome bench_standin() {
    const fs::path dir = fs::path(GPDHP_BINARY_DIR) / "acceptance_bench";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "config.json");
        cfg << R"({"period": 365, "d_max": 100, "bench": {"search": "axes"},
                   "kernel": {"baseline": {"sigma_per": 1.0, "ell_per": 5.0, "sigma_lin": 0.01}}})";
    }
    const auto t0 = Clock::now();
    std::ostringstream out, err;
    const int code = cli::run({"gpdhp", "bench", "--config", (dir / "config.json").string(), "--seed", "10",
                               "--out", (dir / "out").string()},
                              out, err);
    const double secs = seconds_since(t0);
    if (code != 0) return {Status::fail, "bench exited with " + std::to_string(code) + ": " + err.str()};

    std::ifstream table(dir / "out" / "bench_table.csv");
    std::string line;
    std::getline(table, line);
    int rows = 0, finite = 0, with_kappa = 0;
    std::string gp_kappa;
    while (std::getline(table, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) continue;
        finite += std::isfinite(std::strtod(cells[2].c_str(), nullptr));
        with_kappa += !cells[3].empty();
        if (cells[0] == "gpdhp") gp_kappa = cells[3];
    }
    return verdict(rows == 5 && finite == 5 && with_kappa == 5,
                   std::to_string(rows) + " rows, " + std::to_string(finite) + " finite pLL, GP-DHP kappa_hat " +
                       gp_kappa + ", " + fmt(secs) + " s");
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{
        operator_oracle,       adjoint_symmetry,  gradient_check,   projection_optimality, simulator_mean,
        mvm_scaling,           excitation_recovery, baseline_recovery, crypto_ordering,    bench_standin,
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            const int k = std::atoi(argv[++i]);
            if (k < 1 || k > static_cast<int>(criteria.size())) {
                std::cerr << "unknown criterion " << argv[i] << "\n";
                return 2;
            }
            selected.push_back(k);
        } else {
            std::cerr << "usage: gpdhp_acceptance [--criterion N]...\n";
            return 2;
        }
    }
    if (selected.empty()) {
        for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);
    }

    int failed = 0, skipped = 0;
    for (int k : selected) {
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(k - 1)]();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        std::cout << "criterion " << k << ": " << tag << "  " << o.detail << std::endl;
        failed += o.status == Status::fail;
        skipped += o.status == Status::skip;
    }
    if (failed) return 1;
    if (skipped == static_cast<int>(selected.size())) return 77;
    return 0;
}
