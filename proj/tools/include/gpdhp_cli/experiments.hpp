#pragma once

// Synthetic recovery experiments and the five-model benchmark protocol,
// shared by the `figures` / `bench` subcommands and the acceptance suite.

#include "gpdhp_cli/config.hpp"

#include "gpdhp/decompose.hpp"
#include "gpdhp/evaluation.hpp"
#include "gpdhp/parametric.hpp"
#include "gpdhp/simulate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gpdhp::cli {

struct Scenario {
    std::string name;
    BaselineFamilySpec baseline;
    ExcitationFamilySpec excitation;
};

// Twelve excitation shapes over a shared baseline: negative binomial,
// geometric, power-law and bimodal, three settings each.
[[nodiscard]] std::vector<Scenario> excitation_scenarios();
// Constant, linear and linear + periodic baselines sharing one excitation.
[[nodiscard]] std::vector<Scenario> baseline_scenarios();
[[nodiscard]] const Scenario& find_scenario(const std::string& name);

struct RecoveryOptions {
    std::size_t T{6000};
    std::size_t train_end{4000};  // validation runs to T
    std::uint64_t seed{0};
    SearchMode search{SearchMode::axes};
    CvGrid grid;
    KernelHyperparams base;  // period and jitter; d_max comes from `d_max`
    std::size_t d_max{100};
    MapConfig map;
    OperatorOptions operators;
    int laplace_samples{0};
    unsigned threads{0};
    std::size_t lags_scored{30};
};

struct RecoveryResult {
    Scenario scenario;
    SimulationResult sim;
    KernelHyperparams chosen;
    std::optional<CvResult> cv;
    GpDhpModel model;  // fitted on the training split
    std::optional<LaplaceBands> bands;
    Eigen::VectorXd f_true;  // lags 1..d_max
    Eigen::VectorXd b_true;  // training bins
    double f_rel_l2{0.0};    // over lags 1..lags_scored
    double kappa_true{0.0};  // sum of f_true over 1..d_max
    double kappa_hat{0.0};
    double baseline_corr{0.0};  // Pearson r of b_hat and mu on the training bins (NaN if mu is flat)
};

[[nodiscard]] RecoveryResult run_recovery(const Scenario& scenario, const RecoveryOptions& options);

// ||a - b|| / ||b|| over the first n entries.
[[nodiscard]] double relative_l2(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth, std::size_t n);
// NaN when either input has zero variance.
[[nodiscard]] double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// The beta and ell_f axes of `grid` with every other axis pinned to `base`.
[[nodiscard]] CvGrid axes_grid(const CvGrid& grid, const KernelHyperparams& base);

struct BenchRow {
    std::string model;  // const | linear | sin | linsin | gpdhp
    std::string label;
    double pll{0.0};
    std::optional<double> kappa_hat;
    int floored{0};
    int clamped{0};
    std::string status;
    EvalReport report;
};

struct BenchOptions {
    double period{52.0};
    std::size_t d_max{0};
    SearchMode search{SearchMode::grid};
    CvGrid grid;
    KernelHyperparams base;
    MapConfig map;
    OperatorOptions operators;
    ParametricSettings parametric;
    std::uint64_t seed{0};
    unsigned threads{0};
    bool refit_on_validation{true};
};

struct BenchResult {
    SplitSpec split;
    std::size_t fit_end{0};
    KernelHyperparams chosen;
    std::optional<CvResult> cv;
    std::vector<BenchRow> rows;  // fixed order: const, linear, sin, linsin, gpdhp
    std::vector<ParametricFit> parametric;
};

// Fits the four parametric DHPs and GP-DHP and scores test-split pLL.
// GP-DHP hyperparameters are selected on the validation split; all models
// are then fitted on history up to fit_end.
[[nodiscard]] BenchResult run_bench(const CountSeries& series, const SplitSpec& split, const BenchOptions& options);

// Synthetic daily series with the length and sparsity of a national
// incident log: a low, slowly declining rate with a yearly cycle and
// short-memory excitation.
[[nodiscard]] SimulationResult incident_standin(std::size_t length, std::uint64_t seed);

} // namespace gpdhp::cli
