#pragma once

#include "gpdhp/decompose.hpp"
#include "gpdhp/kernels.hpp"
#include "gpdhp/linops.hpp"
#include "gpdhp/map_inference.hpp"
#include "gpdhp/parametric.hpp"
#include "gpdhp/series_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

// A GP-DHP fitted on the first `train_length` bins of a series.
struct GpDhpModel {
    KernelHyperparams hp;
    OperatorOptions options;
    std::size_t train_length{0};
    LatentFit fit;
    Decomposition components;
};

[[nodiscard]] GpDhpModel fit_gpdhp(std::span<const std::int64_t> train_counts, const KernelHyperparams& hp,
                                   const MapConfig& cfg = {}, const OperatorOptions& options = {});

// Baseline over bins 1..total_length: b_hat on the training bins and
// K_b(new, train) K^{-1} ell* beyond them. Because b_hat = K_b K^{-1} ell*,
// this equals the GP conditional mean K_b(new, train) K_b(train, train)^{-1} b_hat.
[[nodiscard]] Eigen::VectorXd extend_baseline(const GpDhpModel& model, std::size_t total_length);

// log(lambda^n e^{-lambda} / n!), with 0 log 0 = 0.
[[nodiscard]] double poisson_log_pmf(std::int64_t n, double lambda);

struct EvalOptions {
    double likelihood_floor{1e-10};
};

struct EvalReport {
    std::string model;
    std::size_t begin{0};  // 0-based, half-open [begin, end)
    std::size_t end{0};
    double total{0.0};
    std::vector<double> per_bin;
    std::vector<double> intensity;
    int floored{0};  // bins with lambda <= 0 and N > 0
    int clamped_baseline{0};
    std::optional<double> kappa_hat;
    std::string baseline_extension;
};

// One-step-ahead plug-in scoring on bins [begin, end) of `series`, using the
// observed history before each bin. For GP-DHP the range must start at or
// after the training range.
[[nodiscard]] EvalReport predictive_loglik(const GpDhpModel& model, const CountSeries& series, std::size_t begin,
                                           std::size_t end, const EvalOptions& options = {});
[[nodiscard]] EvalReport predictive_loglik(const ParametricDhpSpec& spec, const CountSeries& series,
                                           std::size_t begin, std::size_t end, const EvalOptions& options = {});

struct CvGrid {
    std::vector<double> beta{0.1, 0.2, 0.3, 0.4};
    std::vector<double> sigma_b{1e-4, 1e-2, 1.0};
    std::vector<double> ell_b{1.0, 5.0, 100.0};
    std::vector<double> sigma_lin{0.0, 1e-2, 1e-4};
    std::vector<double> sigma_f{0.5, 1.0, 2.0};
    std::vector<double> ell_f{5.0, 10.0, 20.0, 30.0};

    void validate() const;
    [[nodiscard]] std::size_t size() const noexcept;
    // Cell i in enumeration order (beta slowest, ell_f fastest), written
    // over the remaining fields of `base`.
    [[nodiscard]] KernelHyperparams cell(std::size_t i, const KernelHyperparams& base) const;
};

struct CvCell {
    std::size_t index{0};
    KernelHyperparams hp;
    bool ok{false};
    std::string status;
    double valid_pll{0.0};
    bool converged{false};
    double kappa_hat{0.0};
};

struct CvOptions {
    // Fields not on the grid (period, jitter) come from here.
    KernelHyperparams base;
    std::size_t d_max{0};  // 0 selects default_d_max(train length)
    OperatorOptions operators;
    EvalOptions eval;
    unsigned threads{0};  // 0 selects hardware concurrency
};

struct CvResult {
    std::vector<CvCell> table;
    std::size_t best{0};  // index into table
};

// Fits every cell on the training split and scores the validation split;
// the best pLL wins, ties to the earliest cell. Failed cells are kept in the
// table and skipped. Throws Error("cv") if every cell fails.
[[nodiscard]] CvResult cv_grid_search(const CountSeries& series, const SplitSpec& split, const CvGrid& grid,
                                      const MapConfig& cfg = {}, const CvOptions& options = {});

} // namespace gpdhp
