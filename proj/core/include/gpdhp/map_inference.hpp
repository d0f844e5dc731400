#pragma once

#include "gpdhp/linops.hpp"
#include "gpdhp/series_io.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

enum class InitMode { mean_count, smoothed_counts };

struct MapConfig {
    int max_newton_iter{100};
    // Euclidean norm of the log-posterior gradient in latent coordinates.
    double grad_tol{1e-6};
    // Initial Levenberg damping added to the likelihood curvature.
    double damping_init{1e-4};
    double line_search_shrink{0.5};
    int max_line_search{40};
    double likelihood_floor{1e-10};
    InitMode init_mode{InitMode::smoothed_counts};
    std::size_t smoothing_window{7};
    // Inner solves (I + S K S) y = S K g.
    double cg_tol{1e-8};
    int cg_max_iter{0};
    // Stop as stalled after this many consecutive accepted steps whose
    // relative objective gain is below objective_rtol.
    double objective_rtol{1e-12};
    int stall_patience{3};

    void validate() const;
};

// gradient: norm below grad_tol. stalled: objective gains fell below
// objective_rtol (typical when the optimum sits on rectifier kinks).
// no_progress: no ascent step found even under heavy damping.
enum class Termination { gradient, stalled, no_progress, max_iter };

[[nodiscard]] std::string to_string(Termination t);

struct SolverStats {
    int newton_iterations{0};
    long long cg_iterations{0};
    int backtracks{0};
    int rejected_steps{0};
    double final_damping{0.0};
};

struct LatentFit {
    Eigen::VectorXd ell_star;
    // K^{-1} ell_star, maintained exactly by the optimizer (ell = K * dual).
    Eigen::VectorXd dual;
    std::vector<double> objective_trace;
    double grad_norm_final{0.0};
    bool converged{false};
    Termination termination{Termination::max_iter};
    SolverStats stats;

    // max{0, ell*(t)}.
    [[nodiscard]] Eigen::VectorXd intensity() const { return ell_star.cwiseMax(0.0); }
};

struct ObjectiveOptions {
    double likelihood_floor{1e-10};
    CgOptions cg{1e-10, 0};
};

// Poisson log-likelihood without the log N! constant, rectified intensity,
// 0 log 0 := 0 and a floor on lambda inside the log when N > 0.
[[nodiscard]] double poisson_loglik(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                                    double floor = 1e-10);
[[nodiscard]] Eigen::VectorXd poisson_loglik_gradient(const Eigen::VectorXd& ell,
                                                      std::span<const std::int64_t> counts,
                                                      double floor = 1e-10);
// N(t) / lambda(t)^2 on ell(t) > 0, else 0.
[[nodiscard]] Eigen::VectorXd poisson_curvature(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                                                double floor = 1e-10);

// Log-posterior up to a constant; the prior energy goes through cg_solve.
// Throws ConvergenceError when that solve does not converge.
[[nodiscard]] double map_objective(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                                   const CollapsedKernelOperator& K, const ObjectiveOptions& options = {});
[[nodiscard]] Eigen::VectorXd map_gradient(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                                           const CollapsedKernelOperator& K,
                                           const ObjectiveOptions& options = {});

// Damped Newton ascent on the log-posterior. Never throws on
// non-convergence: the best iterate comes back with converged = false.
[[nodiscard]] LatentFit fit_map(std::span<const std::int64_t> counts, const CollapsedKernelOperator& K,
                                const MapConfig& cfg = {});
[[nodiscard]] LatentFit fit_map(const CountSeries& series, const KernelHyperparams& hp,
                                const MapConfig& cfg = {}, const OperatorOptions& options = {});

} // namespace gpdhp
