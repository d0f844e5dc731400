#pragma once

#include "gpdhp/linops.hpp"
#include "gpdhp/map_inference.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

// Split of a latent intensity into baseline and excitation:
//   b_hat = K_b K^{-1} ell,  f_hat = K_f X^T K^{-1} ell.
// This is the unique minimizer of
//   (1/2) b^T K_b^{-1} b + (1/2) f^T K_f^{-1} f  subject to  ell = b + X f,
// and the minimum equals (1/2) ell^T K^{-1} ell.
struct Decomposition {
    Eigen::VectorXd b_hat;
    Eigen::VectorXd f_hat;  // lags 1..d_max
    double kappa_hat{0.0};  // sum of positive parts of f_hat over 1..d_max
    double min_value{0.0};
    double reconstruction_residual{0.0};  // ||ell - b_hat - X f_hat|| / ||ell||
    bool unstable{false};                 // kappa_hat >= 1
};

[[nodiscard]] double branching_ratio(const Eigen::VectorXd& f_hat) noexcept;

// One CG solve for K^{-1} ell followed by the two projections. Throws
// ConvergenceError if the solve misses options.tol.
[[nodiscard]] Decomposition project_components(const Eigen::VectorXd& ell_star, const CollapsedKernelOperator& K,
                                               const CgOptions& options = {1e-11, 0});
// Same projection using a known dual vector K^{-1} ell (e.g. LatentFit::dual).
[[nodiscard]] Decomposition project_dual(const Eigen::VectorXd& ell_star, const Eigen::VectorXd& dual,
                                         const CollapsedKernelOperator& K);
[[nodiscard]] Decomposition project_components(const LatentFit& fit, const CollapsedKernelOperator& K);

// Value of the constrained quadratic at an arbitrary pair (b, f); dense
// solves, intended for small oracle checks.
[[nodiscard]] double decomposition_energy(const Eigen::VectorXd& b, const Eigen::VectorXd& f,
                                          const Eigen::MatrixXd& Kb, const Eigen::MatrixXd& Kf);

struct LaplaceOptions {
    int n_samples{1000};
    std::uint64_t seed{0};
    // Dense Cholesky sampling up to this length; randomized CG sampling above.
    std::size_t dense_cap{kDefaultDenseCap};
    bool force_iterative{false};
    CgOptions cg{1e-8, 0};
    double likelihood_floor{1e-10};
};

// Pointwise 2.5% / 97.5% empirical quantiles of projected Laplace draws.
// b_mean / f_mean are the sample means; b_sd / f_sd the sample deviations.
struct LaplaceBands {
    Eigen::VectorXd b_lower, b_upper, b_mean, b_sd;
    Eigen::VectorXd f_lower, f_upper, f_mean, f_sd;
    int sample_count{0};
    int failed_samples{0};  // draws whose inner CG solves missed tolerance
    bool dense_path{false};
    std::vector<std::string> warnings;
};

struct ComponentSamples {
    Eigen::MatrixXd b;  // T x n
    Eigen::MatrixXd f;  // d_max x n
    int failed{0};
    bool dense_path{false};
};

// Draws ell ~ N(ell*, H^{-1}), H = K^{-1} + D, D = diag(N / lambda^2 on ell > 0),
// and maps each draw through the projection. Works on the dual scale:
// q = K^{-1}(ell - ell*) has covariance K^{-1} - S B^{-1} S with S = D^{1/2}
// and B = I + S K S, drawn as q = v - S B^{-1}(S K v + e), v ~ N(0, K^{-1}),
// e ~ N(0, I).
[[nodiscard]] ComponentSamples laplace_component_samples(const LatentFit& fit, std::span<const std::int64_t> counts,
                                                         const CollapsedKernelOperator& K,
                                                         const LaplaceOptions& options = {});

[[nodiscard]] LaplaceBands laplace_bands(const LatentFit& fit, std::span<const std::int64_t> counts,
                                         const CollapsedKernelOperator& K, const LaplaceOptions& options = {});

// Marginal variances of [P_b; P_f] H^{-1} [P_b; P_f]^T from dense algebra.
struct ProjectedVariance {
    Eigen::VectorXd b;
    Eigen::VectorXd f;
};
[[nodiscard]] ProjectedVariance projected_marginal_variance(const LatentFit& fit,
                                                            std::span<const std::int64_t> counts,
                                                            const CollapsedKernelOperator& K,
                                                            double likelihood_floor = 1e-10);

// Linear-interpolated empirical quantile (type 7) of each row.
[[nodiscard]] Eigen::VectorXd row_quantile(const Eigen::MatrixXd& samples, double q);

} // namespace gpdhp
