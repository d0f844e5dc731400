#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace gpdhp {

// Below this attenuation rate the envelope and warp use their beta -> 0 limits.
inline constexpr double kBetaLimitThreshold = 1e-8;
inline constexpr std::size_t kDefaultDenseCap = 4096;
inline constexpr double kDefaultJitter = 1e-4;

// Seasonal + linear-trend baseline covariance with diagonal jitter.
struct BaselineKernelParams {
    double sigma_per{1.0};
    double ell_per{1.0};
    double period{52.0};
    double sigma_lin{0.0};
    double eps_b{kDefaultJitter};
    // Optional constant component sigma_const^2 * 1 1^T (off by default).
    double sigma_const{0.0};

    void validate() const;
};

// Lag-nonstationary excitation covariance: amplitude envelope a(d) times an
// RBF on warped lags g(d), plus jitter.
struct ExcitationKernelParams {
    double sigma_f{1.0};
    double ell_f{10.0};
    double beta{0.1};
    double eps_f{kDefaultJitter};
    std::size_t d_max{1};

    void validate() const;
};

struct KernelHyperparams {
    BaselineKernelParams baseline;
    ExcitationKernelParams excitation;

    void validate() const {
        baseline.validate();
        excitation.validate();
    }
};

// min(T - 1, 365), but at least 1.
[[nodiscard]] std::size_t default_d_max(std::size_t series_length) noexcept;

[[nodiscard]] double amplitude_envelope(std::size_t d, const ExcitationKernelParams& p);
[[nodiscard]] double lag_warp(std::size_t d, const ExcitationKernelParams& p);
[[nodiscard]] double lag_warp(double d, const ExcitationKernelParams& p);

// Stationary periodic part only, as a function of the time difference.
[[nodiscard]] double periodic_cov(double tau, const BaselineKernelParams& p);
// t, s are 1-based model times.
[[nodiscard]] double baseline_cov(std::size_t t, std::size_t s, const BaselineKernelParams& p);
// d, d2 are 1-based lags.
[[nodiscard]] double excitation_cov(std::size_t d, std::size_t d2, const ExcitationKernelParams& p);

[[nodiscard]] Eigen::MatrixXd build_dense_baseline(std::size_t T, const BaselineKernelParams& p,
                                                   std::size_t dense_cap = kDefaultDenseCap);
[[nodiscard]] Eigen::MatrixXd build_dense_excitation(const ExcitationKernelParams& p,
                                                     std::size_t dense_cap = kDefaultDenseCap);
// RBF on warped lags without envelope or jitter (d_max x d_max).
[[nodiscard]] Eigen::MatrixXd build_dense_warped_rbf(const ExcitationKernelParams& p,
                                                     std::size_t dense_cap = kDefaultDenseCap);

} // namespace gpdhp
