#include "gpdhp/kernels.hpp"

#include "gpdhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gpdhp {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
}

void check_cap(std::size_t n, std::size_t cap, const char* what) {
    if (n > cap) {
        throw DimensionError(std::string(what) + " of size " + std::to_string(n) +
                             " exceeds the dense cap " + std::to_string(cap) +
                             "; use the operator path");
    }
}

} // namespace

void BaselineKernelParams::validate() const {
    require(std::isfinite(sigma_per) && sigma_per >= 0.0, "sigma_per must be >= 0");
    require(std::isfinite(ell_per) && ell_per > 0.0, "ell_per must be > 0");
    require(std::isfinite(period) && period > 0.0, "period must be > 0");
    require(std::isfinite(sigma_lin) && sigma_lin >= 0.0, "sigma_lin must be >= 0");
    require(std::isfinite(eps_b) && eps_b > 0.0, "eps_b must be > 0");
    require(std::isfinite(sigma_const) && sigma_const >= 0.0, "sigma_const must be >= 0");
}

void ExcitationKernelParams::validate() const {
    require(std::isfinite(sigma_f) && sigma_f >= 0.0, "sigma_f must be >= 0");
    require(std::isfinite(ell_f) && ell_f > 0.0, "ell_f must be > 0");
    require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
    require(std::isfinite(eps_f) && eps_f > 0.0, "eps_f must be > 0");
    require(d_max >= 1, "d_max must be >= 1");
}

std::size_t default_d_max(std::size_t series_length) noexcept {
    if (series_length <= 1) return 1;
    return std::min<std::size_t>(series_length - 1, 365);
}

double amplitude_envelope(std::size_t d, const ExcitationKernelParams& p) {
    if (p.beta < kBetaLimitThreshold) return p.sigma_f;
    return p.sigma_f * std::exp(-0.5 * p.beta * static_cast<double>(d));
}

double lag_warp(double d, const ExcitationKernelParams& p) {
    if (p.beta < kBetaLimitThreshold) return d / p.ell_f;
    return -std::expm1(-p.beta * d) / (p.beta * p.ell_f);
}

double lag_warp(std::size_t d, const ExcitationKernelParams& p) {
    return lag_warp(static_cast<double>(d), p);
}

double periodic_cov(double tau, const BaselineKernelParams& p) {
    const double s = std::sin(std::numbers::pi * tau / p.period);
    return p.sigma_per * p.sigma_per * std::exp(-2.0 * s * s / (p.ell_per * p.ell_per));
}

double baseline_cov(std::size_t t, std::size_t s, const BaselineKernelParams& p) {
    // Symmetric by construction: |t - s| enters the even periodic part.
    const double tau = t >= s ? static_cast<double>(t - s) : static_cast<double>(s - t);
    double k = periodic_cov(tau, p);
    k += p.sigma_lin * p.sigma_lin * static_cast<double>(t) * static_cast<double>(s);
    k += p.sigma_const * p.sigma_const;
    if (t == s) k += p.eps_b * p.eps_b;
    return k;
}

double excitation_cov(std::size_t d, std::size_t d2, const ExcitationKernelParams& p) {
    const double du = lag_warp(d, p) - lag_warp(d2, p);
    double k = amplitude_envelope(d, p) * amplitude_envelope(d2, p) * std::exp(-0.5 * du * du);
    if (d == d2) k += p.eps_f * p.eps_f;
    return k;
}

Eigen::MatrixXd build_dense_baseline(std::size_t T, const BaselineKernelParams& p,
                                     std::size_t dense_cap) {
    check_cap(T, dense_cap, "baseline covariance");
    const auto n = static_cast<Eigen::Index>(T);
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            K(i, j) = baseline_cov(static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1), p);
            K(j, i) = K(i, j);
        }
    }
    return K;
}

Eigen::MatrixXd build_dense_excitation(const ExcitationKernelParams& p, std::size_t dense_cap) {
    check_cap(p.d_max, dense_cap, "excitation covariance");
    const auto n = static_cast<Eigen::Index>(p.d_max);
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            K(i, j) = excitation_cov(static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1), p);
            K(j, i) = K(i, j);
        }
    }
    return K;
}

Eigen::MatrixXd build_dense_warped_rbf(const ExcitationKernelParams& p, std::size_t dense_cap) {
    check_cap(p.d_max, dense_cap, "warped RBF");
    const auto n = static_cast<Eigen::Index>(p.d_max);
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = lag_warp(static_cast<std::size_t>(i + 1), p);
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double du = u[i] - u[j];
            K(i, j) = std::exp(-0.5 * du * du);
            K(j, i) = K(i, j);
        }
    }
    return K;
}

} // namespace gpdhp
