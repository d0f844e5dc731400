#pragma once

// Matrix-free operators for the collapsed prior covariance
//
//   K = K_b + X K_f X^T,
//
// where X is the lagged-count design matrix, K_b the baseline covariance and
// K_f the lag covariance. Every multiply is O(T log T) through FFTs; the
// lag block K_f is applied either through structured kernel interpolation
// (K_f ~ A W K_U W^T A + eps_f^2 I) or densely for small lag windows.

#include "gpdhp/kernels.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

namespace detail {
class LagConvolver;
class SymmetricToeplitz;
} // namespace detail

// X with X(t, d) = N(t - d) for 1 <= d <= min(t - 1, d_max), else 0.
class LagDesignOperator {
public:
    LagDesignOperator(std::span<const std::int64_t> counts, std::size_t d_max);

    [[nodiscard]] std::size_t rows() const noexcept;
    [[nodiscard]] std::size_t cols() const noexcept;
    [[nodiscard]] double entry(std::size_t t, std::size_t d) const;  // 1-based

    // v has cols() entries; returns X v.
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    // w has rows() entries; returns X^T w.
    [[nodiscard]] Eigen::VectorXd apply_transpose(const Eigen::VectorXd& w) const;
    [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& v, bool transpose) const {
        return transpose ? apply_transpose(v) : apply(v);
    }

    [[nodiscard]] Eigen::MatrixXd to_dense(std::size_t dense_cap = kDefaultDenseCap) const;

private:
    std::shared_ptr<const detail::LagConvolver> conv_;
};

// K_b applied as a circulant-embedded periodic Toeplitz part plus rank-one
// linear and constant parts plus jitter.
class BaselineOperator {
public:
    BaselineOperator(std::size_t T, const BaselineKernelParams& p);

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] const BaselineKernelParams& params() const noexcept { return params_; }
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    [[nodiscard]] Eigen::VectorXd diagonal() const;

private:
    std::size_t size_;
    BaselineKernelParams params_;
    std::shared_ptr<const detail::SymmetricToeplitz> periodic_;
};

// Inducing-grid interpolation for the warped-lag RBF:
//   K_stat(d, d') = exp(-(u(d) - u(d'))^2 / 2) ~ (W K_U W^T)(d, d').
class SkiOperator {
public:
    struct Row {
        std::size_t first{0};
        std::size_t count{0};
        std::array<double, 4> weights{};
    };

    [[nodiscard]] std::size_t inducing_points() const noexcept { return grid_size_; }
    [[nodiscard]] std::size_t lags() const noexcept { return rows_.size(); }
    [[nodiscard]] double grid_start() const noexcept { return grid_start_; }
    [[nodiscard]] double grid_spacing() const noexcept { return spacing_; }
    [[nodiscard]] const std::vector<Row>& rows() const noexcept { return rows_; }

    // W K_U W^T v for v of length lags().
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    [[nodiscard]] Eigen::MatrixXd interpolation_matrix() const;       // W, lags x M
    [[nodiscard]] Eigen::MatrixXd inducing_gram() const;              // K_U, M x M
    [[nodiscard]] Eigen::MatrixXd approximate_gram() const;           // W K_U W^T

    friend SkiOperator build_ski(const ExcitationKernelParams& p, std::size_t inducing_points);

private:
    SkiOperator() = default;

    std::size_t grid_size_{0};
    double grid_start_{0.0};
    double spacing_{1.0};
    std::vector<Row> rows_;
    std::shared_ptr<const detail::SymmetricToeplitz> gram_;
};

// Uniform grid over [u(1), u(d_max)] with local cubic weights (linear in the
// first and last grid cells). Throws for inducing_points < 4.
[[nodiscard]] SkiOperator build_ski(const ExcitationKernelParams& p, std::size_t inducing_points);

[[nodiscard]] std::size_t default_inducing_points(std::size_t d_max) noexcept;

enum class ExcitationMode { ski, exact };

struct OperatorOptions {
    ExcitationMode mode{ExcitationMode::ski};
    std::size_t inducing_points{0};  // 0 selects default_inducing_points(d_max)
    std::size_t dense_cap{kDefaultDenseCap};
};

// K_f as an operator on lag vectors.
class ExcitationOperator {
public:
    ExcitationOperator(const ExcitationKernelParams& p, const OperatorOptions& options = {});

    [[nodiscard]] std::size_t size() const noexcept { return params_.d_max; }
    [[nodiscard]] const ExcitationKernelParams& params() const noexcept { return params_; }
    [[nodiscard]] ExcitationMode mode() const noexcept { return mode_; }
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    [[nodiscard]] const Eigen::VectorXd& envelope() const noexcept { return envelope_; }
    // Exact K_f entries (not the interpolated ones); d_max x d_max.
    [[nodiscard]] const Eigen::MatrixXd& exact_matrix() const;
    [[nodiscard]] const SkiOperator* ski() const noexcept { return ski_.get(); }

private:
    ExcitationKernelParams params_;
    ExcitationMode mode_;
    Eigen::VectorXd envelope_;
    std::shared_ptr<const SkiOperator> ski_;
    std::shared_ptr<const Eigen::MatrixXd> dense_;
};

class CollapsedKernelOperator {
public:
    CollapsedKernelOperator(std::span<const std::int64_t> counts, const KernelHyperparams& hp,
                            const OperatorOptions& options = {});

    [[nodiscard]] std::size_t size() const noexcept { return baseline_.size(); }
    [[nodiscard]] const KernelHyperparams& hyperparams() const noexcept { return hp_; }
    [[nodiscard]] const OperatorOptions& options() const noexcept { return options_; }
    [[nodiscard]] const BaselineOperator& baseline() const noexcept { return baseline_; }
    [[nodiscard]] const ExcitationOperator& excitation() const noexcept { return excitation_; }
    [[nodiscard]] const LagDesignOperator& design() const noexcept { return design_; }

    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    // Exact diagonal of K (computed from kernel entries, not through SKI).
    [[nodiscard]] const Eigen::VectorXd& diagonal() const noexcept { return *diagonal_; }

private:
    KernelHyperparams hp_;
    OperatorOptions options_;
    BaselineOperator baseline_;
    LagDesignOperator design_;
    ExcitationOperator excitation_;
    std::shared_ptr<const Eigen::VectorXd> diagonal_;
};

[[nodiscard]] inline Eigen::VectorXd collapsed_mvm(const CollapsedKernelOperator& K,
                                                   const Eigen::VectorXd& v) {
    return K.apply(v);
}

// Dense K = K_b + X K_f X^T from kernel entries; small-instance oracle.
[[nodiscard]] Eigen::MatrixXd build_dense_collapsed(std::span<const std::int64_t> counts,
                                                    const KernelHyperparams& hp,
                                                    std::size_t dense_cap = kDefaultDenseCap);

// --- Conjugate gradients ----------------------------------------------------

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgOptions {
    double tol{1e-8};
    int max_iter{0};  // 0 selects default_cg_max_iter(n)
};

struct CgResult {
    Eigen::VectorXd x;
    int iterations{0};
    double relative_residual{0.0};  // ||A x - b|| / ||b||, recomputed at exit
    bool converged{false};
};

[[nodiscard]] int default_cg_max_iter(std::size_t n) noexcept;

// Jacobi-preconditioned CG for symmetric positive-definite `op`. On
// non-convergence the best iterate seen is returned with converged = false.
[[nodiscard]] CgResult cg_solve(const LinearMap& op, const Eigen::VectorXd& rhs,
                                const Eigen::VectorXd& preconditioner_diagonal,
                                const CgOptions& options = {},
                                const Eigen::VectorXd* initial_guess = nullptr);

[[nodiscard]] CgResult cg_solve(const CollapsedKernelOperator& K, const Eigen::VectorXd& rhs,
                                const CgOptions& options = {},
                                const Eigen::VectorXd* initial_guess = nullptr);

} // namespace gpdhp
