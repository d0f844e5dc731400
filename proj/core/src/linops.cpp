#include "gpdhp/linops.hpp"

#include "fft.hpp"
#include "gpdhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gpdhp {

namespace {

void check_length(Eigen::Index got, std::size_t want, const char* what) {
    if (static_cast<std::size_t>(got) != want) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                             ", got " + std::to_string(got));
    }
}

std::vector<double> to_doubles(std::span<const std::int64_t> counts) {
    std::vector<double> out(counts.size());
    std::transform(counts.begin(), counts.end(), out.begin(),
                   [](std::int64_t c) { return static_cast<double>(c); });
    return out;
}

} // namespace

// --- LagDesignOperator ------------------------------------------------------

LagDesignOperator::LagDesignOperator(std::span<const std::int64_t> counts, std::size_t d_max)
    : conv_(std::make_shared<detail::LagConvolver>(to_doubles(counts), d_max)) {
    if (d_max == 0) throw ValidationError("d_max must be >= 1");
}

std::size_t LagDesignOperator::rows() const noexcept { return conv_->rows(); }
std::size_t LagDesignOperator::cols() const noexcept { return conv_->lags(); }

double LagDesignOperator::entry(std::size_t t, std::size_t d) const {
    if (t < 1 || t > rows() || d < 1 || d > cols()) throw DimensionError("design entry out of range");
    return d <= t - 1 ? conv_->sequence()[t - 1 - d] : 0.0;
}

Eigen::VectorXd LagDesignOperator::apply(const Eigen::VectorXd& v) const {
    check_length(v.size(), cols(), "lag design multiply");
    Eigen::VectorXd w(static_cast<Eigen::Index>(rows()));
    conv_->forward({v.data(), cols()}, {w.data(), rows()});
    return w;
}

Eigen::VectorXd LagDesignOperator::apply_transpose(const Eigen::VectorXd& w) const {
    check_length(w.size(), rows(), "lag design transpose multiply");
    Eigen::VectorXd u(static_cast<Eigen::Index>(cols()));
    conv_->transpose({w.data(), rows()}, {u.data(), cols()});
    return u;
}

Eigen::MatrixXd LagDesignOperator::to_dense(std::size_t dense_cap) const {
    if (rows() > dense_cap || cols() > dense_cap) throw DimensionError("design matrix exceeds dense cap");
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                              static_cast<Eigen::Index>(cols()));
    const auto& n = conv_->sequence();
    for (std::size_t t = 1; t <= rows(); ++t) {
        for (std::size_t d = 1; d <= std::min(t - 1, cols()); ++d) {
            X(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(d - 1)) = n[t - 1 - d];
        }
    }
    return X;
}

// --- BaselineOperator -------------------------------------------------------

BaselineOperator::BaselineOperator(std::size_t T, const BaselineKernelParams& p)
    : size_(T), params_(p) {
    p.validate();
    if (T == 0) throw ValidationError("baseline operator needs T >= 1");
    std::vector<double> column(T);
    for (std::size_t k = 0; k < T; ++k) column[k] = periodic_cov(static_cast<double>(k), p);
    periodic_ = std::make_shared<detail::SymmetricToeplitz>(std::move(column));
}

Eigen::VectorXd BaselineOperator::apply(const Eigen::VectorXd& v) const {
    check_length(v.size(), size_, "baseline multiply");
    Eigen::VectorXd out(v.size());
    periodic_->apply({v.data(), size_}, {out.data(), size_});
    const auto n = v.size();
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
    if (params_.sigma_lin > 0.0) out += (params_.sigma_lin * params_.sigma_lin * t.dot(v)) * t;
    if (params_.sigma_const > 0.0) out.array() += params_.sigma_const * params_.sigma_const * v.sum();
    out += (params_.eps_b * params_.eps_b) * v;
    return out;
}

Eigen::VectorXd BaselineOperator::diagonal() const {
    const auto n = static_cast<Eigen::Index>(size_);
    const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 1.0, static_cast<double>(n));
    const double flat = params_.sigma_per * params_.sigma_per + params_.sigma_const * params_.sigma_const +
                        params_.eps_b * params_.eps_b;
    return (flat + params_.sigma_lin * params_.sigma_lin * t.square()).matrix();
}

// --- SKI --------------------------------------------------------------------

std::size_t default_inducing_points(std::size_t d_max) noexcept {
    return std::max<std::size_t>(4, std::min<std::size_t>(d_max, 128));
}

SkiOperator build_ski(const ExcitationKernelParams& p, std::size_t inducing_points) {
    p.validate();
    if (inducing_points < 4) {
        throw ValidationError("SKI needs at least 4 inducing points, got " + std::to_string(inducing_points));
    }
    SkiOperator ski;
    const std::size_t D = p.d_max;
    const std::size_t M = inducing_points;
    const double u_first = lag_warp(std::size_t{1}, p);
    const double u_last = lag_warp(D, p);
    ski.grid_size_ = M;
    ski.grid_start_ = u_first;
    ski.spacing_ = u_last > u_first ? (u_last - u_first) / static_cast<double>(M - 1) : 1.0;

    ski.rows_.resize(D);
    for (std::size_t d = 1; d <= D; ++d) {
        auto& row = ski.rows_[d - 1];
        double s = (lag_warp(d, p) - u_first) / ski.spacing_;
        s = std::clamp(s, 0.0, static_cast<double>(M - 1));
        auto cell = static_cast<std::size_t>(std::floor(s));
        if (cell >= M - 1) cell = M - 2;
        double x = s - static_cast<double>(cell);
        constexpr double snap = 1e-12;
        if (x < snap) {
            row.first = cell;
            row.count = 1;
            row.weights = {1.0, 0.0, 0.0, 0.0};
            continue;
        }
        if (x > 1.0 - snap) {
            row.first = cell + 1;
            row.count = 1;
            row.weights = {1.0, 0.0, 0.0, 0.0};
            continue;
        }
        if (cell >= 1 && cell + 2 <= M - 1) {
            // Four-point Lagrange weights on knots cell-1 .. cell+2.
            row.first = cell - 1;
            row.count = 4;
            row.weights = {-x * (x - 1.0) * (x - 2.0) / 6.0, (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
                           -(x + 1.0) * x * (x - 2.0) / 2.0, (x + 1.0) * x * (x - 1.0) / 6.0};
        } else {
            row.first = cell;
            row.count = 2;
            row.weights = {1.0 - x, x, 0.0, 0.0};
        }
    }

    std::vector<double> column(M);
    for (std::size_t k = 0; k < M; ++k) {
        const double du = static_cast<double>(k) * ski.spacing_;
        column[k] = std::exp(-0.5 * du * du);
    }
    ski.gram_ = std::make_shared<detail::SymmetricToeplitz>(std::move(column));
    return ski;
}

Eigen::VectorXd SkiOperator::apply(const Eigen::VectorXd& v) const {
    check_length(v.size(), rows_.size(), "SKI multiply");
    std::vector<double> grid(grid_size_, 0.0);
    for (std::size_t d = 0; d < rows_.size(); ++d) {
        const auto& row = rows_[d];
        for (std::size_t k = 0; k < row.count; ++k) grid[row.first + k] += row.weights[k] * v[static_cast<Eigen::Index>(d)];
    }
    std::vector<double> mixed(grid_size_);
    gram_->apply(grid, mixed);
    Eigen::VectorXd out(v.size());
    for (std::size_t d = 0; d < rows_.size(); ++d) {
        const auto& row = rows_[d];
        double acc = 0.0;
        for (std::size_t k = 0; k < row.count; ++k) acc += row.weights[k] * mixed[row.first + k];
        out[static_cast<Eigen::Index>(d)] = acc;
    }
    return out;
}

Eigen::MatrixXd SkiOperator::interpolation_matrix() const {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_.size()),
                                              static_cast<Eigen::Index>(grid_size_));
    for (std::size_t d = 0; d < rows_.size(); ++d) {
        const auto& row = rows_[d];
        for (std::size_t k = 0; k < row.count; ++k) {
            W(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(row.first + k)) = row.weights[k];
        }
    }
    return W;
}

Eigen::MatrixXd SkiOperator::inducing_gram() const {
    const auto m = static_cast<Eigen::Index>(grid_size_);
    const auto& c = gram_->first_column();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) K(i, j) = c[static_cast<std::size_t>(std::abs(i - j))];
    }
    return K;
}

Eigen::MatrixXd SkiOperator::approximate_gram() const {
    const Eigen::MatrixXd W = interpolation_matrix();
    return W * inducing_gram() * W.transpose();
}

// --- ExcitationOperator -----------------------------------------------------

ExcitationOperator::ExcitationOperator(const ExcitationKernelParams& p, const OperatorOptions& options)
    : params_(p), mode_(options.mode) {
    p.validate();
    const auto D = static_cast<Eigen::Index>(p.d_max);
    envelope_.resize(D);
    for (Eigen::Index d = 0; d < D; ++d) envelope_[d] = amplitude_envelope(static_cast<std::size_t>(d + 1), p);
    if (p.d_max <= options.dense_cap) {
        dense_ = std::make_shared<const Eigen::MatrixXd>(build_dense_excitation(p, options.dense_cap));
    } else if (mode_ == ExcitationMode::exact) {
        throw DimensionError("exact excitation mode needs d_max <= dense cap");
    }
    if (mode_ == ExcitationMode::ski) {
        const std::size_t M = options.inducing_points ? options.inducing_points : default_inducing_points(p.d_max);
        ski_ = std::make_shared<const SkiOperator>(build_ski(p, M));
    }
}

const Eigen::MatrixXd& ExcitationOperator::exact_matrix() const {
    if (!dense_) throw DimensionError("exact excitation matrix not available above the dense cap");
    return *dense_;
}

Eigen::VectorXd ExcitationOperator::apply(const Eigen::VectorXd& v) const {
    check_length(v.size(), params_.d_max, "excitation multiply");
    if (mode_ == ExcitationMode::exact) return dense_->selfadjointView<Eigen::Lower>() * v;
    Eigen::VectorXd scaled = envelope_.cwiseProduct(v);
    Eigen::VectorXd out = envelope_.cwiseProduct(ski_->apply(scaled));
    out += (params_.eps_f * params_.eps_f) * v;
    return out;
}

// --- CollapsedKernelOperator ------------------------------------------------

namespace {

// diag(X K_f X^T) from exact K_f entries, in row blocks through a GEMM.
Eigen::VectorXd excitation_diagonal(std::span<const std::int64_t> counts, const ExcitationKernelParams& p,
                                    const Eigen::MatrixXd* dense_kf) {
    const std::size_t T = counts.size();
    const std::size_t D = p.d_max;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
    if (std::all_of(counts.begin(), counts.end(), [](std::int64_t c) { return c == 0; })) return diag;

    if (dense_kf == nullptr) {
        std::vector<std::pair<std::size_t, double>> nz;
        for (std::size_t t = 1; t <= T; ++t) {
            nz.clear();
            for (std::size_t d = 1; d <= std::min(t - 1, D); ++d) {
                if (counts[t - 1 - d] != 0) nz.emplace_back(d, static_cast<double>(counts[t - 1 - d]));
            }
            double acc = 0.0;
            for (const auto& [d, nd] : nz) {
                for (const auto& [d2, nd2] : nz) acc += nd * nd2 * excitation_cov(d, d2, p);
            }
            diag[static_cast<Eigen::Index>(t - 1)] = acc;
        }
        return diag;
    }

    constexpr std::size_t kBlock = 512;
    const auto Di = static_cast<Eigen::Index>(D);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(std::min(kBlock, T)), Di);
    for (std::size_t start = 0; start < T; start += kBlock) {
        const std::size_t stop = std::min(T, start + kBlock);
        const auto nb = static_cast<Eigen::Index>(stop - start);
        auto block = rows.topRows(nb);
        block.setZero();
        for (std::size_t t = start + 1; t <= stop; ++t) {
            for (std::size_t d = 1; d <= std::min(t - 1, D); ++d) {
                block(static_cast<Eigen::Index>(t - 1 - start), static_cast<Eigen::Index>(d - 1)) =
                    static_cast<double>(counts[t - 1 - d]);
            }
        }
        const Eigen::MatrixXd product = block * (*dense_kf);
        diag.segment(static_cast<Eigen::Index>(start), nb) = product.cwiseProduct(block).rowwise().sum();
    }
    return diag;
}

} // namespace

CollapsedKernelOperator::CollapsedKernelOperator(std::span<const std::int64_t> counts,
                                                 const KernelHyperparams& hp,
                                                 const OperatorOptions& options)
    : hp_(hp),
      options_(options),
      baseline_(counts.size(), hp.baseline),
      design_(counts, hp.excitation.d_max),
      excitation_(hp.excitation, options) {
    const Eigen::MatrixXd* dense_kf = hp.excitation.d_max <= options.dense_cap ? &excitation_.exact_matrix() : nullptr;
    auto diag = std::make_shared<Eigen::VectorXd>(baseline_.diagonal());
    *diag += excitation_diagonal(counts, hp.excitation, dense_kf);
    diagonal_ = std::move(diag);
}

Eigen::VectorXd CollapsedKernelOperator::apply(const Eigen::VectorXd& v) const {
    check_length(v.size(), size(), "collapsed multiply");
    Eigen::VectorXd out = baseline_.apply(v);
    out += design_.apply(excitation_.apply(design_.apply_transpose(v)));
    return out;
}

Eigen::MatrixXd build_dense_collapsed(std::span<const std::int64_t> counts, const KernelHyperparams& hp,
                                      std::size_t dense_cap) {
    const Eigen::MatrixXd Kb = build_dense_baseline(counts.size(), hp.baseline, dense_cap);
    const Eigen::MatrixXd Kf = build_dense_excitation(hp.excitation, dense_cap);
    const Eigen::MatrixXd X = LagDesignOperator(counts, hp.excitation.d_max).to_dense(dense_cap);
    return Kb + X * Kf * X.transpose();
}

} // namespace gpdhp
