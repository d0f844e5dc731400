#pragma once

// Thin FFTW wrappers used by the operator layer. Plans are built once per
// size and executed through the new-array interface, so a single plan can be
// shared by concurrent multiplies.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace gpdhp::detail {

// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
[[nodiscard]] std::size_t next_fast_size(std::size_t n);

class RealFft {
public:
    explicit RealFft(std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

    // Unnormalized forward transform; `in` has size(), `out` spectrum_size().
    void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
    // Unnormalized inverse; divides by nothing. `in` is preserved.
    void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

private:
    struct Plans;
    std::size_t n_;
    std::shared_ptr<const Plans> plans_;
};

// Symmetric Toeplitz matrix given by its first column, multiplied through a
// circulant embedding.
class SymmetricToeplitz {
public:
    SymmetricToeplitz() = default;
    explicit SymmetricToeplitz(std::vector<double> first_column);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] const std::vector<double>& first_column() const noexcept { return column_; }
    // out = T * in; spans must have size().
    void apply(std::span<const double> in, std::span<double> out) const;

private:
    std::size_t n_{0};
    std::vector<double> column_;
    std::shared_ptr<const RealFft> fft_;
    std::vector<double> spectrum_;
};

// Causal lag convolution with a fixed nonnegative sequence `x` of length T:
//   forward:   w[i] = sum_{j<D, j<i} x[i-1-j] v[j]      (i < T)
//   transpose: u[j] = sum_{i>j} x[i-1-j] w[i]          (j < D)
class LagConvolver {
public:
    LagConvolver() = default;
    LagConvolver(std::vector<double> sequence, std::size_t lags);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t lags() const noexcept { return lags_; }
    [[nodiscard]] const std::vector<double>& sequence() const noexcept { return sequence_; }

    void forward(std::span<const double> v, std::span<double> w) const;
    void transpose(std::span<const double> w, std::span<double> u) const;

private:
    std::size_t rows_{0};
    std::size_t lags_{0};
    bool all_zero_{true};
    std::vector<double> sequence_;
    std::shared_ptr<const RealFft> fft_;
    std::vector<std::complex<double>> spectrum_;
};

} // namespace gpdhp::detail
