#include "fft.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace gpdhp::detail {

namespace {

// FFTW's planner and plan destruction are not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

} // namespace

std::size_t next_fast_size(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2u, 3u, 5u, 7u}) {
            while (r % p == 0) r /= p;
        }
        if (r == 1) return m;
    }
}

struct RealFft::Plans {
    fftw_plan forward{nullptr};
    fftw_plan inverse{nullptr};

    ~Plans() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("RealFft size must be positive");
    auto plans = std::make_shared<Plans>();
    std::vector<double> real(n);
    std::vector<std::complex<double>> spec(n / 2 + 1);
    {
        std::lock_guard lock(planner_mutex());
        plans->forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(),
                                              reinterpret_cast<fftw_complex*>(spec.data()), kPlanFlags);
        plans->inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                              reinterpret_cast<fftw_complex*>(spec.data()), real.data(),
                                              kPlanFlags | FFTW_PRESERVE_INPUT);
    }
    if (!plans->forward || !plans->inverse) throw std::runtime_error("FFTW planning failed");
    plans_ = std::move(plans);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    fftw_execute_dft_r2c(plans_->forward, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
    fftw_execute_dft_c2r(plans_->inverse,
                         reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                         out.data());
}

SymmetricToeplitz::SymmetricToeplitz(std::vector<double> first_column)
    : n_(first_column.size()), column_(std::move(first_column)) {
    if (n_ == 0) return;
    const std::size_t L = next_fast_size(2 * n_ - 1);
    fft_ = std::make_shared<RealFft>(L);
    std::vector<double> embed(L, 0.0);
    embed[0] = column_[0];
    for (std::size_t k = 1; k < n_; ++k) {
        embed[k] = column_[k];
        embed[L - k] = column_[k];
    }
    std::vector<std::complex<double>> spec(fft_->spectrum_size());
    fft_->forward(embed, spec);
    spectrum_.resize(spec.size());
    // The embedding is even, so its spectrum is real; fold in the 1/L scale.
    for (std::size_t k = 0; k < spec.size(); ++k) spectrum_[k] = spec[k].real() / static_cast<double>(L);
}

void SymmetricToeplitz::apply(std::span<const double> in, std::span<double> out) const {
    if (n_ == 0) return;
    if (n_ == 1) {
        out[0] = column_[0] * in[0];
        return;
    }
    const std::size_t L = fft_->size();
    std::vector<double> buffer(L, 0.0);
    std::copy(in.begin(), in.end(), buffer.begin());
    std::vector<std::complex<double>> spec(fft_->spectrum_size());
    fft_->forward(buffer, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= spectrum_[k];
    fft_->inverse(spec, buffer);
    std::copy_n(buffer.begin(), n_, out.begin());
}

LagConvolver::LagConvolver(std::vector<double> sequence, std::size_t lags)
    : rows_(sequence.size()), lags_(lags), sequence_(std::move(sequence)) {
    all_zero_ = std::all_of(sequence_.begin(), sequence_.end(), [](double x) { return x == 0.0; });
    if (all_zero_ || rows_ == 0 || lags_ == 0) return;
    const std::size_t L = next_fast_size(rows_ + lags_ + 1);
    fft_ = std::make_shared<RealFft>(L);
    std::vector<double> buffer(L, 0.0);
    std::copy(sequence_.begin(), sequence_.end(), buffer.begin());
    spectrum_.resize(fft_->spectrum_size());
    fft_->forward(buffer, spectrum_);
    const double scale = 1.0 / static_cast<double>(L);
    for (auto& c : spectrum_) c *= scale;
}

void LagConvolver::forward(std::span<const double> v, std::span<double> w) const {
    if (all_zero_ || lags_ == 0) {
        std::fill(w.begin(), w.end(), 0.0);
        return;
    }
    const std::size_t L = fft_->size();
    // Shift by one so that lag j+1 sits at offset j+1.
    std::vector<double> buffer(L, 0.0);
    std::copy(v.begin(), v.end(), buffer.begin() + 1);
    std::vector<std::complex<double>> spec(fft_->spectrum_size());
    fft_->forward(buffer, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= spectrum_[k];
    fft_->inverse(spec, buffer);
    std::copy_n(buffer.begin(), rows_, w.begin());
}

void LagConvolver::transpose(std::span<const double> w, std::span<double> u) const {
    if (all_zero_ || lags_ == 0) {
        std::fill(u.begin(), u.end(), 0.0);
        return;
    }
    const std::size_t L = fft_->size();
    std::vector<double> buffer(L, 0.0);
    std::copy(w.begin(), w.end(), buffer.begin());
    std::vector<std::complex<double>> spec(fft_->spectrum_size());
    fft_->forward(buffer, spec);
    // Cross-correlation: c[k] = sum_m x[m] w[m + k].
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::conj(spectrum_[k]);
    fft_->inverse(spec, buffer);
    std::copy_n(buffer.begin() + 1, lags_, u.begin());
}

} // namespace gpdhp::detail
