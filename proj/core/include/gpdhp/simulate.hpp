#pragma once

#include "gpdhp/series_io.hpp"

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace gpdhp {

// mu(t) = a + b t + c sin(2 pi t / P) + d cos(2 pi t / P), t = 1..T.
struct BaselineFamilySpec {
    double a{1.0};
    double b{0.0};
    double c{0.0};
    double d{0.0};
    double period{52.0};

    [[nodiscard]] double operator()(std::size_t t) const noexcept;
    // Throws ValidationError naming the first t in 1..T with mu(t) <= 0.
    void validate(std::size_t T) const;
};

enum class ExcitationFamily {
    negative_binomial,  // alpha * binom(d + r - 1, d) (1 - p)^d p^r
    geometric,          // alpha * p (1 - p)^(d - 1)
    geometric_bench,    // alpha * (1 - p)^d p
    power_law,          // alpha * (gamma + d)^(-beta)
    bimodal_gaussian,   // alpha * [N(d; mu1, sigma) + N(d; mu2, sigma)] / 2
};

[[nodiscard]] std::string to_string(ExcitationFamily f);
// Accepts "negative_binomial"/"nb", "geometric"/"geometric-sim",
// "geometric-bench", "power_law"/"power", "bimodal_gaussian"/"bimodal".
[[nodiscard]] ExcitationFamily parse_excitation_family(const std::string& name);

struct ExcitationFamilySpec {
    ExcitationFamily family{ExcitationFamily::geometric};
    double alpha{0.5};
    double r{1.0};
    double p{0.5};
    double gamma{0.0};
    double beta{2.0};
    double mu1{5.0};
    double mu2{20.0};
    double sigma{2.0};
    std::size_t d_max{100};

    void validate() const;

    static ExcitationFamilySpec negative_binomial(double alpha, double p, double r, std::size_t d_max);
    static ExcitationFamilySpec geometric(double alpha, double p, std::size_t d_max);
    static ExcitationFamilySpec geometric_bench(double alpha, double p, std::size_t d_max);
    static ExcitationFamilySpec power_law(double alpha, double gamma, double beta, std::size_t d_max);
    static ExcitationFamilySpec bimodal(double alpha, double mu1, double mu2, double sigma, std::size_t d_max);
};

// Kernel value at lag d >= 1 (not truncated by d_max).
[[nodiscard]] double eval_family_kernel(const ExcitationFamilySpec& spec, std::size_t d);
// Values at lags 1..d_max.
[[nodiscard]] Eigen::VectorXd family_kernel_vector(const ExcitationFamilySpec& spec);
// Sum of the kernel over lags beyond d_max.
[[nodiscard]] double family_tail_mass(const ExcitationFamilySpec& spec);

struct SimConfig {
    std::size_t T{1000};
    std::uint64_t seed{0};
    // Abort once the intensity exceeds this value (runaway growth).
    double intensity_limit{1e8};
    std::string step_label{"step"};
};

struct SimulationResult {
    CountSeries series;
    Eigen::VectorXd intensity;  // lambda(1..T)
    Eigen::VectorXd baseline;   // mu(1..T)
    Eigen::VectorXd kernel;     // f(1..d_max) as used
    double kernel_mass{0.0};    // sum of f over 1..d_max
    double tail_mass{0.0};      // mass dropped by truncation
    bool supercritical{false};  // kernel_mass >= 1
};

// Sequential generation: lambda(t) = mu(t) + sum_{d <= min(t-1, d_max)} N(t-d) f(d),
// N(t) ~ Poisson(lambda(t)). Throws SimulationError at the first t whose
// intensity is non-finite or above cfg.intensity_limit.
[[nodiscard]] SimulationResult simulate_dhp(const BaselineFamilySpec& baseline,
                                            const ExcitationFamilySpec& excitation, const SimConfig& cfg);
// Same with an explicit baseline (length T) and kernel (lags 1..d_max).
[[nodiscard]] SimulationResult simulate_dhp(const Eigen::VectorXd& mu, const Eigen::VectorXd& kernel,
                                            const SimConfig& cfg);

} // namespace gpdhp
