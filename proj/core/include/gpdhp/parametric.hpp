#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

// constant:           mu = g0
// linear:             mu = g0 + g1 t
// sinusoidal:         mu = g0 + g1 sin(2 pi t / P)
// linear_sinusoidal:  mu = g0 + g1 t + g2 sin(2 pi t / P)
enum class BaselineForm { constant, linear, sinusoidal, linear_sinusoidal };

[[nodiscard]] std::string to_string(BaselineForm form);
// "const"/"constant", "linear", "sin"/"sinusoidal", "linsin"/"linear_sinusoidal".
[[nodiscard]] BaselineForm parse_baseline_form(const std::string& name);
[[nodiscard]] std::size_t baseline_coefficient_count(BaselineForm form) noexcept;

// Excitation shared by all forms: Phi(d) = binom(d + r - 1, d) (1 - p)^d p^r.
struct ParametricDhpSpec {
    BaselineForm form{BaselineForm::constant};
    double gamma0{1.0};
    double gamma1{0.0};
    double gamma2{0.0};
    double period{52.0};
    double r{1.0};
    double p{0.5};
    std::size_t d_max{1};

    void validate() const;
    [[nodiscard]] double baseline(std::size_t t) const noexcept;  // 1-based t, unclamped
};

[[nodiscard]] double nb_kernel(double r, double p, std::size_t d);
[[nodiscard]] Eigen::VectorXd nb_kernel_vector(double r, double p, std::size_t d_max);

struct IntensityResult {
    Eigen::VectorXd lambda;
    int clamped{0};  // bins where mu(t) <= 0 was clamped to the floor
};

// lambda(t) for t = 1..T given the counts. Non-positive baselines are
// clamped to `floor` and counted.
[[nodiscard]] IntensityResult parametric_intensity(const ParametricDhpSpec& spec, std::span<const std::int64_t> counts,
                                                   double floor = 1e-10);
// Single bin; history[0..t-2] are the counts before t (1-based).
[[nodiscard]] double parametric_intensity(const ParametricDhpSpec& spec, std::span<const std::int64_t> history,
                                          std::size_t t, double floor = 1e-10);

// Full Poisson log-likelihood including the log N! term.
[[nodiscard]] double parametric_loglik(const ParametricDhpSpec& spec, std::span<const std::int64_t> counts,
                                       double floor = 1e-10);

// Unconstrained coordinates: log g0, g1 * scale, g2, log r, logit p, where
// scale is the fitted horizon (keeps the slope coordinate well conditioned).
[[nodiscard]] Eigen::VectorXd unconstrain(const ParametricDhpSpec& spec, double slope_scale = 1.0);
[[nodiscard]] ParametricDhpSpec constrain(const Eigen::VectorXd& theta, const ParametricDhpSpec& shape,
                                          double slope_scale = 1.0);

// Log-likelihood and its gradient in unconstrained coordinates.
struct LoglikGradient {
    double value{0.0};
    Eigen::VectorXd gradient;
    int clamped{0};
};
[[nodiscard]] LoglikGradient parametric_loglik_gradient(const Eigen::VectorXd& theta, const ParametricDhpSpec& shape,
                                                        std::span<const std::int64_t> counts, double slope_scale = 1.0,
                                                        double floor = 1e-10);

struct ParametricFitOptions {
    int starts{8};
    std::uint64_t seed{0};
    int max_iter{500};
    double grad_tol{1e-7};
    double likelihood_floor{1e-10};
    std::size_t d_max{0};  // 0 selects default_d_max(T)
};

struct StartReport {
    int index{0};
    bool ok{false};
    double loglik{0.0};
    double grad_norm{0.0};
    int iterations{0};
    std::string message;
};

struct ParametricFit {
    ParametricDhpSpec spec;
    double loglik{0.0};
    double grad_norm{0.0};  // unconstrained, slope coordinate scaled by T
    int best_start{0};
    int clamped{0};
    std::vector<StartReport> starts;
};

// Multi-start BFGS on the unconstrained log-likelihood, followed by a short
// Newton polish. Starts run in parallel; the best is chosen by
// (log-likelihood, start index). Throws ConvergenceError if all starts fail.
[[nodiscard]] ParametricFit fit_parametric_mle(std::span<const std::int64_t> counts, BaselineForm form, double period,
                                               const ParametricFitOptions& options = {});

} // namespace gpdhp
