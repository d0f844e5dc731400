#include "gpdhp/simulate.hpp"

#include "gpdhp/error.hpp"
#include "gpdhp/rng.hpp"

#include <cmath>
#include <numbers>

#include <boost/random/poisson_distribution.hpp>

namespace gpdhp {

double BaselineFamilySpec::operator()(std::size_t t) const noexcept {
    const double x = static_cast<double>(t);
    const double w = 2.0 * std::numbers::pi * x / period;
    return a + b * x + c * std::sin(w) + d * std::cos(w);
}

void BaselineFamilySpec::validate(std::size_t T) const {
    if (!(period > 0.0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d)) {
        throw ValidationError("baseline coefficients must be finite with a positive period");
    }
    for (std::size_t t = 1; t <= T; ++t) {
        if (!((*this)(t) > 0.0)) {
            throw ValidationError("baseline is not positive at t = " + std::to_string(t));
        }
    }
}

std::string to_string(ExcitationFamily f) {
    switch (f) {
    case ExcitationFamily::negative_binomial: return "negative_binomial";
    case ExcitationFamily::geometric: return "geometric-sim";
    case ExcitationFamily::geometric_bench: return "geometric-bench";
    case ExcitationFamily::power_law: return "power_law";
    case ExcitationFamily::bimodal_gaussian: return "bimodal_gaussian";
    }
    return "unknown";
}

ExcitationFamily parse_excitation_family(const std::string& name) {
    if (name == "negative_binomial" || name == "nb") return ExcitationFamily::negative_binomial;
    if (name == "geometric" || name == "geometric-sim") return ExcitationFamily::geometric;
    if (name == "geometric-bench") return ExcitationFamily::geometric_bench;
    if (name == "power_law" || name == "power") return ExcitationFamily::power_law;
    if (name == "bimodal_gaussian" || name == "bimodal") return ExcitationFamily::bimodal_gaussian;
    throw ValidationError("unknown excitation family '" + name + "'");
}

void ExcitationFamilySpec::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
    if (d_max == 0) throw ValidationError("d_max must be at least 1");
    switch (family) {
    case ExcitationFamily::negative_binomial:
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("r must be positive");
        [[fallthrough]];
    case ExcitationFamily::geometric:
    case ExcitationFamily::geometric_bench:
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("p must lie in (0, 1)");
        break;
    case ExcitationFamily::power_law:
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be nonnegative");
        if (!(beta > 1.0) || !std::isfinite(beta)) throw ValidationError("power-law exponent must exceed 1");
        break;
    case ExcitationFamily::bimodal_gaussian:
        if (!(sigma > 0.0) || !std::isfinite(mu1) || !std::isfinite(mu2)) {
            throw ValidationError("bimodal kernel needs finite modes and sigma > 0");
        }
        break;
    }
}

ExcitationFamilySpec ExcitationFamilySpec::negative_binomial(double alpha, double p, double r, std::size_t d_max) {
    ExcitationFamilySpec s;
    s.family = ExcitationFamily::negative_binomial;
    s.alpha = alpha;
    s.p = p;
    s.r = r;
    s.d_max = d_max;
    return s;
}

ExcitationFamilySpec ExcitationFamilySpec::geometric(double alpha, double p, std::size_t d_max) {
    ExcitationFamilySpec s;
    s.family = ExcitationFamily::geometric;
    s.alpha = alpha;
    s.p = p;
    s.d_max = d_max;
    return s;
}

ExcitationFamilySpec ExcitationFamilySpec::geometric_bench(double alpha, double p, std::size_t d_max) {
    ExcitationFamilySpec s = geometric(alpha, p, d_max);
    s.family = ExcitationFamily::geometric_bench;
    return s;
}

ExcitationFamilySpec ExcitationFamilySpec::power_law(double alpha, double gamma, double beta, std::size_t d_max) {
    ExcitationFamilySpec s;
    s.family = ExcitationFamily::power_law;
    s.alpha = alpha;
    s.gamma = gamma;
    s.beta = beta;
    s.d_max = d_max;
    return s;
}

ExcitationFamilySpec ExcitationFamilySpec::bimodal(double alpha, double mu1, double mu2, double sigma,
                                                   std::size_t d_max) {
    ExcitationFamilySpec s;
    s.family = ExcitationFamily::bimodal_gaussian;
    s.alpha = alpha;
    s.mu1 = mu1;
    s.mu2 = mu2;
    s.sigma = sigma;
    s.d_max = d_max;
    return s;
}

double eval_family_kernel(const ExcitationFamilySpec& spec, std::size_t d) {
    spec.validate();
    if (d == 0) throw ValidationError("lag must be at least 1");
    const double x = static_cast<double>(d);
    switch (spec.family) {
    case ExcitationFamily::negative_binomial:
        return spec.alpha * std::exp(std::lgamma(x + spec.r) - std::lgamma(spec.r) - std::lgamma(x + 1.0) +
                                     x * std::log1p(-spec.p) + spec.r * std::log(spec.p));
    case ExcitationFamily::geometric:
        return spec.alpha * spec.p * std::pow(1.0 - spec.p, x - 1.0);
    case ExcitationFamily::geometric_bench:
        return spec.alpha * spec.p * std::pow(1.0 - spec.p, x);
    case ExcitationFamily::power_law:
        return spec.alpha * std::pow(spec.gamma + x, -spec.beta);
    case ExcitationFamily::bimodal_gaussian: {
        const double norm = 1.0 / (spec.sigma * std::sqrt(2.0 * std::numbers::pi));
        const double z1 = (x - spec.mu1) / spec.sigma;
        const double z2 = (x - spec.mu2) / spec.sigma;
        return spec.alpha * 0.5 * norm * (std::exp(-0.5 * z1 * z1) + std::exp(-0.5 * z2 * z2));
    }
    }
    return 0.0;
}

Eigen::VectorXd family_kernel_vector(const ExcitationFamilySpec& spec) {
    spec.validate();
    Eigen::VectorXd f(static_cast<Eigen::Index>(spec.d_max));
    for (std::size_t d = 1; d <= spec.d_max; ++d) f[static_cast<Eigen::Index>(d - 1)] = eval_family_kernel(spec, d);
    return f;
}

double family_tail_mass(const ExcitationFamilySpec& spec) {
    spec.validate();
    switch (spec.family) {
    case ExcitationFamily::geometric:
        return spec.alpha * std::pow(1.0 - spec.p, static_cast<double>(spec.d_max));
    case ExcitationFamily::geometric_bench:
        return spec.alpha * std::pow(1.0 - spec.p, static_cast<double>(spec.d_max) + 1.0);
    default: break;
    }
    // Direct summation; the power law adds an integral bound for the remainder.
    double tail = 0.0;
    constexpr std::size_t kTerms = 2'000'000;
    std::size_t d = spec.d_max + 1;
    for (; d <= spec.d_max + kTerms; ++d) {
        const double term = eval_family_kernel(spec, d);
        tail += term;
        if (spec.family != ExcitationFamily::power_law && term < 1e-18 * (tail + 1e-300) &&
            static_cast<double>(d) > std::max(spec.mu1, spec.mu2)) {
            return tail;
        }
    }
    if (spec.family == ExcitationFamily::power_law) {
        tail += spec.alpha * std::pow(spec.gamma + static_cast<double>(d) - 0.5, 1.0 - spec.beta) / (spec.beta - 1.0);
    }
    return tail;
}

SimulationResult simulate_dhp(const Eigen::VectorXd& mu, const Eigen::VectorXd& kernel, const SimConfig& cfg) {
    const auto T = static_cast<std::size_t>(mu.size());
    if (T == 0 || cfg.T != T) throw ValidationError("baseline length must equal the horizon T >= 1");
    if (!(mu.array() > 0.0).all() || !mu.allFinite()) throw ValidationError("baseline must be positive and finite");
    if (!kernel.allFinite()) throw ValidationError("kernel must be finite");
    const auto D = static_cast<std::size_t>(kernel.size());

    SplitMix64 rng(cfg.seed);
    std::vector<std::int64_t> counts(T, 0);
    SimulationResult out{CountSeries({0}), Eigen::VectorXd(static_cast<Eigen::Index>(T)), mu, kernel,
                         kernel.sum(), 0.0, false};
    out.supercritical = out.kernel_mass >= 1.0;

    for (std::size_t t = 0; t < T; ++t) {
        double lambda = mu[static_cast<Eigen::Index>(t)];
        const std::size_t lags = std::min(t, D);
        for (std::size_t d = 1; d <= lags; ++d) {
            const auto n = counts[t - d];
            if (n != 0) lambda += static_cast<double>(n) * kernel[static_cast<Eigen::Index>(d - 1)];
        }
        if (!std::isfinite(lambda) || lambda > cfg.intensity_limit) {
            throw SimulationError("intensity " + std::to_string(lambda) + " exceeds the limit at t = " +
                                      std::to_string(t + 1) + " (runaway growth)",
                                  static_cast<long long>(t + 1));
        }
        lambda = std::max(lambda, 0.0);
        out.intensity[static_cast<Eigen::Index>(t)] = lambda;
        if (lambda > 0.0) {
            boost::random::poisson_distribution<std::int64_t, double> poisson(lambda);
            counts[t] = poisson(rng);
        }
    }
    out.series = CountSeries(std::move(counts), cfg.step_label);
    return out;
}

SimulationResult simulate_dhp(const BaselineFamilySpec& baseline, const ExcitationFamilySpec& excitation,
                              const SimConfig& cfg) {
    if (cfg.T == 0) throw ValidationError("horizon T must be at least 1");
    baseline.validate(cfg.T);
    excitation.validate();
    Eigen::VectorXd mu(static_cast<Eigen::Index>(cfg.T));
    for (std::size_t t = 1; t <= cfg.T; ++t) mu[static_cast<Eigen::Index>(t - 1)] = baseline(t);
    SimulationResult out = simulate_dhp(mu, family_kernel_vector(excitation), cfg);
    out.tail_mass = family_tail_mass(excitation);
    return out;
}

} // namespace gpdhp
