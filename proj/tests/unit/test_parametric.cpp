#include <doctest.h>

#include "gpdhp/error.hpp"
#include "gpdhp/parametric.hpp"
#include "gpdhp/simulate.hpp"
#include "support.hpp"

#include <cmath>

using namespace gpdhp;

namespace {

ParametricDhpSpec linsin_spec() {
    ParametricDhpSpec s;
    s.form = BaselineForm::linear_sinusoidal;
    s.gamma0 = 1.3;
    s.gamma1 = 0.004;
    s.gamma2 = 0.6;
    s.period = 12.0;
    s.r = 1.7;
    s.p = 0.35;
    s.d_max = 20;
    return s;
}

std::vector<std::int64_t> simulate_nb(double gamma0, double r, double p, std::size_t T, std::uint64_t seed) {
    BaselineFamilySpec mu;
    mu.a = gamma0;
    SimConfig cfg;
    cfg.T = T;
    cfg.seed = seed;
    const auto sim = simulate_dhp(mu, ExcitationFamilySpec::negative_binomial(1.0, p, r, 100), cfg);
    return {sim.series.counts().begin(), sim.series.counts().end()};
}

} // namespace

TEST_CASE("kernel values") {
    CHECK(nb_kernel(2.5, 0.3, 4) == doctest::Approx(0.106799030786126175).epsilon(1e-13));
    for (std::size_t d = 1; d < 30; ++d) {
        CHECK(nb_kernel(1.0, 0.3, d) == doctest::Approx(std::pow(0.7, static_cast<double>(d)) * 0.3).epsilon(1e-13));
    }
    const Eigen::VectorXd v = nb_kernel_vector(2.0, 0.5, 200);
    CHECK(v.sum() == doctest::Approx(1.0 - 0.25).epsilon(1e-12));
}

TEST_CASE("intensity without history is the baseline") {
    ParametricDhpSpec s;
    s.gamma0 = 2.0;
    s.d_max = 5;
    const std::vector<std::int64_t> counts{3, 1, 4};
    CHECK(parametric_intensity(s, std::span<const std::int64_t>{}, std::size_t{1}) == 2.0);
    CHECK(parametric_intensity(s, counts).lambda[0] == 2.0);
}

TEST_CASE("vectorized intensity matches the double loop") {
    const auto spec = linsin_spec();
    const auto counts = testing::random_counts(50, 13);
    const Eigen::VectorXd lam = parametric_intensity(spec, counts).lambda;
    for (std::size_t t = 1; t <= 50; ++t) {
        double naive = spec.baseline(t);
        for (std::size_t d = 1; d <= std::min(t - 1, spec.d_max); ++d) {
            naive += static_cast<double>(counts[t - 1 - d]) * nb_kernel(spec.r, spec.p, d);
        }
        CHECK(std::abs(lam[static_cast<Eigen::Index>(t - 1)] - naive) <= 1e-12 * naive);
        CHECK(parametric_intensity(spec, std::span(counts).first(t - 1), t) ==
              doctest::Approx(naive).epsilon(1e-12));
    }
}

TEST_CASE("log-likelihood includes the factorial term") {
    ParametricDhpSpec s;
    s.gamma0 = 1.5;
    s.d_max = 1;
    s.p = 1.0 - 1e-12;  // negligible excitation
    const std::vector<std::int64_t> counts{0, 2, 1};
    const double expected = -1.5 + (2 * std::log(1.5) - 1.5 - std::log(2.0)) + (std::log(1.5) - 1.5);
    CHECK(parametric_loglik(s, counts) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("non-positive baselines are clamped and counted") {
    ParametricDhpSpec s;
    s.form = BaselineForm::linear;
    s.gamma0 = 1.0;
    s.gamma1 = -0.5;
    s.d_max = 1;
    const std::vector<std::int64_t> zeros(5, 0);
    const IntensityResult r = parametric_intensity(s, zeros, 1e-10);
    CHECK(r.clamped == 4);  // mu(2) = 0 counts as non-positive
    CHECK(r.lambda[4] == doctest::Approx(1e-10));
}

TEST_CASE("reparameterization round trip") {
    for (auto form : {BaselineForm::constant, BaselineForm::linear, BaselineForm::sinusoidal,
                      BaselineForm::linear_sinusoidal}) {
        ParametricDhpSpec s = linsin_spec();
        s.form = form;
        if (form == BaselineForm::constant) s.gamma1 = s.gamma2 = 0.0;
        if (form == BaselineForm::linear || form == BaselineForm::sinusoidal) s.gamma2 = 0.0;
        const ParametricDhpSpec back = constrain(unconstrain(s, 700.0), s, 700.0);
        CHECK(std::abs(back.gamma0 - s.gamma0) <= 1e-12 * s.gamma0);
        CHECK(std::abs(back.gamma1 - s.gamma1) <= 1e-12 * std::max(1.0, std::abs(s.gamma1)));
        CHECK(std::abs(back.gamma2 - s.gamma2) <= 1e-12);
        CHECK(std::abs(back.r - s.r) <= 1e-12 * s.r);
        CHECK(std::abs(back.p - s.p) <= 1e-12);
        CHECK(unconstrain(s).size() == static_cast<Eigen::Index>(baseline_coefficient_count(form) + 2));
        CHECK(parse_baseline_form(to_string(form)) == form);
    }
}

TEST_CASE("analytic gradient agrees with central differences") {
    const auto spec = linsin_spec();
    const auto counts = testing::random_counts(300, 77);
    const double scale = 300.0;
    const Eigen::VectorXd theta = unconstrain(spec, scale);
    const LoglikGradient g = parametric_loglik_gradient(theta, spec, counts, scale);
    CHECK(g.value == doctest::Approx(parametric_loglik(spec, counts)).epsilon(1e-12));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd up = theta, dn = theta;
        up[i] += h;
        dn[i] -= h;
        const double fd = (parametric_loglik(constrain(up, spec, scale), counts) -
                           parametric_loglik(constrain(dn, spec, scale), counts)) /
                          (2.0 * h);
        CHECK(g.gradient[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("maximum likelihood recovers a constant-baseline process") {
    ParametricFitOptions opt;
    opt.d_max = 100;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        CAPTURE(seed);
        const auto counts = simulate_nb(1.0, 2.0, 0.5, 8000, seed);
        const ParametricFit fit = fit_parametric_mle(counts, BaselineForm::constant, 52.0, opt);
        CHECK(std::abs(fit.spec.gamma0 - 1.0) <= 0.15);
        CHECK(std::abs(fit.spec.r - 2.0) <= 0.15 * 2.0);
        CHECK(std::abs(fit.spec.p - 0.5) <= 0.15 * 0.5);
        CHECK(fit.grad_norm < 1e-5);

        ParametricDhpSpec truth = fit.spec;
        truth.gamma0 = 1.0;
        truth.r = 2.0;
        truth.p = 0.5;
        CHECK(fit.loglik >= parametric_loglik(truth, counts));
        CHECK(fit.loglik == doctest::Approx(parametric_loglik(fit.spec, counts)).epsilon(1e-12));
        CHECK((parametric_intensity(fit.spec, counts).lambda.array() > 0.0).all());
    }
}

TEST_CASE("excitation-free data gives a small kernel mass") {
    BaselineFamilySpec mu;
    mu.a = 2.0;
    SimConfig cfg;
    cfg.T = 5000;
    cfg.seed = 9;
    const auto sim = simulate_dhp(mu, ExcitationFamilySpec::geometric(1e-300, 0.5, 1), cfg);
    const auto counts = sim.series.counts();
    ParametricFitOptions opt;
    opt.d_max = 50;
    const ParametricFit fit = fit_parametric_mle(counts, BaselineForm::constant, 52.0, opt);
    CHECK(nb_kernel_vector(fit.spec.r, fit.spec.p, fit.spec.d_max).sum() < 0.05);
}

TEST_CASE("every form fits and the best start is reported") {
    BaselineFamilySpec mu;
    mu.a = 1.0;
    mu.b = 2e-4;
    mu.c = 0.5;
    mu.period = 52.0;
    SimConfig cfg;
    cfg.T = 2000;
    cfg.seed = 12;
    const auto sim = simulate_dhp(mu, ExcitationFamilySpec::negative_binomial(1.0, 0.6, 2.0, 60), cfg);
    const auto counts = sim.series.counts();
    ParametricFitOptions opt;
    opt.d_max = 60;
    double previous = -std::numeric_limits<double>::infinity();
    for (auto form : {BaselineForm::constant, BaselineForm::linear, BaselineForm::linear_sinusoidal}) {
        const ParametricFit fit = fit_parametric_mle(counts, form, 52.0, opt);
        CHECK(fit.starts.size() == 8);
        CHECK(fit.starts[static_cast<std::size_t>(fit.best_start)].ok);
        CHECK(fit.spec.form == form);
        // Nested forms: more coefficients never lower the maximum.
        CHECK(fit.loglik >= previous - 1e-6);
        previous = fit.loglik;
    }
    const ParametricFit again = fit_parametric_mle(counts, BaselineForm::linear_sinusoidal, 52.0, opt);
    CHECK(again.loglik == previous);
}

TEST_CASE("validation") {
    CHECK_THROWS_AS((void)fit_parametric_mle(std::vector<std::int64_t>{}, BaselineForm::constant, 52.0),
                    ValidationError);
    ParametricDhpSpec s;
    s.p = 1.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK_THROWS_AS((void)parse_baseline_form("quadratic"), ValidationError);
}
