#include <doctest.h>

#include "gpdhp/error.hpp"
#include "gpdhp/simulate.hpp"

#include <cmath>

using namespace gpdhp;

namespace {

double mean_after(const CountSeries& s, std::size_t burn_in) {
    double acc = 0.0;
    for (std::size_t t = burn_in; t < s.size(); ++t) acc += static_cast<double>(s[t]);
    return acc / static_cast<double>(s.size() - burn_in);
}

} // namespace

TEST_CASE("family kernel values") {
    CHECK(eval_family_kernel(ExcitationFamilySpec::geometric(0.8, 0.5, 10), 1) == doctest::Approx(0.4));
    CHECK(eval_family_kernel(ExcitationFamilySpec::negative_binomial(1.0, 0.5, 1.0, 10), 1) ==
          doctest::Approx(0.25));
    CHECK(eval_family_kernel(ExcitationFamilySpec::power_law(20.0, 2.0, 4.0, 10), 2) ==
          doctest::Approx(0.078125).epsilon(1e-15));
    CHECK(eval_family_kernel(ExcitationFamilySpec::geometric_bench(1.0, 0.4, 10), 2) ==
          doctest::Approx(0.36 * 0.4).epsilon(1e-15));
    // 30-digit references.
    CHECK(eval_family_kernel(ExcitationFamilySpec::negative_binomial(0.6, 0.6, 2.0, 10), 3) ==
          doctest::Approx(0.055296).epsilon(1e-13));
    CHECK(eval_family_kernel(ExcitationFamilySpec::bimodal(1.5, 5.0, 20.0, 2.0, 40), 7) ==
          doctest::Approx(0.0907390217947871292).epsilon(1e-13));
    // Non-integer r goes through the gamma function.
    const auto nb = ExcitationFamilySpec::negative_binomial(1.0, 0.3, 2.5, 10);
    CHECK(eval_family_kernel(nb, 4) == doctest::Approx(0.106799030786126175).epsilon(1e-13));
}

TEST_CASE("kernel vector, mass and tail") {
    const auto g = ExcitationFamilySpec::geometric(0.9, 0.3, 20);
    const Eigen::VectorXd f = family_kernel_vector(g);
    REQUIRE(f.size() == 20);
    // alpha p sum_{d<=20} (1-p)^(d-1) = alpha (1 - (1-p)^20)
    CHECK(f.sum() == doctest::Approx(0.9 * (1.0 - std::pow(0.7, 20))).epsilon(1e-13));
    CHECK(family_tail_mass(g) == doctest::Approx(0.9 * std::pow(0.7, 20)).epsilon(1e-6));
    CHECK((f.array() > 0.0).all());
}

TEST_CASE("parameter domains") {
    CHECK_THROWS_AS(ExcitationFamilySpec::negative_binomial(0.5, 1.0, 2.0, 10).validate(), ValidationError);
    CHECK_THROWS_AS(ExcitationFamilySpec::power_law(1.0, 0.0, 1.0, 10).validate(), ValidationError);
    CHECK_THROWS_AS(ExcitationFamilySpec::bimodal(1.0, 5, 10, 0.0, 10).validate(), ValidationError);
    CHECK_THROWS_AS(ExcitationFamilySpec::geometric(0.0, 0.5, 10).validate(), ValidationError);
    CHECK(parse_excitation_family("geometric-bench") == ExcitationFamily::geometric_bench);
    CHECK(to_string(ExcitationFamily::geometric) == "geometric-sim");
    CHECK_THROWS_AS((void)parse_excitation_family("weibull"), ValidationError);

    BaselineFamilySpec mu;
    mu.a = 1.0;
    mu.b = -0.01;
    CHECK_NOTHROW(mu.validate(99));
    CHECK_THROWS_AS(mu.validate(100), ValidationError);
}

TEST_CASE("pure Poisson baseline") {
    BaselineFamilySpec mu;
    mu.a = 0.5;
    auto none = ExcitationFamilySpec::geometric(1e-300, 0.5, 1);
    SimConfig cfg;
    cfg.T = 100000;
    cfg.seed = 1;
    const auto sim = simulate_dhp(mu, none, cfg);
    const double m = mean_after(sim.series, 0);
    CHECK(std::abs(m - 0.5) <= 3.0 * std::sqrt(0.5 / 1e5));
}

TEST_CASE("stationary mean rate") {
    // Long-run variance of the count per bin is mu0 / (1 - kappa)^3 (cluster
    // sizes S with E S^2 = (1 - kappa)^-3 under Poisson offspring).
    const double mu0 = 0.4;
    for (double kappa : {0.3, 0.6}) {
        for (std::uint64_t seed : {7u, 8u}) {
            BaselineFamilySpec mu;
            mu.a = mu0;
            const auto exc = ExcitationFamilySpec::geometric(kappa, 0.4, 200);
            SimConfig cfg;
            cfg.T = 200000;
            cfg.seed = seed;
            const auto sim = simulate_dhp(mu, exc, cfg);
            const double k = sim.kernel_mass;
            const std::size_t burn = 1000;
            const double n = static_cast<double>(cfg.T - burn);
            const double se = std::sqrt(mu0 / std::pow(1.0 - k, 3) / n);
            CHECK(std::abs(mean_after(sim.series, burn) - mu0 / (1.0 - k)) <= 3.0 * se);
        }
    }
}

TEST_CASE("intensity is bounded below by the baseline") {
    BaselineFamilySpec mu;
    mu.a = 2.0;
    mu.c = 1.0;
    mu.period = 30.0;
    SimConfig cfg;
    cfg.T = 500;
    cfg.seed = 3;
    const auto sim = simulate_dhp(mu, ExcitationFamilySpec::negative_binomial(0.5, 0.5, 2.0, 50), cfg);
    for (std::size_t t = 0; t < cfg.T; ++t) {
        CHECK(sim.intensity[static_cast<Eigen::Index>(t)] >= sim.baseline[static_cast<Eigen::Index>(t)]);
        CHECK(sim.series[t] >= 0);
    }
    CHECK(sim.baseline[0] == doctest::Approx(mu(1)));
}

TEST_CASE("same seed, same series") {
    BaselineFamilySpec mu;
    SimConfig cfg;
    cfg.T = 2000;
    cfg.seed = 42;
    const auto exc = ExcitationFamilySpec::power_law(20.0, 2.0, 4.0, 100);
    const auto a = simulate_dhp(mu, exc, cfg);
    const auto b = simulate_dhp(mu, exc, cfg);
    CHECK(a.series.as_vector() == b.series.as_vector());
    cfg.seed = 43;
    CHECK(simulate_dhp(mu, exc, cfg).series.as_vector() != a.series.as_vector());
}

TEST_CASE("supercritical kernels abort with the offending time") {
    BaselineFamilySpec mu;
    mu.a = 0.5;
    SimConfig cfg;
    cfg.T = 10000;
    cfg.seed = 5;
    const auto exc = ExcitationFamilySpec::geometric(1.5, 0.5, 100);
    try {
        (void)simulate_dhp(mu, exc, cfg);
        FAIL("expected a runaway abort");
    } catch (const SimulationError& e) {
        CHECK(e.at() >= 1);
        CHECK(e.at() <= 10000);
    }
}
