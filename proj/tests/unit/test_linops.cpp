#include <doctest.h>

#include "gpdhp/error.hpp"
#include "gpdhp/linops.hpp"
#include "support.hpp"

using namespace gpdhp;
using testing::random_counts;
using testing::random_vector;
using testing::rel_err;

namespace {

KernelHyperparams hyper(std::size_t d_max, double beta = 0.2) {
    KernelHyperparams hp;
    hp.baseline.sigma_per = 1.0;
    hp.baseline.ell_per = 5.0;
    hp.baseline.period = 52.0;
    hp.baseline.sigma_lin = 1e-2;
    hp.excitation.sigma_f = 1.0;
    hp.excitation.ell_f = 10.0;
    hp.excitation.beta = beta;
    hp.excitation.d_max = d_max;
    return hp;
}

Eigen::MatrixXd columns_of(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, Eigen::Index n) {
    Eigen::MatrixXd M(op(Eigen::VectorXd::Zero(n)).size(), n);
    for (Eigen::Index j = 0; j < n; ++j) M.col(j) = op(Eigen::VectorXd::Unit(n, j));
    return M;
}

} // namespace

TEST_CASE("lag design matches its dense form") {
    const auto counts = random_counts(97, 3);
    const LagDesignOperator X(counts, 20);
    const Eigen::MatrixXd dense = X.to_dense();
    CHECK(X.entry(1, 1) == 0.0);
    CHECK(X.entry(5, 2) == static_cast<double>(counts[2]));
    const Eigen::VectorXd v = random_vector(20, 5);
    const Eigen::VectorXd w = random_vector(97, 6);
    CHECK(rel_err(X.apply(v), dense * v) < 1e-13);
    CHECK(rel_err(X.apply_transpose(w), dense.transpose() * w) < 1e-13);
}

TEST_CASE("lag design adjointness on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t T = 30 + 17 * seed;
        const std::size_t D = 1 + (seed * 7) % (T - 1);
        const auto counts = random_counts(T, 100 + seed);
        const LagDesignOperator X(counts, D);
        const Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(D), 200 + seed);
        const Eigen::VectorXd w = random_vector(static_cast<Eigen::Index>(T), 300 + seed);
        const double lhs = X.apply(v).dot(w);
        const double rhs = v.dot(X.apply_transpose(w));
        CHECK(std::abs(lhs - rhs) <= 1e-11 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("all-zero counts give a zero design") {
    const std::vector<std::int64_t> zeros(40, 0);
    const LagDesignOperator X(zeros, 10);
    CHECK(X.apply(Eigen::VectorXd::Ones(10)).isZero(0.0));
    CHECK(X.apply_transpose(Eigen::VectorXd::Ones(40)).isZero(0.0));
}

TEST_CASE("baseline operator matches dense kernel") {
    auto hp = hyper(10);
    hp.baseline.sigma_const = 0.2;
    const BaselineOperator Kb(150, hp.baseline);
    const Eigen::MatrixXd dense = build_dense_baseline(150, hp.baseline);
    const Eigen::VectorXd v = random_vector(150, 9);
    CHECK(rel_err(Kb.apply(v), dense * v) < 1e-12);
    CHECK(rel_err(Kb.diagonal(), dense.diagonal()) < 1e-15);
}

TEST_CASE("SKI with coincident knots is exact") {
    // beta = 0 makes the warp linear in d, so M = D knots sit on the lags.
    auto p = hyper(40, 0.0).excitation;
    const SkiOperator ski = build_ski(p, 40);
    const Eigen::MatrixXd exact = build_dense_warped_rbf(p);
    CHECK(rel_err(ski.approximate_gram(), exact) < 1e-12);
    for (const auto& row : ski.rows()) CHECK(row.count == 1);
}

TEST_CASE("SKI interpolation rows sum to one and approximate the gram") {
    const auto p = hyper(365, 0.2).excitation;
    const SkiOperator ski = build_ski(p, default_inducing_points(p.d_max));
    const Eigen::MatrixXd W = ski.interpolation_matrix();
    CHECK((W.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd exact = build_dense_warped_rbf(p);
    CHECK((ski.approximate_gram() - exact).cwiseAbs().maxCoeff() < 1e-3);
    const Eigen::VectorXd v = random_vector(365, 4);
    CHECK(rel_err(ski.apply(v), ski.approximate_gram() * v) < 1e-12);
    CHECK_THROWS_AS((void)build_ski(p, 3), ValidationError);
}

TEST_CASE("collapsed operator equals the dense prior in the exact configurations") {
    for (std::size_t T : {64u, 128u, 256u}) {
        const auto counts = random_counts(T, T);
        const std::size_t D = std::min<std::size_t>(T - 1, 60);
        const Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(T), T + 1);

        const auto hp0 = hyper(D, 0.0);
        const Eigen::MatrixXd dense0 = build_dense_collapsed(counts, hp0);
        const CollapsedKernelOperator ski(counts, hp0, {ExcitationMode::ski, D});
        CHECK(rel_err(ski.apply(v), dense0 * v) < 1e-10);

        const auto hp = hyper(D, 0.3);
        const Eigen::MatrixXd dense = build_dense_collapsed(counts, hp);
        const CollapsedKernelOperator exact(counts, hp, {ExcitationMode::exact});
        CHECK(rel_err(exact.apply(v), dense * v) < 1e-10);
        CHECK(rel_err(exact.diagonal(), dense.diagonal()) < 1e-12);
        CHECK(rel_err(ski.diagonal(), dense0.diagonal()) < 1e-12);
    }
}

TEST_CASE("collapsed operator is symmetric") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t T = 100 + 13 * seed;
        const auto counts = random_counts(T, seed);
        const CollapsedKernelOperator K(counts, hyper(std::min<std::size_t>(T - 1, 80), 0.1 + 0.01 * seed));
        const Eigen::VectorXd u = random_vector(static_cast<Eigen::Index>(T), 10 + seed);
        const Eigen::VectorXd w = random_vector(static_cast<Eigen::Index>(T), 40 + seed);
        const double a = K.apply(u).dot(w);
        const double b = u.dot(K.apply(w));
        CHECK(std::abs(a - b) <= 1e-10 * (1.0 + std::abs(a)));
    }
}

TEST_CASE("collapsed SKI operator is close to the dense prior") {
    const auto counts = random_counts(300, 77);
    const auto hp = hyper(120, 0.2);
    const CollapsedKernelOperator K(counts, hp);
    const Eigen::MatrixXd dense = build_dense_collapsed(counts, hp);
    const Eigen::MatrixXd approx = columns_of([&](const Eigen::VectorXd& v) { return K.apply(v); }, 300);
    CHECK(rel_err(approx, dense) < 1e-3);
}

TEST_CASE("no events reduces the prior to the baseline kernel") {
    const std::vector<std::int64_t> zeros(64, 0);
    const auto hp = hyper(30);
    const CollapsedKernelOperator K(zeros, hp);
    const Eigen::VectorXd v = random_vector(64, 1);
    CHECK(rel_err(K.apply(v), BaselineOperator(64, hp.baseline).apply(v)) < 1e-15);
}

TEST_CASE("conjugate gradients") {
    // Generous jitter keeps cond(K) near 4e5, so a 1e-10 residual on a generic
    // right-hand side is reachable; at 1e-4 jitter cond(K) reaches 1e12. The
    // default cap of 10 sqrt(T) + 100 iterations is too few here (about 370).
    const auto counts = random_counts(128, 8);
    auto hp = hyper(60, 0.2);
    hp.baseline.eps_b = 0.3;
    hp.excitation.eps_f = 0.3;
    const CollapsedKernelOperator K(counts, hp, {ExcitationMode::exact});
    const Eigen::MatrixXd dense = build_dense_collapsed(counts, hp);
    const Eigen::VectorXd b = random_vector(128, 2);
    const CgResult res = cg_solve(K, b, {1e-10, 1000});
    CHECK(res.converged);
    CHECK((K.apply(res.x) - b).norm() / b.norm() <= 1e-10);
    CHECK(rel_err(res.x, dense.llt().solve(b)) < 1e-9);

    const CgResult zero = cg_solve(K, Eigen::VectorXd::Zero(128));
    CHECK(zero.converged);
    CHECK(zero.iterations == 0);
    CHECK(zero.x.isZero(0.0));

    const CgResult capped = cg_solve(K, b, {1e-14, 3});
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations <= 3);
    CHECK(default_cg_max_iter(10000) == 1100);
}

TEST_CASE("CG on a jitter-only operator divides by the diagonal") {
    const Eigen::VectorXd diag = Eigen::VectorXd::LinSpaced(50, 1.0, 5.0);
    const LinearMap op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return diag.cwiseProduct(v); };
    const Eigen::VectorXd b = random_vector(50, 3);
    const CgResult res = cg_solve(op, b, diag);
    CHECK(res.iterations <= 1);
    CHECK(rel_err(res.x, b.cwiseQuotient(diag)) < 1e-14);
}

TEST_CASE("lag design small example") {
    const std::vector<std::int64_t> counts{2, 0, 3};
    const LagDesignOperator X(counts, 2);
    const Eigen::VectorXd w = X.apply(Eigen::VectorXd::Ones(2));
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[1] == doctest::Approx(2.0));
    CHECK(w[2] == doctest::Approx(2.0));
}

TEST_CASE("SKI error shrinks as the grid grows") {
    ExcitationKernelParams p;
    p.beta = 0.1;
    p.ell_f = 10.0;
    p.d_max = 64;
    const Eigen::MatrixXd exact = build_dense_warped_rbf(p);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t M : {8u, 16u, 32u, 64u}) {
        const double err = (build_ski(p, M).approximate_gram() - exact).cwiseAbs().maxCoeff();
        CHECK(err < previous);
        previous = err;
    }
}

TEST_CASE("half-size SKI grid stays within 1e-3 of the dense prior") {
    const auto counts = random_counts(256, 256);
    const auto hp = hyper(100, 0.1);
    const CollapsedKernelOperator K(counts, hp, {ExcitationMode::ski, 50});
    const Eigen::MatrixXd dense = build_dense_collapsed(counts, hp);
    const Eigen::VectorXd v = random_vector(256, 5);
    CHECK(rel_err(K.apply(v), dense * v) < 1e-3);
}

TEST_CASE("dimension checks") {
    const auto counts = random_counts(50, 1);
    const CollapsedKernelOperator K(counts, hyper(10));
    CHECK_THROWS_AS((void)K.apply(Eigen::VectorXd::Zero(49)), DimensionError);
    CHECK_THROWS_AS((void)K.design().apply(Eigen::VectorXd::Zero(9)), DimensionError);
}
