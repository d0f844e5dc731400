#include "gpdhp/decompose.hpp"

#include "gpdhp/error.hpp"
#include "gpdhp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/random/normal_distribution.hpp>

namespace gpdhp {

double branching_ratio(const Eigen::VectorXd& f_hat) noexcept {
    return f_hat.cwiseMax(0.0).sum();
}

Decomposition project_dual(const Eigen::VectorXd& ell_star, const Eigen::VectorXd& dual,
                           const CollapsedKernelOperator& K) {
    if (static_cast<std::size_t>(ell_star.size()) != K.size() || dual.size() != ell_star.size()) {
        throw DimensionError("projection inputs do not match the operator size");
    }
    if (!ell_star.allFinite() || !dual.allFinite()) throw ValidationError("latent intensity must be finite");
    Decomposition out;
    out.b_hat = K.baseline().apply(dual);
    out.f_hat = K.excitation().apply(K.design().apply_transpose(dual));
    out.kappa_hat = branching_ratio(out.f_hat);
    out.unstable = out.kappa_hat >= 1.0;
    out.min_value = 0.5 * ell_star.dot(dual);
    const double scale = ell_star.norm();
    const double gap = (ell_star - out.b_hat - K.design().apply(out.f_hat)).norm();
    out.reconstruction_residual = scale > 0.0 ? gap / scale : gap;
    return out;
}

Decomposition project_components(const Eigen::VectorXd& ell_star, const CollapsedKernelOperator& K,
                                 const CgOptions& options) {
    if (static_cast<std::size_t>(ell_star.size()) != K.size()) throw DimensionError("latent length mismatch");
    if (!ell_star.allFinite()) throw ValidationError("latent intensity must be finite");
    const CgResult solve = cg_solve(K, ell_star, options);
    if (!solve.converged) {
        throw ConvergenceError("projection solve K x = ell did not converge (residual " +
                                   format_real(solve.relative_residual) + ")",
                               solve.iterations, solve.relative_residual);
    }
    return project_dual(ell_star, solve.x, K);
}

Decomposition project_components(const LatentFit& fit, const CollapsedKernelOperator& K) {
    return project_dual(fit.ell_star, fit.dual, K);
}

double decomposition_energy(const Eigen::VectorXd& b, const Eigen::VectorXd& f, const Eigen::MatrixXd& Kb,
                            const Eigen::MatrixXd& Kf) {
    const Eigen::LDLT<Eigen::MatrixXd> lb(Kb);
    const Eigen::LDLT<Eigen::MatrixXd> lf(Kf);
    return 0.5 * b.dot(lb.solve(b)) + 0.5 * f.dot(lf.solve(f));
}

Eigen::VectorXd row_quantile(const Eigen::MatrixXd& samples, double q) {
    const auto n = samples.cols();
    Eigen::VectorXd out(samples.rows());
    if (n == 0) return out.setConstant(std::nan(""));
    std::vector<double> row(static_cast<std::size_t>(n));
    const double h = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, static_cast<std::size_t>(n - 1));
    const double frac = h - static_cast<double>(lo);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = samples(i, j);
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(lo), row.end());
        const double a = row[lo];
        double b = a;
        if (hi != lo) b = *std::min_element(row.begin() + static_cast<std::ptrdiff_t>(hi), row.end());
        out[i] = a + frac * (b - a);
    }
    return out;
}

namespace {

Eigen::VectorXd curvature_root(const LatentFit& fit, std::span<const std::int64_t> counts, double floor) {
    return poisson_curvature(fit.ell_star, counts, floor).cwiseSqrt();
}

// K_f as the operator applies it (SKI or exact), as a dense symmetric matrix.
Eigen::MatrixXd excitation_matrix(const ExcitationOperator& Kf) {
    const auto D = static_cast<Eigen::Index>(Kf.size());
    if (Kf.mode() == ExcitationMode::exact) return Kf.exact_matrix().selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd M(D, D);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(D);
    for (Eigen::Index j = 0; j < D; ++j) {
        e[j] = 1.0;
        M.col(j) = Kf.apply(e);
        e[j] = 0.0;
    }
    return 0.5 * (M + M.transpose());
}

Eigen::MatrixXd psd_root(const Eigen::MatrixXd& A) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(Eigen::MatrixXd A, const char* what) {
    const double base = A.diagonal().mean();
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success) return llt;
        const double next = jitter == 0.0 ? 1e-12 * base : jitter * 10.0;
        A.diagonal().array() += next - jitter;
        jitter = next;
    }
    throw ConvergenceError(std::string("Cholesky factorization failed for ") + what, 0, 0.0);
}

struct DenseSystem {
    Eigen::MatrixXd Kb;
    Eigen::MatrixXd Kf;
    Eigen::MatrixXd X;
    Eigen::MatrixXd K;
};

DenseSystem dense_system(const CollapsedKernelOperator& K, std::size_t cap) {
    DenseSystem sys;
    const std::size_t T = K.size();
    sys.Kb = build_dense_baseline(T, K.hyperparams().baseline, cap);
    sys.Kf = excitation_matrix(K.excitation());
    sys.X = K.design().to_dense(cap);
    const Eigen::MatrixXd XKf = sys.X * sys.Kf;
    sys.K = sys.Kb;
    sys.K.noalias() += XKf * sys.X.transpose();
    return sys;
}

void fill_normal(SplitMix64& rng, Eigen::Ref<Eigen::VectorXd> out) {
    boost::random::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
}

ComponentSamples dense_samples(const LatentFit& fit, const Eigen::VectorXd& s, const CollapsedKernelOperator& K,
                               const LaplaceOptions& opt) {
    const auto T = static_cast<Eigen::Index>(K.size());
    const DenseSystem sys = dense_system(K, opt.dense_cap);
    const auto LK = robust_cholesky(sys.K, "the prior covariance");
    Eigen::MatrixXd B = s.asDiagonal() * sys.K * s.asDiagonal();
    B.diagonal().array() += 1.0;
    const auto LB = robust_cholesky(std::move(B), "I + S K S");

    const Eigen::Index n = opt.n_samples;
    Eigen::MatrixXd Z(T, n);
    Eigen::MatrixXd E(T, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        SplitMix64 rng = SplitMix64::derive(opt.seed, static_cast<std::uint64_t>(j));
        fill_normal(rng, Z.col(j));
        fill_normal(rng, E.col(j));
    }
    // v = L^{-T} z ~ N(0, K^{-1}) and K v = L z.
    Eigen::MatrixXd V = LK.matrixU().solve(Z);
    Eigen::MatrixXd rhs = s.asDiagonal() * (LK.matrixL() * Z);
    rhs += E;
    const Eigen::MatrixXd Y = LB.solve(rhs);
    V -= s.asDiagonal() * Y;
    V.colwise() += fit.dual;

    ComponentSamples out;
    out.dense_path = true;
    out.b = sys.Kb * V;
    out.f = sys.Kf * (sys.X.transpose() * V);
    return out;
}

// Exact draws from the baseline prior: the periodic part through its Fourier
// series e^{z cos w} = I_0(z) + 2 sum I_n(z) cos(n w) with z = 1 / ell_per^2,
// plus the rank-one linear and constant parts and jitter.
class BaselineSampler {
public:
    BaselineSampler(std::size_t T, const BaselineKernelParams& p) : T_(T), p_(p) {
        const double z = 1.0 / (p.ell_per * p.ell_per);
        const double s2 = p.sigma_per * p.sigma_per;
        const double c0 = s2 * boost::math::cyl_bessel_i(0, z) * std::exp(-z);
        if (!std::isfinite(c0)) throw ValidationError("periodic length scale too small to sample");
        coeffs_.push_back(c0);
        for (int n = 1; n < 20000; ++n) {
            const double cn = 2.0 * s2 * boost::math::cyl_bessel_i(n, z) * std::exp(-z);
            if (!(cn > 1e-18 * (c0 + 1e-300))) break;
            coeffs_.push_back(cn);
        }
    }

    Eigen::VectorXd draw(SplitMix64& rng) const {
        boost::random::normal_distribution<double> normal;
        const auto T = static_cast<Eigen::Index>(T_);
        Eigen::VectorXd out = Eigen::VectorXd::Constant(T, std::sqrt(coeffs_[0]) * normal(rng));
        const double w = 2.0 * M_PI / p_.period;
        for (std::size_t n = 1; n < coeffs_.size(); ++n) {
            const double a = std::sqrt(coeffs_[n]) * normal(rng);
            const double b = std::sqrt(coeffs_[n]) * normal(rng);
            for (Eigen::Index t = 0; t < T; ++t) {
                const double phase = w * static_cast<double>(n) * static_cast<double>(t + 1);
                out[t] += a * std::cos(phase) + b * std::sin(phase);
            }
        }
        const double lin = p_.sigma_lin * normal(rng);
        const double cst = p_.sigma_const * normal(rng);
        for (Eigen::Index t = 0; t < T; ++t) {
            out[t] += lin * static_cast<double>(t + 1) + cst + p_.eps_b * normal(rng);
        }
        return out;
    }

private:
    std::size_t T_;
    BaselineKernelParams p_;
    std::vector<double> coeffs_;
};

ComponentSamples iterative_samples(const LatentFit& fit, const Eigen::VectorXd& s,
                                   const CollapsedKernelOperator& K, const LaplaceOptions& opt) {
    const auto T = static_cast<Eigen::Index>(K.size());
    const auto D = static_cast<Eigen::Index>(K.excitation().size());
    const BaselineSampler baseline(K.size(), K.hyperparams().baseline);
    const Eigen::MatrixXd kf_root = psd_root(excitation_matrix(K.excitation()));
    const Eigen::VectorXd precond_B = (1.0 + s.array().square() * K.diagonal().array()).matrix();
    const LinearMap B = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return v + s.cwiseProduct(K.apply(s.cwiseProduct(v)));
    };

    ComponentSamples out;
    out.b.resize(T, opt.n_samples);
    out.f.resize(D, opt.n_samples);
    std::vector<char> failed(static_cast<std::size_t>(opt.n_samples), 0);

    auto draw = [&](int j) {
        SplitMix64 rng = SplitMix64::derive(opt.seed, static_cast<std::uint64_t>(j));
        Eigen::VectorXd zf(kf_root.cols());
        fill_normal(rng, zf);
        // u ~ N(0, K) as b_s + X f_s.
        Eigen::VectorXd u = baseline.draw(rng) + K.design().apply(kf_root * zf);
        Eigen::VectorXd e(T);
        fill_normal(rng, e);
        const CgResult v = cg_solve(K, u, opt.cg);
        const CgResult y = cg_solve(B, s.cwiseProduct(u) + e, precond_B, opt.cg);
        if (!v.converged || !y.converged) failed[static_cast<std::size_t>(j)] = 1;
        const Eigen::VectorXd dual = fit.dual + v.x - s.cwiseProduct(y.x);
        out.b.col(j) = K.baseline().apply(dual);
        out.f.col(j) = K.excitation().apply(K.design().apply_transpose(dual));
    };

    const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int j = static_cast<int>(w); j < opt.n_samples; j += static_cast<int>(workers)) draw(j);
        });
    }
    for (auto& th : pool) th.join();
    out.failed = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    return out;
}

} // namespace

ComponentSamples laplace_component_samples(const LatentFit& fit, std::span<const std::int64_t> counts,
                                           const CollapsedKernelOperator& K, const LaplaceOptions& options) {
    if (options.n_samples <= 0) throw ValidationError("n_samples must be positive");
    if (counts.size() != K.size() || static_cast<std::size_t>(fit.ell_star.size()) != K.size() ||
        fit.dual.size() != fit.ell_star.size()) {
        throw DimensionError("fit, counts and operator sizes disagree");
    }
    const Eigen::VectorXd s = curvature_root(fit, counts, options.likelihood_floor);
    if (!options.force_iterative && K.size() <= options.dense_cap && K.excitation().size() <= options.dense_cap) {
        return dense_samples(fit, s, K, options);
    }
    return iterative_samples(fit, s, K, options);
}

LaplaceBands laplace_bands(const LatentFit& fit, std::span<const std::int64_t> counts,
                           const CollapsedKernelOperator& K, const LaplaceOptions& options) {
    LaplaceBands bands;
    if (!fit.converged) bands.warnings.push_back("MAP fit did not converge; bands are centred on the last iterate");
    const ComponentSamples draws = laplace_component_samples(fit, counts, K, options);
    bands.dense_path = draws.dense_path;
    bands.sample_count = static_cast<int>(draws.b.cols());
    bands.failed_samples = draws.failed;
    if (draws.failed > 0) {
        bands.warnings.push_back(std::to_string(draws.failed) +
                                 " draws used unconverged CG solves; bands may be distorted");
    }
    auto summarize = [](const Eigen::MatrixXd& m, Eigen::VectorXd& lo, Eigen::VectorXd& hi, Eigen::VectorXd& mean,
                        Eigen::VectorXd& sd) {
        lo = row_quantile(m, 0.025);
        hi = row_quantile(m, 0.975);
        mean = m.rowwise().mean();
        const double denom = std::max<double>(1.0, static_cast<double>(m.cols() - 1));
        sd = ((m.colwise() - mean).array().square().rowwise().sum() / denom).sqrt().matrix();
    };
    summarize(draws.b, bands.b_lower, bands.b_upper, bands.b_mean, bands.b_sd);
    summarize(draws.f, bands.f_lower, bands.f_upper, bands.f_mean, bands.f_sd);
    return bands;
}

ProjectedVariance projected_marginal_variance(const LatentFit& fit, std::span<const std::int64_t> counts,
                                              const CollapsedKernelOperator& K, double likelihood_floor) {
    if (counts.size() != K.size()) throw DimensionError("counts and operator sizes disagree");
    const Eigen::VectorXd s = curvature_root(fit, counts, likelihood_floor);
    const DenseSystem sys = dense_system(K, kDefaultDenseCap);
    const auto LK = robust_cholesky(sys.K, "the prior covariance");
    Eigen::MatrixXd B = s.asDiagonal() * sys.K * s.asDiagonal();
    B.diagonal().array() += 1.0;
    const auto LB = robust_cholesky(std::move(B), "I + S K S");

    // Cov(q) = K^{-1} - S B^{-1} S, so for G = [K_b; K_f X^T]
    // diag(G Cov G^T) = colnorms(L_K^{-1} G^T)^2 - colnorms(L_B^{-1} S G^T)^2.
    auto marginals = [&](const Eigen::MatrixXd& Gt) {
        const Eigen::MatrixXd a = LK.matrixL().solve(Gt);
        const Eigen::MatrixXd b = LB.matrixL().solve(s.asDiagonal() * Gt);
        return Eigen::VectorXd(a.colwise().squaredNorm().transpose() - b.colwise().squaredNorm().transpose());
    };
    ProjectedVariance out;
    out.b = marginals(sys.Kb);
    out.f = marginals(sys.X * sys.Kf);
    return out;
}

} // namespace gpdhp
