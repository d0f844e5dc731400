#include "gpdhp/map_inference.hpp"

#include "gpdhp/error.hpp"

#include <algorithm>
#include <cmath>

namespace gpdhp {

namespace {

void check_sizes(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts) {
    if (static_cast<std::size_t>(ell.size()) != counts.size()) {
        throw DimensionError("latent vector length " + std::to_string(ell.size()) + " != series length " +
                             std::to_string(counts.size()));
    }
}

Eigen::VectorXd centered_moving_average(std::span<const std::int64_t> counts, std::size_t window) {
    const auto n = static_cast<std::ptrdiff_t>(counts.size());
    const auto half = static_cast<std::ptrdiff_t>(window / 2);
    Eigen::VectorXd out(n);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - half);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, i + half);
        double acc = 0.0;
        for (auto j = lo; j <= hi; ++j) acc += static_cast<double>(counts[static_cast<std::size_t>(j)]);
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

} // namespace

void MapConfig::validate() const {
    if (max_newton_iter <= 0 || !(grad_tol > 0.0) || !(damping_init > 0.0) || !(likelihood_floor > 0.0) ||
        !(line_search_shrink > 0.0 && line_search_shrink < 1.0) || !(cg_tol > 0.0) || max_line_search <= 0 ||
        smoothing_window == 0) {
        throw ValidationError("invalid MAP configuration");
    }
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::stalled: return "stalled";
    case Termination::no_progress: return "no_progress";
    case Termination::max_iter: return "max_iter";
    }
    return "unknown";
}

double poisson_loglik(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts, double floor) {
    check_sizes(ell, counts);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < ell.size(); ++t) {
        const double lambda = std::max(0.0, ell[t]);
        const auto n = counts[static_cast<std::size_t>(t)];
        if (n > 0) acc += static_cast<double>(n) * std::log(std::max(lambda, floor));
        acc -= lambda;
    }
    return acc;
}

Eigen::VectorXd poisson_loglik_gradient(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                                        double floor) {
    check_sizes(ell, counts);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ell.size());
    for (Eigen::Index t = 0; t < ell.size(); ++t) {
        if (ell[t] <= 0.0) continue;
        const auto n = static_cast<double>(counts[static_cast<std::size_t>(t)]);
        g[t] = n / std::max(ell[t], floor) - 1.0;
    }
    return g;
}

Eigen::VectorXd poisson_curvature(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts, double floor) {
    check_sizes(ell, counts);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(ell.size());
    for (Eigen::Index t = 0; t < ell.size(); ++t) {
        if (ell[t] <= 0.0) continue;
        const double lambda = std::max(ell[t], floor);
        d[t] = static_cast<double>(counts[static_cast<std::size_t>(t)]) / (lambda * lambda);
    }
    return d;
}

namespace {

Eigen::VectorXd solve_prior(const Eigen::VectorXd& ell, const CollapsedKernelOperator& K,
                            const ObjectiveOptions& options) {
    auto solve = cg_solve(K, ell, options.cg);
    if (!solve.converged) {
        throw ConvergenceError("prior solve K x = ell did not converge (residual " +
                                   format_real(solve.relative_residual) + ")",
                               solve.iterations, solve.relative_residual);
    }
    return std::move(solve.x);
}

} // namespace

double map_objective(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                     const CollapsedKernelOperator& K, const ObjectiveOptions& options) {
    check_sizes(ell, counts);
    const Eigen::VectorXd dual = solve_prior(ell, K, options);
    return poisson_loglik(ell, counts, options.likelihood_floor) - 0.5 * ell.dot(dual);
}

Eigen::VectorXd map_gradient(const Eigen::VectorXd& ell, std::span<const std::int64_t> counts,
                             const CollapsedKernelOperator& K, const ObjectiveOptions& options) {
    check_sizes(ell, counts);
    return poisson_loglik_gradient(ell, counts, options.likelihood_floor) - solve_prior(ell, K, options);
}

LatentFit fit_map(std::span<const std::int64_t> counts, const CollapsedKernelOperator& K, const MapConfig& cfg) {
    cfg.validate();
    if (counts.empty()) throw ValidationError("cannot fit an empty series");
    if (counts.size() != K.size()) throw DimensionError("operator size does not match the series");
    const auto n = static_cast<Eigen::Index>(counts.size());
    const double floor = cfg.likelihood_floor;
    const Eigen::VectorXd& diagK = K.diagonal();

    LatentFit fit;

    // Start from ell = K alpha with alpha = c * y / diag(K) >= 0. K has
    // nonnegative entries, so ell(t) >= c * y(t) > 0 wherever y(t) > 0; c is
    // the Poisson-optimal scale for the resulting rate shape.
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(n);
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total > 0.0) {
        Eigen::VectorXd y = cfg.init_mode == InitMode::smoothed_counts
                                ? centered_moving_average(counts, cfg.smoothing_window)
                                : Eigen::VectorXd::Constant(n, total / static_cast<double>(n));
        alpha = y.cwiseQuotient(diagK);
        ell = K.apply(alpha);
        const double scale = total / ell.sum();
        alpha *= scale;
        ell *= scale;
    }

    auto objective = [&](const Eigen::VectorXd& l, const Eigen::VectorXd& a) {
        return poisson_loglik(l, counts, floor) - 0.5 * a.dot(l);
    };

    double value = objective(ell, alpha);
    fit.objective_trace.push_back(value);
    double damping = cfg.damping_init;
    int stalled = 0;
    CgOptions inner{cfg.cg_tol, cfg.cg_max_iter};

    Eigen::VectorXd grad = poisson_loglik_gradient(ell, counts, floor) - alpha;
    fit.termination = Termination::max_iter;

    for (int iter = 0; iter < cfg.max_newton_iter; ++iter) {
        if (grad.norm() <= cfg.grad_tol) {
            fit.termination = Termination::gradient;
            break;
        }
        ++fit.stats.newton_iterations;

        // Newton step in ell for (K^{-1} + D + damping I), written through
        // B = I + S K S with S^2 = D + damping so only K multiplies appear:
        //   step = K z,  z = g - S B^{-1} S K g.
        const Eigen::VectorXd curvature = poisson_curvature(ell, counts, floor);
        const Eigen::VectorXd s = (curvature.array() + damping).min(1e16).sqrt().matrix();
        const Eigen::VectorXd Kg = K.apply(grad);
        const Eigen::VectorXd rhs = s.cwiseProduct(Kg);
        auto B = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            return v + s.cwiseProduct(K.apply(s.cwiseProduct(v)));
        };
        const Eigen::VectorXd precond = (1.0 + s.array().square() * diagK.array()).matrix();
        const CgResult inner_solve = cg_solve(B, rhs, precond, inner);
        fit.stats.cg_iterations += inner_solve.iterations;

        const Eigen::VectorXd sy = s.cwiseProduct(inner_solve.x);
        Eigen::VectorXd z = grad - sy;
        Eigen::VectorXd step = Kg - K.apply(sy);
        double slope = grad.dot(step);
        if (!(slope > 0.0) || !std::isfinite(slope)) {
            // Inexact inner solve gave no ascent; fall back to the
            // preconditioned gradient K g.
            z = grad;
            step = Kg;
            slope = grad.dot(Kg);
        }

        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial_ell;
        Eigen::VectorXd trial_alpha;
        double trial_value = value;
        for (int ls = 0; ls < cfg.max_line_search; ++ls) {
            trial_ell = ell + t * step;
            trial_alpha = alpha + t * z;
            trial_value = objective(trial_ell, trial_alpha);
            if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= cfg.line_search_shrink;
            ++fit.stats.backtracks;
        }

        if (!accepted) {
            ++fit.stats.rejected_steps;
            damping *= 10.0;
            if (damping > 1e12) {
                fit.termination = Termination::no_progress;
                break;
            }
            continue;
        }

        const double gain = trial_value - value;
        ell = std::move(trial_ell);
        alpha = std::move(trial_alpha);
        value = trial_value;
        fit.objective_trace.push_back(value);
        grad = poisson_loglik_gradient(ell, counts, floor) - alpha;
        damping = t == 1.0 ? std::max(damping * 0.1, 1e-12) : damping * 4.0;

        if (gain <= cfg.objective_rtol * std::max(1.0, std::abs(value))) {
            if (++stalled >= cfg.stall_patience) {
                fit.termination = Termination::stalled;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    fit.grad_norm_final = grad.norm();
    if (fit.termination == Termination::max_iter && fit.grad_norm_final <= cfg.grad_tol) {
        fit.termination = Termination::gradient;
    }
    fit.converged = fit.termination == Termination::gradient || fit.termination == Termination::stalled;
    fit.stats.final_damping = damping;
    fit.ell_star = std::move(ell);
    fit.dual = std::move(alpha);
    return fit;
}

LatentFit fit_map(const CountSeries& series, const KernelHyperparams& hp, const MapConfig& cfg,
                  const OperatorOptions& options) {
    hp.validate();
    const CollapsedKernelOperator K(series.counts(), hp, options);
    return fit_map(series.counts(), K, cfg);
}

} // namespace gpdhp
