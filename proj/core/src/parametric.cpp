#include "gpdhp/parametric.hpp"

#include "gpdhp/error.hpp"
#include "gpdhp/kernels.hpp"
#include "gpdhp/linops.hpp"
#include "gpdhp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/special_functions/digamma.hpp>

namespace gpdhp {

std::string to_string(BaselineForm form) {
    switch (form) {
    case BaselineForm::constant: return "const";
    case BaselineForm::linear: return "linear";
    case BaselineForm::sinusoidal: return "sin";
    case BaselineForm::linear_sinusoidal: return "linsin";
    }
    return "unknown";
}

BaselineForm parse_baseline_form(const std::string& name) {
    if (name == "const" || name == "constant") return BaselineForm::constant;
    if (name == "linear") return BaselineForm::linear;
    if (name == "sin" || name == "sinusoidal") return BaselineForm::sinusoidal;
    if (name == "linsin" || name == "linear_sinusoidal") return BaselineForm::linear_sinusoidal;
    throw ValidationError("unknown baseline form '" + name + "'");
}

std::size_t baseline_coefficient_count(BaselineForm form) noexcept {
    switch (form) {
    case BaselineForm::constant: return 1;
    case BaselineForm::linear:
    case BaselineForm::sinusoidal: return 2;
    case BaselineForm::linear_sinusoidal: return 3;
    }
    return 1;
}

void ParametricDhpSpec::validate() const {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("NB dispersion r must be positive");
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("NB decay p must lie in (0, 1)");
    if (!(period > 0.0)) throw ValidationError("period must be positive");
    if (d_max == 0) throw ValidationError("d_max must be at least 1");
    if (!std::isfinite(gamma0) || !std::isfinite(gamma1) || !std::isfinite(gamma2)) {
        throw ValidationError("baseline coefficients must be finite");
    }
}

double ParametricDhpSpec::baseline(std::size_t t) const noexcept {
    const double x = static_cast<double>(t);
    const double s = std::sin(2.0 * std::numbers::pi * x / period);
    switch (form) {
    case BaselineForm::constant: return gamma0;
    case BaselineForm::linear: return gamma0 + gamma1 * x;
    case BaselineForm::sinusoidal: return gamma0 + gamma1 * s;
    case BaselineForm::linear_sinusoidal: return gamma0 + gamma1 * x + gamma2 * s;
    }
    return gamma0;
}

double nb_kernel(double r, double p, std::size_t d) {
    const double x = static_cast<double>(d);
    return std::exp(std::lgamma(x + r) - std::lgamma(r) - std::lgamma(x + 1.0) + x * std::log1p(-p) + r * std::log(p));
}

Eigen::VectorXd nb_kernel_vector(double r, double p, std::size_t d_max) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(d_max));
    for (std::size_t d = 1; d <= d_max; ++d) phi[static_cast<Eigen::Index>(d - 1)] = nb_kernel(r, p, d);
    return phi;
}

namespace {

std::size_t effective_dmax(std::size_t d_max, std::size_t T) {
    return std::max<std::size_t>(1, std::min(d_max, T > 1 ? T - 1 : 1));
}

} // namespace

IntensityResult parametric_intensity(const ParametricDhpSpec& spec, std::span<const std::int64_t> counts,
                                     double floor) {
    spec.validate();
    IntensityResult out;
    const auto T = counts.size();
    if (T == 0) return out;
    const LagDesignOperator X(counts, effective_dmax(spec.d_max, T));
    out.lambda = X.apply(nb_kernel_vector(spec.r, spec.p, X.cols()));
    for (std::size_t t = 1; t <= T; ++t) {
        double mu = spec.baseline(t);
        if (!(mu > 0.0)) {
            mu = floor;
            ++out.clamped;
        }
        auto& l = out.lambda[static_cast<Eigen::Index>(t - 1)];
        l = std::max(l, 0.0) + mu;
    }
    return out;
}

double parametric_intensity(const ParametricDhpSpec& spec, std::span<const std::int64_t> history, std::size_t t,
                            double floor) {
    spec.validate();
    if (t == 0 || history.size() + 1 < t) throw ValidationError("time index outside the available history");
    double mu = spec.baseline(t);
    if (!(mu > 0.0)) mu = floor;
    double acc = 0.0;
    const std::size_t lags = std::min(t - 1, spec.d_max);
    for (std::size_t d = 1; d <= lags; ++d) {
        const auto n = history[t - 1 - d];
        if (n != 0) acc += static_cast<double>(n) * nb_kernel(spec.r, spec.p, d);
    }
    return mu + acc;
}

double parametric_loglik(const ParametricDhpSpec& spec, std::span<const std::int64_t> counts, double floor) {
    const IntensityResult lam = parametric_intensity(spec, counts, floor);
    double ll = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double l = std::max(lam.lambda[static_cast<Eigen::Index>(t)], floor);
        const auto n = static_cast<double>(counts[t]);
        ll += (counts[t] > 0 ? n * std::log(l) : 0.0) - l - std::lgamma(n + 1.0);
    }
    return ll;
}

namespace {

bool has_slope(BaselineForm f) {
    return f == BaselineForm::linear || f == BaselineForm::linear_sinusoidal;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

} // namespace

Eigen::VectorXd unconstrain(const ParametricDhpSpec& spec, double slope_scale) {
    spec.validate();
    if (!(spec.gamma0 > 0.0)) throw ValidationError("gamma0 must be positive in the log parameterization");
    Eigen::VectorXd theta(static_cast<Eigen::Index>(baseline_coefficient_count(spec.form) + 2));
    Eigen::Index k = 0;
    theta[k++] = std::log(spec.gamma0);
    if (spec.form == BaselineForm::linear) theta[k++] = spec.gamma1 * slope_scale;
    if (spec.form == BaselineForm::sinusoidal) theta[k++] = spec.gamma1;
    if (spec.form == BaselineForm::linear_sinusoidal) {
        theta[k++] = spec.gamma1 * slope_scale;
        theta[k++] = spec.gamma2;
    }
    theta[k++] = std::log(spec.r);
    theta[k++] = logit(spec.p);
    return theta;
}

ParametricDhpSpec constrain(const Eigen::VectorXd& theta, const ParametricDhpSpec& shape, double slope_scale) {
    const auto n = static_cast<Eigen::Index>(baseline_coefficient_count(shape.form) + 2);
    if (theta.size() != n) throw DimensionError("parameter vector has the wrong length for this baseline form");
    ParametricDhpSpec spec = shape;
    Eigen::Index k = 0;
    spec.gamma0 = std::exp(theta[k++]);
    spec.gamma1 = 0.0;
    spec.gamma2 = 0.0;
    if (shape.form == BaselineForm::linear) spec.gamma1 = theta[k++] / slope_scale;
    if (shape.form == BaselineForm::sinusoidal) spec.gamma1 = theta[k++];
    if (shape.form == BaselineForm::linear_sinusoidal) {
        spec.gamma1 = theta[k++] / slope_scale;
        spec.gamma2 = theta[k++];
    }
    spec.r = std::exp(theta[k++]);
    spec.p = logistic(theta[k++]);
    return spec;
}

namespace {

LoglikGradient evaluate(const Eigen::VectorXd& theta, const ParametricDhpSpec& shape, const LagDesignOperator& X,
                        std::span<const std::int64_t> counts, const std::vector<double>& log_factorial,
                        double slope_scale, double floor) {
    LoglikGradient out;
    out.gradient = Eigen::VectorXd::Zero(theta.size());
    if (!theta.allFinite()) {
        out.value = -std::numeric_limits<double>::infinity();
        return out;
    }
    const ParametricDhpSpec spec = constrain(theta, shape, slope_scale);
    if (!(spec.r > 0.0) || !(spec.p > 0.0 && spec.p < 1.0) || !std::isfinite(spec.r) || !(spec.gamma0 > 0.0) ||
        !std::isfinite(spec.gamma0)) {
        out.value = -std::numeric_limits<double>::infinity();
        return out;
    }
    const auto T = counts.size();
    const auto D = X.cols();
    const Eigen::VectorXd phi = nb_kernel_vector(spec.r, spec.p, D);
    const Eigen::VectorXd excitation = X.apply(phi);

    double ll = 0.0;
    double g0 = 0.0;
    double g_slope = 0.0;
    double g_sine = 0.0;
    Eigen::VectorXd w(static_cast<Eigen::Index>(T));
    for (std::size_t t = 1; t <= T; ++t) {
        const auto i = static_cast<Eigen::Index>(t - 1);
        double mu = spec.baseline(t);
        bool clamped = false;
        if (!(mu > 0.0)) {
            mu = floor;
            clamped = true;
            ++out.clamped;
        }
        const double lam = mu + std::max(excitation[i], 0.0);
        const auto n = static_cast<double>(counts[t - 1]);
        ll += (counts[t - 1] > 0 ? n * std::log(lam) : 0.0) - lam - log_factorial[t - 1];
        w[i] = n / lam - 1.0;
        if (!clamped) {
            const double x = static_cast<double>(t);
            g0 += w[i];
            g_slope += w[i] * x;
            g_sine += w[i] * std::sin(2.0 * std::numbers::pi * x / spec.period);
        }
    }
    out.value = ll;

    const Eigen::VectorXd c = X.apply_transpose(w);
    const double psi_r = boost::math::digamma(spec.r);
    const double log_p = std::log(spec.p);
    double g_r = 0.0;
    double g_p = 0.0;
    for (std::size_t d = 1; d <= D; ++d) {
        const auto i = static_cast<Eigen::Index>(d - 1);
        const double x = static_cast<double>(d);
        const double cphi = c[i] * phi[i];
        g_r += cphi * (boost::math::digamma(x + spec.r) - psi_r + log_p);
        g_p += cphi * (spec.r / spec.p - x / (1.0 - spec.p));
    }

    Eigen::Index k = 0;
    out.gradient[k++] = g0 * spec.gamma0;
    if (shape.form == BaselineForm::linear) out.gradient[k++] = g_slope / slope_scale;
    if (shape.form == BaselineForm::sinusoidal) out.gradient[k++] = g_sine;
    if (shape.form == BaselineForm::linear_sinusoidal) {
        out.gradient[k++] = g_slope / slope_scale;
        out.gradient[k++] = g_sine;
    }
    out.gradient[k++] = g_r * spec.r;
    out.gradient[k++] = g_p * spec.p * (1.0 - spec.p);
    return out;
}

std::vector<double> log_factorials(std::span<const std::int64_t> counts) {
    std::vector<double> out(counts.size());
    for (std::size_t t = 0; t < counts.size(); ++t) out[t] = std::lgamma(static_cast<double>(counts[t]) + 1.0);
    return out;
}

struct LocalResult {
    Eigen::VectorXd theta;
    LoglikGradient at;
    int iterations{0};
    std::string message;
};

// BFGS on -ll with Armijo backtracking, then Newton steps on a
// finite-difference Hessian of the analytic gradient.
template <class F>
LocalResult maximize(F&& f, Eigen::VectorXd theta, int max_iter, double grad_tol) {
    LocalResult res;
    const auto n = theta.size();
    LoglikGradient cur = f(theta);
    if (!std::isfinite(cur.value)) {
        res.theta = theta;
        res.at = cur;
        res.message = "non-finite log-likelihood at the start";
        return res;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, cur.gradient.norm());
    int it = 0;
    bool line_search_failed = false;
    // Starts drifting toward a boundary optimum (p -> 1, r -> inf) make
    // vanishing gains without a vanishing gradient.
    int stalled = 0;
    for (; it < max_iter; ++it) {
        if (cur.gradient.norm() <= grad_tol) break;
        Eigen::VectorXd dir = H * cur.gradient;
        double slope = cur.gradient.dot(dir);
        if (!(slope > 0.0)) {
            H = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, cur.gradient.norm());
            dir = H * cur.gradient;
            slope = cur.gradient.dot(dir);
        }
        double step = 1.0;
        LoglikGradient next;
        Eigen::VectorXd cand;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            cand = theta + step * dir;
            next = f(cand);
            if (std::isfinite(next.value) && next.value >= cur.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            line_search_failed = true;
            break;
        }
        const Eigen::VectorXd s = cand - theta;
        const Eigen::VectorXd y = cur.gradient - next.gradient;  // gradient of -ll changes by -(g_next - g)
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - rho * y * s.transpose();
            H = V.transpose() * H * V + rho * s * s.transpose();
        }
        const double gain = next.value - cur.value;
        theta = cand;
        cur = next;
        if (gain <= 1e-15 * std::abs(cur.value) && cur.gradient.norm() <= 1e3 * grad_tol) break;
        stalled = gain <= 1e-12 * std::abs(cur.value) ? stalled + 1 : 0;
        if (stalled >= 20) break;
    }

    for (int polish = 0; polish < 20 && cur.gradient.norm() > grad_tol; ++polish) {
        Eigen::MatrixXd Hess(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
            Eigen::VectorXd a = theta;
            Eigen::VectorXd b = theta;
            a[j] += h;
            b[j] -= h;
            Hess.col(j) = (f(a).gradient - f(b).gradient) / (2.0 * h);
        }
        Hess = 0.5 * (Hess + Hess.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-Hess);
        if (eig.info() != Eigen::Success) break;
        const double shift = std::max(0.0, 1e-8 - eig.eigenvalues().minCoeff());
        Eigen::MatrixXd A = -Hess;
        A.diagonal().array() += shift;
        const Eigen::VectorXd dir = A.ldlt().solve(cur.gradient);
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            const Eigen::VectorXd cand = theta + step * dir;
            LoglikGradient next = f(cand);
            if (std::isfinite(next.value) && next.value >= cur.value - 1e-10 * std::abs(cur.value) &&
                next.gradient.norm() < cur.gradient.norm()) {
                theta = cand;
                cur = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    res.theta = theta;
    res.at = cur;
    res.iterations = it;
    if (cur.gradient.norm() <= grad_tol) res.message = "converged";
    else if (line_search_failed) res.message = "line search failed";
    else if (stalled >= 20) res.message = "stalled";
    else if (it >= max_iter) res.message = "iteration limit";
    else res.message = "no further progress";
    return res;
}

} // namespace

LoglikGradient parametric_loglik_gradient(const Eigen::VectorXd& theta, const ParametricDhpSpec& shape,
                                          std::span<const std::int64_t> counts, double slope_scale, double floor) {
    if (counts.empty()) throw ValidationError("empty series");
    const LagDesignOperator X(counts, effective_dmax(shape.d_max, counts.size()));
    return evaluate(theta, shape, X, counts, log_factorials(counts), slope_scale, floor);
}

ParametricFit fit_parametric_mle(std::span<const std::int64_t> counts, BaselineForm form, double period,
                                 const ParametricFitOptions& options) {
    if (counts.empty()) throw ValidationError("training series is empty");
    if (options.starts <= 0) throw ValidationError("at least one start is required");
    if (!(period > 0.0)) throw ValidationError("period must be positive");
    const std::size_t T = counts.size();
    ParametricDhpSpec shape;
    shape.form = form;
    shape.period = period;
    shape.d_max = effective_dmax(options.d_max == 0 ? default_d_max(T) : options.d_max, T);
    const double scale = static_cast<double>(T);
    const LagDesignOperator X(counts, shape.d_max);
    const std::vector<double> lf = log_factorials(counts);
    auto f = [&](const Eigen::VectorXd& th) {
        return evaluate(th, shape, X, counts, lf, scale, options.likelihood_floor);
    };

    double mean = 0.0;
    for (auto c : counts) mean += static_cast<double>(c);
    mean = std::max(mean / static_cast<double>(T), 1e-3);

    std::vector<Eigen::VectorXd> inits;
    for (int s = 0; s < options.starts; ++s) {
        ParametricDhpSpec init = shape;
        if (s == 0) {
            init.gamma0 = 0.7 * mean;
            init.r = 1.0;
            init.p = 0.5;
        } else {
            SplitMix64 rng = SplitMix64::derive(options.seed, static_cast<std::uint64_t>(s));
            init.gamma0 = mean * (0.2 + 0.8 * rng.uniform());
            init.r = std::exp(std::log(0.3) + rng.uniform() * (std::log(5.0) - std::log(0.3)));
            init.p = 0.05 + 0.9 * rng.uniform();
            const double u1 = rng.uniform();
            const double u2 = rng.uniform();
            if (has_slope(form)) init.gamma1 = init.gamma0 * (-0.1 + 0.4 * u1) / scale;
            if (form == BaselineForm::sinusoidal) init.gamma1 = init.gamma0 * (u2 - 0.5);
            if (form == BaselineForm::linear_sinusoidal) init.gamma2 = init.gamma0 * (u2 - 0.5);
        }
        inits.push_back(unconstrain(init, scale));
    }

    std::vector<LocalResult> results(inits.size());
    {
        std::vector<std::thread> pool;
        const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                                  static_cast<unsigned>(inits.size())));
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t s = w; s < inits.size(); s += workers) {
                    try {
                        results[s] = maximize(f, inits[s], options.max_iter, options.grad_tol);
                    } catch (const std::exception& e) {
                        results[s].theta = inits[s];
                        results[s].at.value = -std::numeric_limits<double>::infinity();
                        results[s].message = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    ParametricFit fit;
    int best = -1;
    for (std::size_t s = 0; s < results.size(); ++s) {
        const auto& r = results[s];
        StartReport rep;
        rep.index = static_cast<int>(s);
        rep.loglik = r.at.value;
        rep.grad_norm = r.at.gradient.size() ? r.at.gradient.norm() : std::nan("");
        rep.iterations = r.iterations;
        rep.message = r.message;
        rep.ok = std::isfinite(r.at.value) && rep.grad_norm <= std::max(options.grad_tol, 1e-3);
        fit.starts.push_back(rep);
        if (rep.ok && (best < 0 || r.at.value > results[static_cast<std::size_t>(best)].at.value)) {
            best = static_cast<int>(s);
        }
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "all " << results.size() << " starts failed:";
        for (const auto& rep : fit.starts) {
            msg << " [" << rep.index << ": " << rep.message << ", ll=" << rep.loglik << ", |g|=" << rep.grad_norm
                << "]";
        }
        throw ConvergenceError(msg.str(), 0, 0.0);
    }
    const auto& win = results[static_cast<std::size_t>(best)];
    fit.spec = constrain(win.theta, shape, scale);
    fit.loglik = win.at.value;
    fit.grad_norm = win.at.gradient.norm();
    fit.best_start = best;
    fit.clamped = win.at.clamped;
    return fit;
}

} // namespace gpdhp
