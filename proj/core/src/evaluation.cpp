#include "gpdhp/evaluation.hpp"

#include "gpdhp/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace gpdhp {

GpDhpModel fit_gpdhp(std::span<const std::int64_t> train_counts, const KernelHyperparams& hp, const MapConfig& cfg,
                     const OperatorOptions& options) {
    if (train_counts.empty()) throw ValidationError("training split is empty");
    hp.validate();
    GpDhpModel model;
    model.hp = hp;
    model.options = options;
    model.train_length = train_counts.size();
    const CollapsedKernelOperator K(train_counts, hp, options);
    model.fit = fit_map(train_counts, K, cfg);
    model.components = project_components(model.fit, K);
    return model;
}

Eigen::VectorXd extend_baseline(const GpDhpModel& model, std::size_t total_length) {
    const std::size_t n = model.train_length;
    if (total_length < n) throw DimensionError("extension shorter than the training range");
    if (static_cast<std::size_t>(model.fit.dual.size()) != n) throw DimensionError("model dual has the wrong length");
    if (total_length == n) return model.components.b_hat;
    const BaselineOperator Kb(total_length, model.hp.baseline);
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total_length));
    padded.head(static_cast<Eigen::Index>(n)) = model.fit.dual;
    Eigen::VectorXd out = Kb.apply(padded);
    // Keep the training part bit-identical to the decomposition.
    out.head(static_cast<Eigen::Index>(n)) = model.components.b_hat;
    return out;
}

double poisson_log_pmf(std::int64_t n, double lambda) {
    if (n < 0) throw ValidationError("negative count");
    const auto x = static_cast<double>(n);
    if (n == 0) return -lambda;
    return x * std::log(lambda) - lambda - std::lgamma(x + 1.0);
}

namespace {

void check_range(const CountSeries& series, std::size_t begin, std::size_t end) {
    if (begin >= end || end > series.size()) {
        throw ValidationError("evaluation range [" + std::to_string(begin) + ", " + std::to_string(end) +
                              ") is empty or exceeds the series");
    }
}

void score(EvalReport& report, const CountSeries& series, const Eigen::VectorXd& lambda_full, double floor) {
    report.per_bin.clear();
    report.intensity.clear();
    report.total = 0.0;
    for (std::size_t t = report.begin; t < report.end; ++t) {
        double lambda = std::max(0.0, lambda_full[static_cast<Eigen::Index>(t)]);
        const auto n = series[t];
        if (lambda <= floor && n > 0) {
            lambda = floor;
            ++report.floored;
        }
        const double term = poisson_log_pmf(n, lambda);
        report.per_bin.push_back(term);
        report.intensity.push_back(lambda);
        report.total += term;
    }
}

} // namespace

EvalReport predictive_loglik(const GpDhpModel& model, const CountSeries& series, std::size_t begin, std::size_t end,
                             const EvalOptions& options) {
    check_range(series, begin, end);
    if (begin < model.train_length) {
        throw ValidationError("evaluation range must start after the training range (bin " +
                              std::to_string(model.train_length + 1) + ")");
    }
    EvalReport report;
    report.model = "gpdhp";
    report.begin = begin;
    report.end = end;
    report.kappa_hat = model.components.kappa_hat;
    report.baseline_extension = "gp_conditional_mean";

    const Eigen::VectorXd b = extend_baseline(model, end);
    const Eigen::VectorXd& f = model.components.f_hat;
    const auto D = static_cast<std::size_t>(f.size());
    const auto counts = series.counts();
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(end));
    for (std::size_t t = begin; t < end; ++t) {
        double acc = b[static_cast<Eigen::Index>(t)];
        const std::size_t lags = std::min(t, D);
        for (std::size_t d = 1; d <= lags; ++d) {
            const auto n = counts[t - d];
            if (n != 0) acc += static_cast<double>(n) * f[static_cast<Eigen::Index>(d - 1)];
        }
        lambda[static_cast<Eigen::Index>(t)] = acc;
    }
    score(report, series, lambda, options.likelihood_floor);
    return report;
}

EvalReport predictive_loglik(const ParametricDhpSpec& spec, const CountSeries& series, std::size_t begin,
                             std::size_t end, const EvalOptions& options) {
    check_range(series, begin, end);
    EvalReport report;
    report.model = to_string(spec.form);
    report.begin = begin;
    report.end = end;
    report.kappa_hat = nb_kernel_vector(spec.r, spec.p, spec.d_max).sum();
    report.baseline_extension = "parametric";
    const IntensityResult lam = parametric_intensity(spec, series.counts().first(end), options.likelihood_floor);
    for (std::size_t t = begin; t < end; ++t) {
        if (!(spec.baseline(t + 1) > 0.0)) ++report.clamped_baseline;
    }
    score(report, series, lam.lambda, options.likelihood_floor);
    return report;
}

void CvGrid::validate() const {
    if (beta.empty() || sigma_b.empty() || ell_b.empty() || sigma_lin.empty() || sigma_f.empty() || ell_f.empty()) {
        throw ValidationError("every grid axis needs at least one value");
    }
}

std::size_t CvGrid::size() const noexcept {
    return beta.size() * sigma_b.size() * ell_b.size() * sigma_lin.size() * sigma_f.size() * ell_f.size();
}

KernelHyperparams CvGrid::cell(std::size_t i, const KernelHyperparams& base) const {
    validate();
    if (i >= size()) throw ValidationError("grid cell index out of range");
    KernelHyperparams hp = base;
    hp.excitation.ell_f = ell_f[i % ell_f.size()];
    i /= ell_f.size();
    hp.excitation.sigma_f = sigma_f[i % sigma_f.size()];
    i /= sigma_f.size();
    hp.baseline.sigma_lin = sigma_lin[i % sigma_lin.size()];
    i /= sigma_lin.size();
    hp.baseline.ell_per = ell_b[i % ell_b.size()];
    i /= ell_b.size();
    hp.baseline.sigma_per = sigma_b[i % sigma_b.size()];
    i /= sigma_b.size();
    hp.excitation.beta = beta[i];
    return hp;
}

CvResult cv_grid_search(const CountSeries& series, const SplitSpec& split, const CvGrid& grid, const MapConfig& cfg,
                        const CvOptions& options) {
    grid.validate();
    validate_split(split, series.size());
    if (split.train_end == 0 || split.valid_end <= split.train_end) {
        throw ValidationError("cross-validation needs nonempty train and validation splits");
    }
    const auto train = series.counts().first(split.train_end);
    KernelHyperparams base = options.base;
    base.excitation.d_max = options.d_max ? options.d_max : default_d_max(split.train_end);

    CvResult result;
    result.table.resize(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.table.size(); i = next++) {
            CvCell& cell = result.table[i];
            cell.index = i;
            try {
                cell.hp = grid.cell(i, base);
                const GpDhpModel model = fit_gpdhp(train, cell.hp, cfg, options.operators);
                const EvalReport rep = predictive_loglik(model, series, split.train_end, split.valid_end, options.eval);
                cell.valid_pll = rep.total;
                cell.converged = model.fit.converged;
                cell.kappa_hat = model.components.kappa_hat;
                cell.ok = std::isfinite(rep.total);
                cell.status = cell.ok ? to_string(model.fit.termination) : "non-finite validation pLL";
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.status = std::string("failed: ") + e.what();
            }
        }
    };
    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(result.table.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w + 1 < threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    bool found = false;
    for (const auto& cell : result.table) {
        if (!cell.ok) continue;
        if (!found || cell.valid_pll > result.table[result.best].valid_pll) {
            result.best = cell.index;
            found = true;
        }
    }
    if (!found) throw Error("cv", "all " + std::to_string(result.table.size()) + " grid cells failed");
    return result;
}

} // namespace gpdhp
