#include "gpdhp_cli/experiments.hpp"

#include "gpdhp/error.hpp"

#include <cmath>
#include <limits>

namespace gpdhp::cli {
namespace {

BaselineFamilySpec shared_baseline() {
    BaselineFamilySpec mu;
    mu.a = 0.8;
    mu.b = 5e-5;
    mu.c = 0.3;
    mu.d = 0.1;
    mu.period = 52.0;
    return mu;
}

Scenario make(std::string name, BaselineFamilySpec mu, ExcitationFamilySpec f) {
    return {std::move(name), mu, f};
}

} // namespace

std::vector<Scenario> excitation_scenarios() {
    const BaselineFamilySpec mu = shared_baseline();
    using E = ExcitationFamilySpec;
    return {
        make("nb_r2", mu, E::negative_binomial(0.6, 0.6, 2.0, 200)),
        make("nb_r4", mu, E::negative_binomial(0.6, 0.6, 4.0, 200)),
        make("nb_r6", mu, E::negative_binomial(0.6, 0.6, 6.0, 200)),
        make("geom_p03", mu, E::geometric(0.8, 0.3, 200)),
        make("geom_p06", mu, E::geometric(0.8, 0.6, 200)),
        make("geom_p09", mu, E::geometric(0.8, 0.9, 200)),
        make("power_20_2_4", mu, E::power_law(20.0, 2.0, 4.0, 200)),
        make("power_100_4_4", mu, E::power_law(100.0, 4.0, 4.0, 200)),
        make("power_600_8_4", mu, E::power_law(600.0, 8.0, 4.0, 200)),
        make("bimodal_mu6", mu, E::bimodal(0.8, 1.0, 6.0, 1.0, 200)),
        make("bimodal_mu8", mu, E::bimodal(0.8, 1.0, 8.0, 1.0, 200)),
        make("bimodal_mu10", mu, E::bimodal(0.8, 1.0, 10.0, 1.0, 200)),
    };
}

std::vector<Scenario> baseline_scenarios() {
    const auto f = ExcitationFamilySpec::negative_binomial(0.6, 0.6, 2.0, 200);
    BaselineFamilySpec constant;
    constant.a = 1.0;
    BaselineFamilySpec linear;
    linear.a = 0.5;
    linear.b = 1.5e-4;
    BaselineFamilySpec linper = linear;
    linper.c = 0.4;
    linper.period = 52.0;
    return {make("constant", constant, f), make("linear", linear, f), make("linear_periodic", linper, f)};
}

const Scenario& find_scenario(const std::string& name) {
    static const std::vector<Scenario> all = [] {
        auto v = excitation_scenarios();
        for (auto& s : baseline_scenarios()) v.push_back(s);
        return v;
    }();
    for (const auto& s : all) {
        if (s.name == name) return s;
    }
    throw ValidationError("unknown scenario '" + name + "'");
}

double relative_l2(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth, std::size_t n) {
    const auto m = static_cast<Eigen::Index>(std::min<std::size_t>(n, std::min(estimate.size(), truth.size())));
    const double denom = truth.head(m).norm();
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (estimate.head(m) - truth.head(m)).norm() / denom;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson: length mismatch");
    const Eigen::ArrayXd x = a.array() - a.mean();
    const Eigen::ArrayXd y = b.array() - b.mean();
    const double sxx = (x * x).sum();
    const double syy = (y * y).sum();
    if (sxx <= 0.0 || syy <= 1e-24 * static_cast<double>(a.size())) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (x * y).sum() / std::sqrt(sxx * syy);
}

CvGrid axes_grid(const CvGrid& grid, const KernelHyperparams& base) {
    CvGrid g = grid;
    g.sigma_b = {base.baseline.sigma_per};
    g.ell_b = {base.baseline.ell_per};
    g.sigma_lin = {base.baseline.sigma_lin};
    g.sigma_f = {base.excitation.sigma_f};
    return g;
}

namespace {

std::optional<CvResult> select(const CountSeries& series, const SplitSpec& split, SearchMode mode,
                               const CvGrid& grid, const KernelHyperparams& base, std::size_t d_max,
                               const MapConfig& map, const OperatorOptions& operators, unsigned threads) {
    if (mode == SearchMode::fixed) return std::nullopt;
    CvOptions opt;
    opt.base = base;
    opt.d_max = d_max;
    opt.operators = operators;
    opt.threads = threads;
    return cv_grid_search(series, split, mode == SearchMode::axes ? axes_grid(grid, base) : grid, map, opt);
}

} // namespace

RecoveryResult run_recovery(const Scenario& scenario, const RecoveryOptions& options) {
    if (options.train_end == 0 || options.train_end >= options.T) {
        throw ValidationError("recovery: train_end must lie in [1, T)");
    }
    RecoveryResult out;
    out.scenario = scenario;
    SimConfig sc;
    sc.T = options.T;
    sc.seed = options.seed;
    out.sim = simulate_dhp(scenario.baseline, scenario.excitation, sc);

    KernelHyperparams base = options.base;
    base.excitation.d_max = options.d_max;
    out.cv = select(out.sim.series, {options.train_end, options.T, options.T}, options.search, options.grid, base,
                    options.d_max, options.map, options.operators, options.threads);
    out.chosen = out.cv ? out.cv->table[out.cv->best].hp : base;

    const auto train = out.sim.series.counts().first(options.train_end);
    out.model = fit_gpdhp(train, out.chosen, options.map, options.operators);
    if (options.laplace_samples > 0) {
        const CollapsedKernelOperator K(train, out.chosen, options.operators);
        LaplaceOptions lo;
        lo.n_samples = options.laplace_samples;
        lo.seed = options.seed;
        lo.likelihood_floor = options.map.likelihood_floor;
        out.bands = laplace_bands(out.model.fit, train, K, lo);
    }

    ExcitationFamilySpec truncated = scenario.excitation;
    truncated.d_max = options.d_max;
    out.f_true = family_kernel_vector(truncated);
    out.b_true.resize(static_cast<Eigen::Index>(options.train_end));
    for (std::size_t t = 1; t <= options.train_end; ++t) {
        out.b_true[static_cast<Eigen::Index>(t - 1)] = scenario.baseline(t);
    }
    out.f_rel_l2 = relative_l2(out.model.components.f_hat, out.f_true, options.lags_scored);
    out.kappa_true = out.f_true.sum();
    out.kappa_hat = out.model.components.kappa_hat;
    out.baseline_corr = pearson(out.model.components.b_hat, out.b_true);
    return out;
}

BenchResult run_bench(const CountSeries& series, const SplitSpec& split, const BenchOptions& options) {
    validate_split(split, series.size());
    if (split.train_end == 0 || split.valid_end == split.train_end || split.test_end == split.valid_end) {
        throw ValidationError("bench: train, validation and test splits must all be nonempty");
    }
    BenchResult out;
    out.split = split;
    out.fit_end = options.refit_on_validation ? split.valid_end : split.train_end;
    const std::size_t d_max = options.d_max > 0 ? options.d_max : default_d_max(split.train_end);

    KernelHyperparams base = options.base;
    base.baseline.period = options.period;
    base.excitation.d_max = d_max;
    out.cv = select(series, split, options.search, options.grid, base, d_max, options.map, options.operators,
                    options.threads);
    out.chosen = out.cv ? out.cv->table[out.cv->best].hp : base;

    const auto history = series.counts().first(out.fit_end);
    const std::pair<BaselineForm, const char*> forms[] = {
        {BaselineForm::constant, "Discrete DHP"},
        {BaselineForm::linear, "Linear DHP"},
        {BaselineForm::sinusoidal, "Sinusoidal DHP"},
        {BaselineForm::linear_sinusoidal, "Linear + Sinusoidal DHP"},
    };
    ParametricFitOptions po;
    po.starts = options.parametric.starts;
    po.max_iter = options.parametric.max_iter;
    po.seed = options.seed;
    po.d_max = d_max;
    po.likelihood_floor = options.map.likelihood_floor;
    for (const auto& [form, label] : forms) {
        BenchRow row;
        row.model = to_string(form);
        row.label = label;
        try {
            ParametricFit fit = fit_parametric_mle(history, form, options.period, po);
            row.report = predictive_loglik(fit.spec, series, split.valid_end, split.test_end,
                                           {options.map.likelihood_floor});
            row.pll = row.report.total;
            row.kappa_hat = row.report.kappa_hat;
            row.floored = row.report.floored;
            row.clamped = row.report.clamped_baseline;
            row.status = "ok";
            out.parametric.push_back(std::move(fit));
        } catch (const Error& e) {
            row.pll = std::numeric_limits<double>::quiet_NaN();
            row.status = "failed: " + std::string(e.what());
            out.parametric.emplace_back();
        }
        out.rows.push_back(std::move(row));
    }

    BenchRow gp;
    gp.model = "gpdhp";
    gp.label = "GP-DHP";
    const GpDhpModel model = fit_gpdhp(history, out.chosen, options.map, options.operators);
    gp.report = predictive_loglik(model, series, split.valid_end, split.test_end, {options.map.likelihood_floor});
    gp.pll = gp.report.total;
    gp.kappa_hat = gp.report.kappa_hat;
    gp.floored = gp.report.floored;
    gp.status = model.fit.converged ? "ok" : "ok (MAP " + to_string(model.fit.termination) + ")";
    out.rows.push_back(std::move(gp));
    return out;
}

SimulationResult incident_standin(std::size_t length, std::uint64_t seed) {
    BaselineFamilySpec mu;
    mu.a = 0.35;
    mu.b = -2e-5;
    mu.c = 0.08;
    mu.period = 365.0;
    SimConfig cfg;
    cfg.T = length;
    cfg.seed = seed;
    cfg.step_label = "day";
    return simulate_dhp(mu, ExcitationFamilySpec::negative_binomial(0.35, 0.5, 1.5, 60), cfg);
}

} // namespace gpdhp::cli
