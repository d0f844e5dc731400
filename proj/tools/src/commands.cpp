#include "commands.hpp"

#include "artifacts.hpp"
#include "gpdhp_cli/experiments.hpp"

#include "gpdhp/error.hpp"
#include "gpdhp/rng.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <ostream>

namespace gpdhp::cli {
namespace {

namespace fs = std::filesystem;

std::ostream& log(const Invocation& inv) { return *inv.log; }

void prepare_out(const Invocation& inv) {
    std::error_code ec;
    fs::create_directories(inv.out, ec);
    if (ec) throw Error("io", "cannot create output directory '" + inv.out.string() + "': " + ec.message());
}

CountSeries require_input(const Invocation& inv) {
    if (inv.input.empty()) throw ValidationError(inv.command + " needs --input");
    return load_counts(inv.input);
}

SplitSpec require_split(const Invocation& inv, std::size_t length) {
    if (!inv.cfg.split) throw ValidationError(inv.command + " needs --split train_end,valid_end,test_end");
    validate_split(*inv.cfg.split, length);
    return *inv.cfg.split;
}

bool is_gpdhp(const RunConfig& cfg) { return cfg.model == "gpdhp"; }

ParametricFitOptions parametric_options(const RunConfig& cfg, std::size_t fit_length) {
    ParametricFitOptions po;
    po.starts = cfg.parametric.starts;
    po.max_iter = cfg.parametric.max_iter;
    po.seed = cfg.seed;
    po.d_max = cfg.d_max > 0 ? cfg.d_max : default_d_max(fit_length);
    po.likelihood_floor = cfg.map.likelihood_floor;
    return po;
}

json stats_json(const LatentFit& fit) {
    return {{"newton_iterations", fit.stats.newton_iterations},
            {"cg_iterations", fit.stats.cg_iterations},
            {"backtracks", fit.stats.backtracks},
            {"rejected_steps", fit.stats.rejected_steps},
            {"final_damping", fit.stats.final_damping}};
}

json operators_json(const OperatorOptions& o) {
    return {{"mode", o.mode == ExcitationMode::ski ? "ski" : "exact"},
            {"inducing_points", o.inducing_points},
            {"dense_cap", o.dense_cap}};
}

OperatorOptions operators_from(const json& j) {
    OperatorOptions o;
    const std::string mode = j.value("mode", "ski");
    o.mode = mode == "exact" ? ExcitationMode::exact : ExcitationMode::ski;
    o.inducing_points = j.value("inducing_points", std::size_t{0});
    o.dense_cap = j.value("dense_cap", kDefaultDenseCap);
    return o;
}

json gp_fit_json(const GpDhpModel& m) {
    return {{"model", "gpdhp"},
            {"train_length", m.train_length},
            {"kernel", to_json(m.hp)},
            {"operators", operators_json(m.options)},
            {"converged", m.fit.converged},
            {"termination", to_string(m.fit.termination)},
            {"grad_norm", m.fit.grad_norm_final},
            {"objective_trace", m.fit.objective_trace},
            {"stats", stats_json(m.fit)},
            {"kappa_hat", m.components.kappa_hat},
            {"unstable", m.components.unstable},
            {"ell_star", vector_json(m.fit.ell_star)},
            {"dual", vector_json(m.fit.dual)}};
}

// Rebuilds a GP-DHP model from a saved fit; the series supplies the
// training counts the fit was made on.
GpDhpModel gp_model_from_json(const json& j, const CountSeries& series) {
    GpDhpModel m;
    m.train_length = j.at("train_length").get<std::size_t>();
    if (m.train_length == 0 || m.train_length > series.size()) {
        throw ValidationError("fit covers " + std::to_string(m.train_length) + " bins but the series has " +
                              std::to_string(series.size()));
    }
    m.hp = kernel_from_json(j.at("kernel"));
    m.options = operators_from(j.value("operators", json::object()));
    m.fit.ell_star = vector_from_json(j.at("ell_star"));
    m.fit.dual = vector_from_json(j.at("dual"));
    if (m.fit.ell_star.size() != static_cast<Eigen::Index>(m.train_length) ||
        m.fit.dual.size() != m.fit.ell_star.size()) {
        throw DimensionError("fit: ell_star / dual length does not match train_length");
    }
    m.fit.converged = j.value("converged", false);
    m.fit.grad_norm_final = j.value("grad_norm", 0.0);
    const CollapsedKernelOperator K(series.counts().first(m.train_length), m.hp, m.options);
    m.components = project_dual(m.fit.ell_star, m.fit.dual, K);
    return m;
}

json load_fit_document(const Invocation& inv) {
    json j = read_json(inv.fit);
    if (!j.contains("model")) throw ValidationError("'" + inv.fit.string() + "' is not a fit document");
    return j;
}

void summarize_fit(const Invocation& inv, const GpDhpModel& m) {
    log(inv) << "gpdhp fit on " << m.train_length << " bins: " << to_string(m.fit.termination) << " after "
             << m.fit.stats.newton_iterations << " Newton steps, kappa_hat " << format_number(m.components.kappa_hat)
             << "\n";
    if (!m.fit.converged) {
        log(inv) << "warning: MAP did not reach the gradient tolerance (grad norm "
                 << format_number(m.fit.grad_norm_final) << ")\n";
    }
}

LaplaceOptions laplace_options(const RunConfig& cfg) {
    LaplaceOptions lo;
    lo.n_samples = cfg.laplace_samples;
    lo.seed = cfg.seed;
    lo.force_iterative = cfg.laplace_force_iterative;
    lo.dense_cap = cfg.operators.dense_cap;
    lo.likelihood_floor = cfg.map.likelihood_floor;
    return lo;
}

json bands_json(const LaplaceBands& b) {
    return {{"samples", b.sample_count},
            {"failed_samples", b.failed_samples},
            {"dense_path", b.dense_path},
            {"warnings", b.warnings}};
}

// fig3 / fig4 share everything except the scenario list.
RecoveryOptions recovery_options(const RunConfig& cfg) {
    RecoveryOptions ro;
    ro.T = cfg.figures.T;
    ro.train_end = cfg.figures.train_end;
    ro.search = cfg.figures.search;
    ro.grid = cfg.grid;
    ro.base = cfg.kernel;
    ro.base.baseline.period = cfg.period;
    ro.d_max = cfg.d_max > 0 ? cfg.d_max : 100;
    ro.map = cfg.map;
    ro.operators = cfg.operators;
    ro.laplace_samples = cfg.laplace_samples;
    ro.threads = cfg.threads;
    return ro;
}

void add_band_columns(CsvTable& t, const std::optional<LaplaceBands>& bands, bool baseline, Eigen::Index n) {
    if (!bands) return;
    const auto& b = *bands;
    if (baseline) {
        t.add("b_mean", Eigen::VectorXd(b.b_mean.head(n)));
        t.add("b_lower", Eigen::VectorXd(b.b_lower.head(n)));
        t.add("b_upper", Eigen::VectorXd(b.b_upper.head(n)));
    } else {
        t.add("f_mean", Eigen::VectorXd(b.f_mean.head(n)));
        t.add("f_lower", Eigen::VectorXd(b.f_lower.head(n)));
        t.add("f_upper", Eigen::VectorXd(b.f_upper.head(n)));
    }
}

void figure1(const Invocation& inv) {
    // Geometric kernel K beta^(d-1) driven by three event clusters.
    const double mu = 0.5, K = 0.75, beta = 0.5;
    std::vector<std::int64_t> counts(21, 0);
    counts[3] = 2;
    counts[7] = 4;
    counts[10] = 3;
    Eigen::VectorXd lambda(21), n(21);
    for (int t = 0; t <= 20; ++t) {
        double v = mu;
        for (int s = 0; s < t; ++s) v += static_cast<double>(counts[static_cast<std::size_t>(s)]) * K * std::pow(beta, t - s - 1);
        lambda[t] = v;
        n[t] = static_cast<double>(counts[static_cast<std::size_t>(t)]);
    }
    CsvTable tab;
    tab.add("t", index_column(0, 21));
    tab.add("count", n);
    tab.add("baseline", Eigen::VectorXd::Constant(21, mu));
    tab.add("intensity", lambda);
    write_text(inv.out / "fig1_intensity.csv", tab.str());
}

void figure2(const Invocation& inv) {
    const std::size_t D = 100;
    const int draws = 5;
    std::vector<std::string> beta_col, draw_col;
    std::vector<double> d_col, v_col;
    std::vector<std::string> shape_beta;
    std::vector<double> shape_d, shape_env, shape_warp;
    std::vector<std::string> cov_beta;
    std::vector<double> cov_d, cov_d2, cov_v;
    for (double beta : {0.0, 0.03, 0.10}) {
        ExcitationKernelParams p;
        p.sigma_f = 1.0;
        p.ell_f = 10.0;
        p.beta = beta;
        p.d_max = D;
        p.eps_f = inv.cfg.kernel.excitation.eps_f;
        const Eigen::MatrixXd Kf = build_dense_excitation(p);
        const Eigen::LLT<Eigen::MatrixXd> llt(Kf);
        if (llt.info() != Eigen::Success) throw Error("numerical", "prior covariance is not positive definite");
        const std::string label = format_number(beta);
        SplitMix64 rng = SplitMix64::derive(inv.cfg.seed, static_cast<std::uint64_t>(beta * 1000.0));
        boost::random::normal_distribution<double> normal;
        for (int k = 0; k < draws; ++k) {
            Eigen::VectorXd z(static_cast<Eigen::Index>(D));
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
            const Eigen::VectorXd f = llt.matrixL() * z;
            for (std::size_t d = 1; d <= D; ++d) {
                beta_col.push_back(label);
                draw_col.push_back(std::to_string(k + 1));
                d_col.push_back(static_cast<double>(d));
                v_col.push_back(f[static_cast<Eigen::Index>(d - 1)]);
            }
        }
        for (std::size_t d = 1; d <= D; ++d) {
            shape_beta.push_back(label);
            shape_d.push_back(static_cast<double>(d));
            shape_env.push_back(amplitude_envelope(d, p));
            shape_warp.push_back(lag_warp(d, p));
            for (std::size_t d2 = 1; d2 <= D; ++d2) {
                cov_beta.push_back(label);
                cov_d.push_back(static_cast<double>(d));
                cov_d2.push_back(static_cast<double>(d2));
                cov_v.push_back(Kf(static_cast<Eigen::Index>(d - 1), static_cast<Eigen::Index>(d2 - 1)));
            }
        }
    }
    auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval(); };
    CsvTable dr;
    dr.add("beta", beta_col);
    dr.add("draw", draw_col);
    dr.add("d", vec(d_col));
    dr.add("f", vec(v_col));
    write_text(inv.out / "fig2_draws.csv", dr.str());
    CsvTable sh;
    sh.add("beta", shape_beta);
    sh.add("d", vec(shape_d));
    sh.add("envelope", vec(shape_env));
    sh.add("warp", vec(shape_warp));
    write_text(inv.out / "fig2_shape.csv", sh.str());
    CsvTable cv;
    cv.add("beta", cov_beta);
    cv.add("d", vec(cov_d));
    cv.add("d2", vec(cov_d2));
    cv.add("cov", vec(cov_v));
    write_text(inv.out / "fig2_cov.csv", cv.str());
}

json recovery_summary(const RecoveryResult& r) {
    json j{{"scenario", r.scenario.name},
           {"baseline", to_json(r.scenario.baseline)},
           {"excitation", to_json(r.scenario.excitation)},
           {"chosen", to_json(r.chosen)},
           {"f_rel_l2", r.f_rel_l2},
           {"kappa_true", r.kappa_true},
           {"kappa_hat", r.kappa_hat},
           {"converged", r.model.fit.converged}};
    j["baseline_corr"] = std::isfinite(r.baseline_corr) ? json(r.baseline_corr) : json(nullptr);
    if (r.bands) j["bands"] = bands_json(*r.bands);
    return j;
}

void figure3(const Invocation& inv, json& summary) {
    RecoveryOptions ro = recovery_options(inv.cfg);
    const auto lags = static_cast<Eigen::Index>(std::min(inv.cfg.figures.lags_reported, ro.d_max));
    std::uint64_t i = 0;
    for (const Scenario& s : excitation_scenarios()) {
        ro.seed = inv.cfg.seed + i++;
        const RecoveryResult r = run_recovery(s, ro);
        CsvTable t;
        t.add("d", index_column(1, static_cast<std::size_t>(lags)));
        t.add("f_true", Eigen::VectorXd(r.f_true.head(lags)));
        t.add("f_hat", Eigen::VectorXd(r.model.components.f_hat.head(lags)));
        add_band_columns(t, r.bands, false, lags);
        write_text(inv.out / ("fig3_" + s.name + ".csv"), t.str());
        summary["fig3"].push_back(recovery_summary(r));
        log(inv) << "fig3 " << s.name << ": relative L2 " << format_number(r.f_rel_l2) << ", kappa "
                 << format_number(r.kappa_true) << " vs " << format_number(r.kappa_hat) << "\n";
    }
}

void figure4(const Invocation& inv, json& summary) {
    RecoveryOptions ro = recovery_options(inv.cfg);
    const auto lags = static_cast<Eigen::Index>(std::min(inv.cfg.figures.lags_reported, ro.d_max));
    CsvTable ex;
    ex.add("d", index_column(1, static_cast<std::size_t>(lags)));
    bool first = true;
    std::uint64_t i = 0;
    for (const Scenario& s : baseline_scenarios()) {
        ro.seed = inv.cfg.seed + 100 + i++;
        const RecoveryResult r = run_recovery(s, ro);
        if (first) ex.add("f_true", Eigen::VectorXd(r.f_true.head(lags)));
        first = false;
        ex.add("f_hat_" + s.name, Eigen::VectorXd(r.model.components.f_hat.head(lags)));
        CsvTable b;
        const auto n = static_cast<std::size_t>(r.b_true.size());
        b.add("t", index_column(1, n));
        b.add("mu_true", r.b_true);
        b.add("b_hat", r.model.components.b_hat);
        add_band_columns(b, r.bands, true, static_cast<Eigen::Index>(n));
        write_text(inv.out / ("fig4_" + s.name + "_baseline.csv"), b.str());
        summary["fig4"].push_back(recovery_summary(r));
        log(inv) << "fig4 " << s.name << ": baseline r " << format_number(r.baseline_corr) << ", relative L2 "
                 << format_number(r.f_rel_l2) << "\n";
    }
    write_text(inv.out / "fig4_excitation.csv", ex.str());
}

} // namespace

void cmd_simulate(const Invocation& inv) {
    const SimulateSettings& s = inv.cfg.simulate;
    SimConfig sc;
    sc.T = s.T;
    sc.seed = inv.cfg.seed;
    sc.step_label = s.step_label;
    const SimulationResult sim = simulate_dhp(s.baseline, s.excitation, sc);
    prepare_out(inv);
    save_counts(sim.series, inv.out / "series.csv");

    CsvTable truth;
    truth.add("t", index_column(1, s.T));
    truth.add("mu", sim.baseline);
    truth.add("lambda", sim.intensity);
    write_text(inv.out / "truth.csv", truth.str());
    CsvTable kern;
    kern.add("d", index_column(1, static_cast<std::size_t>(sim.kernel.size())));
    kern.add("f", sim.kernel);
    write_text(inv.out / "kernel.csv", kern.str());

    write_json(inv.out / "spec.json", {{"T", s.T},
                                       {"seed", inv.cfg.seed},
                                       {"step_label", s.step_label},
                                       {"baseline", to_json(s.baseline)},
                                       {"excitation", to_json(s.excitation)},
                                       {"kernel_mass", sim.kernel_mass},
                                       {"tail_mass", sim.tail_mass},
                                       {"supercritical", sim.supercritical},
                                       {"total_events", sim.series.total()}});
    write_snapshot(inv.out, inv.command, inv.cfg);
    log(inv) << "simulated " << s.T << " bins, " << sim.series.total() << " events, kernel mass "
             << format_number(sim.kernel_mass) << "\n";
    if (sim.supercritical) log(inv) << "warning: kernel mass >= 1 (supercritical)\n";
}

void cmd_fit(const Invocation& inv) {
    const CountSeries series = require_input(inv);
    const std::size_t n = inv.cfg.split ? inv.cfg.split->train_end : series.size();
    if (inv.cfg.split) validate_split(*inv.cfg.split, series.size());
    if (n == 0) throw ValidationError("fit: empty training range");
    const auto train = series.counts().first(n);
    prepare_out(inv);
    if (is_gpdhp(inv.cfg)) {
        const GpDhpModel m = fit_gpdhp(train, inv.cfg.resolved_kernel(n), inv.cfg.map, inv.cfg.operators);
        write_json(inv.out / "fit.json", gp_fit_json(m));
        CsvTable lat;
        lat.add("t", index_column(1, n));
        lat.add("count", series.prefix(n).as_vector());
        lat.add("ell_star", m.fit.ell_star);
        lat.add("intensity", m.fit.intensity());
        write_text(inv.out / "latent.csv", lat.str());
        summarize_fit(inv, m);
    } else {
        const ParametricFit f = fit_parametric_mle(train, parse_baseline_form(inv.cfg.model), inv.cfg.period,
                                                   parametric_options(inv.cfg, n));
        json starts = json::array();
        for (const auto& s : f.starts) {
            starts.push_back({{"index", s.index},
                              {"ok", s.ok},
                              {"loglik", std::isfinite(s.loglik) ? json(s.loglik) : json(nullptr)},
                              {"grad_norm", std::isfinite(s.grad_norm) ? json(s.grad_norm) : json(nullptr)},
                              {"iterations", s.iterations},
                              {"message", s.message}});
        }
        write_json(inv.out / "fit.json", {{"model", to_string(f.spec.form)},
                                          {"train_length", n},
                                          {"spec", to_json(f.spec)},
                                          {"loglik", f.loglik},
                                          {"grad_norm", f.grad_norm},
                                          {"best_start", f.best_start},
                                          {"clamped", f.clamped},
                                          {"kappa_hat", nb_kernel_vector(f.spec.r, f.spec.p, f.spec.d_max).sum()},
                                          {"starts", starts}});
        log(inv) << to_string(f.spec.form) << " fit on " << n << " bins: loglik " << format_number(f.loglik)
                 << ", best start " << f.best_start << "\n";
    }
    write_snapshot(inv.out, inv.command, inv.cfg, {{"input", inv.input.string()}});
}

void cmd_decompose(const Invocation& inv) {
    if (!is_gpdhp(inv.cfg)) throw ValidationError("decompose applies to --model gpdhp only");
    const CountSeries series = require_input(inv);
    GpDhpModel m;
    if (!inv.fit.empty()) {
        const json doc = load_fit_document(inv);
        if (doc.at("model") != "gpdhp") throw ValidationError("decompose needs a gpdhp fit");
        m = gp_model_from_json(doc, series);
    } else {
        const std::size_t n = inv.cfg.split ? inv.cfg.split->train_end : series.size();
        if (inv.cfg.split) validate_split(*inv.cfg.split, series.size());
        m = fit_gpdhp(series.counts().first(n), inv.cfg.resolved_kernel(n), inv.cfg.map, inv.cfg.operators);
        summarize_fit(inv, m);
    }
    const auto train = series.counts().first(m.train_length);
    std::optional<LaplaceBands> bands;
    if (inv.cfg.laplace_samples > 0) {
        const CollapsedKernelOperator K(train, m.hp, m.options);
        bands = laplace_bands(m.fit, train, K, laplace_options(inv.cfg));
        for (const auto& w : bands->warnings) log(inv) << "warning: " << w << "\n";
    }
    prepare_out(inv);
    const Decomposition& c = m.components;
    json doc{{"train_length", m.train_length},
             {"kernel", to_json(m.hp)},
             {"kappa_hat", c.kappa_hat},
             {"unstable", c.unstable},
             {"min_value", c.min_value},
             {"reconstruction_residual", c.reconstruction_residual},
             {"b_hat", vector_json(c.b_hat)},
             {"f_hat", vector_json(c.f_hat)}};
    if (bands) doc["bands"] = bands_json(*bands);
    write_json(inv.out / "decomposition.json", doc);

    CsvTable b;
    b.add("t", index_column(1, m.train_length));
    b.add("count", series.prefix(m.train_length).as_vector());
    b.add("b_hat", c.b_hat);
    add_band_columns(b, bands, true, c.b_hat.size());
    write_text(inv.out / "baseline.csv", b.str());
    CsvTable f;
    f.add("d", index_column(1, static_cast<std::size_t>(c.f_hat.size())));
    f.add("f_hat", c.f_hat);
    add_band_columns(f, bands, false, c.f_hat.size());
    write_text(inv.out / "excitation.csv", f.str());
    write_snapshot(inv.out, inv.command, inv.cfg, {{"input", inv.input.string()}, {"fit", inv.fit.string()}});
    log(inv) << "decomposed " << m.train_length << " bins: kappa_hat " << format_number(c.kappa_hat)
             << (c.unstable ? " (unstable)" : "") << "\n";
}

void cmd_eval(const Invocation& inv) {
    const CountSeries series = require_input(inv);
    const SplitSpec split = require_split(inv, series.size());
    const bool test = inv.cfg.eval_range == "test";
    const std::size_t begin = test ? split.valid_end : split.train_end;
    const std::size_t end = test ? split.test_end : split.valid_end;
    if (begin == end) throw ValidationError("eval: the " + inv.cfg.eval_range + " split is empty");
    const std::size_t fit_end = test && inv.cfg.refit_on_validation ? split.valid_end : split.train_end;
    const EvalOptions eo{inv.cfg.map.likelihood_floor};

    EvalReport rep;
    std::size_t fitted_on = fit_end;
    json fit_doc;
    if (!inv.fit.empty()) fit_doc = load_fit_document(inv);
    const std::string model = fit_doc.is_null() ? inv.cfg.model : fit_doc.at("model").get<std::string>();
    if (model == "gpdhp") {
        GpDhpModel m;
        if (!fit_doc.is_null()) {
            m = gp_model_from_json(fit_doc, series);
        } else {
            m = fit_gpdhp(series.counts().first(fit_end), inv.cfg.resolved_kernel(fit_end), inv.cfg.map,
                          inv.cfg.operators);
            summarize_fit(inv, m);
        }
        fitted_on = m.train_length;
        rep = predictive_loglik(m, series, begin, end, eo);
    } else {
        ParametricDhpSpec spec;
        if (!fit_doc.is_null()) {
            spec = parametric_from_json(fit_doc.at("spec"));
            fitted_on = fit_doc.value("train_length", std::size_t{0});
        } else {
            spec = fit_parametric_mle(series.counts().first(fit_end), parse_baseline_form(model), inv.cfg.period,
                                      parametric_options(inv.cfg, fit_end))
                       .spec;
        }
        rep = predictive_loglik(spec, series, begin, end, eo);
    }
    prepare_out(inv);
    json doc{{"model", rep.model},
             {"range", inv.cfg.eval_range},
             {"begin", rep.begin},
             {"end", rep.end},
             {"fit_length", fitted_on},
             {"pll", rep.total},
             {"floored", rep.floored},
             {"clamped_baseline", rep.clamped_baseline},
             {"baseline_extension", rep.baseline_extension},
             {"split", to_json(split)}};
    doc["kappa_hat"] = rep.kappa_hat ? json(*rep.kappa_hat) : json(nullptr);
    write_json(inv.out / "eval.json", doc);
    CsvTable t;
    const std::size_t n = end - begin;
    t.add("t", index_column(begin + 1, n));
    Eigen::VectorXd counts(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) counts[static_cast<Eigen::Index>(k)] = static_cast<double>(series[begin + k]);
    t.add("count", counts);
    t.add("intensity", Eigen::Map<const Eigen::VectorXd>(rep.intensity.data(), static_cast<Eigen::Index>(n)));
    t.add("log_lik", Eigen::Map<const Eigen::VectorXd>(rep.per_bin.data(), static_cast<Eigen::Index>(n)));
    write_text(inv.out / "per_bin.csv", t.str());
    write_snapshot(inv.out, inv.command, inv.cfg, {{"input", inv.input.string()}, {"fit", inv.fit.string()}});
    log(inv) << rep.model << " " << inv.cfg.eval_range << " pLL " << format_number(rep.total) << " over bins "
             << begin + 1 << ".." << end << "\n";
}

void cmd_cv(const Invocation& inv) {
    const CountSeries series = require_input(inv);
    const SplitSpec split = require_split(inv, series.size());
    CvOptions opt;
    opt.base = inv.cfg.resolved_kernel(split.train_end);
    opt.d_max = opt.base.excitation.d_max;
    opt.operators = inv.cfg.operators;
    opt.eval = {inv.cfg.map.likelihood_floor};
    opt.threads = inv.cfg.threads;
    const CvResult res = cv_grid_search(series, split, inv.cfg.grid, inv.cfg.map, opt);
    prepare_out(inv);

    const std::size_t n = res.table.size();
    Eigen::VectorXd idx(static_cast<Eigen::Index>(n)), beta(idx.size()), sb(idx.size()), lb(idx.size()),
        sl(idx.size()), sf(idx.size()), lf(idx.size()), pll(idx.size()), kap(idx.size());
    std::vector<std::string> ok, conv, status;
    for (std::size_t i = 0; i < n; ++i) {
        const CvCell& c = res.table[i];
        const auto k = static_cast<Eigen::Index>(i);
        idx[k] = static_cast<double>(c.index);
        beta[k] = c.hp.excitation.beta;
        sb[k] = c.hp.baseline.sigma_per;
        lb[k] = c.hp.baseline.ell_per;
        sl[k] = c.hp.baseline.sigma_lin;
        sf[k] = c.hp.excitation.sigma_f;
        lf[k] = c.hp.excitation.ell_f;
        pll[k] = c.ok ? c.valid_pll : std::nan("");
        kap[k] = c.ok ? c.kappa_hat : std::nan("");
        ok.push_back(c.ok ? "1" : "0");
        conv.push_back(c.converged ? "1" : "0");
        std::string st = c.status;
        for (char& ch : st) {
            if (ch == ',' || ch == '\n') ch = ';';
        }
        status.push_back(st);
    }
    CsvTable t;
    t.add("cell", idx);
    t.add("beta", beta);
    t.add("sigma_b", sb);
    t.add("ell_b", lb);
    t.add("sigma_lin", sl);
    t.add("sigma_f", sf);
    t.add("ell_f", lf);
    t.add("ok", ok);
    t.add("converged", conv);
    t.add("valid_pll", pll);
    t.add("kappa_hat", kap);
    t.add("status", status);
    write_text(inv.out / "cv_table.csv", t.str());
    const CvCell& best = res.table[res.best];
    write_json(inv.out / "best.json", {{"cell", best.index},
                                       {"valid_pll", best.valid_pll},
                                       {"kappa_hat", best.kappa_hat},
                                       {"kernel", to_json(best.hp)},
                                       {"split", to_json(split)}});
    write_snapshot(inv.out, inv.command, inv.cfg, {{"input", inv.input.string()}});
    log(inv) << "cv over " << n << " cells: best cell " << best.index << " (beta "
             << format_number(best.hp.excitation.beta) << ", ell_f " << format_number(best.hp.excitation.ell_f)
             << ") validation pLL " << format_number(best.valid_pll) << "\n";
}

void cmd_bench(const Invocation& inv) {
    CountSeries series;
    SplitSpec split;
    prepare_out(inv);
    if (inv.input.empty()) {
        series = incident_standin(inv.cfg.bench.standin_length, inv.cfg.seed).series;
        split = inv.cfg.split.value_or(inv.cfg.bench.standin_split);
        save_counts(series, inv.out / "series.csv");
        log(inv) << "no --input: using a synthetic stand-in of " << series.size() << " bins\n";
    } else {
        series = load_counts(inv.input);
        split = require_split(inv, series.size());
    }
    BenchOptions bo;
    bo.period = inv.cfg.period;
    bo.d_max = inv.cfg.d_max;
    bo.search = inv.cfg.bench.search;
    bo.grid = inv.cfg.grid;
    bo.base = inv.cfg.kernel;
    bo.map = inv.cfg.map;
    bo.operators = inv.cfg.operators;
    bo.parametric = inv.cfg.parametric;
    bo.seed = inv.cfg.seed;
    bo.threads = inv.cfg.threads;
    bo.refit_on_validation = inv.cfg.refit_on_validation;
    const BenchResult res = run_bench(series, split, bo);

    std::vector<std::string> model, label, status, kappa;
    Eigen::VectorXd pll(static_cast<Eigen::Index>(res.rows.size()));
    Eigen::VectorXd floored(pll.size()), clamped(pll.size());
    json rows = json::array();
    std::string md = "| Model | Test pLL | kappa_hat |\n|---|---|---|\n";
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const BenchRow& r = res.rows[i];
        const auto k = static_cast<Eigen::Index>(i);
        model.push_back(r.model);
        label.push_back(r.label);
        pll[k] = r.pll;
        kappa.push_back(r.kappa_hat ? format_number(*r.kappa_hat) : "");
        floored[k] = r.floored;
        clamped[k] = r.clamped;
        std::string st = r.status;
        for (char& ch : st) {
            if (ch == ',' || ch == '\n') ch = ';';
        }
        status.push_back(st);
        json row{{"model", r.model}, {"label", r.label}, {"floored", r.floored}, {"clamped", r.clamped},
                 {"status", r.status}};
        row["pll"] = std::isfinite(r.pll) ? json(r.pll) : json(nullptr);
        row["kappa_hat"] = r.kappa_hat ? json(*r.kappa_hat) : json(nullptr);
        if (i < res.parametric.size() && r.status == "ok") row["spec"] = to_json(res.parametric[i].spec);
        rows.push_back(row);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f", r.pll);
        char kap[32] = "";
        if (r.kappa_hat) std::snprintf(kap, sizeof kap, "%.3f", *r.kappa_hat);
        md += "| " + r.label + " | " + buf + " | " + kap + " |\n";
    }
    CsvTable t;
    t.add("model", model);
    t.add("label", label);
    t.add("pll", pll);
    t.add("kappa_hat", kappa);
    t.add("floored", floored);
    t.add("clamped", clamped);
    t.add("status", status);
    write_text(inv.out / "bench_table.csv", t.str());
    write_text(inv.out / "bench.md", md);
    json doc{{"split", to_json(split)}, {"fit_end", res.fit_end}, {"gpdhp_kernel", to_json(res.chosen)},
             {"search", to_string(inv.cfg.bench.search)}, {"rows", rows}};
    if (res.cv) doc["cv_best_cell"] = res.cv->table[res.cv->best].index;
    write_json(inv.out / "bench.json", doc);
    write_snapshot(inv.out, inv.command, inv.cfg, {{"input", inv.input.string()}});
    log(inv) << md;
}

void cmd_figures(const Invocation& inv) {
    prepare_out(inv);
    json summary = json::object();
    for (const std::string& w : inv.cfg.figures.which) {
        if (w == "fig1") figure1(inv);
        else if (w == "fig2") figure2(inv);
        else if (w == "fig3") figure3(inv, summary);
        else if (w == "fig4") figure4(inv, summary);
    }
    write_json(inv.out / "figures.json", summary);
    write_snapshot(inv.out, inv.command, inv.cfg);
}

} // namespace gpdhp::cli
