#include "gpdhp_cli/config.hpp"

#include "gpdhp/error.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace gpdhp::cli {
namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ValidationError("config: unknown key '" + where + "." + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

// Finite doubles only; nlohmann maps NaN to null on output.
json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json to_json(const MapConfig& m) {
    return {{"max_newton_iter", m.max_newton_iter},
            {"grad_tol", m.grad_tol},
            {"damping_init", m.damping_init},
            {"line_search_shrink", m.line_search_shrink},
            {"max_line_search", m.max_line_search},
            {"likelihood_floor", m.likelihood_floor},
            {"init_mode", m.init_mode == InitMode::mean_count ? "mean_count" : "smoothed_counts"},
            {"smoothing_window", m.smoothing_window},
            {"cg_tol", m.cg_tol},
            {"cg_max_iter", m.cg_max_iter},
            {"objective_rtol", m.objective_rtol},
            {"stall_patience", m.stall_patience}};
}

void merge(MapConfig& m, const json& j) {
    check_keys(j, "map",
               {"max_newton_iter", "grad_tol", "damping_init", "line_search_shrink", "max_line_search",
                "likelihood_floor", "init_mode", "smoothing_window", "cg_tol", "cg_max_iter", "objective_rtol",
                "stall_patience"});
    read(j, "max_newton_iter", m.max_newton_iter);
    read(j, "grad_tol", m.grad_tol);
    read(j, "damping_init", m.damping_init);
    read(j, "line_search_shrink", m.line_search_shrink);
    read(j, "max_line_search", m.max_line_search);
    read(j, "likelihood_floor", m.likelihood_floor);
    read(j, "smoothing_window", m.smoothing_window);
    read(j, "cg_tol", m.cg_tol);
    read(j, "cg_max_iter", m.cg_max_iter);
    read(j, "objective_rtol", m.objective_rtol);
    read(j, "stall_patience", m.stall_patience);
    if (j.contains("init_mode")) {
        std::string mode;
        read(j, "init_mode", mode);
        if (mode == "mean_count") m.init_mode = InitMode::mean_count;
        else if (mode == "smoothed_counts") m.init_mode = InitMode::smoothed_counts;
        else throw ValidationError("config: init_mode must be mean_count or smoothed_counts");
    }
    m.validate();
}

json to_json(const OperatorOptions& o) {
    return {{"mode", o.mode == ExcitationMode::ski ? "ski" : "exact"},
            {"inducing_points", o.inducing_points},
            {"dense_cap", o.dense_cap}};
}

void merge(OperatorOptions& o, const json& j) {
    check_keys(j, "operators", {"mode", "inducing_points", "dense_cap"});
    if (j.contains("mode")) {
        std::string mode;
        read(j, "mode", mode);
        if (mode == "ski") o.mode = ExcitationMode::ski;
        else if (mode == "exact") o.mode = ExcitationMode::exact;
        else throw ValidationError("config: operators.mode must be ski or exact");
    }
    read(j, "inducing_points", o.inducing_points);
    read(j, "dense_cap", o.dense_cap);
}

void merge(BaselineFamilySpec& b, const json& j) {
    check_keys(j, "simulate.baseline", {"a", "b", "c", "d", "period"});
    read(j, "a", b.a);
    read(j, "b", b.b);
    read(j, "c", b.c);
    read(j, "d", b.d);
    read(j, "period", b.period);
}

void merge(ExcitationFamilySpec& e, const json& j) {
    check_keys(j, "simulate.excitation",
               {"family", "alpha", "r", "p", "gamma", "beta", "mu1", "mu2", "sigma", "d_max"});
    if (j.contains("family")) {
        std::string name;
        read(j, "family", name);
        e.family = parse_excitation_family(name);
    }
    read(j, "alpha", e.alpha);
    read(j, "r", e.r);
    read(j, "p", e.p);
    read(j, "gamma", e.gamma);
    read(j, "beta", e.beta);
    read(j, "mu1", e.mu1);
    read(j, "mu2", e.mu2);
    read(j, "sigma", e.sigma);
    read(j, "d_max", e.d_max);
}

json to_json(const CvGrid& g) {
    return {{"beta", g.beta},       {"sigma_b", g.sigma_b}, {"ell_b", g.ell_b},
            {"sigma_lin", g.sigma_lin}, {"sigma_f", g.sigma_f}, {"ell_f", g.ell_f}};
}

void merge(CvGrid& g, const json& j) {
    check_keys(j, "grid", {"beta", "sigma_b", "ell_b", "sigma_lin", "sigma_f", "ell_f"});
    read(j, "beta", g.beta);
    read(j, "sigma_b", g.sigma_b);
    read(j, "ell_b", g.ell_b);
    read(j, "sigma_lin", g.sigma_lin);
    read(j, "sigma_f", g.sigma_f);
    read(j, "ell_f", g.ell_f);
    g.validate();
}

void merge(BenchSettings& b, const json& j) {
    check_keys(j, "bench", {"standin_length", "standin_split", "search"});
    read(j, "standin_length", b.standin_length);
    if (j.contains("standin_split")) {
        std::vector<std::size_t> v;
        read(j, "standin_split", v);
        if (v.size() != 3) throw ValidationError("config: bench.standin_split needs three ends");
        b.standin_split = {v[0], v[1], v[2]};
    }
    if (j.contains("search")) b.search = parse_search_mode(j.at("search").get<std::string>());
}

void merge(FiguresSettings& f, const json& j) {
    check_keys(j, "figures", {"which", "T", "train_end", "search", "lags_reported"});
    read(j, "which", f.which);
    read(j, "T", f.T);
    read(j, "train_end", f.train_end);
    if (j.contains("search")) f.search = parse_search_mode(j.at("search").get<std::string>());
    read(j, "lags_reported", f.lags_reported);
    for (const auto& w : f.which) {
        if (w != "fig1" && w != "fig2" && w != "fig3" && w != "fig4") {
            throw ValidationError("config: unknown figure '" + w + "'");
        }
    }
    if (f.train_end == 0 || f.train_end >= f.T) {
        throw ValidationError("config: figures.train_end must lie in [1, T)");
    }
}

} // namespace

std::string to_string(SearchMode m) {
    switch (m) {
    case SearchMode::grid: return "grid";
    case SearchMode::axes: return "axes";
    case SearchMode::fixed: return "fixed";
    }
    return "grid";
}

SearchMode parse_search_mode(const std::string& s) {
    if (s == "grid") return SearchMode::grid;
    if (s == "axes") return SearchMode::axes;
    if (s == "fixed") return SearchMode::fixed;
    throw ValidationError("config: search must be grid, axes or fixed, got '" + s + "'");
}

KernelHyperparams RunConfig::resolved_kernel(std::size_t train_length) const {
    KernelHyperparams hp = kernel;
    hp.baseline.period = period;
    hp.excitation.d_max = d_max > 0 ? d_max : default_d_max(train_length);
    return hp;
}

json to_json(const KernelHyperparams& hp) {
    const auto& b = hp.baseline;
    const auto& f = hp.excitation;
    return {{"baseline",
             {{"sigma_per", b.sigma_per},
              {"ell_per", b.ell_per},
              {"period", b.period},
              {"sigma_lin", b.sigma_lin},
              {"eps_b", b.eps_b},
              {"sigma_const", b.sigma_const}}},
            {"excitation",
             {{"sigma_f", f.sigma_f}, {"ell_f", f.ell_f}, {"beta", f.beta}, {"eps_f", f.eps_f}, {"d_max", f.d_max}}}};
}

KernelHyperparams kernel_from_json(const json& j, KernelHyperparams hp) {
    check_keys(j, "kernel", {"baseline", "excitation"});
    if (j.contains("baseline")) {
        const json& b = j.at("baseline");
        check_keys(b, "kernel.baseline", {"sigma_per", "ell_per", "period", "sigma_lin", "eps_b", "sigma_const"});
        read(b, "sigma_per", hp.baseline.sigma_per);
        read(b, "ell_per", hp.baseline.ell_per);
        read(b, "period", hp.baseline.period);
        read(b, "sigma_lin", hp.baseline.sigma_lin);
        read(b, "eps_b", hp.baseline.eps_b);
        read(b, "sigma_const", hp.baseline.sigma_const);
    }
    if (j.contains("excitation")) {
        const json& f = j.at("excitation");
        check_keys(f, "kernel.excitation", {"sigma_f", "ell_f", "beta", "eps_f", "d_max"});
        read(f, "sigma_f", hp.excitation.sigma_f);
        read(f, "ell_f", hp.excitation.ell_f);
        read(f, "beta", hp.excitation.beta);
        read(f, "eps_f", hp.excitation.eps_f);
        read(f, "d_max", hp.excitation.d_max);
    }
    return hp;
}

json to_json(const BaselineFamilySpec& b) {
    return {{"a", b.a}, {"b", b.b}, {"c", b.c}, {"d", b.d}, {"period", b.period}};
}

json to_json(const ExcitationFamilySpec& e) {
    json j{{"family", to_string(e.family)}, {"alpha", e.alpha}, {"d_max", e.d_max}};
    switch (e.family) {
    case ExcitationFamily::negative_binomial:
        j["r"] = e.r;
        j["p"] = e.p;
        break;
    case ExcitationFamily::geometric:
    case ExcitationFamily::geometric_bench: j["p"] = e.p; break;
    case ExcitationFamily::power_law:
        j["gamma"] = e.gamma;
        j["beta"] = e.beta;
        break;
    case ExcitationFamily::bimodal_gaussian:
        j["mu1"] = e.mu1;
        j["mu2"] = e.mu2;
        j["sigma"] = e.sigma;
        break;
    }
    return j;
}

json to_json(const ParametricDhpSpec& s) {
    return {{"form", to_string(s.form)}, {"gamma0", s.gamma0}, {"gamma1", s.gamma1}, {"gamma2", s.gamma2},
            {"period", s.period},        {"r", s.r},           {"p", s.p},           {"d_max", s.d_max}};
}

ParametricDhpSpec parametric_from_json(const json& j) {
    check_keys(j, "parametric", {"form", "gamma0", "gamma1", "gamma2", "period", "r", "p", "d_max"});
    ParametricDhpSpec s;
    if (j.contains("form")) s.form = parse_baseline_form(j.at("form").get<std::string>());
    read(j, "gamma0", s.gamma0);
    read(j, "gamma1", s.gamma1);
    read(j, "gamma2", s.gamma2);
    read(j, "period", s.period);
    read(j, "r", s.r);
    read(j, "p", s.p);
    read(j, "d_max", s.d_max);
    s.validate();
    return s;
}

json to_json(const SplitSpec& s) {
    return {{"train_end", s.train_end}, {"valid_end", s.valid_end}, {"test_end", s.test_end}};
}

SplitSpec parse_split(const std::string& text) {
    std::vector<std::size_t> ends;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size() || item.find('-') != std::string::npos) {
            throw ValidationError("split: '" + item + "' is not a nonnegative integer");
        }
        ends.push_back(static_cast<std::size_t>(v));
    }
    if (ends.size() != 3) throw ValidationError("split: expected train_end,valid_end,test_end");
    return {ends[0], ends[1], ends[2]};
}

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v[i]));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("expected a numeric array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& x = j[i];
        v[static_cast<Eigen::Index>(i)] = x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
    }
    return v;
}

void merge_config(RunConfig& cfg, const json& j) {
    check_keys(j, "",
               {"seed", "model", "split", "period", "d_max", "eval_range", "refit_on_validation", "kernel", "operators", "map", "laplace",
                "simulate", "grid", "threads", "parametric", "bench", "figures"});
    read(j, "seed", cfg.seed);
    read(j, "model", cfg.model);
    if (j.contains("split")) {
        const json& s = j.at("split");
        if (s.is_null()) {
            cfg.split.reset();
        } else if (s.is_string()) {
            cfg.split = parse_split(s.get<std::string>());
        } else {
            check_keys(s, "split", {"train_end", "valid_end", "test_end"});
            SplitSpec sp;
            read(s, "train_end", sp.train_end);
            read(s, "valid_end", sp.valid_end);
            read(s, "test_end", sp.test_end);
            cfg.split = sp;
        }
    }
    read(j, "period", cfg.period);
    read(j, "d_max", cfg.d_max);
    read(j, "eval_range", cfg.eval_range);
    read(j, "refit_on_validation", cfg.refit_on_validation);
    if (j.contains("kernel")) cfg.kernel = kernel_from_json(j.at("kernel"), cfg.kernel);
    if (j.contains("operators")) merge(cfg.operators, j.at("operators"));
    if (j.contains("map")) merge(cfg.map, j.at("map"));
    if (j.contains("laplace")) {
        const json& l = j.at("laplace");
        check_keys(l, "laplace", {"n_samples", "force_iterative"});
        read(l, "n_samples", cfg.laplace_samples);
        read(l, "force_iterative", cfg.laplace_force_iterative);
    }
    if (j.contains("simulate")) {
        const json& s = j.at("simulate");
        check_keys(s, "simulate", {"T", "baseline", "excitation", "step_label"});
        read(s, "T", cfg.simulate.T);
        read(s, "step_label", cfg.simulate.step_label);
        if (s.contains("baseline")) merge(cfg.simulate.baseline, s.at("baseline"));
        if (s.contains("excitation")) merge(cfg.simulate.excitation, s.at("excitation"));
    }
    if (j.contains("grid")) merge(cfg.grid, j.at("grid"));
    read(j, "threads", cfg.threads);
    if (j.contains("parametric")) {
        const json& p = j.at("parametric");
        check_keys(p, "parametric", {"starts", "max_iter"});
        read(p, "starts", cfg.parametric.starts);
        read(p, "max_iter", cfg.parametric.max_iter);
    }
    if (j.contains("bench")) merge(cfg.bench, j.at("bench"));
    if (j.contains("figures")) merge(cfg.figures, j.at("figures"));

    if (cfg.eval_range != "valid" && cfg.eval_range != "test") {
        throw ValidationError("config: eval_range must be valid or test");
    }
    if (!(cfg.period > 0.0) || !std::isfinite(cfg.period)) throw ValidationError("config: period must be positive");
    if (cfg.laplace_samples < 0) throw ValidationError("config: laplace.n_samples must be nonnegative");
    if (cfg.parametric.starts < 1) throw ValidationError("config: parametric.starts must be at least 1");
}

json to_json(const RunConfig& cfg) {
    json j{{"seed", cfg.seed},
           {"model", cfg.model},
           {"split", cfg.split ? to_json(*cfg.split) : json(nullptr)},
           {"period", cfg.period},
           {"d_max", cfg.d_max},
           {"eval_range", cfg.eval_range},
           {"refit_on_validation", cfg.refit_on_validation},
           {"kernel", to_json(cfg.kernel)},
           {"operators", to_json(cfg.operators)},
           {"map", to_json(cfg.map)},
           {"laplace", {{"n_samples", cfg.laplace_samples}, {"force_iterative", cfg.laplace_force_iterative}}},
           {"simulate",
            {{"T", cfg.simulate.T},
             {"step_label", cfg.simulate.step_label},
             {"baseline", to_json(cfg.simulate.baseline)},
             {"excitation", to_json(cfg.simulate.excitation)}}},
           {"grid", to_json(cfg.grid)},
           {"threads", cfg.threads},
           {"parametric", {{"starts", cfg.parametric.starts}, {"max_iter", cfg.parametric.max_iter}}},
           {"bench",
            {{"standin_length", cfg.bench.standin_length},
             {"standin_split",
              {cfg.bench.standin_split.train_end, cfg.bench.standin_split.valid_end,
               cfg.bench.standin_split.test_end}},
             {"search", to_string(cfg.bench.search)}}},
           {"figures",
            {{"which", cfg.figures.which},
             {"T", cfg.figures.T},
             {"train_end", cfg.figures.train_end},
             {"search", to_string(cfg.figures.search)},
             {"lags_reported", cfg.figures.lags_reported}}}};
    return j;
}

} // namespace gpdhp::cli
