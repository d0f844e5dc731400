#include "gpdhp_cli/cli.hpp"

#include "artifacts.hpp"
#include "commands.hpp"

#include "gpdhp/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>

#ifndef GPDHP_VERSION
#define GPDHP_VERSION "unknown"
#endif

namespace gpdhp::cli {

const char* version() noexcept { return GPDHP_VERSION; }

namespace {

struct Flags {
    std::string input;
    std::string config;
    std::string out;
    std::string fit;
    std::uint64_t seed{0};
    std::string split;
    std::string model;
    double period{0.0};
    std::size_t dmax{0};
    int samples{0};
    unsigned threads{0};
};

struct Options {
    CLI::Option* seed{nullptr};
    CLI::Option* split{nullptr};
    CLI::Option* model{nullptr};
    CLI::Option* period{nullptr};
    CLI::Option* dmax{nullptr};
    CLI::Option* samples{nullptr};
    CLI::Option* threads{nullptr};
};

void emit_error(std::ostream& err, const std::string& code, const std::string& message, const json& context) {
    err << json{{"code", code}, {"message", message}, {"context", context}}.dump() << "\n";
}

RunConfig resolve(const std::string& command, const Flags& f, const Options& o) {
    RunConfig cfg;
    if (!f.config.empty()) merge_config(cfg, read_json(f.config));
    if (o.seed->count()) cfg.seed = f.seed;
    if (o.split && o.split->count()) cfg.split = parse_split(f.split);
    if (o.model && o.model->count()) cfg.model = f.model;
    if (o.period && o.period->count()) {
        if (!(f.period > 0.0)) throw ValidationError("--period must be positive");
        cfg.period = f.period;
        cfg.simulate.baseline.period = f.period;
    }
    if (o.dmax && o.dmax->count()) {
        if (f.dmax == 0) throw ValidationError("--dmax must be at least 1");
        cfg.d_max = f.dmax;
        if (command == "simulate") cfg.simulate.excitation.d_max = f.dmax;
    }
    if (o.samples && o.samples->count()) {
        if (f.samples < 0) throw ValidationError("--samples must be nonnegative");
        cfg.laplace_samples = f.samples;
    }
    if (o.threads && o.threads->count()) cfg.threads = f.threads;
    return cfg;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian-process discrete Hawkes process toolkit", "gpdhp"};
    app.set_version_flag("--version", std::string("gpdhp ") + version());
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app;
        Options opts;
        void (*fn)(const Invocation&);
    };
    Flags flags;
    std::map<std::string, Sub> subs;
    const std::vector<std::string> models{"gpdhp", "const", "linear", "sin", "linsin"};

    auto add = [&](const std::string& name, const std::string& help, void (*fn)(const Invocation&),
                   bool needs_input, bool model_flag, bool laplace_flags) {
        CLI::App* s = app.add_subcommand(name, help);
        Options o;
        auto* in = s->add_option("--input", flags.input, "Count series CSV");
        if (needs_input) in->required();
        in->check(CLI::ExistingFile);
        s->add_option("--config", flags.config, "JSON config overlay")->check(CLI::ExistingFile);
        s->add_option("--out", flags.out, "Output directory")->required();
        o.seed = s->add_option("--seed", flags.seed, "Random seed");
        o.split = s->add_option("--split", flags.split, "train_end,valid_end,test_end (1-based inclusive)");
        o.period = s->add_option("--period", flags.period, "Seasonal period");
        o.dmax = s->add_option("--dmax", flags.dmax, "Maximum excitation lag");
        o.threads = s->add_option("--threads", flags.threads, "Worker threads (0 = all cores)");
        if (model_flag) o.model = s->add_option("--model", flags.model, "Model")->check(CLI::IsMember(models));
        if (laplace_flags) {
            o.samples = s->add_option("--samples", flags.samples, "Laplace samples for credible bands");
            s->add_option("--fit", flags.fit, "fit.json from an earlier fit run")->check(CLI::ExistingFile);
        }
        subs.emplace(name, Sub{s, o, fn});
    };
    add("simulate", "Simulate a discrete Hawkes process", cmd_simulate, false, false, false);
    add("fit", "Fit GP-DHP (MAP) or a parametric DHP (MLE)", cmd_fit, true, true, false);
    add("decompose", "Baseline and excitation estimates with credible bands", cmd_decompose, true, true, true);
    add("eval", "Predictive log-likelihood on the validation or test split", cmd_eval, true, true, true);
    add("cv", "Grid search over GP-DHP hyperparameters", cmd_cv, true, false, false);
    add("bench", "Five-model predictive benchmark", cmd_bench, false, false, false);
    add("figures", "Data bundles for the synthetic figures", cmd_figures, false, false, true);

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << "gpdhp " << version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.what(), {{"args", args}});
        return 2;
    }

    std::string command;
    for (const auto& [name, s] : subs) {
        if (s.app->parsed()) command = name;
    }
    const Sub& sub = subs.at(command);
    json context{{"command", command}};
    if (!flags.input.empty()) context["input"] = flags.input;
    if (!flags.config.empty()) context["config"] = flags.config;
    try {
        Invocation inv;
        inv.command = command;
        inv.cfg = resolve(command, flags, sub.opts);
        inv.input = flags.input;
        inv.fit = flags.fit;
        inv.out = flags.out;
        inv.log = &out;
        sub.fn(inv);
        return 0;
    } catch (const SimulationError& e) {
        context["at"] = e.at();
        emit_error(err, e.code(), e.what(), context);
    } catch (const ConvergenceError& e) {
        context["iterations"] = e.iterations();
        context["residual"] = e.residual();
        emit_error(err, e.code(), e.what(), context);
    } catch (const Error& e) {
        emit_error(err, e.code(), e.what(), context);
    } catch (const json::exception& e) {
        emit_error(err, "config", e.what(), context);
    } catch (const std::exception& e) {
        emit_error(err, "internal", e.what(), context);
    }
    return 1;
}

} // namespace gpdhp::cli
