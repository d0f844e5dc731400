#include <doctest.h>

#include "gpdhp_cli/cli.hpp"
#include "gpdhp_cli/config.hpp"

#include "gpdhp/series_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using gpdhp::cli::json;

namespace {

fs::path scratch(const std::string& name) {
    const char* env = std::getenv("GPDHP_TEST_TMP");
    const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "gpdhp_cli_tests";
    const fs::path dir = root / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "gpdhp");
    std::ostringstream out, err;
    const int code = gpdhp::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json read(const fs::path& p) { return json::parse(slurp(p)); }

void write_config(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(); }

std::size_t data_rows(const std::string& csv) {
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    return lines - 1;
}

} // namespace

TEST_CASE("simulate is byte-identical for a fixed seed") {
    const fs::path dir = scratch("simulate");
    const fs::path cfg = dir / "cfg.json";
    write_config(cfg, {{"simulate",
                        {{"T", 500},
                         {"baseline", {{"a", 0.7}, {"c", 0.2}}},
                         {"excitation", {{"family", "nb"}, {"alpha", 0.5}, {"p", 0.6}, {"r", 2.0}}}}}});
    for (const char* run : {"a", "b"}) {
        const Run r = invoke({"simulate", "--config", cfg.string(), "--seed", "42", "--out", (dir / run).string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    const Run other = invoke({"simulate", "--config", cfg.string(), "--seed", "43", "--out", (dir / "c").string()});
    REQUIRE(other.code == 0);

    const std::string a = slurp(dir / "a" / "series.csv");
    CHECK(a == slurp(dir / "b" / "series.csv"));
    CHECK(a != slurp(dir / "c" / "series.csv"));
    CHECK(gpdhp::load_counts(dir / "a" / "series.csv").size() == 500);

    const json snap = read(dir / "a" / "config.json");
    CHECK(snap["seed"] == 42);
    CHECK(snap["version"] == gpdhp::cli::version());
    CHECK(snap["config"]["simulate"]["excitation"]["family"] == "negative_binomial");
    const json spec = read(dir / "a" / "spec.json");
    CHECK(spec["kernel_mass"].get<double>() == doctest::Approx(0.5 * (1.0 - 0.6 * 0.6)).epsilon(1e-3));
}

TEST_CASE("decompose of a series without events gives a zero excitation") {
    const fs::path dir = scratch("no_events");
    const fs::path series = dir / "zeros.csv";
    gpdhp::save_counts(gpdhp::CountSeries(std::vector<std::int64_t>(200, 0)), series);

    const Run fit = invoke({"fit", "--input", series.string(), "--dmax", "20", "--out", (dir / "fit").string()});
    REQUIRE_MESSAGE(fit.code == 0, fit.err);
    const Run dec = invoke({"decompose", "--input", series.string(), "--fit", (dir / "fit" / "fit.json").string(),
                           "--samples", "50", "--out", (dir / "dec").string()});
    REQUIRE_MESSAGE(dec.code == 0, dec.err);

    const json d = read(dir / "dec" / "decomposition.json");
    REQUIRE(d["f_hat"].size() == 20);
    for (const auto& v : d["f_hat"]) CHECK(v.get<double>() == 0.0);
    CHECK(d["kappa_hat"] == 0.0);
    const std::string exc = slurp(dir / "dec" / "excitation.csv");
    CHECK(exc.rfind("d,f_hat,f_mean,f_lower,f_upper\n", 0) == 0);
    CHECK(data_rows(exc) == 20);
    CHECK(data_rows(slurp(dir / "dec" / "baseline.csv")) == 200);
}

TEST_CASE("bench emits exactly five rows") {
    const fs::path dir = scratch("bench");
    const fs::path cfg = dir / "cfg.json";
    write_config(cfg, {{"bench", {{"standin_length", 900}, {"standin_split", {500, 700, 900}}, {"search", "fixed"}}},
                       {"parametric", {{"starts", 2}}},
                       {"period", 365.0}});
    const Run r = invoke({"bench", "--config", cfg.string(), "--dmax", "30", "--seed", "3", "--out",
                         (dir / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string table = slurp(dir / "out" / "bench_table.csv");
    CHECK(data_rows(table) == 5);
    const json b = read(dir / "out" / "bench.json");
    REQUIRE(b["rows"].size() == 5);
    const char* models[] = {"const", "linear", "sin", "linsin", "gpdhp"};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(b["rows"][i]["model"] == models[i]);
        CHECK(b["rows"][i]["pll"].is_number());
    }
    CHECK(fs::exists(dir / "out" / "series.csv"));
}

TEST_CASE("eval from a saved fit matches eval with an inline fit") {
    const fs::path dir = scratch("eval");
    const Run sim = invoke({"simulate", "--seed", "5", "--out", (dir / "sim").string()});
    REQUIRE(sim.code == 0);
    const fs::path series = dir / "sim" / "series.csv";
    const fs::path cfg = dir / "cfg.json";
    write_config(cfg, {{"refit_on_validation", false}});

    for (const std::string model : {"gpdhp", "linear"}) {
        CAPTURE(model);
        const auto common = std::vector<std::string>{"--input", series.string(), "--split", "600,800,1000",
                                                     "--model", model, "--dmax", "40", "--config", cfg.string()};
        auto args = [&](std::vector<std::string> head) {
            head.insert(head.end(), common.begin(), common.end());
            return head;
        };
        REQUIRE(invoke(args({"fit", "--out", (dir / ("fit_" + model)).string()})).code == 0);
        const Run saved = invoke(args({"eval", "--fit", (dir / ("fit_" + model) / "fit.json").string(), "--out",
                                      (dir / ("saved_" + model)).string()}));
        REQUIRE_MESSAGE(saved.code == 0, saved.err);
        const Run inline_fit = invoke(args({"eval", "--out", (dir / ("inline_" + model)).string()}));
        REQUIRE(inline_fit.code == 0);
        const json a = read(dir / ("saved_" + model) / "eval.json");
        const json b = read(dir / ("inline_" + model) / "eval.json");
        CHECK(a["begin"] == 800);
        CHECK(a["end"] == 1000);
        CHECK(a["pll"].get<double>() == doctest::Approx(b["pll"].get<double>()).epsilon(1e-9));
        CHECK(data_rows(slurp(dir / ("saved_" + model) / "per_bin.csv")) == 200);
    }
}

TEST_CASE("cv writes one row per grid cell") {
    const fs::path dir = scratch("cv");
    REQUIRE(invoke({"simulate", "--seed", "8", "--out", (dir / "sim").string()}).code == 0);
    const fs::path cfg = dir / "cfg.json";
    write_config(cfg, {{"grid",
                        {{"beta", {0.1, 0.3}},
                         {"sigma_b", {1.0}},
                         {"ell_b", {5.0}},
                         {"sigma_lin", {0.0}},
                         {"sigma_f", {1.0}},
                         {"ell_f", {5.0, 20.0}}}}});
    const Run r = invoke({"cv", "--input", (dir / "sim" / "series.csv").string(), "--split", "700,1000,1000",
                         "--config", cfg.string(), "--dmax", "30", "--out", (dir / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(data_rows(slurp(dir / "out" / "cv_table.csv")) == 4);
    const json best = read(dir / "out" / "best.json");
    CHECK(best["cell"].get<int>() >= 0);
    CHECK(best["cell"].get<int>() < 4);
}

TEST_CASE("figure 1 intensity") {
    const fs::path dir = scratch("fig1");
    const fs::path cfg = dir / "cfg.json";
    write_config(cfg, {{"figures", {{"which", {"fig1", "fig2"}}}}});
    const Run r = invoke({"figures", "--config", cfg.string(), "--out", (dir / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream csv(slurp(dir / "out" / "fig1_intensity.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t,count,baseline,intensity");
    std::vector<std::string> rows;
    while (std::getline(csv, line)) rows.push_back(line);
    REQUIRE(rows.size() == 21);
    CHECK(rows[3] == "3,2,0.5,0.5");
    CHECK(rows[4] == "4,0,0.5,2");
    // 0.5 + 2 * 0.75 * 0.5^4 + 4 * 0.75
    CHECK(rows[8] == "8,0,0.5,3.59375");
    CHECK(data_rows(slurp(dir / "out" / "fig2_draws.csv")) == 3 * 5 * 100);
}

TEST_CASE("failures produce a machine-readable error document") {
    const fs::path dir = scratch("errors");

    const Run missing = invoke({"fit", "--out", (dir / "x").string()});
    CHECK(missing.code == 2);
    const json m = json::parse(missing.err);
    CHECK(m["code"] == "usage");
    CHECK(m.contains("message"));
    CHECK(m.contains("context"));

    const fs::path bad = dir / "bad.csv";
    std::ofstream(bad) << "1\n2\n-3\n";
    const Run neg = invoke({"fit", "--input", bad.string(), "--out", (dir / "y").string()});
    CHECK(neg.code == 1);
    const json n = json::parse(neg.err);
    CHECK(n["code"] == "validation");
    CHECK(n["context"]["command"] == "fit");

    const fs::path cfg = dir / "typo.json";
    write_config(cfg, {{"kernal", json::object()}});
    const Run typo = invoke({"simulate", "--config", cfg.string(), "--out", (dir / "z").string()});
    CHECK(typo.code == 1);
    CHECK(json::parse(typo.err)["message"].get<std::string>().find("kernal") != std::string::npos);

    const fs::path hot = dir / "hot.json";
    write_config(hot, {{"simulate", {{"T", 10000}, {"excitation", {{"family", "geometric"}, {"alpha", 1.5}}}}}});
    const Run blow = invoke({"simulate", "--config", hot.string(), "--out", (dir / "w").string()});
    CHECK(blow.code == 1);
    const json b = json::parse(blow.err);
    CHECK(b["code"] == "simulation");
    CHECK(b["context"]["at"].get<long long>() > 1);

    const Run split = invoke({"eval", "--input", bad.string(), "--split", "2,1,3", "--out", (dir / "v").string()});
    CHECK(split.code == 1);
}

TEST_CASE("split parsing") {
    const auto s = gpdhp::cli::parse_split("10,20,30");
    CHECK(s.train_end == 10);
    CHECK(s.valid_end == 20);
    CHECK(s.test_end == 30);
    CHECK_THROWS((void)gpdhp::cli::parse_split("10,20"));
    CHECK_THROWS((void)gpdhp::cli::parse_split("10,-2,30"));
    CHECK_THROWS((void)gpdhp::cli::parse_split("a,b,c"));
}
