#include "artifacts.hpp"

#include "gpdhp/error.hpp"
#include "gpdhp_cli/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gpdhp::cli {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

void CsvTable::add(std::string name, const Eigen::VectorXd& values) {
    std::vector<std::string> col;
    col.reserve(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) col.push_back(format_number(values[i]));
    add(std::move(name), std::move(col));
}

void CsvTable::add(std::string name, std::vector<std::string> values) {
    if (!cols_.empty() && values.size() != cols_.front().size()) {
        throw DimensionError("csv column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                             std::to_string(cols_.front().size()));
    }
    names_.push_back(std::move(name));
    cols_.push_back(std::move(values));
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t c = 0; c < names_.size(); ++c) {
        if (c) out += ',';
        out += names_[c];
    }
    out += '\n';
    const std::size_t rows = cols_.empty() ? 0 : cols_.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            if (c) out += ',';
            out += cols_[c][r];
        }
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("io", "cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw Error("io", "failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("io", "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_snapshot(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const json& extra) {
    json j{{"tool", "gpdhp"}, {"version", version()}, {"command", command}, {"seed", cfg.seed},
           {"config", to_json(cfg)}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json(dir / "config.json", j);
}

Eigen::VectorXd index_column(std::size_t first, std::size_t count) {
    return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(count), static_cast<double>(first),
                                      static_cast<double>(first + count) - 1.0);
}

} // namespace gpdhp::cli
