#pragma once

#include "gpdhp_cli/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gpdhp::cli {

// Shortest round-trip decimal form; "nan" / "inf" for non-finite values.
[[nodiscard]] std::string format_number(double x);

// Column-major CSV builder. All columns must have equal length.
class CsvTable {
public:
    void add(std::string name, const Eigen::VectorXd& values);
    void add(std::string name, std::vector<std::string> values);
    [[nodiscard]] std::string str() const;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<std::string>> cols_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);
[[nodiscard]] json read_json(const std::filesystem::path& path);

// config.json: tool name and version, subcommand, seed and the resolved config.
void write_snapshot(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const json& extra = json::object());

[[nodiscard]] Eigen::VectorXd index_column(std::size_t first, std::size_t count);

} // namespace gpdhp::cli
