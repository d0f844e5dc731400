#pragma once

#include "gpdhp_cli/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace gpdhp::cli {

struct Invocation {
    std::string command;
    RunConfig cfg;
    std::filesystem::path input;  // empty when not given
    std::filesystem::path fit;    // --fit: fit.json from an earlier `fit`
    std::filesystem::path out;
    std::ostream* log{nullptr};
};

void cmd_simulate(const Invocation& inv);
void cmd_fit(const Invocation& inv);
void cmd_decompose(const Invocation& inv);
void cmd_eval(const Invocation& inv);
void cmd_cv(const Invocation& inv);
void cmd_bench(const Invocation& inv);
void cmd_figures(const Invocation& inv);

} // namespace gpdhp::cli
