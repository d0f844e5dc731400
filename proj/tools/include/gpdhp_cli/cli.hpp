#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gpdhp::cli {

[[nodiscard]] const char* version() noexcept;

// Runs one `gpdhp` invocation; args[0] is the program name. Progress and
// summaries go to `out`. On failure a single-line JSON document
// {"code", "message", "context"} goes to `err` and the return value is
// nonzero (2 for usage errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gpdhp::cli
