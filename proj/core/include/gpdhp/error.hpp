#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace gpdhp {

// Base exception. `code()` is a short machine-readable tag used by the CLI
// error document.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

class GapError : public Error {
public:
    explicit GapError(const std::string& message) : Error("gap", message) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& message, int iterations, double residual)
        : Error("convergence", message), iterations_(iterations), residual_(residual) {}

    [[nodiscard]] int iterations() const noexcept { return iterations_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& message, long long at)
        : Error("simulation", message), at_(at) {}

    // 1-based time index at which the simulation aborted.
    [[nodiscard]] long long at() const noexcept { return at_; }

private:
    long long at_;
};

// Short %.3g rendering for diagnostics (std::to_string prints 0.000000 for
// small residuals).
[[nodiscard]] inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

} // namespace gpdhp
