#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gpdhp/rng.hpp"

namespace testing {

// Sparse-ish random counts: roughly half zeros, occasional bursts.
inline std::vector<std::int64_t> random_counts(std::size_t T, std::uint64_t seed, double zero_rate = 0.5) {
    gpdhp::SplitMix64 rng(seed);
    std::vector<std::int64_t> out(T);
    for (auto& c : out) {
        if (rng.uniform() < zero_rate) {
            c = 0;
        } else {
            c = 1 + static_cast<std::int64_t>(rng() % 6);
        }
    }
    return out;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    gpdhp::SplitMix64 rng(seed);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 2.0 * rng.uniform() - 1.0;
    return v;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

} // namespace testing
