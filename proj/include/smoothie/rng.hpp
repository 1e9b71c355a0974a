#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "smoothie/matrix.hpp"

namespace smoothie {

// Seeded RNG with a self-contained Box-Muller normal, so sequences do not
// depend on standard-library distribution internals. Draw order is part of
// the reproducibility contract: grids are filled row-major.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return (engine_() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    Mat normal_mat(std::size_t rows, std::size_t cols) {
        Mat m(rows, cols);
        for (double& v : m.vec()) v = normal();
        return m;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace smoothie
