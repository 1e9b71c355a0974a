#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smoothie/schedule.hpp"

using namespace smoothie;

namespace {

// independent oracle for sigma(t), written straight from the formula
double sigma_oracle(const NoiseSchedule& s, double t) {
    const double ratio = t / (static_cast<double>(s.T) - t + s.eps);
    return (s.sigma_max - s.sigma_min) * (2.0 / std::numbers::pi) *
               std::atan(std::sqrt(ratio) / s.d_rate) +
           s.sigma_min;
}

}  // namespace

TEST_CASE("sigma endpoints with default parameters") {
    NoiseSchedule s;
    CHECK(s.sigma(0.0) == doctest::Approx(1.5).epsilon(1e-12));
    // at t = T the argument is sqrt(T / eps) / d, far along the arctan arm
    CHECK(s.sigma(200.0) == doctest::Approx(192.0).epsilon(0.5 / 192.0));
    CHECK(s.sigma(100.0) == doctest::Approx(15.48).epsilon(0.01));
}

TEST_CASE("sigma matches the closed form on a grid") {
    NoiseSchedule s;
    for (double t = 0.0; t <= 200.0; t += 12.5)
        CHECK(s.sigma(t) == doctest::Approx(sigma_oracle(s, t)).epsilon(1e-12));

    NoiseSchedule other;
    other.sigma_min = 0.5;
    other.sigma_max = 50.0;
    other.d_rate = 4.0;
    other.T = 80;
    for (double t = 0.0; t <= 80.0; t += 7.0)
        CHECK(other.sigma(t) ==
              doctest::Approx(sigma_oracle(other, t)).epsilon(1e-12));
}

TEST_CASE("sigma is strictly increasing and bounded") {
    NoiseSchedule s;
    double prev = s.sigma(0.0);
    for (int t = 1; t <= s.T; ++t) {
        const double cur = s.sigma(static_cast<double>(t));
        CHECK(cur > prev);
        CHECK(cur < s.sigma_max);
        prev = cur;
    }
    CHECK(s.sigma(0.0) >= s.sigma_min);
}

TEST_CASE("validate names the broken constraint") {
    NoiseSchedule s;
    CHECK_NOTHROW(s.validate());

    s.sigma_min = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = NoiseSchedule{};
    s.sigma_max = s.sigma_min;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = NoiseSchedule{};
    s.T = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = NoiseSchedule{};
    s.d_rate = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = NoiseSchedule{};
    s.eps = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = NoiseSchedule{};
    s.delta_tilde = -0.1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("timestep grid descends from T and ends above zero") {
    NoiseSchedule s;
    const auto grid = s.timestep_grid(50);
    REQUIRE(grid.size() == 50);
    CHECK(grid.front() == doctest::Approx(200.0));
    CHECK(grid.back() > 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
    CHECK_THROWS(s.timestep_grid(0));
}
