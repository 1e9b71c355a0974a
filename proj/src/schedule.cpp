#include "smoothie/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smoothie {

double NoiseSchedule::sigma(double t) const {
    if (t < 0.0 || t > static_cast<double>(T))
        throw std::invalid_argument("sigma: t outside [0, T]");
    const double ratio = t / (static_cast<double>(T) - t + eps);
    return (sigma_max - sigma_min) * (2.0 / std::numbers::pi) *
               std::atan(std::sqrt(ratio) / d_rate) +
           sigma_min;
}

void NoiseSchedule::validate() const {
    if (!(sigma_min > 1.0))
        throw std::invalid_argument("schedule: sigma_min must exceed 1");
    if (!(sigma_max > sigma_min))
        throw std::invalid_argument("schedule: sigma_max must exceed sigma_min");
    if (!(d_rate > 0.0))
        throw std::invalid_argument("schedule: d_rate must be positive");
    if (!(eps > 0.0))
        throw std::invalid_argument("schedule: eps must be positive");
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (delta < 0.0)
        throw std::invalid_argument("schedule: delta must be nonnegative");
    if (delta_tilde < 0.0)
        throw std::invalid_argument("schedule: delta_tilde must be nonnegative");

    // monotonicity probed on a dense grid
    const int n = 1000;
    double prev = sigma(0.0);
    for (int i = 1; i <= n; ++i) {
        const double t = static_cast<double>(T) * i / n;
        const double cur = sigma(t);
        if (cur < prev)
            throw std::invalid_argument("schedule: sigma not nondecreasing");
        prev = cur;
    }
}

std::vector<double> NoiseSchedule::timestep_grid(int steps) const {
    if (steps < 1) throw std::invalid_argument("timestep_grid: steps must be >= 1");
    std::vector<double> grid;
    grid.reserve(steps);
    for (int i = steps; i >= 1; --i)
        grid.push_back(static_cast<double>(T) * i / steps);
    return grid;
}

}  // namespace smoothie
