#pragma once

#include <string>
#include <vector>

namespace smoothie {

// Bandwidth schedule sigma(t) plus the forward/reverse noise levels.
// sigma(t) = (sigma_max - sigma_min) * (2/pi) * atan(sqrt(t / (T - t + eps)) / d_rate) + sigma_min
struct NoiseSchedule {
    double sigma_min = 1.5;
    double sigma_max = 200.0;
    double d_rate = 9.0;   // noise accumulation rate
    int T = 200;
    double eps = 0.01;
    double delta = 1.0;        // forward noise std
    double delta_tilde = 0.25; // reverse noise std

    double sigma(double t) const;

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;

    // Descending sampler grid t_i = T * i / steps, i = steps..1.
    std::vector<double> timestep_grid(int steps) const;
};

}  // namespace smoothie
