#pragma once

#include <vector>

#include "boss/common.hpp"
#include "boss/field.hpp"

namespace boss {

// Sampling timestamps tau_0 = 0 < ... < tau_K = 1.
struct Schedule {
    std::vector<double> timestamps;

    int steps() const { return static_cast<int>(timestamps.size()) - 1; }
    std::vector<double> stepsizes() const;
    void validate() const;

    static Schedule uniform(int k);
    // Timestamps j/k_max for the grid indices in `idx` (must start 0, end k_max).
    static Schedule from_grid_indices(const std::vector<int>& idx, int k_max);
    // Uniform K-schedule snapped to the nearest anchor timestamps; equals
    // uniform(k) whenever k divides k_max.
    static Schedule uniform_on_grid(int k, int k_max);
};

// Ordered (t, x) states plus the velocity evaluated at each left endpoint
// (Euler and Heun cache it; costs reuse it instead of re-evaluating).
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> velocities;  // velocities[k] = v(states[k], times[k]), k < steps
    long nfe = 0;

    const Vec& end() const { return states.back(); }
    std::size_t size() const { return states.size(); }
};

Trajectory euler_uniform(const VelocityField& v, const Vec& x0, int k);
Trajectory euler_schedule(const VelocityField& v, const Vec& x0, const Schedule& s);
// Predictor-corrector: Euler predictor, average of endpoint slopes. 2 velocity
// evaluations per step.
Trajectory heun_schedule(const VelocityField& v, const Vec& x0, const Schedule& s);

// Adaptive Dormand-Prince 5(4) over [0, 1]; accepted states only.
Trajectory rk45(const VelocityField& v, const Vec& x0, double rtol, double atol);

}  // namespace boss
