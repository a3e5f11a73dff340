#include "boss/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace boss {

std::vector<double> Schedule::stepsizes() const {
    std::vector<double> h;
    for (std::size_t k = 1; k < timestamps.size(); ++k) {
        h.push_back(timestamps[k] - timestamps[k - 1]);
    }
    return h;
}

void Schedule::validate() const {
    if (timestamps.size() < 2) throw InputError("Schedule: need at least two timestamps");
    if (timestamps.front() != 0.0) throw InputError("Schedule: must start at 0");
    if (timestamps.back() != 1.0) throw InputError("Schedule: must end at 1");
    for (std::size_t k = 1; k < timestamps.size(); ++k) {
        if (!(timestamps[k] > timestamps[k - 1])) {
            throw InputError("Schedule: timestamps must be strictly increasing");
        }
    }
}

Schedule Schedule::uniform(int k) {
    if (k < 1) throw InputError("Schedule: K must be >= 1");
    Schedule s;
    for (int i = 0; i <= k; ++i) s.timestamps.push_back(static_cast<double>(i) / k);
    return s;
}

Schedule Schedule::from_grid_indices(const std::vector<int>& idx, int k_max) {
    Schedule s;
    for (int j : idx) {
        if (j < 0 || j > k_max) throw InputError("Schedule: grid index out of range");
        s.timestamps.push_back(static_cast<double>(j) / k_max);
    }
    s.validate();
    return s;
}

Schedule Schedule::uniform_on_grid(int k, int k_max) {
    if (k < 1 || k > k_max) throw InputError("Schedule: K must be in [1, K_max]");
    std::vector<int> idx;
    for (int i = 0; i <= k; ++i) {
        idx.push_back(static_cast<int>(std::llround(static_cast<double>(i) * k_max / k)));
    }
    return from_grid_indices(idx, k_max);
}

namespace {

void check_velocity(const Vec& vel, int step, double t) {
    if (!all_finite(vel)) {
        throw SolverError("non-finite velocity at step " + std::to_string(step) + " (t=" + std::to_string(t) + ")");
    }
}

}  // namespace

Trajectory euler_schedule(const VelocityField& v, const Vec& x0, const Schedule& s) {
    s.validate();
    const int k_steps = s.steps();
    Trajectory traj;
    traj.times = s.timestamps;
    traj.states.reserve(static_cast<std::size_t>(k_steps) + 1);
    traj.velocities.reserve(static_cast<std::size_t>(k_steps));
    traj.states.push_back(x0);
    Vec x = x0;
    for (int k = 1; k <= k_steps; ++k) {
        const double t_prev = s.timestamps[static_cast<std::size_t>(k) - 1];
        const double h = s.timestamps[static_cast<std::size_t>(k)] - t_prev;
        Vec vel = v.velocity(x, t_prev);
        ++traj.nfe;
        check_velocity(vel, k, t_prev);
        axpy(h, vel, x);
        traj.velocities.push_back(std::move(vel));
        traj.states.push_back(x);
    }
    return traj;
}

Trajectory euler_uniform(const VelocityField& v, const Vec& x0, int k) {
    return euler_schedule(v, x0, Schedule::uniform(k));
}

Trajectory heun_schedule(const VelocityField& v, const Vec& x0, const Schedule& s) {
    s.validate();
    const int k_steps = s.steps();
    Trajectory traj;
    traj.times = s.timestamps;
    traj.states.push_back(x0);
    Vec x = x0;
    for (int k = 1; k <= k_steps; ++k) {
        const double t_prev = s.timestamps[static_cast<std::size_t>(k) - 1];
        const double t_next = s.timestamps[static_cast<std::size_t>(k)];
        const double h = t_next - t_prev;
        Vec v1 = v.velocity(x, t_prev);
        ++traj.nfe;
        check_velocity(v1, k, t_prev);
        Vec pred = x;
        axpy(h, v1, pred);
        Vec v2 = v.velocity(pred, t_next);
        ++traj.nfe;
        check_velocity(v2, k, t_next);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += 0.5 * h * (v1[i] + v2[i]);
        }
        traj.velocities.push_back(std::move(v1));
        traj.states.push_back(x);
    }
    return traj;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order weights equal kA[6]; kE is the difference to the embedded 4th-order
// solution, used for the error estimate.
constexpr double kE[7] = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

}  // namespace

Trajectory rk45(const VelocityField& v, const Vec& x0, double rtol, double atol) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw InputError("rk45: tolerances must be positive");
    const std::size_t d = x0.size();

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);

    Vec x = x0;
    double t = 0.0;
    double h = 1e-2;
    int step = 0;

    Vec k[7];
    k[0] = v.velocity(x, t);
    ++traj.nfe;
    check_velocity(k[0], step, t);

    Vec xs(d), x_new(d), err(d);
    while (t < 1.0) {
        h = std::min(h, 1.0 - t);
        if (h < 1e-13) throw SolverError("rk45: step size underflow at t=" + std::to_string(t));
        ++step;

        for (int s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < d; ++i) {
                double acc = x[i];
                for (int j = 0; j < s; ++j) acc += h * kA[s][j] * k[j][i];
                xs[i] = acc;
            }
            k[s] = v.velocity(xs, t + kC[s] * h);
            ++traj.nfe;
            check_velocity(k[s], step, t + kC[s] * h);
        }
        // stage 7 lands on the 5th-order solution (FSAL)
        x_new = xs;

        for (std::size_t i = 0; i < d; ++i) {
            double e = 0.0;
            for (int s = 0; s < 7; ++s) e += kE[s] * k[s][i];
            err[i] = h * e;
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            double q = err[i] / sc;
            norm += q * q;
        }
        norm = std::sqrt(norm / static_cast<double>(d));

        if (norm <= 1.0) {
            t += h;
            x = x_new;
            k[0] = k[6];
            traj.times.push_back(t);
            traj.states.push_back(x);
        }
        double factor = norm > 0.0 ? 0.9 * std::pow(norm, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
    }
    return traj;
}

}  // namespace boss
