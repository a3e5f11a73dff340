#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "boss/common.hpp"
#include "boss/costs.hpp"
#include "boss/integrate.hpp"
#include "boss/scheduler.hpp"

namespace boss {

// Average second-difference magnitude of anchor trajectories,
//   curv_t = mean_i | x^i_t - (x^i_{t+1} + x^i_{t-1}) / 2 |^2,
// for anchor indices t = 2 .. K_max - 1 (index 1 stays unmeasured).
struct CurvatureProfile {
    int k_max = 0;
    long n = 0;
    std::vector<double> values;  // values[t - 2]

    double at(int t) const { return values.at(static_cast<std::size_t>(t) - 2); }
};

CurvatureProfile curvature_profile(const VelocityField& v, long n, const AnchorGrid& grid,
                                   std::uint64_t seed);
CurvatureProfile curvature_of(const std::vector<Trajectory>& trajectories, const AnchorGrid& grid);
void save_curvature_csv(const CurvatureProfile& p, const std::filesystem::path& path,
                        const std::string& config_hash = "");

// Exact O(n^3) min-cost assignment (used by the exact Wasserstein-2 mode).
double min_cost_assignment(const std::vector<std::vector<double>>& cost);

// sqrt of the minimal mean squared matching cost between equal-size point
// sets. Exact up to kW2ExactLimit points; beyond that the sliced
// approximation with a fixed seed takes over (report rows record the mode).
inline constexpr std::size_t kW2ExactLimit = 1024;

double wasserstein2_exact(const std::vector<Vec>& a, const std::vector<Vec>& b);
double wasserstein2_sliced(const std::vector<Vec>& a, const std::vector<Vec>& b, int directions = 128,
                           std::uint64_t seed = 0);
double wasserstein2(const std::vector<Vec>& a, const std::vector<Vec>& b);
std::string wasserstein2_mode(std::size_t n);

// Mean squared deviation of interior states from the chord between the
// trajectory's endpoints at matched times.
double straightness(const Trajectory& traj);

// Anchor indices (within 2 .. K_max-1) whose curvature reaches the 75th
// percentile of the profile.
std::vector<int> top_quartile_region(const CurvatureProfile& p);
// How many interior schedule timestamps land on region indices (nearest
// anchor index for off-grid timestamps).
int timestamps_in_region(const Schedule& s, const std::vector<int>& region, int k_max);

// Three-way cost comparison on the target matrix: grid-snapped uniform,
// the target's own Bellman optimum, and the transferred schedule.
struct TransferEntry {
    int k = 0;
    double uniform_cost = 0.0;
    double bellman_cost = 0.0;
    double transfer_cost = 0.0;
};

TransferEntry transfer_schedule(const ScheduleResult& source, const CostMatrix& target_c);

}  // namespace boss
