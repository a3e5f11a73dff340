#pragma once

#include <filesystem>
#include <vector>

#include "boss/common.hpp"
#include "boss/field.hpp"
#include "boss/integrate.hpp"

namespace boss {

// Uniform anchor timestamps t_k = k / k_max, k = 0 .. k_max.
struct AnchorGrid {
    int k_max = 100;

    explicit AnchorGrid(int k) : k_max(k) {
        if (k < 1) throw InputError("AnchorGrid: K_max must be >= 1");
    }
    double t(int k) const { return static_cast<double>(k) / k_max; }
};

// Estimated local truncation errors c[j][k] for 0 <= j < k <= k_max, averaged
// over n_samples anchor trajectories. The superdiagonal c[j][j+1] is zero by
// construction of the estimator.
struct CostMatrix {
    int k_max = 0;
    long n_samples = 0;
    std::vector<std::vector<double>> rows;  // rows[j][k - j - 1] = c[j][k]

    CostMatrix() = default;
    CostMatrix(int k, long n);

    double at(int j, int k) const;
    double& at(int j, int k);
    // K_max (K_max + 1) / 2 pairs in total
    std::size_t defined_entries() const;
    void check_invariants() const;
};

// One Euler uniform trajectory per noise on the anchor grid, velocities cached.
std::vector<Trajectory> anchor_trajectories(const VelocityField& v, const std::vector<Vec>& noises,
                                            const AnchorGrid& grid);

// Sample-average estimator over the anchor paths:
//   c_jk = mean_i | x^i_k - x^i_j - v^i_j (t_k - t_j) |^2
// reusing the velocities cached during trajectory generation.
CostMatrix truncation_costs(const std::vector<Trajectory>& trajectories, const AnchorGrid& grid);

// Text format: line 1 "K_max N", then one line per j with c[j][j+1 .. K_max].
void save_cost_matrix(const CostMatrix& m, const std::filesystem::path& path);
CostMatrix load_cost_matrix(const std::filesystem::path& path);

}  // namespace boss
