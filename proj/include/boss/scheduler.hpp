#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "boss/common.hpp"
#include "boss/costs.hpp"
#include "boss/integrate.hpp"

namespace boss {

// Error-to-go table: value[j][k] is the minimal accumulated cost from anchor
// node j to node K_max using exactly k edges (+inf where no such path exists).
// next[j][k] records the first minimizing successor.
struct ValueTable {
    int k_max = 0;
    int max_k = 0;
    std::vector<std::vector<double>> value;  // [j][k], j = 0..k_max, k = 0..max_k
    std::vector<std::vector<int>> next;      // -1 where undefined

    double at(int j, int k) const { return value[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]; }
};

ValueTable build_value_table(const CostMatrix& c, int max_k);

struct ScheduleProvenance {
    std::string model_id;
    std::string cost_matrix_file;
    int k_max = 0;
    long n_samples = 0;
};

struct ScheduleResult {
    Schedule schedule;
    double total_error = 0.0;
    int k = 0;
    ScheduleProvenance provenance;
};

// Bellman-optimal K-step schedule on the anchor grid. Ties break toward the
// smallest next index.
ScheduleResult bellman_schedule(const CostMatrix& c, int k);

// One DP table serves every requested budget.
std::map<int, ScheduleResult> all_k_schedules(const CostMatrix& c, const std::vector<int>& k_list);

// Exhaustive enumeration over all C(K_max-1, K-1) interior-node subsets; the
// test oracle for the DP. Refuses beyond 1e7 combinations.
ScheduleResult brute_force_schedule(const CostMatrix& c, int k);

// Accumulated cost of a grid-aligned schedule. Edges are summed back-to-front
// so the result reproduces the DP's value for recovered paths bitwise.
double schedule_cost(const CostMatrix& c, const Schedule& s);

// Grid index of a schedule timestamp; throws InputError when off-grid.
int grid_index(double tau, int k_max);

void save_schedule(const ScheduleResult& r, const std::filesystem::path& path);
ScheduleResult load_schedule(const std::filesystem::path& path);

}  // namespace boss
