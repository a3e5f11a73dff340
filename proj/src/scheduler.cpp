#include "boss/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace boss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_k_range(const CostMatrix& c, int k) {
    if (k < 1 || k > c.k_max) {
        throw InputError("K must be in [1, " + std::to_string(c.k_max) + "], got " + std::to_string(k));
    }
}

}  // namespace

ValueTable build_value_table(const CostMatrix& c, int max_k) {
    check_k_range(c, max_k);
    const int k_max = c.k_max;
    ValueTable t;
    t.k_max = k_max;
    t.max_k = max_k;
    t.value.assign(static_cast<std::size_t>(k_max) + 1,
                   std::vector<double>(static_cast<std::size_t>(max_k) + 1, kInf));
    t.next.assign(static_cast<std::size_t>(k_max) + 1,
                  std::vector<int>(static_cast<std::size_t>(max_k) + 1, -1));

    // base case: one remaining step forces the edge to the sink
    for (int j = 0; j < k_max; ++j) {
        t.value[static_cast<std::size_t>(j)][1] = c.at(j, k_max);
        t.next[static_cast<std::size_t>(j)][1] = k_max;
    }

    for (int k = 2; k <= max_k; ++k) {
        for (int j = 0; j < k_max; ++j) {
            double best = kInf;
            int best_next = -1;
            // successor stays below the sink; the final edge is the base case
            for (int i = j + 1; i < k_max; ++i) {
                const double tail = t.value[static_cast<std::size_t>(i)][static_cast<std::size_t>(k) - 1];
                if (tail == kInf) continue;
                const double cand = c.at(j, i) + tail;
                if (cand < best) {
                    best = cand;
                    best_next = i;
                }
            }
            t.value[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = best;
            t.next[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = best_next;
        }
    }
    return t;
}

namespace {

// Path recovery: scan successors in increasing order and take the first one
// whose edge cost plus error-to-go reproduces the table value exactly. The
// table stores the very sums the scan recomputes, so the equality is exact.
std::vector<int> recover_path(const CostMatrix& c, const ValueTable& t, int k) {
    std::vector<int> path{0};
    int node = 0;
    for (int remaining = k; remaining >= 2; --remaining) {
        const double target = t.at(node, remaining);
        int chosen = -1;
        for (int j = node + 1; j < c.k_max; ++j) {
            const double tail = t.at(j, remaining - 1);
            if (tail == kInf) continue;
            if (c.at(node, j) + tail == target) {
                chosen = j;
                break;
            }
        }
        if (chosen < 0) throw std::logic_error("bellman path recovery failed");
        path.push_back(chosen);
        node = chosen;
    }
    path.push_back(c.k_max);
    return path;
}

ScheduleResult result_from_path(const CostMatrix& c, const std::vector<int>& path, int k, double total) {
    ScheduleResult r;
    r.schedule = Schedule::from_grid_indices(path, c.k_max);
    r.total_error = total;
    r.k = k;
    r.provenance.k_max = c.k_max;
    r.provenance.n_samples = c.n_samples;
    return r;
}

}  // namespace

ScheduleResult bellman_schedule(const CostMatrix& c, int k) {
    check_k_range(c, k);
    ValueTable t = build_value_table(c, k);
    return result_from_path(c, recover_path(c, t, k), k, t.at(0, k));
}

std::map<int, ScheduleResult> all_k_schedules(const CostMatrix& c, const std::vector<int>& k_list) {
    if (k_list.empty()) throw InputError("all_k_schedules: empty K list");
    int max_k = 0;
    for (int k : k_list) {
        check_k_range(c, k);
        max_k = std::max(max_k, k);
    }
    ValueTable t = build_value_table(c, max_k);
    std::map<int, ScheduleResult> out;
    for (int k : k_list) {
        out.emplace(k, result_from_path(c, recover_path(c, t, k), k, t.at(0, k)));
    }
    return out;
}

namespace {

double binomial_guard(int n, int r) {
    double v = 1.0;
    for (int i = 1; i <= r; ++i) v = v * (n - r + i) / i;
    return v;
}

// cost of the path, summed back-to-front to match the DP's association
double path_cost(const CostMatrix& c, const std::vector<int>& path) {
    double acc = 0.0;
    for (std::size_t e = path.size() - 1; e >= 1; --e) {
        acc = c.at(path[e - 1], path[e]) + acc;
    }
    return acc;
}

}  // namespace

ScheduleResult brute_force_schedule(const CostMatrix& c, int k) {
    check_k_range(c, k);
    const int interior = c.k_max - 1;
    const int pick = k - 1;
    if (binomial_guard(interior, pick) > 1e7) {
        throw InputError("brute_force_schedule: C(" + std::to_string(interior) + "," + std::to_string(pick) +
                         ") exceeds the enumeration guard");
    }

    std::vector<int> comb(static_cast<std::size_t>(pick));
    for (int i = 0; i < pick; ++i) comb[static_cast<std::size_t>(i)] = i + 1;

    std::vector<int> path(static_cast<std::size_t>(k) + 1);
    double best = kInf;
    std::vector<int> best_path;
    while (true) {
        path[0] = 0;
        for (int i = 0; i < pick; ++i) path[static_cast<std::size_t>(i) + 1] = comb[static_cast<std::size_t>(i)];
        path[static_cast<std::size_t>(k)] = c.k_max;
        const double cost = path_cost(c, path);
        if (cost < best) {
            best = cost;
            best_path = path;
        }
        // next combination of {1..interior} choose pick
        int i = pick - 1;
        while (i >= 0 && comb[static_cast<std::size_t>(i)] == interior - (pick - 1 - i)) --i;
        if (i < 0) break;
        ++comb[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < pick; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j) - 1] + 1;
    }
    return result_from_path(c, best_path, k, best);
}

int grid_index(double tau, int k_max) {
    const double scaled = tau * k_max;
    const int j = static_cast<int>(std::llround(scaled));
    if (j < 0 || j > k_max || static_cast<double>(j) / k_max != tau) {
        throw InputError("timestamp " + format_double(tau) + " is not on the anchor grid {k/" +
                         std::to_string(k_max) + "}");
    }
    return j;
}

double schedule_cost(const CostMatrix& c, const Schedule& s) {
    s.validate();
    std::vector<int> idx;
    idx.reserve(s.timestamps.size());
    for (double tau : s.timestamps) idx.push_back(grid_index(tau, c.k_max));
    double acc = 0.0;
    for (std::size_t e = idx.size() - 1; e >= 1; --e) {
        acc = c.at(idx[e - 1], idx[e]) + acc;
    }
    return acc;
}

void save_schedule(const ScheduleResult& r, const std::filesystem::path& path) {
    nlohmann::json j;
    j["K"] = r.k;
    j["timestamps"] = r.schedule.timestamps;
    j["stepsizes"] = r.schedule.stepsizes();
    j["total_error"] = r.total_error;
    j["provenance"] = {{"model_id", r.provenance.model_id},
                       {"cost_matrix_file", r.provenance.cost_matrix_file},
                       {"K_max", r.provenance.k_max},
                       {"N", r.provenance.n_samples}};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open schedule for writing: " + path.string());
    out << j.dump(2) << "\n";
}

ScheduleResult load_schedule(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open schedule: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        ScheduleResult r;
        r.k = j.at("K").get<int>();
        r.schedule.timestamps = j.at("timestamps").get<std::vector<double>>();
        r.schedule.validate();
        if (r.schedule.steps() != r.k) throw ParseError("schedule " + path.string() + ": K does not match timestamps");
        r.total_error = j.at("total_error").get<double>();
        const auto& p = j.at("provenance");
        r.provenance.model_id = p.at("model_id").get<std::string>();
        r.provenance.cost_matrix_file = p.at("cost_matrix_file").get<std::string>();
        r.provenance.k_max = p.at("K_max").get<int>();
        r.provenance.n_samples = p.at("N").get<long>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("schedule " + path.string() + ": " + e.what());
    }
}

}  // namespace boss
