#include "boss/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "boss/rng.hpp"

namespace boss {

CurvatureProfile curvature_of(const std::vector<Trajectory>& trajectories, const AnchorGrid& grid) {
    if (trajectories.empty()) throw InputError("curvature: no trajectories");
    const int k_max = grid.k_max;
    if (k_max < 3) throw InputError("curvature: K_max must be >= 3");
    for (const Trajectory& tr : trajectories) {
        if (tr.states.size() != static_cast<std::size_t>(k_max) + 1) {
            throw InputError("curvature: trajectory is not on the anchor grid");
        }
    }
    CurvatureProfile p;
    p.k_max = k_max;
    p.n = static_cast<long>(trajectories.size());
    p.values.assign(static_cast<std::size_t>(k_max) - 2, 0.0);
    for (int t = 2; t <= k_max - 1; ++t) {
        double sum = 0.0;
        for (const Trajectory& tr : trajectories) {
            const Vec& prev = tr.states[static_cast<std::size_t>(t) - 1];
            const Vec& cur = tr.states[static_cast<std::size_t>(t)];
            const Vec& next = tr.states[static_cast<std::size_t>(t) + 1];
            double term = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                double r = cur[i] - 0.5 * (next[i] + prev[i]);
                term += r * r;
            }
            sum += term;
        }
        p.values[static_cast<std::size_t>(t) - 2] = sum / static_cast<double>(p.n);
    }
    return p;
}

CurvatureProfile curvature_profile(const VelocityField& v, long n, const AnchorGrid& grid,
                                   std::uint64_t seed) {
    if (n < 1) throw InputError("curvature_profile: N must be >= 1");
    Rng rng(seed);
    std::vector<Vec> noises;
    noises.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) noises.push_back(rng.gaussian_vec(v.dim()));
    return curvature_of(anchor_trajectories(v, noises, grid), grid);
}

void save_curvature_csv(const CurvatureProfile& p, const std::filesystem::path& path,
                        const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open curvature csv for writing: " + path.string());
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "t,curvature\n";
    for (int t = 2; t <= p.k_max - 1; ++t) {
        out << format_double(static_cast<double>(t) / p.k_max) << "," << format_double(p.at(t)) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Hungarian algorithm with potentials (Jonker-Volgenant style), O(n^3).

double min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n == 0) throw InputError("assignment: empty cost matrix");
    for (const auto& row : cost) {
        if (row.size() != n) throw InputError("assignment: cost matrix must be square");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // 1-based with a dummy column 0
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> way(n + 1, 0), p(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = kInf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total;
}

namespace {

void check_same_size(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || a.size() != b.size()) {
        throw InputError("wasserstein2: point sets must be nonempty and of equal size");
    }
    for (const Vec& x : a) {
        if (x.size() != a.front().size()) throw InputError("wasserstein2: inconsistent dimensions");
    }
    for (const Vec& x : b) {
        if (x.size() != a.front().size()) throw InputError("wasserstein2: inconsistent dimensions");
    }
}

}  // namespace

double wasserstein2_exact(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    check_same_size(a, b);
    if (a.size() > kW2ExactLimit) {
        throw InputError("wasserstein2_exact: more than " + std::to_string(kW2ExactLimit) + " points");
    }
    const std::size_t n = a.size();
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = squared_distance(a[i], b[j]);
    }
    return std::sqrt(min_cost_assignment(cost) / static_cast<double>(n));
}

double wasserstein2_sliced(const std::vector<Vec>& a, const std::vector<Vec>& b, int directions,
                           std::uint64_t seed) {
    check_same_size(a, b);
    if (directions < 1) throw InputError("wasserstein2_sliced: need at least one direction");
    const std::size_t n = a.size();
    const int d = static_cast<int>(a.front().size());
    Rng rng(seed);
    std::vector<double> pa(n), pb(n);
    double acc = 0.0;
    for (int dir = 0; dir < directions; ++dir) {
        Vec theta = rng.gaussian_vec(d);
        double norm = std::sqrt(squared_norm(theta));
        if (norm == 0.0) continue;
        for (double& x : theta) x /= norm;
        for (std::size_t i = 0; i < n; ++i) {
            double sa = 0.0, sb = 0.0;
            for (int c = 0; c < d; ++c) {
                sa += theta[static_cast<std::size_t>(c)] * a[i][static_cast<std::size_t>(c)];
                sb += theta[static_cast<std::size_t>(c)] * b[i][static_cast<std::size_t>(c)];
            }
            pa[i] = sa;
            pb[i] = sb;
        }
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = pa[i] - pb[i];
            w += r * r;
        }
        acc += w / static_cast<double>(n);
    }
    return std::sqrt(acc / directions);
}

double wasserstein2(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    check_same_size(a, b);
    if (a.size() <= kW2ExactLimit) return wasserstein2_exact(a, b);
    return wasserstein2_sliced(a, b);
}

std::string wasserstein2_mode(std::size_t n) {
    return n <= kW2ExactLimit ? "exact" : "sliced";
}

double straightness(const Trajectory& traj) {
    if (traj.size() < 3) throw InputError("straightness: need at least 3 states");
    const Vec& x0 = traj.states.front();
    const Vec& xe = traj.states.back();
    const double t0 = traj.times.front();
    const double te = traj.times.back();
    double sum = 0.0;
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
        const double alpha = (traj.times[k] - t0) / (te - t0);
        double term = 0.0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            double chord = x0[i] + alpha * (xe[i] - x0[i]);
            double r = traj.states[k][i] - chord;
            term += r * r;
        }
        sum += term;
    }
    return sum / static_cast<double>(traj.size() - 2);
}

std::vector<int> top_quartile_region(const CurvatureProfile& p) {
    std::vector<double> sorted = p.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t idx = (3 * (sorted.size() - 1)) / 4;  // nearest-rank 75th percentile
    const double threshold = sorted[idx];
    std::vector<int> region;
    for (int t = 2; t <= p.k_max - 1; ++t) {
        if (p.at(t) >= threshold) region.push_back(t);
    }
    return region;
}

int timestamps_in_region(const Schedule& s, const std::vector<int>& region, int k_max) {
    int count = 0;
    for (std::size_t k = 1; k + 1 < s.timestamps.size(); ++k) {
        const int idx = static_cast<int>(std::llround(s.timestamps[k] * k_max));
        if (std::binary_search(region.begin(), region.end(), idx)) ++count;
    }
    return count;
}

TransferEntry transfer_schedule(const ScheduleResult& source, const CostMatrix& target_c) {
    TransferEntry e;
    e.k = source.k;
    e.transfer_cost = schedule_cost(target_c, source.schedule);  // throws on grid mismatch
    e.bellman_cost = bellman_schedule(target_c, source.k).total_error;
    e.uniform_cost = schedule_cost(target_c, Schedule::uniform_on_grid(source.k, target_c.k_max));
    return e;
}

}  // namespace boss
