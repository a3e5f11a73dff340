#include "boss/costs.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace boss {

CostMatrix::CostMatrix(int k, long n) : k_max(k), n_samples(n) {
    if (k < 1) throw InputError("CostMatrix: K_max must be >= 1");
    rows.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        rows[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(k - j), 0.0);
    }
}

double CostMatrix::at(int j, int k) const {
    if (j < 0 || k > k_max || j >= k) {
        throw InputError("CostMatrix: entry (" + std::to_string(j) + "," + std::to_string(k) +
                         ") is not defined");
    }
    return rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k - j - 1)];
}

double& CostMatrix::at(int j, int k) {
    if (j < 0 || k > k_max || j >= k) {
        throw InputError("CostMatrix: entry (" + std::to_string(j) + "," + std::to_string(k) +
                         ") is not defined");
    }
    return rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k - j - 1)];
}

std::size_t CostMatrix::defined_entries() const {
    return static_cast<std::size_t>(k_max) * (static_cast<std::size_t>(k_max) + 1) / 2;
}

void CostMatrix::check_invariants() const {
    for (int j = 0; j < k_max; ++j) {
        if (at(j, j + 1) != 0.0) {
            throw InputError("CostMatrix: superdiagonal entry c[" + std::to_string(j) + "][" +
                             std::to_string(j + 1) + "] must be exactly zero");
        }
        for (int k = j + 1; k <= k_max; ++k) {
            double c = at(j, k);
            if (!(c >= 0.0) || !std::isfinite(c)) {
                throw InputError("CostMatrix: entry c[" + std::to_string(j) + "][" + std::to_string(k) +
                                 "] must be finite and nonnegative");
            }
        }
    }
}

std::vector<Trajectory> anchor_trajectories(const VelocityField& v, const std::vector<Vec>& noises,
                                            const AnchorGrid& grid) {
    if (noises.empty()) throw InputError("anchor_trajectories: need at least one noise");
    std::vector<Trajectory> out;
    out.reserve(noises.size());
    for (std::size_t i = 0; i < noises.size(); ++i) {
        try {
            out.push_back(euler_uniform(v, noises[i], grid.k_max));
        } catch (const SolverError& e) {
            throw SolverError("sample " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

CostMatrix truncation_costs(const std::vector<Trajectory>& trajectories, const AnchorGrid& grid) {
    if (trajectories.empty()) throw InputError("truncation_costs: no trajectories");
    const int k_max = grid.k_max;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const Trajectory& tr = trajectories[i];
        if (tr.states.size() != static_cast<std::size_t>(k_max) + 1 ||
            tr.velocities.size() < static_cast<std::size_t>(k_max)) {
            throw InputError("truncation_costs: trajectory " + std::to_string(i) +
                             " is not on the anchor grid");
        }
        for (int k = 0; k <= k_max; ++k) {
            if (tr.times[static_cast<std::size_t>(k)] != grid.t(k)) {
                throw InputError("truncation_costs: trajectory " + std::to_string(i) +
                                 " is not on the anchor grid");
            }
        }
    }

    const long n = static_cast<long>(trajectories.size());
    CostMatrix c(k_max, n);
    for (int j = 0; j < k_max; ++j) {
        // one-step Euler from t_j to t_{j+1} is the path segment itself
        c.at(j, j + 1) = 0.0;
        for (int k = j + 2; k <= k_max; ++k) {
            const double dt = grid.t(k) - grid.t(j);
            double sum = 0.0;
            for (const Trajectory& tr : trajectories) {
                const Vec& xj = tr.states[static_cast<std::size_t>(j)];
                const Vec& xk = tr.states[static_cast<std::size_t>(k)];
                const Vec& vj = tr.velocities[static_cast<std::size_t>(j)];
                double term = 0.0;
                for (std::size_t i = 0; i < xj.size(); ++i) {
                    double r = xk[i] - xj[i] - vj[i] * dt;
                    term += r * r;
                }
                sum += term;
            }
            c.at(j, k) = sum / static_cast<double>(n);
        }
    }
    return c;
}

void save_cost_matrix(const CostMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open cost matrix for writing: " + path.string());
    out << m.k_max << " " << m.n_samples << "\n";
    for (int j = 0; j < m.k_max; ++j) {
        for (int k = j + 1; k <= m.k_max; ++k) {
            if (k > j + 1) out << " ";
            out << format_double(m.at(j, k));
        }
        out << "\n";
    }
}

CostMatrix load_cost_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cost matrix: " + path.string());
    std::string line;
    const std::string name = path.string();
    if (!std::getline(in, line)) throw ParseError(name + ":1: missing header line");
    std::istringstream header(line);
    int k_max = 0;
    long n = 0;
    if (!(header >> k_max >> n) || k_max < 1) {
        throw ParseError(name + ":1: expected 'K_max N'");
    }
    CostMatrix m(k_max, n);
    for (int j = 0; j < k_max; ++j) {
        const int lineno = j + 2;
        if (!std::getline(in, line)) {
            throw ParseError(name + ":" + std::to_string(lineno) + ": missing row for j=" + std::to_string(j));
        }
        std::istringstream row(line);
        std::string tok;
        for (int k = j + 1; k <= k_max; ++k) {
            if (!(row >> tok)) {
                throw ParseError(name + ":" + std::to_string(lineno) + ": row has too few entries");
            }
            double c = parse_double(tok, name + ":" + std::to_string(lineno));
            if (!std::isfinite(c) || c < 0.0) {
                throw ParseError(name + ":" + std::to_string(lineno) + ": negative or non-finite cost");
            }
            m.at(j, k) = c;
        }
        std::string extra;
        if (row >> extra) {
            throw ParseError(name + ":" + std::to_string(lineno) + ": row has too many entries");
        }
    }
    m.check_invariants();
    return m;
}

}  // namespace boss
