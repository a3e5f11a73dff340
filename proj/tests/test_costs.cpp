#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "boss/costs.hpp"
#include "boss/rng.hpp"

using namespace boss;

namespace {

std::vector<Vec> gaussian_noises(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) out.push_back(rng.gaussian_vec(d));
    return out;
}

}  // namespace

TEST_SUITE("costs") {

TEST_CASE("anchor trajectories have K_max + 1 states") {
    RotationField f;
    AnchorGrid grid(5);
    auto trajs = anchor_trajectories(f, gaussian_noises(1, 2, 1), grid);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].size() == 6);
    CHECK(trajs[0].nfe == 5);
}

TEST_CASE("identical noises give identical trajectories") {
    RotationField f;
    AnchorGrid grid(10);
    Vec x0{0.4, 0.7};
    auto trajs = anchor_trajectories(f, {x0, x0}, grid);
    CHECK(trajs[0].states == trajs[1].states);
    CHECK(trajs[0].velocities == trajs[1].velocities);
}

TEST_CASE("constant field yields straight anchor paths and a null matrix") {
    ConstantField f(Vec{0.8, -0.6});
    AnchorGrid grid(12);
    auto trajs = anchor_trajectories(f, gaussian_noises(4, 2, 2), grid);
    CostMatrix c = truncation_costs(trajs, grid);
    for (int j = 0; j < c.k_max; ++j) {
        for (int k = j + 1; k <= c.k_max; ++k) {
            CHECK(c.at(j, k) <= 1e-26);
        }
    }
}

TEST_CASE("superdiagonal entries are exactly zero") {
    RotationField f;
    AnchorGrid grid(20);
    CostMatrix c = truncation_costs(anchor_trajectories(f, gaussian_noises(3, 2, 3), grid), grid);
    for (int j = 0; j < c.k_max; ++j) CHECK(c.at(j, j + 1) == 0.0);
}

TEST_CASE("hand-computed entry on v = 2t") {
    // anchors: x(0)=0, x(0.5)=0, x(1)=0.5; c[0][2] = |0.5 - 0 - v(0,0)*1|^2
    LinearInTimeField f(1);
    AnchorGrid grid(2);
    auto trajs = anchor_trajectories(f, {Vec{0.0}}, grid);
    CostMatrix c = truncation_costs(trajs, grid);
    CHECK(c.at(0, 2) == 0.25);
    CHECK(c.at(0, 1) == 0.0);
    CHECK(c.at(1, 2) == 0.0);
}

TEST_CASE("sample-count linearity of the average") {
    RotationField f;
    AnchorGrid grid(8);
    auto batch1 = gaussian_noises(3, 2, 4);
    auto batch2 = gaussian_noises(5, 2, 5);
    std::vector<Vec> both = batch1;
    both.insert(both.end(), batch2.begin(), batch2.end());

    CostMatrix c1 = truncation_costs(anchor_trajectories(f, batch1, grid), grid);
    CostMatrix c2 = truncation_costs(anchor_trajectories(f, batch2, grid), grid);
    CostMatrix cu = truncation_costs(anchor_trajectories(f, both, grid), grid);
    const double w1 = 3.0 / 8.0, w2 = 5.0 / 8.0;
    for (int j = 0; j < grid.k_max; ++j) {
        for (int k = j + 1; k <= grid.k_max; ++k) {
            CHECK(std::abs(w1 * c1.at(j, k) + w2 * c2.at(j, k) - cu.at(j, k)) <= 1e-12);
        }
    }
}

TEST_CASE("grid mismatch is rejected") {
    RotationField f;
    AnchorGrid grid(8);
    auto trajs = anchor_trajectories(f, gaussian_noises(2, 2, 6), grid);
    AnchorGrid other(9);
    CHECK_THROWS_AS(truncation_costs(trajs, other), InputError);
}

TEST_CASE("cost file round-trip is lossless") {
    RotationField f;
    AnchorGrid grid(10);
    CostMatrix c = truncation_costs(anchor_trajectories(f, gaussian_noises(4, 2, 7), grid), grid);
    const auto path = std::filesystem::temp_directory_path() / "boss_test_costs.txt";
    save_cost_matrix(c, path);
    CostMatrix r = load_cost_matrix(path);
    CHECK(r.k_max == c.k_max);
    CHECK(r.n_samples == c.n_samples);
    for (int j = 0; j < c.k_max; ++j) {
        for (int k = j + 1; k <= c.k_max; ++k) CHECK(r.at(j, k) == c.at(j, k));
    }
    std::filesystem::remove(path);
}

TEST_CASE("negative entries are rejected with a line number") {
    const auto path = std::filesystem::temp_directory_path() / "boss_test_costs_bad.txt";
    {
        std::ofstream out(path);
        out << "2 1\n0 -0.5\n0\n";
    }
    try {
        load_cost_matrix(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed rows are rejected") {
    const auto path = std::filesystem::temp_directory_path() / "boss_test_costs_short.txt";
    {
        std::ofstream out(path);
        out << "3 1\n0 0.1\n0 0.2\n0\n";  // first row needs 3 entries
    }
    CHECK_THROWS_AS(load_cost_matrix(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("defined-entry count at K_max = 100") {
    CostMatrix c(100, 1);
    CHECK(c.defined_entries() == 5050);  // 4950 strict upper + 100 superdiagonal
}

TEST_CASE("empty inputs are rejected") {
    RotationField f;
    AnchorGrid grid(5);
    CHECK_THROWS_AS(anchor_trajectories(f, {}, grid), InputError);
    CHECK_THROWS_AS(truncation_costs({}, grid), InputError);
}

}  // TEST_SUITE
