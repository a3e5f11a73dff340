#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "boss/common.hpp"

namespace boss {

// Seeded random stream. One master seed expands into named substreams so
// stages (pretrain, costs, straighten, eval) can be re-run independently.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return unif_(gen_); }                       // [0, 1)
    double uniform(double a, double b) { return a + (b - a) * unif_(gen_); }
    double gaussian() { return normal_(gen_); }                    // N(0, 1)
    std::uint64_t integer(std::uint64_t n) {                       // [0, n)
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
    }

    Vec gaussian_vec(int d) {
        Vec v(static_cast<std::size_t>(d));
        for (double& x : v) x = gaussian();
        return v;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline std::uint64_t substream_seed(std::uint64_t master, std::string_view stream) {
    std::uint64_t h = fnv1a(stream);
    h ^= master + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

inline Rng substream(std::uint64_t master, std::string_view stream) {
    return Rng(substream_seed(master, stream));
}

}  // namespace boss
