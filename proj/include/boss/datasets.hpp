#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "boss/common.hpp"
#include "boss/rng.hpp"

namespace boss {

using DataDensity = std::function<Vec(Rng&)>;

struct GaussianMixture {
    std::vector<Vec> means;
    std::vector<double> sigmas;   // isotropic per component
    std::vector<double> weights;  // normalized at construction
};

DataDensity mixture_density(GaussianMixture mix);
DataDensity point_mass(Vec c);

// Named toy densities: two_moons, checkerboard, two_gaussians, eight_gaussians.
DataDensity make_density(const std::string& name, int d);

// Independent coupling (x0, x1) with x0 ~ N(0, I_d) and x1 ~ the data law.
class CouplingSampler {
public:
    CouplingSampler(DataDensity data, int d, std::uint64_t seed)
        : data_(std::move(data)), d_(d), rng_(seed) {}
    CouplingSampler(const std::string& dataset, int d, std::uint64_t seed)
        : CouplingSampler(make_density(dataset, d), d, seed) {}

    Vec draw_noise() { return rng_.gaussian_vec(d_); }
    Vec draw_data() { return data_(rng_); }
    std::pair<Vec, Vec> draw() {
        Vec x0 = draw_noise();
        Vec x1 = draw_data();
        return {std::move(x0), std::move(x1)};
    }

    int dim() const { return d_; }

private:
    DataDensity data_;
    int d_;
    Rng rng_;
};

}  // namespace boss
