#include "boss/datasets.hpp"

#include <cmath>
#include <numbers>

namespace boss {

DataDensity mixture_density(GaussianMixture mix) {
    if (mix.means.empty()) throw InputError("mixture: need at least one component");
    if (mix.sigmas.size() != mix.means.size()) throw InputError("mixture: one sigma per component");
    if (mix.weights.empty()) mix.weights.assign(mix.means.size(), 1.0);
    if (mix.weights.size() != mix.means.size()) throw InputError("mixture: one weight per component");
    double total = 0.0;
    for (double w : mix.weights) {
        if (w < 0.0) throw InputError("mixture: weights must be nonnegative");
        total += w;
    }
    for (double& w : mix.weights) w /= total;

    return [mix = std::move(mix)](Rng& rng) {
        double u = rng.uniform();
        std::size_t c = 0;
        double acc = 0.0;
        for (; c + 1 < mix.weights.size(); ++c) {
            acc += mix.weights[c];
            if (u < acc) break;
        }
        Vec x = mix.means[c];
        for (double& xi : x) xi += mix.sigmas[c] * rng.gaussian();
        return x;
    };
}

DataDensity point_mass(Vec c) {
    return [c = std::move(c)](Rng&) { return c; };
}

namespace {

// Branch choice alternates so clouds stay balanced; small-sample W2 between
// independent draws would otherwise be dominated by binomial imbalance.
DataDensity two_moons() {
    return [flip = false](Rng& rng) mutable {
        const double theta = std::numbers::pi * rng.uniform();
        flip = !flip;
        Vec x(2);
        if (flip) {
            x[0] = std::cos(theta);
            x[1] = std::sin(theta);
        } else {
            x[0] = 1.0 - std::cos(theta);
            x[1] = 0.5 - std::sin(theta);
        }
        x[0] += 0.08 * rng.gaussian() - 0.5;
        x[1] += 0.08 * rng.gaussian() - 0.25;
        return x;
    };
}

// 4x4 board on [-2, 2]^2, points on the 8 cells of one color.
DataDensity checkerboard() {
    return [](Rng& rng) {
        const std::uint64_t cell = rng.integer(8);
        const int row = static_cast<int>(cell / 2);
        const int col = 2 * static_cast<int>(cell % 2) + (row % 2);
        Vec x(2);
        x[0] = -2.0 + col + rng.uniform();
        x[1] = -2.0 + row + rng.uniform();
        return x;
    };
}

DataDensity two_gaussians() {
    GaussianMixture mix;
    mix.means = {{-1.5, 0.0}, {1.5, 0.0}};
    mix.sigmas = {0.3, 0.3};
    return mixture_density(std::move(mix));
}

DataDensity eight_gaussians() {
    GaussianMixture mix;
    for (int i = 0; i < 8; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / 8.0;
        mix.means.push_back({2.0 * std::cos(phi), 2.0 * std::sin(phi)});
        mix.sigmas.push_back(0.15);
    }
    return mixture_density(std::move(mix));
}

}  // namespace

DataDensity make_density(const std::string& name, int d) {
    if (name == "two_moons" || name == "checkerboard" || name == "two_gaussians" ||
        name == "eight_gaussians") {
        if (d != 2) throw InputError("dataset '" + name + "' is 2-D");
    }
    if (name == "two_moons") return two_moons();
    if (name == "checkerboard") return checkerboard();
    if (name == "two_gaussians") return two_gaussians();
    if (name == "eight_gaussians") return eight_gaussians();
    throw InputError("unknown dataset: " + name);
}

}  // namespace boss
