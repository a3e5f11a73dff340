#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "boss/integrate.hpp"
#include "boss/training.hpp"

using namespace boss;

namespace {

// Transports any x0 to c along dX = (c - x) / (1 - t) dt; uniform Euler lands
// on c exactly at the last step, which makes it a convenient oracle.
class PointAttractor : public VelocityField {
public:
    explicit PointAttractor(Vec c) : c_(std::move(c)) {}
    int dim() const override { return static_cast<int>(c_.size()); }
    Vec velocity(const Vec& x, double t) const override {
        Vec v(c_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (c_[i] - x[i]) / (1.0 - t);
        return v;
    }

private:
    Vec c_;
};

MlpArch small_arch(int d) {
    MlpArch arch;
    arch.d = d;
    arch.time_features = 4;
    arch.hidden = {32, 32};
    return arch;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("rectified flow loss on hand-computed pairs") {
    ConstantField two(Vec{2.0});
    ConstantField zero(Vec{0.0});
    std::vector<Vec> x0{{0.0}};
    std::vector<Vec> x1{{2.0}};
    std::vector<double> t{0.5};
    CHECK(rectified_flow_loss(two, x0, x1, t) == 0.0);
    CHECK(rectified_flow_loss(zero, x0, x1, t) == 4.0);

    std::vector<Vec> x0b{{0.0}, {0.0}};
    std::vector<Vec> x1b{{2.0}, {2.0}};
    std::vector<double> tb{0.5, 0.5};
    // one model can't produce both cases; average the two constant models by hand:
    CHECK(0.5 * (rectified_flow_loss(two, x0b, x1b, tb) + rectified_flow_loss(zero, x0b, x1b, tb)) == 2.0);
}

TEST_CASE("loss is invariant under batch permutation") {
    RotationField f;
    Rng rng(1);
    std::vector<Vec> x0, x1;
    std::vector<double> t;
    for (int i = 0; i < 16; ++i) {
        x0.push_back(rng.gaussian_vec(2));
        x1.push_back(rng.gaussian_vec(2));
        t.push_back(rng.uniform());
    }
    const double base = rectified_flow_loss(f, x0, x1, t);
    std::reverse(x0.begin(), x0.end());
    std::reverse(x1.begin(), x1.end());
    std::reverse(t.begin(), t.end());
    CHECK(std::abs(rectified_flow_loss(f, x0, x1, t) - base) <= 1e-12 * std::max(1.0, base));
}

TEST_CASE("loss is zero iff the model matches the target slope everywhere") {
    // v == x1 - x0 along the whole path
    ConstantField f(Vec{1.0, -2.0});
    std::vector<Vec> x0{{0.0, 0.0}, {0.5, 0.5}};
    std::vector<Vec> x1{{1.0, -2.0}, {1.5, -1.5}};
    std::vector<double> t{0.25, 0.75};
    CHECK(rectified_flow_loss(f, x0, x1, t) == 0.0);
    x1[0][0] = 1.1;  // perturb one target
    CHECK(rectified_flow_loss(f, x0, x1, t) > 0.0);
}

TEST_CASE("mismatched batch lists are rejected") {
    ConstantField f(Vec{0.0});
    CHECK_THROWS_AS(rectified_flow_loss(f, {}, {}, {}), InputError);
    CHECK_THROWS_AS(rectified_flow_loss(f, {{0.0}}, {{1.0}, {2.0}}, {0.5}), InputError);
}

TEST_CASE("learning rate zero leaves parameters bitwise unchanged") {
    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.0;
    cfg.seed = 3;
    cfg.dataset = "two_gaussians";
    PretrainResult before = pretrain(cfg, small_arch(2));
    Rng init_rng = substream(cfg.seed, "init");
    MlpVelocity fresh = MlpVelocity::xavier_init(small_arch(2), init_rng);
    CHECK(before.model.parameters() == fresh.parameters());
}

TEST_CASE("fixed seed reproduces the loss curve exactly") {
    TrainConfig cfg;
    cfg.iterations = 30;
    cfg.batch_size = 16;
    cfg.seed = 7;
    cfg.dataset = "two_gaussians";
    PretrainResult a = pretrain(cfg, small_arch(2));
    PretrainResult b = pretrain(cfg, small_arch(2));
    CHECK(a.loss_log == b.loss_log);
    CHECK(a.model.parameters() == b.model.parameters());
}

TEST_CASE("point-mass oracle: the closed-form field lands exactly on c") {
    Vec c{1.2, -0.8};
    PointAttractor opt(c);
    Rng rng(11);
    for (int i = 0; i < 5; ++i) {
        Trajectory tr = euler_uniform(opt, rng.gaussian_vec(2), 50);
        CHECK(std::sqrt(squared_distance(tr.end(), c)) <= 1e-9);
    }
}

TEST_CASE("pretraining on a point mass reaches the target") {
    Vec c{1.2, -0.8};
    TrainConfig cfg;
    cfg.iterations = 3000;
    cfg.batch_size = 64;
    cfg.learning_rate = 2e-3;
    cfg.seed = 13;
    PretrainResult res = pretrain(cfg, small_arch(2), point_mass(c));
    CHECK(res.loss_log.back().second < res.loss_log.front().second);

    Rng rng(14);
    double mean_err = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        Trajectory tr = euler_uniform(res.model, rng.gaussian_vec(2), 100);
        mean_err += std::sqrt(squared_distance(tr.end(), c));
    }
    mean_err /= n;
    CHECK(mean_err < 0.1);
}

TEST_CASE("non-finite loss raises a TrainingError naming the iteration") {
    TrainConfig cfg;
    cfg.iterations = 10;
    cfg.batch_size = 4;
    cfg.seed = 17;
    const double inf = std::numeric_limits<double>::infinity();
    try {
        pretrain(cfg, small_arch(2), point_mass({inf, inf}));
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
    }
}

TEST_CASE("invalid configs are rejected") {
    TrainConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.iterations = 10;
    cfg.batch_size = -1;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

}  // TEST_SUITE
