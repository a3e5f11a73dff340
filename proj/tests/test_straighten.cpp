#include <doctest.h>

#include <cmath>
#include <functional>

#include "boss/scheduler.hpp"
#include "boss/straighten.hpp"
#include "oracles.hpp"

using namespace boss;

namespace {

class LambdaField : public VelocityField {
public:
    LambdaField(int d, std::function<Vec(const Vec&, double)> fn) : d_(d), fn_(std::move(fn)) {}
    int dim() const override { return d_; }
    Vec velocity(const Vec& x, double t) const override { return fn_(x, t); }

private:
    int d_;
    std::function<Vec(const Vec&, double)> fn_;
};

std::vector<Vec> gaussian_noises(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) out.push_back(rng.gaussian_vec(d));
    return out;
}

MlpArch small_arch() {
    MlpArch arch;
    arch.d = 2;
    arch.time_features = 4;
    arch.hidden = {24, 24};
    return arch;
}

}  // namespace

TEST_SUITE("straighten") {

TEST_CASE("constant field targets equal the field value") {
    ConstantField f(Vec{0.4, -0.9});
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 3, 10}, 10);
    StraighteningDataset data = build_targets(f, s, gaussian_noises(3, 2, 1), grid);
    REQUIRE(data.paths() == 3);
    REQUIRE(data.segments() == 2);
    for (const auto& path : data.slopes) {
        for (const Vec& slope : path) {
            CHECK(std::abs(slope[0] - 0.4) <= 1e-12);
            CHECK(std::abs(slope[1] + 0.9) <= 1e-12);
        }
    }
}

TEST_CASE("K_max = 5 with schedule {0, 0.4, 1} subsamples anchors 0, 2, 5") {
    RotationField f;
    AnchorGrid grid(5);
    Schedule s = Schedule::from_grid_indices({0, 2, 5}, 5);
    CHECK(s.timestamps[1] == 0.4);
    std::vector<Vec> noises = gaussian_noises(2, 2, 2);
    StraighteningDataset data = build_targets(f, s, noises, grid);
    auto trajs = anchor_trajectories(f, noises, grid);
    for (std::size_t i = 0; i < noises.size(); ++i) {
        CHECK(data.anchor_points[i][0] == trajs[i].states[0]);
        CHECK(data.anchor_points[i][1] == trajs[i].states[2]);
        CHECK(data.anchor_points[i][2] == trajs[i].states[5]);
        for (int c = 0; c < 2; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            CHECK(data.slopes[i][0][ci] ==
                  (trajs[i].states[2][ci] - trajs[i].states[0][ci]) / 0.4);
            CHECK(data.slopes[i][1][ci] ==
                  (trajs[i].states[5][ci] - trajs[i].states[2][ci]) / 0.6);
        }
    }
}

TEST_CASE("identical noises give identical targets") {
    RotationField f;
    AnchorGrid grid(8);
    Schedule s = Schedule::from_grid_indices({0, 4, 8}, 8);
    Vec x0{0.3, 0.8};
    StraighteningDataset data = build_targets(f, s, {x0, x0}, grid);
    CHECK(data.anchor_points[0] == data.anchor_points[1]);
    CHECK(data.slopes[0] == data.slopes[1]);
}

TEST_CASE("off-grid schedules are rejected") {
    RotationField f;
    AnchorGrid grid(3);
    Schedule s;
    s.timestamps = {0.0, 0.5, 1.0};
    CHECK_THROWS_AS(build_targets(f, s, gaussian_noises(1, 2, 3), grid), InputError);
}

TEST_CASE("hand-computed straightening loss") {
    // single 1-D path: anchors 0, 1, 1.5 at schedule {0, 0.5, 1}; slopes 2, 1
    StraighteningDataset data;
    data.schedule.timestamps = {0.0, 0.5, 1.0};
    data.anchor_points = {{{0.0}, {1.0}, {1.5}}};
    data.slopes = {{{2.0}, {1.0}}};

    LambdaField model(1, [](const Vec& x, double t) -> Vec {
        if (t == 0.0 && x[0] == 0.0) return {3.0};
        if (t == 0.5 && x[0] == 1.0) return {1.0};
        return {0.0};
    });
    CHECK(straightening_loss(model, data) == 1.0);  // (3-2)^2 + (1-1)^2
}

TEST_CASE("frozen model on a constant field has zero loss") {
    ConstantField f(Vec{0.4, -0.9});
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 5, 10}, 10);
    StraighteningDataset data = build_targets(f, s, gaussian_noises(4, 2, 4), grid);
    CHECK(straightening_loss(f, data) <= 1e-28);
}

TEST_CASE("loss decomposes over paths and is permutation invariant") {
    RotationField f;
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 2, 7, 10}, 10);
    StraighteningDataset data = build_targets(f, s, gaussian_noises(6, 2, 5), grid);
    // mean over a batch equals the mean of per-path losses
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
    double total = straightening_loss(f, data, all);
    double sum = 0.0;
    for (std::size_t i : all) {
        std::vector<std::size_t> one{i};
        sum += straightening_loss(f, data, one);
    }
    CHECK(std::abs(total - sum / 6.0) <= 1e-12 * std::max(1.0, std::abs(total)));

    std::vector<std::size_t> reversed{5, 4, 3, 2, 1, 0};
    CHECK(std::abs(straightening_loss(f, data, reversed) - total) <=
          1e-12 * std::max(1.0, std::abs(total)));
}

TEST_CASE("straightening gradient matches central finite differences") {
    Rng rng(6);
    MlpVelocity m = MlpVelocity::xavier_init(small_arch(), rng);
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 3, 10}, 10);
    StraighteningDataset data = build_targets(m, s, gaussian_noises(3, 2, 7), grid);

    std::vector<std::size_t> idx{0, 1, 2};
    ResidualBatch batch = straightening_batch(data, idx);
    std::vector<double> grad;
    mlp_loss_grad(m, batch, grad);
    auto fd = testing::central_diff_gradient(m.parameters(),
                                             [&] { return straightening_loss(m, data, idx); });
    CHECK(testing::max_rel_err(grad, fd) < 1e-4);
}

TEST_CASE("learning rate zero returns the input model") {
    Rng rng(8);
    MlpVelocity m = MlpVelocity::xavier_init(small_arch(), rng);
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 5, 10}, 10);
    TrainConfig cfg;
    cfg.iterations = 10;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.0;
    cfg.seed = 9;
    FinetuneResult res = boss_finetune(m, s, cfg, FinetuneMode::Full, 0, grid, 8);
    CHECK(res.model.parameters() == m.parameters());
}

TEST_CASE("targets stay frozen through finetuning") {
    Rng rng(10);
    MlpVelocity m = MlpVelocity::xavier_init(small_arch(), rng);
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 5, 10}, 10);
    StraighteningDataset data = build_targets(m, s, gaussian_noises(8, 2, 11), grid);
    const std::uint64_t before = data.checksum();
    TrainConfig cfg;
    cfg.iterations = 50;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 12;
    boss_finetune(m, s, cfg, FinetuneMode::Full, 0, grid, 8, &data);
    CHECK(data.checksum() == before);
}

TEST_CASE("lora mode freezes the base bitwise and trains the adapter") {
    Rng rng(13);
    MlpVelocity m = MlpVelocity::xavier_init(small_arch(), rng);
    AnchorGrid grid(10);
    Schedule s = Schedule::from_grid_indices({0, 4, 10}, 10);
    TrainConfig cfg;
    cfg.iterations = 40;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 14;
    FinetuneResult res = boss_finetune(m, s, cfg, FinetuneMode::Lora, 2, grid, 8);
    REQUIRE(res.adapter.has_value());
    CHECK(res.model.parameters() == m.parameters());
    double moved = 0.0;
    for (double p : res.adapter->parameters()) moved += std::abs(p);
    CHECK(moved > 0.0);
}

TEST_CASE("finetuning reduces the straightening loss and the endpoint error") {
    // small pretrained-ish model: start from a rough fit of two_gaussians
    TrainConfig pre;
    pre.iterations = 800;
    pre.batch_size = 64;
    pre.learning_rate = 2e-3;
    pre.seed = 15;
    pre.dataset = "two_gaussians";
    PretrainResult trained = pretrain(pre, small_arch());

    AnchorGrid grid(50);
    CostMatrix costs;
    std::vector<Vec> noises = gaussian_noises(32, 2, 16);
    costs = truncation_costs(anchor_trajectories(trained.model, noises, grid), grid);

    // K = 4 Bellman schedule
    Schedule s = [&] {
        std::vector<double> dummy;
        auto r = bellman_schedule(costs, 4);
        return r.schedule;
    }();

    TrainConfig fin;
    fin.iterations = 1200;
    fin.batch_size = 16;
    fin.learning_rate = 1e-3;
    fin.seed = 17;
    FinetuneResult res = boss_finetune(trained.model, s, fin, FinetuneMode::Full, 0, grid, 64);
    CHECK(res.loss_log.back().second < 0.5 * res.loss_log.front().second);

    // terminal error to the frozen model's K_max anchor endpoint, held-out noises
    std::vector<Vec> held_out = gaussian_noises(64, 2, 18);
    auto ref = anchor_trajectories(trained.model, held_out, grid);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
        before += squared_distance(euler_schedule(trained.model, held_out[i], s).end(), ref[i].end());
        after += squared_distance(euler_schedule(res.model, held_out[i], s).end(), ref[i].end());
    }
    CHECK(after <= before);
}

}  // TEST_SUITE
