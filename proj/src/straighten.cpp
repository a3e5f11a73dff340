#include "boss/straighten.hpp"

#include <cmath>

#include "boss/scheduler.hpp"

namespace boss {

std::uint64_t StraighteningDataset::checksum() const {
    std::uint64_t h = fnv1a(schedule.timestamps.data(), schedule.timestamps.size() * sizeof(double));
    for (const auto& path : anchor_points) {
        for (const Vec& x : path) h = fnv1a(x.data(), x.size() * sizeof(double), h);
    }
    for (const auto& path : slopes) {
        for (const Vec& s : path) h = fnv1a(s.data(), s.size() * sizeof(double), h);
    }
    return h;
}

StraighteningDataset build_targets(const VelocityField& frozen, const Schedule& s,
                                   const std::vector<Vec>& noises, const AnchorGrid& grid) {
    s.validate();
    std::vector<int> idx;
    for (double tau : s.timestamps) idx.push_back(grid_index(tau, grid.k_max));

    StraighteningDataset data;
    data.schedule = s;
    const std::vector<Trajectory> trajs = anchor_trajectories(frozen, noises, grid);
    for (const Trajectory& tr : trajs) {
        std::vector<Vec> points;
        points.reserve(idx.size());
        for (int j : idx) points.push_back(tr.states[static_cast<std::size_t>(j)]);
        std::vector<Vec> slopes;
        slopes.reserve(idx.size() - 1);
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
            const double dt = s.timestamps[k + 1] - s.timestamps[k];
            Vec slope(points[k].size());
            for (std::size_t i = 0; i < slope.size(); ++i) {
                slope[i] = (points[k + 1][i] - points[k][i]) / dt;
            }
            if (!all_finite(slope)) {
                throw SolverError("build_targets: non-finite slope on segment " + std::to_string(k));
            }
            slopes.push_back(std::move(slope));
        }
        data.anchor_points.push_back(std::move(points));
        data.slopes.push_back(std::move(slopes));
    }
    return data;
}

ResidualBatch straightening_batch(const StraighteningDataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InputError("straightening_loss: empty batch");
    ResidualBatch batch;
    const double w = 1.0 / static_cast<double>(indices.size());
    for (std::size_t i : indices) {
        if (i >= data.paths()) throw InputError("straightening_loss: path index out of range");
        for (int k = 0; k < data.segments(); ++k) {
            batch.add(data.anchor_points[i][static_cast<std::size_t>(k)],
                      data.schedule.timestamps[static_cast<std::size_t>(k)],
                      data.slopes[i][static_cast<std::size_t>(k)], w);
        }
    }
    return batch;
}

double straightening_loss(const VelocityField& model, const StraighteningDataset& data,
                          std::span<const std::size_t> indices) {
    ResidualBatch batch = straightening_batch(data, indices);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Vec out = model.velocity(batch.x[i], batch.t[i]);
        loss += batch.weight[i] * squared_distance(out, batch.target[i]);
    }
    return loss;
}

double straightening_loss(const VelocityField& model, const StraighteningDataset& data) {
    std::vector<std::size_t> all(data.paths());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return straightening_loss(model, data, all);
}

namespace {

class RefField : public VelocityField {
public:
    explicit RefField(const VelocityField& f) : f_(&f) {}
    int dim() const override { return f_->dim(); }
    Vec velocity(const Vec& x, double t) const override { return f_->velocity(x, t); }

private:
    const VelocityField* f_;
};

}  // namespace

std::unique_ptr<VelocityField> FinetuneResult::field_view() const {
    if (adapter.has_value()) return std::make_unique<AdaptedVelocity>(model, *adapter);
    return std::make_unique<RefField>(model);
}

FinetuneResult boss_finetune(const MlpVelocity& pretrained, const Schedule& s, const TrainConfig& cfg,
                             FinetuneMode mode, int lora_rank, const AnchorGrid& grid, long pool_size,
                             const StraighteningDataset* prebuilt) {
    cfg.validate();
    s.validate();

    StraighteningDataset local;
    const StraighteningDataset* data = prebuilt;
    if (data == nullptr) {
        if (pool_size <= 0) throw InputError("boss_finetune: pool_size must be positive");
        Rng pool_rng = substream(cfg.seed, "straighten_pool");
        std::vector<Vec> noises;
        noises.reserve(static_cast<std::size_t>(pool_size));
        for (long i = 0; i < pool_size; ++i) noises.push_back(pool_rng.gaussian_vec(pretrained.dim()));
        local = build_targets(pretrained, s, noises, grid);
        data = &local;
    }

    FinetuneResult result{pretrained, std::nullopt, {}};
    if (mode == FinetuneMode::Lora) {
        Rng lora_rng = substream(cfg.seed, "lora_init");
        result.adapter = LoraAdapter::init(pretrained, lora_rank, lora_rng);
    }

    const std::size_t n_params =
        mode == FinetuneMode::Lora ? result.adapter->trainable_count() : result.model.parameter_count();
    Adam opt(n_params, cfg);

    const std::size_t pool = data->paths();
    const std::size_t batch_paths = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), pool);
    std::vector<std::size_t> indices(batch_paths);
    std::vector<double> grad;
    std::size_t cursor = 0;

    for (long it = 0; it < cfg.iterations; ++it) {
        for (std::size_t b = 0; b < batch_paths; ++b) {
            indices[b] = cursor;
            cursor = (cursor + 1) % pool;
        }
        ResidualBatch batch = straightening_batch(*data, indices);
        double loss;
        if (mode == FinetuneMode::Lora) {
            loss = lora_loss_grad(result.model, *result.adapter, batch, grad);
        } else {
            loss = mlp_loss_grad(result.model, batch, grad);
        }
        if (!std::isfinite(loss)) {
            throw TrainingError("boss_finetune diverged: non-finite loss at iteration " + std::to_string(it));
        }
        result.loss_log.emplace_back(it, loss);
        opt.set_rate(cfg.rate_at(it));
        if (mode == FinetuneMode::Lora) {
            opt.step(result.adapter->parameters(), grad);
        } else {
            opt.step(result.model.parameters(), grad);
        }
    }
    return result;
}

}  // namespace boss
