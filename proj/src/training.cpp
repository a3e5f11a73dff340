#include "boss/training.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace boss {

void TrainConfig::validate() const {
    if (iterations <= 0) throw InputError("TrainConfig: iterations must be positive");
    if (batch_size <= 0) throw InputError("TrainConfig: batch_size must be positive");
    if (learning_rate < 0.0) throw InputError("TrainConfig: learning_rate must be nonnegative");
    if (d <= 0) throw InputError("TrainConfig: d must be positive");
    if (lr_decay != "none" && lr_decay != "cosine") {
        throw InputError("TrainConfig: lr_decay must be 'none' or 'cosine'");
    }
}

double TrainConfig::rate_at(long iteration) const {
    if (lr_decay == "none" || iterations <= 1) return learning_rate;
    const double progress = static_cast<double>(iteration) / static_cast<double>(iterations - 1);
    const double floor = 0.01 * learning_rate;
    return floor + (learning_rate - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw InputError("Adam: parameter/gradient size mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

ResidualBatch rectified_flow_batch(const std::vector<Vec>& x0s, const std::vector<Vec>& x1s,
                                   const std::vector<double>& ts) {
    if (x0s.empty()) throw InputError("rectified_flow_loss: empty batch");
    if (x0s.size() != x1s.size() || x0s.size() != ts.size()) {
        throw InputError("rectified_flow_loss: batch lists must have equal length");
    }
    ResidualBatch batch;
    const double w = 1.0 / static_cast<double>(x0s.size());
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        const double t = ts[i];
        Vec xt(x0s[i].size());
        Vec target(x0s[i].size());
        for (std::size_t c = 0; c < xt.size(); ++c) {
            xt[c] = t * x1s[i][c] + (1.0 - t) * x0s[i][c];
            target[c] = x1s[i][c] - x0s[i][c];
        }
        batch.add(std::move(xt), t, std::move(target), w);
    }
    return batch;
}

double rectified_flow_loss(const VelocityField& model, const std::vector<Vec>& x0s,
                           const std::vector<Vec>& x1s, const std::vector<double>& ts) {
    ResidualBatch batch = rectified_flow_batch(x0s, x1s, ts);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Vec out = model.velocity(batch.x[i], batch.t[i]);
        loss += batch.weight[i] * squared_distance(out, batch.target[i]);
    }
    return loss;
}

PretrainResult pretrain(const TrainConfig& cfg, const MlpArch& arch) {
    return pretrain(cfg, arch, make_density(cfg.dataset, cfg.d));
}

PretrainResult pretrain(const TrainConfig& cfg, const MlpArch& arch, const DataDensity& data) {
    cfg.validate();
    if (arch.d != cfg.d) throw InputError("pretrain: arch.d must equal config d");

    Rng init_rng = substream(cfg.seed, "init");
    MlpVelocity model = MlpVelocity::xavier_init(arch, init_rng);
    CouplingSampler sampler(data, cfg.d, substream_seed(cfg.seed, "coupling"));
    Rng time_rng = substream(cfg.seed, "times");
    Adam opt(model.parameter_count(), cfg);

    PretrainResult result{std::move(model), {}};
    std::vector<double> grad;
    std::vector<Vec> x0s(static_cast<std::size_t>(cfg.batch_size));
    std::vector<Vec> x1s(static_cast<std::size_t>(cfg.batch_size));
    std::vector<double> ts(static_cast<std::size_t>(cfg.batch_size));

    for (long it = 0; it < cfg.iterations; ++it) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            auto [x0, x1] = sampler.draw();
            x0s[static_cast<std::size_t>(b)] = std::move(x0);
            x1s[static_cast<std::size_t>(b)] = std::move(x1);
            ts[static_cast<std::size_t>(b)] = time_rng.uniform();
        }
        ResidualBatch batch = rectified_flow_batch(x0s, x1s, ts);
        const double loss = mlp_loss_grad(result.model, batch, grad);
        if (!std::isfinite(loss)) {
            throw TrainingError("pretrain diverged: non-finite loss at iteration " + std::to_string(it));
        }
        result.loss_log.emplace_back(it, loss);
        opt.set_rate(cfg.rate_at(it));
        opt.step(result.model.parameters(), grad);
    }
    return result;
}

void save_loss_log(const LossLog& log, const std::filesystem::path& path, const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open loss log for writing: " + path.string());
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "iteration,loss\n";
    for (const auto& [it, loss] : log) {
        out << it << "," << format_double(loss) << "\n";
    }
}

}  // namespace boss
