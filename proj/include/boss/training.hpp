#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "boss/datasets.hpp"
#include "boss/field.hpp"

namespace boss {

struct TrainConfig {
    long iterations = 20000;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string lr_decay = "cosine";  // none | cosine (to 1% of the base rate)
    std::uint64_t seed = 0;
    std::string dataset = "two_moons";
    int d = 2;

    void validate() const;
    double rate_at(long iteration) const;
};

// Adaptive moment estimation with bias correction. A zero learning rate
// leaves parameters bitwise unchanged.
class Adam {
public:
    Adam(std::size_t n, const TrainConfig& cfg)
        : lr_(cfg.learning_rate), beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps),
          m_(n, 0.0), v_(n, 0.0) {}

    void set_rate(double lr) { lr_ = lr; }
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

// Mean over the batch of |v(x_t, t) - (x1 - x0)|^2 along the straight
// interpolation x_t = t x1 + (1 - t) x0.
double rectified_flow_loss(const VelocityField& model, const std::vector<Vec>& x0s,
                           const std::vector<Vec>& x1s, const std::vector<double>& ts);

// Batch assembly shared by the loss and the pretraining loop.
ResidualBatch rectified_flow_batch(const std::vector<Vec>& x0s, const std::vector<Vec>& x1s,
                                   const std::vector<double>& ts);

using LossLog = std::vector<std::pair<long, double>>;

struct PretrainResult {
    MlpVelocity model;
    LossLog loss_log;  // (iteration, batch loss before the step)
};

// Train a velocity network on (x0, x1) couplings with t ~ U[0, 1] per sample.
// Throws TrainingError naming the iteration if the loss becomes non-finite.
PretrainResult pretrain(const TrainConfig& cfg, const MlpArch& arch);
PretrainResult pretrain(const TrainConfig& cfg, const MlpArch& arch, const DataDensity& data);

void save_loss_log(const LossLog& log, const std::filesystem::path& path, const std::string& config_hash = "");

}  // namespace boss
