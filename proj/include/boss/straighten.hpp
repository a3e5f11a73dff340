#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "boss/costs.hpp"
#include "boss/field.hpp"
#include "boss/integrate.hpp"
#include "boss/training.hpp"

namespace boss {

// Frozen targets for straightening: per path, the anchor states at the
// schedule timestamps and the straight-segment slopes between them. Built once
// from the frozen pretrained model and never modified afterwards.
struct StraighteningDataset {
    Schedule schedule;
    std::vector<std::vector<Vec>> anchor_points;  // [path][k], k = 0..K
    std::vector<std::vector<Vec>> slopes;         // [path][k], k = 0..K-1

    std::size_t paths() const { return anchor_points.size(); }
    int segments() const { return schedule.steps(); }
    std::uint64_t checksum() const;
};

// Subsample the frozen model's K_max-step Euler paths at the schedule
// timestamps; slopes are (x_{k+1} - x_k) / (tau_{k+1} - tau_k).
StraighteningDataset build_targets(const VelocityField& frozen, const Schedule& s,
                                   const std::vector<Vec>& noises, const AnchorGrid& grid);

// (1/|indices|) sum_i sum_k | v(x^i_k, tau_k) - slope^i_k |^2
double straightening_loss(const VelocityField& model, const StraighteningDataset& data,
                          std::span<const std::size_t> indices);
double straightening_loss(const VelocityField& model, const StraighteningDataset& data);

ResidualBatch straightening_batch(const StraighteningDataset& data, std::span<const std::size_t> indices);

enum class FinetuneMode { Full, Lora };

struct FinetuneResult {
    MlpVelocity model;                  // in LoRA mode: the untouched base
    std::optional<LoraAdapter> adapter; // set in LoRA mode
    LossLog loss_log;

    // Sampling-ready view (base, or base + adapter); valid while this result
    // stays alive and unmoved.
    std::unique_ptr<VelocityField> field_view() const;
};

// Re-align the velocity field so one Euler step per schedule interval tracks
// the frozen model's fine-grained anchor path. Targets come from the frozen
// copy of `pretrained`; batches cycle over a fixed noise pool in epochs.
FinetuneResult boss_finetune(const MlpVelocity& pretrained, const Schedule& s, const TrainConfig& cfg,
                             FinetuneMode mode, int lora_rank, const AnchorGrid& grid, long pool_size,
                             const StraighteningDataset* prebuilt = nullptr);

}  // namespace boss
