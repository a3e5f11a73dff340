#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "boss/analysis.hpp"
#include "boss/field.hpp"
#include "boss/scheduler.hpp"
#include "boss/training.hpp"

namespace boss {

// One JSON document drives a full run. The master seed expands into named
// substreams (pretrain, costs, straighten, eval, ...) so stages can be re-run
// independently.
struct ExperimentConfig {
    std::string dataset = "two_moons";
    int d = 2;

    std::vector<int> hidden = {128, 128, 128};
    int time_features = 8;
    std::string activation = "tanh";

    TrainConfig pretrain;   // seed field is filled from the master seed
    TrainConfig finetune;

    int k_max = 100;
    long cost_samples = 100;            // N
    std::vector<int> k_list = {2, 4, 6, 8};
    int finetune_k = 6;

    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string mode = "full";          // full | lora
    int lora_rank = 4;

    long eval_samples = 512;
    long finetune_pool = 1024;
    long curvature_samples = 1000;
    double rk45_rtol = 1e-6;
    double rk45_atol = 1e-9;

    ExperimentConfig();
    void validate() const;
    MlpArch arch() const;
    std::string canonical_json() const;

    static ExperimentConfig from_file(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

std::string config_hash(const ExperimentConfig& cfg);
std::string file_hash(const std::filesystem::path& path);

// Appendix-style stepsize table: per K the stepsizes rounded to two decimals,
// plus the exact sum of the unrounded stepsizes.
void write_stepsize_report(const std::map<int, ScheduleResult>& results,
                           const std::filesystem::path& path);

struct MetricsRow {
    std::string method;       // euler_uniform, euler_bellman, heun_*, rk45, boss, distill
    int k = 0;                // NFE budget (0 for rk45)
    double nfe = 0.0;         // actual mean evaluations per sample
    double endpoint_mse = 0.0;  // vs the RK45 reference endpoints
    double w2_to_data = 0.0;
    double schedule_cost = -1.0;  // -1 when not applicable
    std::string w2_mode;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    std::map<std::string, std::string> provenance;
    void save(const std::filesystem::path& path) const;
};

struct PipelineResult {
    std::filesystem::path model_file;
    std::filesystem::path costs_file;
    std::map<int, std::filesystem::path> schedule_files;
    std::filesystem::path metrics_file;
    MetricsReport metrics;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::ostream& log);

// The CLI entry point (subcommands: pretrain, costs, schedule, straighten,
// sample, eval, curvature, transfer, pipeline). Returns the process exit
// status.
int cli_main(int argc, const char* const* argv);

}  // namespace boss
