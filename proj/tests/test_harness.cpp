#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "boss/harness.hpp"

using namespace boss;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("boss");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

ExperimentConfig tiny_config(const fs::path& out_dir) {
    ExperimentConfig cfg;
    cfg.dataset = "two_gaussians";
    cfg.hidden = {16, 16};
    cfg.time_features = 4;
    cfg.pretrain.iterations = 150;
    cfg.pretrain.batch_size = 32;
    cfg.pretrain.learning_rate = 2e-3;
    cfg.finetune.iterations = 60;
    cfg.finetune.batch_size = 8;
    cfg.finetune.learning_rate = 1e-3;
    cfg.k_max = 20;
    cfg.cost_samples = 16;
    cfg.k_list = {2, 4};
    cfg.finetune_k = 4;
    cfg.seed = 7;
    cfg.eval_samples = 32;
    cfg.finetune_pool = 32;
    cfg.curvature_samples = 8;
    cfg.output_dir = out_dir.string();
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CostMatrix tiny_cost_matrix() {
    CostMatrix c(4, 2);
    c.at(0, 2) = 0.5;
    c.at(0, 3) = 0.9;
    c.at(0, 4) = 2.0;
    c.at(1, 3) = 0.4;
    c.at(1, 4) = 1.1;
    c.at(2, 4) = 0.3;
    return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config json round-trip preserves the hash") {
    fs::path dir = fresh_dir("boss_test_cfg");
    ExperimentConfig cfg = tiny_config(dir / "out");
    cfg.save(dir / "cfg.json");
    ExperimentConfig loaded = ExperimentConfig::from_file(dir / "cfg.json");
    CHECK(config_hash(loaded) == config_hash(cfg));
    CHECK(loaded.k_list == cfg.k_list);
    CHECK(loaded.pretrain.iterations == 150);
    fs::remove_all(dir);
}

TEST_CASE("config validation catches bad fields") {
    ExperimentConfig cfg;
    cfg.k_list = {0};
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = ExperimentConfig();
    cfg.mode = "frozen";
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("stepsize report rounds to two decimals and sums to one") {
    CostMatrix c = tiny_cost_matrix();
    auto results = all_k_schedules(c, {1, 2, 4});
    fs::path dir = fresh_dir("boss_test_report");
    write_stepsize_report(results, dir / "stepsizes.txt");
    const std::string text = slurp(dir / "stepsizes.txt");
    CHECK(text.find("[1.00]") != std::string::npos);  // K = 1
    for (const auto& [k, r] : results) {
        double sum = 0.0;
        for (double h : r.schedule.stepsizes()) sum += h;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    fs::remove_all(dir);
}

TEST_CASE("cli schedule command matches the library") {
    fs::path dir = fresh_dir("boss_test_cli_sched");
    CostMatrix c = tiny_cost_matrix();
    save_cost_matrix(c, dir / "costs.txt");

    const fs::path out = dir / "sched.json";
    int rc = run_cli({"schedule", "--costs", (dir / "costs.txt").string(), "--k", "1", "--out",
                      out.string()});
    CHECK(rc == 0);
    ScheduleResult r = load_schedule(out);
    CHECK(r.schedule.timestamps == std::vector<double>{0.0, 1.0});
    CHECK(r.total_error == c.at(0, 4));
    fs::remove_all(dir);
}

TEST_CASE("cli schedule rejects K = 0 with a diagnostic exit") {
    fs::path dir = fresh_dir("boss_test_cli_k0");
    save_cost_matrix(tiny_cost_matrix(), dir / "costs.txt");
    int rc = run_cli({"schedule", "--costs", (dir / "costs.txt").string(), "--k", "0"});
    CHECK(rc != 0);
    fs::remove_all(dir);
}

TEST_CASE("cli rejects missing files and unknown flags") {
    CHECK(run_cli({"schedule", "--costs", "/nonexistent/costs.txt", "--k", "2"}) != 0);
    CHECK(run_cli({"schedule", "--no-such-flag"}) != 0);
    CHECK(run_cli({"frobnicate"}) != 0);
}

TEST_CASE("pipeline reruns are byte-identical") {
    fs::path dir = fresh_dir("boss_test_pipe");
    ExperimentConfig cfg = tiny_config(dir / "out");

    std::ostringstream log1;
    PipelineResult r1 = run_pipeline(cfg, log1);
    const std::string metrics1 = slurp(r1.metrics_file);
    const std::string costs1 = slurp(r1.costs_file);

    std::ostringstream log2;
    PipelineResult r2 = run_pipeline(cfg, log2);
    CHECK(slurp(r2.metrics_file) == metrics1);
    CHECK(slurp(r2.costs_file) == costs1);

    // artifacts exist and carry provenance
    CHECK(fs::exists(dir / "out" / "model.json"));
    CHECK(fs::exists(dir / "out" / "stepsizes.txt"));
    CHECK(fs::exists(dir / "out" / "curvature.csv"));
    CHECK(metrics1.find("config_hash") != std::string::npos);
    CHECK(r1.metrics.rows.size() == r2.metrics.rows.size());
    fs::remove_all(dir);
}

TEST_CASE("cli pipeline runs from a config file and respects --seed") {
    fs::path dir = fresh_dir("boss_test_cli_pipe");
    ExperimentConfig cfg = tiny_config(dir / "out");
    cfg.save(dir / "cfg.json");
    int rc = run_cli({"pipeline", "--config", (dir / "cfg.json").string(), "--seed", "9", "--out-dir",
                      (dir / "out9").string()});
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "out9" / "metrics.json"));
    // the overridden seed lands in the resolved config copy
    ExperimentConfig resolved = ExperimentConfig::from_file(dir / "out9" / "config.json");
    CHECK(resolved.seed == 9);
    fs::remove_all(dir);
}

TEST_CASE("cli transfer emits the three-way table") {
    fs::path dir = fresh_dir("boss_test_cli_transfer");
    CostMatrix c = tiny_cost_matrix();
    save_cost_matrix(c, dir / "costs.txt");
    ScheduleResult r = bellman_schedule(c, 2);
    save_schedule(r, dir / "sched.json");
    int rc = run_cli({"transfer", "--source-schedule", (dir / "sched.json").string(), "--target-costs",
                      (dir / "costs.txt").string(), "--out", (dir / "transfer.json").string()});
    CHECK(rc == 0);
    const std::string text = slurp(dir / "transfer.json");
    CHECK(text.find("bellman_cost") != std::string::npos);
    CHECK(text.find("transfer_cost") != std::string::npos);
    CHECK(text.find("uniform_cost") != std::string::npos);
    fs::remove_all(dir);
}

}  // TEST_SUITE
