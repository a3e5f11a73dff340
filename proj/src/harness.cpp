#include "boss/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "boss/straighten.hpp"

namespace boss {

namespace {

nlohmann::json train_config_json(const TrainConfig& t) {
    return {{"iterations", t.iterations},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"adam_beta1", t.adam_beta1},
            {"adam_beta2", t.adam_beta2},
            {"adam_eps", t.adam_eps},
            {"lr_decay", t.lr_decay}};
}

void train_config_from_json(const nlohmann::json& j, TrainConfig& t) {
    t.iterations = j.value("iterations", t.iterations);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.adam_beta1 = j.value("adam_beta1", t.adam_beta1);
    t.adam_beta2 = j.value("adam_beta2", t.adam_beta2);
    t.adam_eps = j.value("adam_eps", t.adam_eps);
    t.lr_decay = j.value("lr_decay", t.lr_decay);
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"dataset", c.dataset},
            {"d", c.d},
            {"model", {{"hidden", c.hidden}, {"time_features", c.time_features}, {"activation", c.activation}}},
            {"pretrain", train_config_json(c.pretrain)},
            {"finetune", train_config_json(c.finetune)},
            {"k_max", c.k_max},
            {"cost_samples", c.cost_samples},
            {"k_list", c.k_list},
            {"finetune_k", c.finetune_k},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"mode", c.mode},
            {"lora_rank", c.lora_rank},
            {"eval_samples", c.eval_samples},
            {"finetune_pool", c.finetune_pool},
            {"curvature_samples", c.curvature_samples},
            {"rk45_rtol", c.rk45_rtol},
            {"rk45_atol", c.rk45_atol}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset = j.value("dataset", c.dataset);
    c.d = j.value("d", c.d);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        c.hidden = m.value("hidden", c.hidden);
        c.time_features = m.value("time_features", c.time_features);
        c.activation = m.value("activation", c.activation);
    }
    if (j.contains("pretrain")) train_config_from_json(j.at("pretrain"), c.pretrain);
    if (j.contains("finetune")) train_config_from_json(j.at("finetune"), c.finetune);
    c.k_max = j.value("k_max", c.k_max);
    c.cost_samples = j.value("cost_samples", c.cost_samples);
    c.k_list = j.value("k_list", c.k_list);
    c.finetune_k = j.value("finetune_k", c.finetune_k);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.mode = j.value("mode", c.mode);
    c.lora_rank = j.value("lora_rank", c.lora_rank);
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    c.finetune_pool = j.value("finetune_pool", c.finetune_pool);
    c.curvature_samples = j.value("curvature_samples", c.curvature_samples);
    c.rk45_rtol = j.value("rk45_rtol", c.rk45_rtol);
    c.rk45_atol = j.value("rk45_atol", c.rk45_atol);
    return c;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    pretrain.iterations = 20000;
    pretrain.batch_size = 128;
    pretrain.learning_rate = 1e-3;
    finetune.iterations = 5000;
    finetune.batch_size = 32;
    finetune.learning_rate = 3e-4;
}

void ExperimentConfig::validate() const {
    if (d <= 0) throw InputError("config: d must be positive");
    if (hidden.empty()) throw InputError("config: need at least one hidden layer");
    if (k_max < 1) throw InputError("config: k_max must be >= 1");
    if (cost_samples < 1) throw InputError("config: cost_samples must be >= 1");
    if (k_list.empty()) throw InputError("config: k_list must be nonempty");
    for (int k : k_list) {
        if (k < 1 || k > k_max) throw InputError("config: every K must lie in [1, k_max]");
    }
    if (finetune_k < 1 || finetune_k > k_max) throw InputError("config: finetune_k out of range");
    if (mode != "full" && mode != "lora") throw InputError("config: mode must be 'full' or 'lora'");
    if (lora_rank < 1) throw InputError("config: lora_rank must be >= 1");
    if (eval_samples < 1) throw InputError("config: eval_samples must be >= 1");
    if (finetune_pool < 1) throw InputError("config: finetune_pool must be >= 1");
    if (!(rk45_rtol > 0.0) || !(rk45_atol > 0.0)) throw InputError("config: rk45 tolerances must be positive");
    pretrain.validate();
    finetune.validate();
    activation_from_name(activation);
}

MlpArch ExperimentConfig::arch() const {
    MlpArch a;
    a.d = d;
    a.time_features = time_features;
    a.hidden = hidden;
    a.activation = activation_from_name(activation);
    return a;
}

std::string ExperimentConfig::canonical_json() const {
    return to_json(*this).dump();
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        ExperimentConfig c = config_from_json(j);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open config for writing: " + path.string());
    out << to_json(*this).dump(2) << "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
    return hex64(fnv1a(cfg.canonical_json()));
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot hash missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return hex64(fnv1a(bytes));
}

void write_stepsize_report(const std::map<int, ScheduleResult>& results,
                           const std::filesystem::path& path) {
    if (results.empty()) throw InputError("stepsize report: empty result map");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open stepsize report for writing: " + path.string());
    out << "K\tstepsizes\tsum\n";
    for (const auto& [k, r] : results) {
        const std::vector<double> h = r.schedule.stepsizes();
        double sum = 0.0;
        for (auto it = h.rbegin(); it != h.rend(); ++it) sum += *it;
        out << k << "\t[";
        for (std::size_t i = 0; i < h.size(); ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%.2f", h[i]);
            out << (i > 0 ? "," : "") << buf;
        }
        out << "]\t" << format_double(sum) << "\n";
    }
}

void MetricsReport::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const MetricsRow& r : rows) {
        nlohmann::json row = {{"method", r.method},        {"K", r.k},
                              {"nfe", r.nfe},              {"endpoint_mse", r.endpoint_mse},
                              {"w2_to_data", r.w2_to_data}, {"w2_mode", r.w2_mode}};
        if (r.schedule_cost >= 0.0) row["schedule_cost"] = r.schedule_cost;
        j["rows"].push_back(row);
    }
    j["provenance"] = provenance;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open metrics for writing: " + path.string());
    out << j.dump(2) << "\n";
}

namespace {

struct EvalInputs {
    const ExperimentConfig& cfg;
    const MlpVelocity& model;
    const CostMatrix& costs;
    const std::map<int, ScheduleResult>& schedules;
    const VelocityField* boss_field = nullptr;     // finetuned on the Bellman schedule
    const VelocityField* distill_field = nullptr;  // finetuned on the snapped-uniform schedule
};

MetricsReport run_eval(const EvalInputs& in, std::ostream& log) {
    const ExperimentConfig& cfg = in.cfg;
    MetricsReport report;

    Rng noise_rng = substream(cfg.seed, "eval_noise");
    std::vector<Vec> noises;
    for (long i = 0; i < cfg.eval_samples; ++i) noises.push_back(noise_rng.gaussian_vec(cfg.d));

    CouplingSampler data_sampler(cfg.dataset, cfg.d, substream_seed(cfg.seed, "eval_data"));
    std::vector<Vec> data;
    for (long i = 0; i < cfg.eval_samples; ++i) data.push_back(data_sampler.draw_data());
    const std::string w2_mode = wasserstein2_mode(data.size());

    log << "eval: rk45 reference over " << noises.size() << " noises\n";
    std::vector<Vec> reference;
    double rk45_nfe = 0.0;
    for (const Vec& x0 : noises) {
        Trajectory tr = rk45(in.model, x0, cfg.rk45_rtol, cfg.rk45_atol);
        rk45_nfe += static_cast<double>(tr.nfe);
        reference.push_back(tr.end());
    }
    rk45_nfe /= static_cast<double>(noises.size());
    report.rows.push_back({"rk45", 0, rk45_nfe, 0.0, wasserstein2(reference, data), -1.0, w2_mode});

    auto endpoint_mse = [&](const std::vector<Vec>& ends) {
        double s = 0.0;
        for (std::size_t i = 0; i < ends.size(); ++i) s += squared_distance(ends[i], reference[i]);
        return s / static_cast<double>(ends.size());
    };
    auto sample_ends = [&](const VelocityField& f, const Schedule& s, bool heun) {
        std::vector<Vec> ends;
        ends.reserve(noises.size());
        for (const Vec& x0 : noises) {
            ends.push_back(heun ? heun_schedule(f, x0, s).end() : euler_schedule(f, x0, s).end());
        }
        return ends;
    };

    for (int k : cfg.k_list) {
        const Schedule uniform = Schedule::uniform(k);
        const Schedule snapped = Schedule::uniform_on_grid(k, cfg.k_max);
        const ScheduleResult& bell = in.schedules.at(k);

        std::vector<Vec> ends = sample_ends(in.model, uniform, false);
        report.rows.push_back({"euler_uniform", k, static_cast<double>(k), endpoint_mse(ends),
                               wasserstein2(ends, data), schedule_cost(in.costs, snapped), w2_mode});

        ends = sample_ends(in.model, bell.schedule, false);
        report.rows.push_back({"euler_bellman", k, static_cast<double>(k), endpoint_mse(ends),
                               wasserstein2(ends, data), bell.total_error, w2_mode});

        ends = sample_ends(in.model, uniform, true);
        report.rows.push_back({"heun_uniform", k, 2.0 * k, endpoint_mse(ends), wasserstein2(ends, data),
                               -1.0, w2_mode});

        ends = sample_ends(in.model, bell.schedule, true);
        report.rows.push_back({"heun_bellman", k, 2.0 * k, endpoint_mse(ends), wasserstein2(ends, data),
                               -1.0, w2_mode});
        log << "eval: K=" << k << " done\n";
    }

    if (in.boss_field != nullptr) {
        const Schedule& s = in.schedules.at(cfg.finetune_k).schedule;
        std::vector<Vec> ends = sample_ends(*in.boss_field, s, false);
        report.rows.push_back({"boss", cfg.finetune_k, static_cast<double>(cfg.finetune_k),
                               endpoint_mse(ends), wasserstein2(ends, data), -1.0, w2_mode});
    }
    if (in.distill_field != nullptr) {
        const Schedule snapped = Schedule::uniform_on_grid(cfg.finetune_k, cfg.k_max);
        std::vector<Vec> ends = sample_ends(*in.distill_field, snapped, false);
        report.rows.push_back({"distill", cfg.finetune_k, static_cast<double>(cfg.finetune_k),
                               endpoint_mse(ends), wasserstein2(ends, data), -1.0, w2_mode});
    }
    return report;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    log << "seed=" << cfg.seed << " config_hash=" << hash << "\n";

    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    cfg.save(dir / "config.json");

    PipelineResult result;

    // pretrain
    log << "pipeline: pretraining on " << cfg.dataset << "\n";
    TrainConfig pre = cfg.pretrain;
    pre.seed = substream_seed(cfg.seed, "pretrain");
    pre.dataset = cfg.dataset;
    pre.d = cfg.d;
    PretrainResult trained = pretrain(pre, cfg.arch());
    result.model_file = dir / "model.json";
    save_checkpoint(result.model_file, trained.model, nullptr, hash + ":pretrain");
    save_loss_log(trained.loss_log, dir / "pretrain_log.csv", hash);
    log << "pipeline: pretrain loss " << trained.loss_log.front().second << " -> "
        << trained.loss_log.back().second << "\n";

    // cost matrix
    const AnchorGrid grid(cfg.k_max);
    Rng cost_rng = substream(cfg.seed, "costs");
    std::vector<Vec> cost_noises;
    for (long i = 0; i < cfg.cost_samples; ++i) cost_noises.push_back(cost_rng.gaussian_vec(cfg.d));
    CostMatrix costs = truncation_costs(anchor_trajectories(trained.model, cost_noises, grid), grid);
    result.costs_file = dir / "costs.txt";
    save_cost_matrix(costs, result.costs_file);
    log << "pipeline: cost matrix " << cfg.k_max << "x" << cfg.k_max << " from N=" << cfg.cost_samples
        << "\n";

    // Bellman schedules for every requested K
    std::vector<int> k_all = cfg.k_list;
    if (std::find(k_all.begin(), k_all.end(), cfg.finetune_k) == k_all.end()) {
        k_all.push_back(cfg.finetune_k);
    }
    std::map<int, ScheduleResult> schedules = all_k_schedules(costs, k_all);
    for (auto& [k, r] : schedules) {
        r.provenance.model_id = hash + ":pretrain";
        r.provenance.cost_matrix_file = result.costs_file.filename().string();
        const fs::path p = dir / ("schedule_k" + std::to_string(k) + ".json");
        save_schedule(r, p);
        result.schedule_files[k] = p;
    }
    write_stepsize_report(schedules, dir / "stepsizes.txt");
    log << "pipeline: schedules written for " << schedules.size() << " budgets\n";

    // straighten on the Bellman schedule; distill baseline on the snapped-uniform schedule
    TrainConfig fin = cfg.finetune;
    fin.seed = substream_seed(cfg.seed, "straighten");
    fin.dataset = cfg.dataset;
    fin.d = cfg.d;
    const FinetuneMode mode = cfg.mode == "lora" ? FinetuneMode::Lora : FinetuneMode::Full;

    log << "pipeline: straightening (boss, K=" << cfg.finetune_k << ", mode=" << cfg.mode << ")\n";
    FinetuneResult boss_ft = boss_finetune(trained.model, schedules.at(cfg.finetune_k).schedule, fin, mode,
                                           cfg.lora_rank, grid, cfg.finetune_pool);
    save_checkpoint(dir / "boss_model.json", boss_ft.model,
                    boss_ft.adapter.has_value() ? &*boss_ft.adapter : nullptr, hash + ":boss");
    save_loss_log(boss_ft.loss_log, dir / "boss_loss.csv", hash);

    log << "pipeline: straightening (distill baseline)\n";
    FinetuneResult distill_ft = boss_finetune(trained.model, Schedule::uniform_on_grid(cfg.finetune_k, cfg.k_max),
                                              fin, mode, cfg.lora_rank, grid, cfg.finetune_pool);
    save_checkpoint(dir / "distill_model.json", distill_ft.model,
                    distill_ft.adapter.has_value() ? &*distill_ft.adapter : nullptr, hash + ":distill");
    save_loss_log(distill_ft.loss_log, dir / "distill_loss.csv", hash);

    // curvature profile
    CurvatureProfile curv = curvature_profile(trained.model, cfg.curvature_samples, grid,
                                              substream_seed(cfg.seed, "curvature"));
    save_curvature_csv(curv, dir / "curvature.csv", hash);

    // evaluation
    auto boss_view = boss_ft.field_view();
    auto distill_view = distill_ft.field_view();
    EvalInputs inputs{cfg, trained.model, costs, schedules, boss_view.get(), distill_view.get()};
    MetricsReport metrics = run_eval(inputs, log);
    metrics.provenance["config_hash"] = hash;
    metrics.provenance["dataset"] = cfg.dataset;
    metrics.provenance["model_file"] = result.model_file.filename().string();
    metrics.provenance["model_hash"] = file_hash(result.model_file);
    metrics.provenance["costs_file"] = result.costs_file.filename().string();
    metrics.provenance["costs_hash"] = file_hash(result.costs_file);
    for (const auto& [k, p] : result.schedule_files) {
        metrics.provenance["schedule_k" + std::to_string(k) + "_hash"] = file_hash(p);
    }
    result.metrics_file = dir / "metrics.json";
    metrics.save(result.metrics_file);
    result.metrics = std::move(metrics);
    log << "pipeline: metrics written to " << result.metrics_file.string() << "\n";
    return result;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

std::string argv_hash(int argc, const char* const* argv) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int i = 0; i < argc; ++i) h = fnv1a(std::string_view(argv[i]), h);
    return hex64(h);
}

void write_samples_csv(const std::filesystem::path& path, const std::vector<Vec>& samples) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open samples file for writing: " + path.string());
    out << "sample_id";
    if (!samples.empty()) {
        for (std::size_t c = 0; c < samples.front().size(); ++c) out << ",x_" << (c + 1);
    }
    out << "\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out << i;
        for (double v : samples[i]) out << "," << format_double(v);
        out << "\n";
    }
}

void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open trajectory file for writing: " + path.string());
    out << "sample_id,t";
    if (!trajs.empty() && !trajs.front().states.empty()) {
        for (std::size_t c = 0; c < trajs.front().states.front().size(); ++c) out << ",x_" << (c + 1);
    }
    out << "\n";
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        for (std::size_t k = 0; k < trajs[i].size(); ++k) {
            out << i << "," << format_double(trajs[i].times[k]);
            for (double v : trajs[i].states[k]) out << "," << format_double(v);
            out << "\n";
        }
    }
}

}  // namespace

}  // namespace boss

#include <CLI11.hpp>

namespace boss {

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Bellman-optimal sampling stepsizes and velocity straightening for flow matching"};
    app.require_subcommand(1);

    // ---- pretrain
    auto* cmd_pre = app.add_subcommand("pretrain", "train a velocity network on a toy dataset");
    std::string pre_config;
    std::string pre_out_dir = ".";
    std::uint64_t pre_seed = 0;
    bool pre_seed_set = false;
    cmd_pre->add_option("--config", pre_config, "experiment config JSON")->required();
    cmd_pre->add_option("--out-dir", pre_out_dir, "output directory");
    cmd_pre->add_option("--seed", pre_seed, "override the config seed")->each([&](const std::string&) {
        pre_seed_set = true;
    });

    // ---- costs
    auto* cmd_costs = app.add_subcommand("costs", "estimate the pairwise truncation-cost matrix");
    std::string costs_model, costs_out = "costs.txt";
    int costs_kmax = 100;
    long costs_n = 100;
    std::uint64_t costs_seed = 0;
    cmd_costs->add_option("--model", costs_model, "model checkpoint")->required();
    cmd_costs->add_option("--out", costs_out, "output cost-matrix file");
    cmd_costs->add_option("--kmax", costs_kmax, "anchor grid size");
    cmd_costs->add_option("--n", costs_n, "number of noise samples");
    cmd_costs->add_option("--seed", costs_seed, "noise seed");

    // ---- schedule
    auto* cmd_sched = app.add_subcommand("schedule", "Bellman-optimal stepsizes by dynamic programming");
    std::string sched_costs, sched_out, sched_report, sched_model_id;
    std::vector<int> sched_k;
    std::string sched_out_dir = ".";
    cmd_sched->add_option("--costs", sched_costs, "cost-matrix file")->required();
    cmd_sched->add_option("--k", sched_k, "NFE budget(s)")->required();
    cmd_sched->add_option("--out", sched_out, "output file (single K only)");
    cmd_sched->add_option("--out-dir", sched_out_dir, "output directory for schedule_k*.json");
    cmd_sched->add_option("--report", sched_report, "also write the stepsize table here");
    cmd_sched->add_option("--model-id", sched_model_id, "provenance model id");

    // ---- straighten
    auto* cmd_str = app.add_subcommand("straighten", "finetune the velocity field on a schedule");
    std::string str_model, str_schedule, str_out = "finetuned.json", str_log, str_mode = "full";
    long str_iters = 5000, str_pool = 1024;
    int str_batch = 32, str_rank = 4, str_kmax = 100;
    double str_lr = 3e-4;
    std::uint64_t str_seed = 0;
    cmd_str->add_option("--model", str_model, "pretrained checkpoint")->required();
    cmd_str->add_option("--schedule", str_schedule, "schedule JSON")->required();
    cmd_str->add_option("--out", str_out, "finetuned checkpoint");
    cmd_str->add_option("--log", str_log, "loss log CSV");
    cmd_str->add_option("--mode", str_mode, "full | lora");
    cmd_str->add_option("--rank", str_rank, "LoRA rank");
    cmd_str->add_option("--iterations", str_iters, "finetune iterations");
    cmd_str->add_option("--batch", str_batch, "paths per batch");
    cmd_str->add_option("--lr", str_lr, "learning rate");
    cmd_str->add_option("--pool", str_pool, "noise pool size");
    cmd_str->add_option("--kmax", str_kmax, "anchor grid size");
    cmd_str->add_option("--seed", str_seed, "finetune seed");

    // ---- sample
    auto* cmd_sample = app.add_subcommand("sample", "integrate noises through a model");
    std::string sample_model, sample_schedule, sample_out = "samples.csv", sample_traj;
    int sample_k = 0;
    bool sample_rk45 = false, sample_heun = false;
    long sample_n = 512;
    std::uint64_t sample_seed = 0;
    double sample_rtol = 1e-6, sample_atol = 1e-9;
    cmd_sample->add_option("--model", sample_model, "model checkpoint")->required();
    cmd_sample->add_option("--schedule", sample_schedule, "schedule JSON");
    cmd_sample->add_option("--k", sample_k, "uniform schedule with K steps");
    cmd_sample->add_flag("--rk45", sample_rk45, "adaptive reference solver");
    cmd_sample->add_flag("--heun", sample_heun, "second-order solver on the schedule");
    cmd_sample->add_option("--n", sample_n, "number of samples");
    cmd_sample->add_option("--seed", sample_seed, "noise seed");
    cmd_sample->add_option("--out", sample_out, "endpoint CSV");
    cmd_sample->add_option("--trajectories", sample_traj, "full trajectory CSV");
    cmd_sample->add_option("--rtol", sample_rtol, "rk45 relative tolerance");
    cmd_sample->add_option("--atol", sample_atol, "rk45 absolute tolerance");

    // ---- eval
    auto* cmd_eval = app.add_subcommand("eval", "metrics report for a pipeline directory");
    std::string eval_config, eval_dir = "out";
    cmd_eval->add_option("--config", eval_config, "experiment config JSON")->required();
    cmd_eval->add_option("--dir", eval_dir, "pipeline output directory");

    // ---- curvature
    auto* cmd_curv = app.add_subcommand("curvature", "average anchor-path curvature per timestamp");
    std::string curv_model, curv_out = "curvature.csv";
    long curv_n = 1000;
    int curv_kmax = 100;
    std::uint64_t curv_seed = 0;
    cmd_curv->add_option("--model", curv_model, "model checkpoint")->required();
    cmd_curv->add_option("--n", curv_n, "number of trajectories");
    cmd_curv->add_option("--kmax", curv_kmax, "anchor grid size");
    cmd_curv->add_option("--seed", curv_seed, "noise seed");
    cmd_curv->add_option("--out", curv_out, "output CSV");

    // ---- transfer
    auto* cmd_tr = app.add_subcommand("transfer", "apply a source schedule to a target cost matrix");
    std::vector<std::string> tr_schedules;
    std::string tr_costs, tr_out = "transfer.json";
    cmd_tr->add_option("--source-schedule", tr_schedules, "schedule JSON (repeatable)")->required();
    cmd_tr->add_option("--target-costs", tr_costs, "target cost-matrix file")->required();
    cmd_tr->add_option("--out", tr_out, "output JSON");

    // ---- pipeline
    auto* cmd_pipe = app.add_subcommand("pipeline", "pretrain -> costs -> schedule -> straighten -> eval");
    std::string pipe_config, pipe_out_dir;
    std::uint64_t pipe_seed = 0;
    bool pipe_seed_set = false;
    cmd_pipe->add_option("--config", pipe_config, "experiment config JSON")->required();
    cmd_pipe->add_option("--out-dir", pipe_out_dir, "override the config output_dir");
    cmd_pipe->add_option("--seed", pipe_seed, "override the config seed")->each([&](const std::string&) {
        pipe_seed_set = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cmd_pre->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::from_file(pre_config);
            if (pre_seed_set) cfg.seed = pre_seed;
            std::cout << "seed=" << cfg.seed << " config_hash=" << config_hash(cfg) << "\n";
            TrainConfig pre = cfg.pretrain;
            pre.seed = substream_seed(cfg.seed, "pretrain");
            pre.dataset = cfg.dataset;
            pre.d = cfg.d;
            PretrainResult res = pretrain(pre, cfg.arch());
            std::filesystem::create_directories(pre_out_dir);
            save_checkpoint(std::filesystem::path(pre_out_dir) / "model.json", res.model, nullptr,
                            config_hash(cfg) + ":pretrain");
            save_loss_log(res.loss_log, std::filesystem::path(pre_out_dir) / "pretrain_log.csv",
                          config_hash(cfg));
            std::cout << "pretrain: loss " << res.loss_log.front().second << " -> "
                      << res.loss_log.back().second << "\n";
        } else if (cmd_costs->parsed()) {
            std::cout << "seed=" << costs_seed << " config_hash=" << argv_hash(argc, argv) << "\n";
            Checkpoint ck = load_checkpoint(costs_model);
            const AnchorGrid grid(costs_kmax);
            Rng rng(costs_seed);
            std::vector<Vec> noises;
            for (long i = 0; i < costs_n; ++i) noises.push_back(rng.gaussian_vec(ck.model.dim()));
            CostMatrix m = truncation_costs(anchor_trajectories(ck.model, noises, grid), grid);
            save_cost_matrix(m, costs_out);
            std::cout << "costs: wrote " << costs_out << " (" << m.defined_entries() << " entries)\n";
        } else if (cmd_sched->parsed()) {
            std::cout << "seed=n/a config_hash=" << argv_hash(argc, argv) << "\n";
            CostMatrix c = load_cost_matrix(sched_costs);
            std::map<int, ScheduleResult> results = all_k_schedules(c, sched_k);
            for (auto& [k, r] : results) {
                r.provenance.model_id = sched_model_id;
                r.provenance.cost_matrix_file = sched_costs;
                std::filesystem::path out;
                if (!sched_out.empty() && results.size() == 1) {
                    out = sched_out;
                } else {
                    std::filesystem::create_directories(sched_out_dir);
                    out = std::filesystem::path(sched_out_dir) / ("schedule_k" + std::to_string(k) + ".json");
                }
                save_schedule(r, out);
                std::cout << "schedule: K=" << k << " total_error=" << format_double(r.total_error)
                          << " -> " << out.string() << "\n";
            }
            if (!sched_report.empty()) write_stepsize_report(results, sched_report);
        } else if (cmd_str->parsed()) {
            std::cout << "seed=" << str_seed << " config_hash=" << argv_hash(argc, argv) << "\n";
            Checkpoint ck = load_checkpoint(str_model);
            ScheduleResult sched = load_schedule(str_schedule);
            TrainConfig fin;
            fin.iterations = str_iters;
            fin.batch_size = str_batch;
            fin.learning_rate = str_lr;
            fin.seed = str_seed;
            fin.d = ck.model.dim();
            const FinetuneMode mode = str_mode == "lora" ? FinetuneMode::Lora : FinetuneMode::Full;
            FinetuneResult res = boss_finetune(ck.model, sched.schedule, fin, mode, str_rank,
                                               AnchorGrid(str_kmax), str_pool);
            save_checkpoint(str_out, res.model, res.adapter.has_value() ? &*res.adapter : nullptr);
            if (!str_log.empty()) save_loss_log(res.loss_log, str_log);
            std::cout << "straighten: loss " << res.loss_log.front().second << " -> "
                      << res.loss_log.back().second << "\n";
        } else if (cmd_sample->parsed()) {
            std::cout << "seed=" << sample_seed << " config_hash=" << argv_hash(argc, argv) << "\n";
            Checkpoint ck = load_checkpoint(sample_model);
            std::unique_ptr<VelocityField> view;
            const VelocityField* field = &ck.model;
            if (ck.adapter.has_value()) {
                view = std::make_unique<AdaptedVelocity>(ck.model, *ck.adapter);
                field = view.get();
            }
            Rng rng(sample_seed);
            std::vector<Trajectory> trajs;
            std::vector<Vec> ends;
            for (long i = 0; i < sample_n; ++i) {
                const Vec x0 = rng.gaussian_vec(field->dim());
                Trajectory tr;
                if (sample_rk45) {
                    tr = rk45(*field, x0, sample_rtol, sample_atol);
                } else {
                    Schedule s;
                    if (!sample_schedule.empty()) {
                        s = load_schedule(sample_schedule).schedule;
                    } else if (sample_k >= 1) {
                        s = Schedule::uniform(sample_k);
                    } else {
                        throw InputError("sample: need --schedule, --k, or --rk45");
                    }
                    tr = sample_heun ? heun_schedule(*field, x0, s) : euler_schedule(*field, x0, s);
                }
                ends.push_back(tr.end());
                if (!sample_traj.empty()) trajs.push_back(std::move(tr));
            }
            write_samples_csv(sample_out, ends);
            if (!sample_traj.empty()) write_trajectories_csv(sample_traj, trajs);
            std::cout << "sample: wrote " << ends.size() << " endpoints to " << sample_out << "\n";
        } else if (cmd_eval->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::from_file(eval_config);
            std::cout << "seed=" << cfg.seed << " config_hash=" << config_hash(cfg) << "\n";
            namespace fs = std::filesystem;
            const fs::path dir(eval_dir);
            Checkpoint ck = load_checkpoint(dir / "model.json");
            CostMatrix costs = load_cost_matrix(dir / "costs.txt");
            std::vector<int> k_all = cfg.k_list;
            if (std::find(k_all.begin(), k_all.end(), cfg.finetune_k) == k_all.end()) {
                k_all.push_back(cfg.finetune_k);
            }
            std::map<int, ScheduleResult> schedules;
            for (int k : k_all) {
                schedules.emplace(k, load_schedule(dir / ("schedule_k" + std::to_string(k) + ".json")));
            }
            std::optional<Checkpoint> boss_ck, distill_ck;
            std::unique_ptr<VelocityField> boss_view, distill_view;
            if (fs::exists(dir / "boss_model.json")) {
                boss_ck = load_checkpoint(dir / "boss_model.json");
                boss_view = boss_ck->adapter.has_value()
                                ? std::unique_ptr<VelocityField>(
                                      std::make_unique<AdaptedVelocity>(boss_ck->model, *boss_ck->adapter))
                                : std::unique_ptr<VelocityField>(nullptr);
            }
            if (fs::exists(dir / "distill_model.json")) {
                distill_ck = load_checkpoint(dir / "distill_model.json");
                distill_view = distill_ck->adapter.has_value()
                                   ? std::unique_ptr<VelocityField>(std::make_unique<AdaptedVelocity>(
                                         distill_ck->model, *distill_ck->adapter))
                                   : std::unique_ptr<VelocityField>(nullptr);
            }
            EvalInputs inputs{cfg, ck.model, costs, schedules,
                              boss_ck.has_value() ? (boss_view ? boss_view.get() : &boss_ck->model) : nullptr,
                              distill_ck.has_value() ? (distill_view ? distill_view.get() : &distill_ck->model)
                                                     : nullptr};
            MetricsReport metrics = run_eval(inputs, std::cout);
            metrics.provenance["config_hash"] = config_hash(cfg);
            metrics.provenance["dataset"] = cfg.dataset;
            metrics.provenance["model_hash"] = file_hash(dir / "model.json");
            metrics.provenance["costs_hash"] = file_hash(dir / "costs.txt");
            metrics.save(dir / "metrics.json");
            std::cout << "eval: wrote " << (dir / "metrics.json").string() << "\n";
        } else if (cmd_curv->parsed()) {
            std::cout << "seed=" << curv_seed << " config_hash=" << argv_hash(argc, argv) << "\n";
            Checkpoint ck = load_checkpoint(curv_model);
            CurvatureProfile p = curvature_profile(ck.model, curv_n, AnchorGrid(curv_kmax), curv_seed);
            save_curvature_csv(p, curv_out);
            std::cout << "curvature: wrote " << curv_out << "\n";
        } else if (cmd_tr->parsed()) {
            std::cout << "seed=n/a config_hash=" << argv_hash(argc, argv) << "\n";
            CostMatrix target = load_cost_matrix(tr_costs);
            nlohmann::json j;
            j["rows"] = nlohmann::json::array();
            std::cout << "K\tUniform\tBellman\tTransfer\n";
            for (const std::string& sp : tr_schedules) {
                ScheduleResult src = load_schedule(sp);
                TransferEntry e = transfer_schedule(src, target);
                j["rows"].push_back({{"K", e.k},
                                     {"uniform_cost", e.uniform_cost},
                                     {"bellman_cost", e.bellman_cost},
                                     {"transfer_cost", e.transfer_cost}});
                std::cout << e.k << "\t" << format_double(e.uniform_cost) << "\t"
                          << format_double(e.bellman_cost) << "\t" << format_double(e.transfer_cost) << "\n";
            }
            j["provenance"] = {{"target_costs", tr_costs}, {"target_costs_hash", file_hash(tr_costs)}};
            std::ofstream out(tr_out);
            if (!out) throw ParseError("cannot open transfer output: " + tr_out);
            out << j.dump(2) << "\n";
        } else if (cmd_pipe->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::from_file(pipe_config);
            if (pipe_seed_set) cfg.seed = pipe_seed;
            if (!pipe_out_dir.empty()) cfg.output_dir = pipe_out_dir;
            run_pipeline(cfg, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace boss
