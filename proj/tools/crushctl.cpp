#include "crush/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    namespace pl = crush::pipeline;
    CLI::App app{"Particle crushing pipeline: generate, simulate, fit, learn, explain."};
    app.set_version_flag("--version", pl::kToolVersion);
    app.require_subcommand(1, 1);

    pl::Options opt;
    std::uint64_t seed = 0;
    int limit = 0;
    std::string task;
    app.add_option("--config", opt.config,
                   "preset name (default, desk) or INI path; falls back to $" + std::string(pl::kConfigEnv));
    auto* seed_opt = app.add_option("--seed", seed, "override the seed of the stage");
    app.add_option("--workers", opt.workers, "worker threads for simulate and features (0: all cores)")
        ->check(CLI::NonNegativeNumber);
    auto* limit_opt = app.add_option("--limit", limit, "process only the first N items")->check(CLI::NonNegativeNumber);
    auto* task_opt =
        app.add_option("--task", task, "generalization task")->check(CLI::IsMember({"diameter", "shape", "axis"}));
    app.add_option("--ablation", opt.ablation, "model variant")
        ->check(CLI::IsMember({"baseline", "no-pmd", "no-nef"}));
    app.add_option("--out", opt.out, "work directory")->capture_default_str();

    const std::vector<std::pair<const char*, const char*>> help = {
        {"gen", "particle type table -> specs.csv"},
        {"simulate", "crushing tests -> records.jsonl"},
        {"fit-weibull", "per-type Weibull fits -> weibull.csv, strengths.csv"},
        {"features", "PMD, node/edge and distance features -> features.jsonl, features.csv"},
        {"graphs", "label fragment graphs with sigma0 -> graphs.jsonl"},
        {"split", "task split and standardization -> split_<task>.json"},
        {"train", "train one model -> model_<task>_<ablation>.json, history"},
        {"eval", "MAE/RMSE per split part -> eval_<task>_<ablation>.csv"},
        {"ablate", "train baseline, no-pmd, no-nef -> ablation_<task>.csv"},
        {"attribute", "gradient attribution -> attribution_{pmd,nef}.{csv,svg}"},
        {"stats", "dataset summary and feature histograms"},
        {"plot", "load-displacement and Weibull figures"}};
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        sub->fallthrough();
        sub->callback([&opt, name = std::string(name)] { opt.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pl::kUsage;
    }
    if (*seed_opt) opt.seed = seed;
    if (*limit_opt) opt.limit = limit;
    if (*task_opt) opt.task = task;
    return pl::run(opt, std::cerr);
}
