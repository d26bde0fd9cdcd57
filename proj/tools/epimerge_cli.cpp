// Command-line driver: train / evaluate / sweep-episodes / compare-merges /
// gen-data over the synthetic cross-domain discovery benchmark.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "epimerge/losses.hpp"
#include "epimerge/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace epimerge;

namespace {

TrainingConfig load_or_default(const std::string& config_path, std::optional<uint64_t> seed) {
    TrainingConfig cfg = config_path.empty() ? TrainingConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
}

std::set<int> all_class_ids(const DataBundle& data) {
    std::set<int> ids;
    for (const auto& c : data.classes) ids.insert(c.class_id);
    return ids;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
}

void write_run_manifest(const fs::path& out_dir, const TrainingConfig& cfg, double wall_seconds) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config_to_json(cfg));
    j["wall_clock_seconds"] = wall_seconds;
    j["version"] = "0.1.0";
    write_text(out_dir / "run.json", j.dump(2));
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& out_dir_s) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainingConfig cfg = load_or_default(config_path, seed);
    const fs::path out_dir(out_dir_s);
    fs::create_directories(out_dir);

    DataBundle data = build_data(cfg);
    GlobalModelState state = train(cfg, data, [&](const GlobalModelState& s) {
        write_checkpoint((out_dir / ("ckpt_g" + std::to_string(s.global_index) + ".bin")).string(),
                         s.params);
    });
    TargetEvaluation tgt = evaluate_on_target(state, data.target_samples, all_class_ids(data),
                                              data, cfg);

    const std::string run_id = "seed" + std::to_string(cfg.seed);
    write_text(out_dir / "metrics.csv", metrics_csv(run_id, state, tgt, cfg.data.n_classes));
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_manifest(out_dir, cfg, wall);

    std::cout << "final target All=" << tgt.metrics.all << " Old=" << tgt.metrics.old_acc
              << " New=" << tgt.metrics.new_acc << " (k=" << tgt.k_used << ")\n"
              << "outputs in " << out_dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, std::optional<uint64_t> seed,
                 const std::string& checkpoint, const std::string& out_dir_s) {
    TrainingConfig cfg = load_or_default(config_path, seed);
    DataBundle data = build_data(cfg);

    GlobalModelState state;
    state.params = read_checkpoint(checkpoint);
    TargetEvaluation tgt = evaluate_on_target(state, data.target_samples, all_class_ids(data),
                                              data, cfg);
    std::cout << "target All=" << tgt.metrics.all << " Old=" << tgt.metrics.old_acc
              << " New=" << tgt.metrics.new_acc << " (k=" << tgt.k_used << ")\n";
    if (!out_dir_s.empty()) {
        fs::create_directories(out_dir_s);
        write_text(fs::path(out_dir_s) / "metrics.csv",
                   metrics_csv("eval", state, tgt, cfg.data.n_classes));
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& out_dir_s, const std::vector<int>& values) {
    TrainingConfig cfg = load_or_default(config_path, seed);
    const auto rows = sweep_episodes(cfg, values);
    std::ostringstream csv;
    csv << "n_e,all,old,new\n";
    std::cout << "n_e  All      Old      New\n";
    for (const auto& r : rows) {
        std::cout << r.n_e << "    " << r.target_metrics.all << "  " << r.target_metrics.old_acc
                  << "  " << r.target_metrics.new_acc << "\n";
        csv << r.n_e << ',' << r.target_metrics.all << ',' << r.target_metrics.old_acc << ','
            << r.target_metrics.new_acc << '\n';
    }
    if (!out_dir_s.empty()) {
        fs::create_directories(out_dir_s);
        write_text(fs::path(out_dir_s) / "sweep.csv", csv.str());
    }
    return 0;
}

int cmd_compare_merges(const std::string& config_path, std::optional<uint64_t> seed,
                       const std::string& out_dir_s) {
    TrainingConfig base = load_or_default(config_path, seed);
    const std::vector<MergeStrategy> strategies = {
        MergeStrategy::weighted_ta, MergeStrategy::fixed_ta, MergeStrategy::ties,
        MergeStrategy::fisher, MergeStrategy::minmax_ta};
    std::ostringstream csv;
    csv << "strategy,all,old,new,mean_sign_conflict\n";
    std::cout << "strategy      All      sign-conflict\n";
    for (MergeStrategy s : strategies) {
        TrainingConfig cfg = base;
        cfg.merge.strategy = s;
        DataBundle data = build_data(cfg);
        GlobalModelState state = train(cfg, data);
        TargetEvaluation tgt = evaluate_on_target(state, data.target_samples, all_class_ids(data),
                                                  data, cfg);
        double conflict = 0.0;
        for (const auto& h : state.history) conflict += h.sign_conflict;
        if (!state.history.empty()) conflict /= static_cast<double>(state.history.size());
        std::cout << to_string(s) << "  " << tgt.metrics.all << "  " << conflict << "\n";
        csv << to_string(s) << ',' << tgt.metrics.all << ',' << tgt.metrics.old_acc << ','
            << tgt.metrics.new_acc << ',' << conflict << '\n';
    }
    if (!out_dir_s.empty()) {
        fs::create_directories(out_dir_s);
        write_text(fs::path(out_dir_s) / "compare_merges.csv", csv.str());
    }
    return 0;
}

int cmd_gen_data(const std::string& config_path, std::optional<uint64_t> seed,
                 const std::string& out_dir_s) {
    TrainingConfig cfg = load_or_default(config_path, seed);
    DataBundle data = build_data(cfg);
    const fs::path out_dir(out_dir_s);
    fs::create_directories(out_dir);

    std::vector<UnlabeledSample> source;
    for (const auto& s : data.source) source.push_back({s.features, s.label, s.domain_id});
    export_samples_csv((out_dir / "source.csv").string(), source);
    export_samples_csv((out_dir / "validation.csv").string(), data.validation.samples);
    export_samples_csv((out_dir / "target.csv").string(), data.target_samples);
    for (size_t i = 0; i < data.train_domains.size(); ++i) {
        SeededRng rng(SeededRng::derive(cfg.seed, 0xd0, i));
        auto samples = generate_pseudo_target(data.classes, data.train_domains[i],
                                              cfg.data.samples_per_class, rng);
        export_samples_csv((out_dir / (data.train_domains[i].domain_id + ".csv")).string(),
                           samples);
    }
    std::cout << "datasets written to " << out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"episodic task-vector training on synthetic cross-domain discovery tasks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::optional<uint64_t> seed;
    app.add_option("--config", config_path, "path to a JSON run config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory");

    auto* train_cmd = app.add_subcommand("train", "run the full episodic training loop");
    std::string checkpoint;
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the target domain");
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    std::vector<int> sweep_values = {1, 2, 4, 6, 8, 12};
    auto* sweep_cmd = app.add_subcommand("sweep-episodes", "train once per episode count");
    sweep_cmd->add_option("--values", sweep_values, "episode counts to sweep");
    auto* cmp_cmd =
        app.add_subcommand("compare-merges", "run every merge strategy on shared seeds");
    auto* gen_cmd = app.add_subcommand("gen-data", "export the synthetic datasets as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, seed, out_dir);
        if (eval_cmd->parsed()) return cmd_evaluate(config_path, seed, checkpoint, out_dir);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, seed, out_dir, sweep_values);
        if (cmp_cmd->parsed()) return cmd_compare_merges(config_path, seed, out_dir);
        if (gen_cmd->parsed()) return cmd_gen_data(config_path, seed, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
