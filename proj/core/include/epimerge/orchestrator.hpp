// End-to-end episodic training loop: n_g global updates of n_e fine-tuning
// episodes, validation-weighted task-vector merging, convergence tracking,
// and final target-domain evaluation.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epimerge/config.hpp"
#include "epimerge/encoder.hpp"
#include "epimerge/eval.hpp"
#include "epimerge/merging.hpp"
#include "epimerge/synth.hpp"

namespace epimerge {

struct DataBundle {
    std::vector<ClassSpec> classes;
    std::vector<LabeledSample> source;
    std::vector<DomainSpec> train_domains;
    std::vector<DomainSpec> validation_domains;
    DomainSpec target_domain;
    ValidationSet validation;
    std::vector<UnlabeledSample> target_samples;
};

DataBundle build_data(const TrainingConfig& cfg);

struct HistoryRow {
    int global_index = 0;
    double weight_diff_l1 = 0.0;  // L1 norm of the applied global step
    double sign_conflict = 0.0;
    std::vector<double> weights;       // per surviving episode (empty for ties/fisher)
    std::vector<double> all_scores;    // validation All per surviving episode
    std::vector<GcdMetrics> episode_metrics;
    std::vector<int> episode_ids;
    int n_aborted = 0;
};

struct GlobalModelState {
    ParamVector params;
    int global_index = 0;
    std::vector<HistoryRow> history;
};

struct EpisodeResult {
    ParamVector local_params;
    TaskVector task_vec;
    GcdMetrics valid_metrics;
    int episode_index = 0;
    int global_index = 0;
    bool aborted = false;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    ParamVector fisher_diagonal;  // populated only under the fisher strategy
};

// One episode: copy the global model, fine-tune under the CD-GCD objective
// with SGD + per-episode cosine annealing, then score on the validation set.
EpisodeResult run_episode(const ParamVector& global_params, const EpisodeData& episode,
                          const ValidationSet& validation, const TrainingConfig& cfg, int g,
                          int e);

std::vector<EpisodeData> make_episodes(const TrainingConfig& cfg, const DataBundle& data, int g);

// All episodes start from the same global parameters; merges per cfg.merge.
GlobalModelState run_global_update(GlobalModelState state,
                                   const std::vector<EpisodeData>& episodes,
                                   const ValidationSet& validation, const TrainingConfig& cfg);

// Optional per-update checkpoint sink (called after each global update).
using CheckpointSink = std::function<void(const GlobalModelState&)>;

GlobalModelState train(const TrainingConfig& cfg, const DataBundle& data,
                       const CheckpointSink& sink = nullptr);

struct TargetEvaluation {
    GcdMetrics metrics;
    int k_used = 0;
    std::optional<KEstimate> k_estimate;
};

TargetEvaluation evaluate_on_target(const GlobalModelState& state,
                                    const std::vector<UnlabeledSample>& target,
                                    const std::set<int>& old_class_set, const DataBundle& data,
                                    const TrainingConfig& cfg);

// Embeddings of a sample set under a flat parameter vector.
std::vector<std::vector<double>> embed_set(const ParamVector& params,
                                           const std::vector<UnlabeledSample>& samples,
                                           const TrainingConfig& cfg);

struct SweepRow {
    int n_e = 0;
    GcdMetrics target_metrics;
};

std::vector<SweepRow> sweep_episodes(const TrainingConfig& cfg,
                                     const std::vector<int>& n_e_values);

// metrics.csv: byte-stable given (seed, config, data).
std::string metrics_csv(const std::string& run_id, const GlobalModelState& state,
                        const std::optional<TargetEvaluation>& target, int k_valid);

void write_checkpoint(const std::string& path, const ParamVector& v);
ParamVector read_checkpoint(const std::string& path);

}  // namespace epimerge
