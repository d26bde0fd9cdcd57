// Run configuration, loaded from a JSON file. Unknown keys are errors.
#pragma once

#include <cstdint>
#include <string>

#include "epimerge/losses.hpp"
#include "epimerge/merging.hpp"

namespace epimerge {

struct DataConfig {
    int n_classes = 7;
    int dim = 8;
    int samples_per_class = 50;
    double covariance_scale = 1.0;
    double known_fraction = 4.0 / 7.0;
    int n_train_domains = 6;
    int n_validation_domains = 3;
    int validation_samples_per_class_per_domain = 20;
    int target_samples_per_class = 50;
    // style-transform magnitude ranges for generated domains
    double rotation_max = 1.0;
    double scale_min = 0.6;
    double scale_max = 1.6;
    double shift_sigma = 2.5;
    double noise_sigma = 1.0;
    // the held-out target is drawn from the same ranges scaled by this factor
    double target_severity = 1.5;
    // geometric augmentation used by the unsupervised contrastive loss;
    // magnitudes mirror the domain transform family so the contrastive terms
    // can teach invariance to it
    double aug_jitter_sigma = 2.5;
    double aug_max_rotation = 1.0;
};

struct AblationFlags {
    bool no_synthetic = false;           // drop pseudo-target domains and L_da
    bool static_split = false;           // identical known/novel split every episode
    bool episode_local_validation = false;  // score on the episode's own data
    bool single_global_update = false;   // force n_g = 1
    bool minmax_weights = false;         // min-max instead of softmax weighting
};

struct TrainingConfig {
    int n_g = 10;
    int n_e = 6;
    int epochs_per_episode = 8;
    int batch_size = 128;
    double lr = 0.01;  // initial SGD rate, cosine-annealed within each episode
    int hidden_dim = 32;
    int embed_dim = 16;
    uint64_t seed = 1;
    bool parallel_episodes = true;
    std::string k_mode = "truth";  // "truth" or "estimate"
    int k_min = 2;
    int k_max = 20;
    DataConfig data;
    LossConfig loss;
    MergeConfig merge;
    AblationFlags ablations;

    void validate() const;
};

TrainingConfig load_config(const std::string& path);
TrainingConfig parse_config_json(const std::string& json_text);
std::string config_to_json(const TrainingConfig& cfg);

}  // namespace epimerge
