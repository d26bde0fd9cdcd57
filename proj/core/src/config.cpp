#include "epimerge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace epimerge {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in section '" +
                                        section + "'");
    }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainingConfig::validate() const {
    if (n_g < 0 || n_e < 1 || epochs_per_episode < 0 || batch_size < 2)
        throw std::invalid_argument("config: invalid training sizes");
    if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
    if (data.n_classes < 2 || data.dim < 2 || data.samples_per_class < 1)
        throw std::invalid_argument("config: invalid data sizes");
    if (data.known_fraction <= 0.0 || data.known_fraction >= 1.0)
        throw std::invalid_argument("config: known_fraction must be in (0,1)");
    if (k_mode != "truth" && k_mode != "estimate")
        throw std::invalid_argument("config: k_mode must be 'truth' or 'estimate'");
    loss.validate();
}

TrainingConfig parse_config_json(const std::string& text) {
    json j = json::parse(text);
    TrainingConfig cfg;

    check_keys(j, "<root>",
               {"seed", "training", "data", "loss", "merge", "ablations", "eval"});
    get(j, "seed", cfg.seed);

    if (j.contains("training")) {
        const json& t = j["training"];
        check_keys(t, "training",
                   {"n_g", "n_e", "epochs_per_episode", "batch_size", "lr", "hidden_dim",
                    "embed_dim", "parallel_episodes"});
        get(t, "n_g", cfg.n_g);
        get(t, "n_e", cfg.n_e);
        get(t, "epochs_per_episode", cfg.epochs_per_episode);
        get(t, "batch_size", cfg.batch_size);
        get(t, "lr", cfg.lr);
        get(t, "hidden_dim", cfg.hidden_dim);
        get(t, "embed_dim", cfg.embed_dim);
        get(t, "parallel_episodes", cfg.parallel_episodes);
    }
    if (j.contains("data")) {
        const json& d = j["data"];
        check_keys(d, "data",
                   {"n_classes", "dim", "samples_per_class", "covariance_scale", "known_fraction",
                    "n_train_domains", "n_validation_domains",
                    "validation_samples_per_class_per_domain", "target_samples_per_class",
                    "rotation_max", "scale_min", "scale_max", "shift_sigma", "noise_sigma",
                    "target_severity", "aug_jitter_sigma", "aug_max_rotation"});
        get(d, "n_classes", cfg.data.n_classes);
        get(d, "dim", cfg.data.dim);
        get(d, "samples_per_class", cfg.data.samples_per_class);
        get(d, "covariance_scale", cfg.data.covariance_scale);
        get(d, "known_fraction", cfg.data.known_fraction);
        get(d, "n_train_domains", cfg.data.n_train_domains);
        get(d, "n_validation_domains", cfg.data.n_validation_domains);
        get(d, "validation_samples_per_class_per_domain",
            cfg.data.validation_samples_per_class_per_domain);
        get(d, "target_samples_per_class", cfg.data.target_samples_per_class);
        get(d, "rotation_max", cfg.data.rotation_max);
        get(d, "scale_min", cfg.data.scale_min);
        get(d, "scale_max", cfg.data.scale_max);
        get(d, "shift_sigma", cfg.data.shift_sigma);
        get(d, "noise_sigma", cfg.data.noise_sigma);
        get(d, "target_severity", cfg.data.target_severity);
        get(d, "aug_jitter_sigma", cfg.data.aug_jitter_sigma);
        get(d, "aug_max_rotation", cfg.data.aug_max_rotation);
    }
    if (j.contains("loss")) {
        const json& l = j["loss"];
        check_keys(l, "loss", {"tau", "lambda_margin", "margin_m", "alpha", "grl_factor"});
        get(l, "tau", cfg.loss.tau);
        get(l, "lambda_margin", cfg.loss.lambda_margin);
        get(l, "margin_m", cfg.loss.margin_m);
        get(l, "alpha", cfg.loss.alpha);
        get(l, "grl_factor", cfg.loss.grl_factor);
    }
    if (j.contains("merge")) {
        const json& m = j["merge"];
        check_keys(m, "merge",
                   {"strategy", "fixed_scale", "trim_fraction", "fisher_samples",
                    "scores_as_percent"});
        if (m.contains("strategy"))
            cfg.merge.strategy = merge_strategy_from_string(m.at("strategy").get<std::string>());
        get(m, "fixed_scale", cfg.merge.fixed_scale);
        get(m, "trim_fraction", cfg.merge.trim_fraction);
        get(m, "fisher_samples", cfg.merge.fisher_samples);
        get(m, "scores_as_percent", cfg.merge.scores_as_percent);
    }
    if (j.contains("ablations")) {
        const json& a = j["ablations"];
        check_keys(a, "ablations",
                   {"no_synthetic", "static_split", "episode_local_validation",
                    "single_global_update", "minmax_weights"});
        get(a, "no_synthetic", cfg.ablations.no_synthetic);
        get(a, "static_split", cfg.ablations.static_split);
        get(a, "episode_local_validation", cfg.ablations.episode_local_validation);
        get(a, "single_global_update", cfg.ablations.single_global_update);
        get(a, "minmax_weights", cfg.ablations.minmax_weights);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        check_keys(e, "eval", {"k_mode", "k_min", "k_max"});
        get(e, "k_mode", cfg.k_mode);
        get(e, "k_min", cfg.k_min);
        get(e, "k_max", cfg.k_max);
    }

    cfg.validate();
    return cfg;
}

TrainingConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const TrainingConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["training"] = {{"n_g", cfg.n_g},
                     {"n_e", cfg.n_e},
                     {"epochs_per_episode", cfg.epochs_per_episode},
                     {"batch_size", cfg.batch_size},
                     {"lr", cfg.lr},
                     {"hidden_dim", cfg.hidden_dim},
                     {"embed_dim", cfg.embed_dim},
                     {"parallel_episodes", cfg.parallel_episodes}};
    j["data"] = {{"n_classes", cfg.data.n_classes},
                 {"dim", cfg.data.dim},
                 {"samples_per_class", cfg.data.samples_per_class},
                 {"covariance_scale", cfg.data.covariance_scale},
                 {"known_fraction", cfg.data.known_fraction},
                 {"n_train_domains", cfg.data.n_train_domains},
                 {"n_validation_domains", cfg.data.n_validation_domains},
                 {"validation_samples_per_class_per_domain",
                  cfg.data.validation_samples_per_class_per_domain},
                 {"target_samples_per_class", cfg.data.target_samples_per_class},
                 {"rotation_max", cfg.data.rotation_max},
                 {"scale_min", cfg.data.scale_min},
                 {"scale_max", cfg.data.scale_max},
                 {"shift_sigma", cfg.data.shift_sigma},
                 {"noise_sigma", cfg.data.noise_sigma},
                 {"target_severity", cfg.data.target_severity},
                 {"aug_jitter_sigma", cfg.data.aug_jitter_sigma},
                 {"aug_max_rotation", cfg.data.aug_max_rotation}};
    j["loss"] = {{"tau", cfg.loss.tau},
                 {"lambda_margin", cfg.loss.lambda_margin},
                 {"margin_m", cfg.loss.margin_m},
                 {"alpha", cfg.loss.alpha},
                 {"grl_factor", cfg.loss.grl_factor}};
    j["merge"] = {{"strategy", to_string(cfg.merge.strategy)},
                  {"fixed_scale", cfg.merge.fixed_scale},
                  {"trim_fraction", cfg.merge.trim_fraction},
                  {"fisher_samples", cfg.merge.fisher_samples},
                  {"scores_as_percent", cfg.merge.scores_as_percent}};
    j["ablations"] = {{"no_synthetic", cfg.ablations.no_synthetic},
                      {"static_split", cfg.ablations.static_split},
                      {"episode_local_validation", cfg.ablations.episode_local_validation},
                      {"single_global_update", cfg.ablations.single_global_update},
                      {"minmax_weights", cfg.ablations.minmax_weights}};
    j["eval"] = {{"k_mode", cfg.k_mode}, {"k_min", cfg.k_min}, {"k_max", cfg.k_max}};
    return j.dump(2);
}

}  // namespace epimerge
