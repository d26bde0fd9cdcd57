#include "epimerge/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "epimerge/losses.hpp"

namespace epimerge {

namespace {

// seed-derivation tags, one per independent random stream
enum : uint64_t {
    kTagSource = 10,
    kTagDomains = 11,
    kTagValidation = 12,
    kTagTarget = 13,
    kTagInit = 14,
    kTagKEstimate = 15,
    kTagTargetKmeans = 16,
    kTagEpisodeData = 100,
    kTagSplit = 200,
    kTagEpisodeTrain = 1000,
};

DomainSpec make_domain(const std::string& id, DomainRole role, const DataConfig& d,
                       double severity, SeededRng& rng) {
    DomainSpec spec;
    spec.domain_id = id;
    spec.role = role;
    spec.rotation_angle = (2.0 * rng.uniform() - 1.0) * d.rotation_max * severity;
    spec.scale_factors.resize(d.dim);
    for (double& s : spec.scale_factors)
        s = d.scale_min + rng.uniform() * (d.scale_max - d.scale_min);
    spec.shift.resize(d.dim);
    for (double& s : spec.shift) s = d.shift_sigma * severity * rng.normal();
    spec.noise_sigma = d.noise_sigma;
    return spec;
}

void shuffle_indices(std::vector<size_t>& idx, SeededRng& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

DataBundle build_data(const TrainingConfig& cfg) {
    cfg.validate();
    const DataConfig& d = cfg.data;
    DataBundle b;

    SeededRng src_rng(SeededRng::derive(cfg.seed, kTagSource, 0));
    auto [classes, source] =
        generate_source(d.n_classes, d.dim, d.samples_per_class, d.covariance_scale, src_rng);
    b.classes = std::move(classes);
    b.source = std::move(source);

    for (int i = 0; i < d.n_train_domains; ++i) {
        SeededRng rng(SeededRng::derive(cfg.seed, kTagDomains, static_cast<uint64_t>(i)));
        b.train_domains.push_back(
            make_domain("train" + std::to_string(i), DomainRole::episode_train, d, 1.0, rng));
    }
    for (int i = 0; i < d.n_validation_domains; ++i) {
        SeededRng rng(
            SeededRng::derive(cfg.seed, kTagDomains, 1000 + static_cast<uint64_t>(i)));
        b.validation_domains.push_back(
            make_domain("valid" + std::to_string(i), DomainRole::validation, d, 1.0, rng));
    }
    {
        SeededRng rng(SeededRng::derive(cfg.seed, kTagDomains, 2000));
        b.target_domain =
            make_domain("target", DomainRole::target, d, d.target_severity, rng);
    }

    SeededRng valid_rng(SeededRng::derive(cfg.seed, kTagValidation, 0));
    b.validation = build_validation_set(b.classes, b.validation_domains, b.train_domains,
                                        d.validation_samples_per_class_per_domain, valid_rng);

    SeededRng tgt_rng(SeededRng::derive(cfg.seed, kTagTarget, 0));
    b.target_samples =
        generate_pseudo_target(b.classes, b.target_domain, d.target_samples_per_class, tgt_rng);
    return b;
}

std::vector<EpisodeData> make_episodes(const TrainingConfig& cfg, const DataBundle& data, int g) {
    const uint64_t split_seed =
        SeededRng::derive(cfg.seed, kTagSplit,
                          cfg.ablations.static_split ? 0 : static_cast<uint64_t>(g));
    std::vector<EpisodeData> out;
    out.reserve(cfg.n_e);
    for (int e = 0; e < cfg.n_e; ++e) {
        SeededRng rng(SeededRng::derive(cfg.seed, kTagEpisodeData + static_cast<uint64_t>(g),
                                        static_cast<uint64_t>(e)));
        out.push_back(sample_episode(data.source, data.classes, data.train_domains, split_seed, e,
                                     cfg.data.known_fraction, rng, cfg.ablations.static_split));
    }
    return out;
}

std::vector<std::vector<double>> embed_set(const ParamVector& params,
                                           const std::vector<UnlabeledSample>& samples,
                                           const TrainingConfig& cfg) {
    EncoderParams enc = EncoderParams::from_param_vector(params, cfg.data.dim, cfg.hidden_dim,
                                                         cfg.embed_dim);
    std::vector<std::vector<double>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(embed(enc, s.features));
    return out;
}

namespace {

GcdMetrics score_model(const EncoderParams& enc, const std::vector<UnlabeledSample>& samples,
                       const std::set<int>& old_classes, int k, uint64_t kmeans_seed) {
    std::vector<std::vector<double>> embs;
    std::vector<int> labels;
    embs.reserve(samples.size());
    for (const auto& s : samples) {
        embs.push_back(embed(enc, s.features));
        labels.push_back(s.hidden_label);
    }
    ClusteringResult cl = kmeans_restarts(embs, k, kmeans_seed);
    return hungarian_accuracy(cl.assignments, labels, old_classes);
}

ParamVector estimate_fisher_diagonal(const EncoderParams& enc, const ClassifierParams& clf,
                                     const std::vector<std::vector<double>>& source_x,
                                     const std::vector<int>& source_label_index,
                                     const std::vector<std::vector<double>>& target_x,
                                     const TrainingConfig& cfg, SeededRng& rng) {
    const int n_samples = std::max(1, cfg.merge.fisher_samples);
    EncoderGrads acc(enc);
    int used = 0;
    for (int s = 0; s < n_samples; ++s) {
        if (source_x.size() < 2) break;
        ObjectiveBatch batch;
        for (int i = 0; i < 2; ++i) {
            const size_t idx = rng.uniform_index(source_x.size());
            batch.source_x.push_back(source_x[idx]);
            batch.source_label_index.push_back(source_label_index[idx]);
            batch.source_aug.push_back(augment(source_x[idx], rng, cfg.data.aug_jitter_sigma,
                                               cfg.data.aug_max_rotation));
        }
        for (int i = 0; i < 2 && !target_x.empty(); ++i) {
            const size_t idx = rng.uniform_index(target_x.size());
            batch.target_x.push_back(target_x[idx]);
            batch.target_aug.push_back(augment(target_x[idx], rng, cfg.data.aug_jitter_sigma,
                                               cfg.data.aug_max_rotation));
        }
        ObjectiveResult r = episode_objective(enc, clf, batch, cfg.loss);
        for (size_t i = 0; i < acc.w1.size(); ++i) acc.w1[i] += r.enc_grads.w1[i] * r.enc_grads.w1[i];
        for (size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += r.enc_grads.b1[i] * r.enc_grads.b1[i];
        for (size_t i = 0; i < acc.w2.size(); ++i) acc.w2[i] += r.enc_grads.w2[i] * r.enc_grads.w2[i];
        for (size_t i = 0; i < acc.b2.size(); ++i) acc.b2[i] += r.enc_grads.b2[i] * r.enc_grads.b2[i];
        ++used;
    }
    if (used > 0) acc.scale(1.0 / used);
    return grads_to_param_vector(acc, enc);
}

}  // namespace

EpisodeResult run_episode(const ParamVector& global_params, const EpisodeData& episode,
                          const ValidationSet& validation, const TrainingConfig& cfg, int g,
                          int e) {
    SeededRng rng(SeededRng::derive(cfg.seed, kTagEpisodeTrain + static_cast<uint64_t>(g),
                                    static_cast<uint64_t>(e)));
    EncoderParams enc = EncoderParams::from_param_vector(global_params, cfg.data.dim,
                                                         cfg.hidden_dim, cfg.embed_dim);

    // episode-specific classifier head, re-initialized every episode
    std::vector<int> known(episode.known_classes.begin(), episode.known_classes.end());
    const int n_known = static_cast<int>(known.size());
    ClassifierParams clf = ClassifierParams::random_init(cfg.embed_dim, n_known, rng);

    std::vector<std::vector<double>> source_x;
    std::vector<int> source_label_index;
    for (const auto& s : episode.labeled_source) {
        source_x.push_back(s.features);
        const auto it = std::find(known.begin(), known.end(), s.label);
        source_label_index.push_back(static_cast<int>(it - known.begin()));
    }
    std::vector<std::vector<double>> target_x;
    if (!cfg.ablations.no_synthetic)
        for (const auto& s : episode.unlabeled_pseudo_target) target_x.push_back(s.features);

    EpisodeResult res;
    res.episode_index = e;
    res.global_index = g;

    const size_t ns = source_x.size();
    const size_t nt = target_x.size();
    const size_t s_half = std::max<size_t>(2, static_cast<size_t>(cfg.batch_size) / 2);
    const size_t steps_per_epoch = std::max<size_t>(1, (ns + s_half - 1) / s_half);
    const size_t total_steps =
        static_cast<size_t>(cfg.epochs_per_episode) * steps_per_epoch;

    size_t t = 0;
    bool first_recorded = false;
    try {
        for (int epoch = 0; epoch < cfg.epochs_per_episode && !res.aborted; ++epoch) {
            // epoch-start prototypes over the full labeled set; fallback for
            // classes absent from a batch
            PrototypeSet fallback;
            {
                std::vector<std::vector<double>> embs;
                embs.reserve(ns);
                for (const auto& x : source_x) embs.push_back(embed(enc, x));
                fallback = compute_prototypes(embs, source_label_index);
            }

            std::vector<size_t> perm_s(ns), perm_t(nt);
            for (size_t i = 0; i < ns; ++i) perm_s[i] = i;
            for (size_t i = 0; i < nt; ++i) perm_t[i] = i;
            shuffle_indices(perm_s, rng);
            shuffle_indices(perm_t, rng);

            for (size_t step = 0; step < steps_per_epoch && !res.aborted; ++step) {
                ObjectiveBatch batch;
                const size_t lo = step * s_half;
                const size_t hi = std::min(ns, lo + s_half);
                for (size_t i = lo; i < hi; ++i) {
                    const size_t idx = perm_s[i];
                    batch.source_x.push_back(source_x[idx]);
                    batch.source_label_index.push_back(source_label_index[idx]);
                    batch.source_aug.push_back(augment(source_x[idx], rng,
                                                       cfg.data.aug_jitter_sigma,
                                                       cfg.data.aug_max_rotation));
                }
                for (size_t i = 0; i < s_half && nt > 0; ++i) {
                    const size_t idx = perm_t[(lo + i) % nt];
                    batch.target_x.push_back(target_x[idx]);
                    batch.target_aug.push_back(augment(target_x[idx], rng,
                                                       cfg.data.aug_jitter_sigma,
                                                       cfg.data.aug_max_rotation));
                }

                // per-batch prototypes, epoch prototypes standing in for
                // classes absent from the batch
                PrototypeSet protos;
                {
                    std::vector<std::vector<double>> bz;
                    bz.reserve(batch.source_x.size());
                    for (const auto& x : batch.source_x) bz.push_back(embed(enc, x));
                    protos = compute_prototypes(bz, batch.source_label_index, &fallback);
                }

                ObjectiveResult r = episode_objective(enc, clf, batch, cfg.loss, &protos);
                if (!std::isfinite(r.terms.total)) {
                    res.aborted = true;
                    break;
                }
                if (!first_recorded) {
                    res.initial_loss = r.terms.total;
                    first_recorded = true;
                }
                res.final_loss = r.terms.total;

                const double lr_t =
                    cfg.lr * 0.5 *
                    (1.0 + std::cos(M_PI * static_cast<double>(t) /
                                    static_cast<double>(std::max<size_t>(1, total_steps))));
                apply_sgd(enc, r.enc_grads, lr_t);
                apply_sgd(clf, r.clf_grads, lr_t);
                ++t;
            }
        }
    } catch (const std::domain_error&) {
        res.aborted = true;  // degenerate embedding during training
    }

    res.local_params = enc.to_param_vector();
    if (res.aborted) return res;

    res.task_vec = task_vector(global_params, res.local_params, e, g);

    // validation scoring under the fine-tuned local model
    const std::vector<UnlabeledSample>* valid_samples = &validation.samples;
    std::vector<UnlabeledSample> local_valid;
    if (cfg.ablations.episode_local_validation) {
        for (const auto& s : episode.labeled_source)
            local_valid.push_back({s.features, s.label, s.domain_id});
        for (const auto& s : episode.unlabeled_pseudo_target) local_valid.push_back(s);
        valid_samples = &local_valid;
    }
    const uint64_t kmeans_seed = SeededRng::derive(
        SeededRng::derive(cfg.seed, kTagEpisodeTrain + static_cast<uint64_t>(g),
                          static_cast<uint64_t>(e)),
        2, 0);
    try {
        res.valid_metrics = score_model(enc, *valid_samples, episode.known_classes,
                                        cfg.data.n_classes, kmeans_seed);
    } catch (const std::domain_error&) {
        res.aborted = true;
        return res;
    }

    if (cfg.merge.strategy == MergeStrategy::fisher) {
        SeededRng frng(SeededRng::derive(
            SeededRng::derive(cfg.seed, kTagEpisodeTrain + static_cast<uint64_t>(g),
                              static_cast<uint64_t>(e)),
            3, 0));
        res.fisher_diagonal = estimate_fisher_diagonal(enc, clf, source_x, source_label_index,
                                                       target_x, cfg, frng);
    }
    return res;
}

GlobalModelState run_global_update(GlobalModelState state,
                                   const std::vector<EpisodeData>& episodes,
                                   const ValidationSet& validation, const TrainingConfig& cfg) {
    if (static_cast<int>(episodes.size()) != cfg.n_e)
        throw std::invalid_argument("run_global_update: expected n_e episodes");

    const int g = state.global_index + 1;
    std::vector<EpisodeResult> results(episodes.size());
    if (cfg.parallel_episodes && episodes.size() > 1) {
        std::vector<std::thread> threads;
        threads.reserve(episodes.size());
        for (size_t e = 0; e < episodes.size(); ++e) {
            threads.emplace_back([&, e] {
                results[e] = run_episode(state.params, episodes[e], validation, cfg, g,
                                         static_cast<int>(e));
            });
        }
        for (auto& th : threads) th.join();
    } else {
        for (size_t e = 0; e < episodes.size(); ++e)
            results[e] = run_episode(state.params, episodes[e], validation, cfg, g,
                                     static_cast<int>(e));
    }

    std::vector<const EpisodeResult*> survivors;
    for (const auto& r : results)
        if (!r.aborted) survivors.push_back(&r);
    if (survivors.empty())
        throw std::runtime_error("run_global_update: all episodes aborted at g=" +
                                 std::to_string(g));

    std::vector<double> scores;
    std::vector<TaskVector> tvs;
    std::vector<ParamVector> locals, fishers;
    for (const auto* r : survivors) {
        double s = r->valid_metrics.all;
        if (cfg.merge.scores_as_percent) s *= 100.0;
        scores.push_back(s);
        tvs.push_back(r->task_vec);
        locals.push_back(r->local_params);
        fishers.push_back(r->fisher_diagonal);
    }

    HistoryRow row;
    row.global_index = g;
    row.n_aborted = static_cast<int>(results.size() - survivors.size());
    for (const auto* r : survivors) {
        row.all_scores.push_back(r->valid_metrics.all);
        row.episode_metrics.push_back(r->valid_metrics);
        row.episode_ids.push_back(r->episode_index);
    }

    ParamVector merged;
    MergeStrategy strat = cfg.merge.strategy;
    if (strat == MergeStrategy::weighted_ta && cfg.ablations.minmax_weights)
        strat = MergeStrategy::minmax_ta;
    switch (strat) {
        case MergeStrategy::weighted_ta: {
            if (survivors.size() == 1) {
                // weight-1 composition is exactly theta_local; adopting it
                // directly keeps the identity bitwise
                row.weights = {1.0};
                merged = locals[0];
                break;
            }
            MergeWeights w = softmax_weights(scores);
            row.weights = w.weights;
            merged = apply_update(state.params, tvs, w);
            break;
        }
        case MergeStrategy::minmax_ta: {
            if (survivors.size() == 1) {
                row.weights = {1.0};
                merged = locals[0];
                break;
            }
            MergeWeights w = minmax_weights(scores);
            row.weights = w.weights;
            merged = apply_update(state.params, tvs, w);
            break;
        }
        case MergeStrategy::fixed_ta: {
            const double scale = cfg.merge.fixed_scale != 0.0
                                     ? cfg.merge.fixed_scale
                                     : 1.0 / static_cast<double>(survivors.size());
            row.weights.assign(survivors.size(), scale);
            merged = fixed_ta_merge(state.params, tvs, scale);
            break;
        }
        case MergeStrategy::ties:
            merged = ties_merge(state.params, tvs, cfg.merge.trim_fraction);
            break;
        case MergeStrategy::fisher:
            merged = fisher_merge(state.params, locals, fishers);
            break;
    }

    row.sign_conflict = tvs.size() >= 2 ? sign_conflict_fraction(tvs) : 0.0;
    row.weight_diff_l1 = (merged - state.params).l1_norm();

    state.params = std::move(merged);
    state.global_index = g;
    state.history.push_back(std::move(row));
    return state;
}

GlobalModelState train(const TrainingConfig& cfg, const DataBundle& data,
                       const CheckpointSink& sink) {
    cfg.validate();
    GlobalModelState state;
    SeededRng init_rng(SeededRng::derive(cfg.seed, kTagInit, 0));
    state.params = EncoderParams::random_init(cfg.data.dim, cfg.hidden_dim, cfg.embed_dim,
                                              init_rng)
                       .to_param_vector();

    const int n_g = cfg.ablations.single_global_update ? 1 : cfg.n_g;
    for (int g = 1; g <= n_g; ++g) {
        const std::vector<EpisodeData> episodes = make_episodes(cfg, data, g);
        state = run_global_update(std::move(state), episodes, data.validation, cfg);
        if (sink) sink(state);
    }
    return state;
}

TargetEvaluation evaluate_on_target(const GlobalModelState& state,
                                    const std::vector<UnlabeledSample>& target,
                                    const std::set<int>& old_class_set, const DataBundle& data,
                                    const TrainingConfig& cfg) {
    TargetEvaluation out;
    const std::vector<std::vector<double>> embs = embed_set(state.params, target, cfg);
    std::vector<int> labels;
    for (const auto& s : target) labels.push_back(s.hidden_label);

    int k = cfg.data.n_classes;
    if (cfg.k_mode == "estimate") {
        std::vector<UnlabeledSample> src_unl;
        std::vector<int> src_labels;
        for (const auto& s : data.source) {
            src_unl.push_back({s.features, s.label, s.domain_id});
            src_labels.push_back(s.label);
        }
        const auto src_embs = embed_set(state.params, src_unl, cfg);
        SeededRng krng(SeededRng::derive(cfg.seed, kTagKEstimate, 0));
        KEstimate est = estimate_k(embs, src_embs, src_labels, cfg.k_min, cfg.k_max, krng);
        k = est.k_hat;
        out.k_estimate = std::move(est);
    }
    out.k_used = k;

    ClusteringResult cl =
        kmeans_restarts(embs, k, SeededRng::derive(cfg.seed, kTagTargetKmeans, 0));
    out.metrics = hungarian_accuracy(cl.assignments, labels, old_class_set);
    return out;
}

std::vector<SweepRow> sweep_episodes(const TrainingConfig& cfg,
                                     const std::vector<int>& n_e_values) {
    std::vector<SweepRow> rows;
    for (int v : n_e_values) {
        if (v < 1) throw std::invalid_argument("sweep_episodes: n_e must be >= 1");
        TrainingConfig c = cfg;
        c.n_e = v;
        const DataBundle data = build_data(c);
        const GlobalModelState st = train(c, data);
        std::set<int> old_classes;
        for (const auto& cs : data.classes) old_classes.insert(cs.class_id);
        rows.push_back({v, evaluate_on_target(st, data.target_samples, old_classes, data, c).metrics});
    }
    return rows;
}

std::string metrics_csv(const std::string& run_id, const GlobalModelState& state,
                        const std::optional<TargetEvaluation>& target, int k_valid) {
    std::string out =
        "run_id,global_update,episode,kind,all,old,new,k_used,strategy,weights,"
        "sign_conflict,weight_diff_l1,n_aborted\n";
    for (const auto& h : state.history) {
        for (size_t i = 0; i < h.episode_ids.size(); ++i) {
            const GcdMetrics& m = h.episode_metrics[i];
            out += run_id + ',' + std::to_string(h.global_index) + ',' +
                   std::to_string(h.episode_ids[i]) + ",valid," + fmt_double(m.all) + ',' +
                   fmt_double(m.old_acc) + ',' + fmt_double(m.new_acc) + ',' +
                   std::to_string(k_valid) + ",," +
                   (i < h.weights.size() ? fmt_double(h.weights[i]) : std::string()) + ",,,\n";
        }
        std::string wjoin;
        for (size_t i = 0; i < h.weights.size(); ++i) {
            if (i) wjoin += ';';
            wjoin += fmt_double(h.weights[i]);
        }
        out += run_id + ',' + std::to_string(h.global_index) + ",-1,merge,,,,,," + wjoin + ',' +
               fmt_double(h.sign_conflict) + ',' + fmt_double(h.weight_diff_l1) + ',' +
               std::to_string(h.n_aborted) + '\n';
    }
    if (target) {
        out += run_id + ',' + std::to_string(state.global_index) + ",-1,target," +
               fmt_double(target->metrics.all) + ',' + fmt_double(target->metrics.old_acc) + ',' +
               fmt_double(target->metrics.new_acc) + ',' + std::to_string(target->k_used) +
               ",,,,,\n";
    }
    return out;
}

void write_checkpoint(const std::string& path, const ParamVector& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_checkpoint: cannot open " + path);
    const char magic[4] = {'E', 'P', 'M', 'K'};
    out.write(magic, 4);
    const uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint32_t id_len = static_cast<uint32_t>(v.layout_id.size());
    out.write(reinterpret_cast<const char*>(&id_len), sizeof(id_len));
    out.write(v.layout_id.data(), id_len);
    const uint64_t count = v.values.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(v.values.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
}

ParamVector read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EPMK", 4) != 0)
        throw std::runtime_error("read_checkpoint: bad magic");
    uint32_t version = 0, id_len = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&id_len), sizeof(id_len));
    if (version != 1) throw std::runtime_error("read_checkpoint: unsupported version");
    ParamVector v;
    v.layout_id.resize(id_len);
    in.read(v.layout_id.data(), id_len);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    v.values.resize(count);
    in.read(reinterpret_cast<char*>(v.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("read_checkpoint: truncated file");
    return v;
}

}  // namespace epimerge
