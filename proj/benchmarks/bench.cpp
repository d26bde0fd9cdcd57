#include <benchmark/benchmark.h>

#include "epimerge/eval.hpp"
#include "epimerge/losses.hpp"
#include "epimerge/merging.hpp"
#include "epimerge/orchestrator.hpp"

using namespace epimerge;

namespace {

std::vector<std::vector<double>> make_points(size_t n, int dim, SeededRng& rng) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    for (auto& p : pts)
        for (double& v : p) v = rng.normal();
    return pts;
}

void BM_Embed(benchmark::State& state) {
    SeededRng rng(1);
    EncoderParams enc = EncoderParams::random_init(8, 32, 16, rng);
    auto pts = make_points(128, 8, rng);
    for (auto _ : state) {
        for (const auto& x : pts) benchmark::DoNotOptimize(embed(enc, x));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pts.size()));
}
BENCHMARK(BM_Embed);

void BM_EpisodeObjectiveStep(benchmark::State& state) {
    SeededRng rng(2);
    EncoderParams enc = EncoderParams::random_init(8, 32, 16, rng);
    ClassifierParams clf = ClassifierParams::random_init(16, 4, rng);
    ObjectiveBatch batch;
    for (int i = 0; i < 64; ++i) {
        std::vector<double> x(8), xa(8);
        for (int k = 0; k < 8; ++k) {
            x[k] = rng.normal();
            xa[k] = x[k] + 0.05 * rng.normal();
        }
        batch.source_x.push_back(x);
        batch.source_aug.push_back(xa);
        batch.source_label_index.push_back(i % 4);
    }
    for (int i = 0; i < 64; ++i) {
        std::vector<double> x(8), xa(8);
        for (int k = 0; k < 8; ++k) {
            x[k] = rng.normal();
            xa[k] = x[k] + 0.05 * rng.normal();
        }
        batch.target_x.push_back(x);
        batch.target_aug.push_back(xa);
    }
    LossConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(episode_objective(enc, clf, batch, cfg));
}
BENCHMARK(BM_EpisodeObjectiveStep);

void BM_Kmeans(benchmark::State& state) {
    SeededRng rng(3);
    auto pts = make_points(static_cast<size_t>(state.range(0)), 16, rng);
    for (auto _ : state) {
        SeededRng kr(7);
        benchmark::DoNotOptimize(kmeans(pts, 7, kr));
    }
}
BENCHMARK(BM_Kmeans)->Arg(128)->Arg(512);

void BM_SolveAssignment(benchmark::State& state) {
    SeededRng rng(4);
    const int n = static_cast<int>(state.range(0));
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
        for (double& v : row) v = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost));
}
BENCHMARK(BM_SolveAssignment)->Arg(16)->Arg(64);

void BM_TiesMerge(benchmark::State& state) {
    SeededRng rng(5);
    const size_t dim = 1000;
    std::vector<double> g(dim);
    for (double& v : g) v = rng.normal();
    ParamVector global{g, "bench"};
    std::vector<TaskVector> tvs;
    for (int e = 0; e < 6; ++e) {
        std::vector<double> d(dim);
        for (double& v : d) v = rng.normal();
        TaskVector tv;
        tv.delta = ParamVector{d, "bench"};
        tvs.push_back(tv);
    }
    for (auto _ : state) benchmark::DoNotOptimize(ties_merge(global, tvs, 0.2));
}
BENCHMARK(BM_TiesMerge);

void BM_RunEpisode(benchmark::State& state) {
    TrainingConfig cfg;
    cfg.n_g = 1;
    cfg.n_e = 1;
    cfg.epochs_per_episode = 1;
    cfg.seed = 9;
    DataBundle data = build_data(cfg);
    auto episodes = make_episodes(cfg, data, 1);
    SeededRng init(1);
    ParamVector global =
        EncoderParams::random_init(cfg.data.dim, cfg.hidden_dim, cfg.embed_dim, init)
            .to_param_vector();
    for (auto _ : state)
        benchmark::DoNotOptimize(run_episode(global, episodes[0], data.validation, cfg, 1, 0));
}
BENCHMARK(BM_RunEpisode);

}  // namespace

BENCHMARK_MAIN();
