#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "epimerge/merging.hpp"

using namespace epimerge;

namespace {

ParamVector pv(std::vector<double> v) { return ParamVector{std::move(v), "t"}; }

TaskVector tv(std::vector<double> v, int e = 0) {
    TaskVector t;
    t.delta = pv(std::move(v));
    t.episode_index = e;
    return t;
}

}  // namespace

TEST_CASE("task_vector sign convention") {
    ParamVector global = pv({1.0, 2.0, 3.0});
    ParamVector local = pv({0.5, 2.5, 3.0});
    TaskVector t = task_vector(global, local, 2, 1);
    CHECK(t.delta.values == std::vector<double>{0.5, -0.5, 0.0});
    CHECK(t.episode_index == 2);

    // applying the single task vector with weight 1 recovers the local model
    ParamVector back = apply_update(global, {t}, {{1.0}, WeightScheme::fixed});
    CHECK(back.values == local.values);

    CHECK_THROWS_AS(task_vector(global, pv({1.0}), 0, 0), std::invalid_argument);
}

TEST_CASE("softmax and minmax weights") {
    MergeWeights w = softmax_weights({0.7, 0.3});
    CHECK(w.weights[0] == doctest::Approx(0.598688).epsilon(1e-6));
    CHECK(w.weights[1] == doctest::Approx(0.401312).epsilon(1e-6));

    SeededRng rng(3);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> scores(2 + rng.uniform_index(8));
        for (double& s : scores) s = rng.uniform();
        double sum = 0.0;
        for (double v : softmax_weights(scores).weights) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        sum = 0.0;
        for (double v : minmax_weights(scores).weights) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    MergeWeights mm = minmax_weights({0.2, 0.5, 0.8});
    CHECK(mm.weights[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(mm.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mm.weights[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    MergeWeights flat = minmax_weights({0.4, 0.4, 0.4, 0.4});
    for (double v : flat.weights) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(softmax_weights({}), std::invalid_argument);
    CHECK_THROWS_AS(minmax_weights({0.5}), std::invalid_argument);
}

TEST_CASE("apply_update") {
    ParamVector global = pv({1.0, 1.0});
    std::vector<TaskVector> tvs = {tv({1.0, -2.0}), tv({3.0, 4.0})};
    ParamVector out = apply_update(global, tvs, {{0.25, 0.75}, WeightScheme::softmax});
    // 1 - (0.25*1 + 0.75*3) = -1.5; 1 - (0.25*-2 + 0.75*4) = -1.5
    CHECK(out.values[0] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(out.values[1] == doctest::Approx(-1.5).epsilon(1e-12));

    // zero task vectors leave the global model untouched
    std::vector<TaskVector> zeros = {tv({0.0, 0.0}), tv({0.0, 0.0})};
    CHECK(apply_update(global, zeros, {{0.5, 0.5}, WeightScheme::softmax}).values ==
          global.values);

    CHECK_THROWS_AS(apply_update(global, tvs, {{1.0}, WeightScheme::softmax}),
                    std::invalid_argument);
}

TEST_CASE("fixed_ta equals weighted_ta with uniform weights") {
    SeededRng rng(7);
    const size_t dim = 20;
    std::vector<double> g(dim);
    for (double& v : g) v = rng.normal();
    ParamVector global = pv(g);
    std::vector<TaskVector> tvs;
    for (int e = 0; e < 4; ++e) {
        std::vector<double> d(dim);
        for (double& v : d) v = rng.normal();
        tvs.push_back(tv(d, e));
    }
    ParamVector fixed = fixed_ta_merge(global, tvs, 0.25);
    ParamVector weighted =
        apply_update(global, tvs, {{0.25, 0.25, 0.25, 0.25}, WeightScheme::fixed});
    for (size_t i = 0; i < dim; ++i)
        CHECK(fixed.values[i] == doctest::Approx(weighted.values[i]).epsilon(1e-12));
}

TEST_CASE("ties_merge hand trace") {
    // dim 2, trim 0.5 -> each task vector keeps its single largest coordinate
    ParamVector global = pv({0.0, 0.0});
    std::vector<TaskVector> tvs = {
        tv({3.0, 0.1}),    // -> [3, 0]
        tv({2.0, -0.1}),   // -> [2, 0]
        tv({0.1, 5.0}),    // -> [0, 5]
        tv({-0.1, -5.0}),  // -> [0, -5]
    };
    ParamVector out = ties_merge(global, tvs, 0.5);
    // coord 0: elected sign +, survivors {3, 2}, mean 2.5; coord 1: sign tie, dropped
    CHECK(out.values[0] == doctest::Approx(-2.5).epsilon(1e-12));
    CHECK(out.values[1] == doctest::Approx(0.0).epsilon(1e-12));

    // identical task vectors merge to the common vector on every coordinate
    std::vector<TaskVector> same = {tv({1.0, -2.0}), tv({1.0, -2.0})};
    ParamVector s = ties_merge(global, same, 0.99);
    CHECK(s.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s.values[1] == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(ties_merge(global, tvs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ties_merge(global, tvs, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ties_merge(global, {}, 0.2), std::invalid_argument);
}

TEST_CASE("fisher_merge hand trace and fallback") {
    ParamVector global = pv({0.0, 0.0});
    std::vector<ParamVector> locals = {pv({4.0, 10.0}), pv({6.0, 4.0})};
    std::vector<ParamVector> fishers = {pv({1.0, 0.0}), pv({1.0, 0.0})};
    ParamVector out = fisher_merge(global, locals, fishers);
    CHECK(out.values[0] == doctest::Approx(5.0).epsilon(1e-12));  // Fisher-weighted
    CHECK(out.values[1] == doctest::Approx(7.0).epsilon(1e-12));  // zero Fisher -> plain mean

    // asymmetric Fisher pulls toward the higher-curvature model
    std::vector<ParamVector> skew = {pv({3.0, 0.0}), pv({0.25, 0.0})};
    ParamVector pulled = fisher_merge(global, locals, skew);
    CHECK(pulled.values[0] == doctest::Approx((3.0 * 4.0 + 0.25 * 6.0) / 3.25).epsilon(1e-12));

    CHECK_THROWS_AS(fisher_merge(global, locals, {pv({1.0, 1.0})}), std::invalid_argument);
    CHECK_THROWS_AS(fisher_merge(global, locals, {pv({1.0, 1.0}), pv({-1.0, 1.0})}),
                    std::invalid_argument);
}

TEST_CASE("sign_conflict_fraction") {
    CHECK(sign_conflict_fraction({tv({1.0, -1.0}), tv({1.0, 1.0})}) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // all-zero coordinates excluded from the denominator
    CHECK(sign_conflict_fraction({tv({1.0, 0.0, -2.0}), tv({2.0, 0.0, 1.0})}) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // disjoint supports never conflict
    CHECK(sign_conflict_fraction({tv({1.0, 0.0}), tv({0.0, 1.0})}) == 0.0);

    // fully opposed vectors conflict everywhere
    CHECK(sign_conflict_fraction({tv({1.0, -3.0}), tv({-2.0, 0.5})}) == 1.0);

    CHECK(sign_conflict_fraction({tv({0.0, 0.0}), tv({0.0, 0.0})}) == 0.0);

    CHECK_THROWS_AS(sign_conflict_fraction({tv({1.0})}), std::invalid_argument);
}

TEST_CASE("merge strategy string round trip") {
    for (auto s : {MergeStrategy::weighted_ta, MergeStrategy::fixed_ta, MergeStrategy::ties,
                   MergeStrategy::fisher, MergeStrategy::minmax_ta})
        CHECK(merge_strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(merge_strategy_from_string("bogus"), std::invalid_argument);
}
