#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "epimerge/encoder.hpp"

using namespace epimerge;

namespace {

std::vector<double> random_input(int dim, SeededRng& rng) {
    std::vector<double> x(dim);
    for (double& v : x) v = rng.normal();
    return x;
}

// flattened parameter view for finite-difference checks
std::vector<double> flatten(const EncoderParams& p) { return p.to_param_vector().values; }

EncoderParams unflatten(const std::vector<double>& v, const EncoderParams& like) {
    ParamVector pv{v, like.layout_id()};
    return EncoderParams::from_param_vector(pv, like.in_dim, like.hidden_dim, like.embed_dim);
}

}  // namespace

TEST_CASE("ParamVector round trip is bitwise") {
    SeededRng rng(1);
    EncoderParams p = EncoderParams::random_init(4, 6, 3, rng);
    ParamVector v = p.to_param_vector();
    EncoderParams q = EncoderParams::from_param_vector(v, 4, 6, 3);
    CHECK(q.to_param_vector().values == v.values);
    CHECK(v.layout_id == "mlp-4x6x3");

    ParamVector zero{std::vector<double>(v.values.size(), 0.0), v.layout_id};
    EncoderParams z = EncoderParams::from_param_vector(zero, 4, 6, 3);
    for (double w : z.w1) CHECK(w == 0.0);
    for (double w : z.w2) CHECK(w == 0.0);

    ParamVector wrong{v.values, "mlp-4x6x4"};
    CHECK_THROWS_AS(EncoderParams::from_param_vector(wrong, 4, 6, 3), std::invalid_argument);
}

TEST_CASE("init from global yields independent copies") {
    SeededRng rng(2);
    ParamVector global = EncoderParams::random_init(4, 6, 3, rng).to_param_vector();
    EncoderParams a = EncoderParams::from_param_vector(global, 4, 6, 3);
    EncoderParams b = EncoderParams::from_param_vector(global, 4, 6, 3);
    a.w1[0] += 1.0;
    CHECK(b.w1[0] == global.values[0]);
    CHECK(a.w1[0] != b.w1[0]);
}

TEST_CASE("embed produces unit deterministic embeddings") {
    SeededRng rng(3);
    EncoderParams p = EncoderParams::random_init(8, 16, 8, rng);
    for (int i = 0; i < 20; ++i) {
        auto x = random_input(8, rng);
        auto z1 = embed(p, x);
        auto z2 = embed(p, x);
        CHECK(z1 == z2);
        CHECK(std::abs(l2_norm(z1) - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(embed(p, {1.0, 2.0}), std::invalid_argument);

    // exactly zero pre-normalization embedding
    EncoderParams zp = EncoderParams::zeros(4, 4, 2);
    CHECK_THROWS_AS(embed(zp, {1.0, 0.0, 0.0, 0.0}), std::domain_error);
}

TEST_CASE("embed gradient matches finite differences") {
    SeededRng rng(4);
    EncoderParams p = EncoderParams::random_init(5, 7, 4, rng);
    auto x = random_input(5, rng);

    // scalar head: dot(z, c) for a fixed random direction c
    auto c = random_input(4, rng);
    EmbedCache cache;
    embed(p, x, &cache);
    EncoderGrads grads(p);
    embed_backward(p, cache, c, grads);
    const std::vector<double> analytic = grads_to_param_vector(grads, p).values;

    auto f = [&](const std::vector<double>& flat) {
        return dot(embed(unflatten(flat, p), x), c);
    };
    const std::vector<double> numeric = finite_diff_grad(f, flatten(p), 1e-6);
    REQUIRE(numeric.size() == analytic.size());
    for (size_t i = 0; i < numeric.size(); ++i) {
        const double denom = std::max(1e-8, std::abs(numeric[i]));
        CHECK(std::abs(analytic[i] - numeric[i]) / denom < 1e-4);
    }
}

TEST_CASE("embed is Lipschitz in the weights on a fixed input set") {
    SeededRng rng(10);
    EncoderParams p = EncoderParams::random_init(6, 10, 5, rng);
    std::vector<std::vector<double>> inputs;
    for (int i = 0; i < 30; ++i) inputs.push_back(random_input(6, rng));

    const double eps = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
        EncoderParams q = p;
        double pert = 0.0;
        for (double& w : q.w1) {
            const double d = eps * rng.normal();
            w += d;
            pert += d * d;
        }
        pert = std::sqrt(pert);
        for (const auto& x : inputs) {
            auto za = embed(p, x);
            auto zb = embed(q, x);
            double d2 = 0.0;
            for (size_t k = 0; k < za.size(); ++k) {
                const double d = za[k] - zb[k];
                d2 += d * d;
            }
            // empirical Lipschitz constant bound for this architecture scale
            CHECK(std::sqrt(d2) < 1000.0 * pert);
        }
    }
}

TEST_CASE("classify basics") {
    SeededRng rng(5);
    ClassifierParams zero = ClassifierParams::zeros(4, 3);
    ClassProbabilities p = classify(zero, {0.1, 0.2, 0.3, 0.4});
    for (double v : p.known) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.open_set == doctest::Approx(0.25).epsilon(1e-12));

    ClassifierParams clf = ClassifierParams::random_init(4, 5, rng);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> z(4);
        for (double& v : z) v = rng.normal();
        ClassProbabilities q = classify(clf, z);
        double sum = q.open_set;
        for (double v : q.known) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(classify(clf, {1.0}), std::invalid_argument);
}

TEST_CASE("classifier gradient matches finite differences") {
    SeededRng rng(6);
    ClassifierParams clf = ClassifierParams::random_init(3, 2, rng);
    std::vector<double> z = {0.3, -0.7, 0.2};
    std::vector<double> head = {0.5, -1.0, 2.0};  // random linear functional of probs

    ClassifyCache cache;
    classify(clf, z, &cache);
    ClassifierGrads grads(clf);
    auto dz = classify_backward(clf, cache, head, grads);

    auto run = [&](const std::vector<double>& w, const std::vector<double>& b,
                   const std::vector<double>& zz) {
        ClassifierParams c = clf;
        c.w = w;
        c.b = b;
        ClassProbabilities p = classify(c, zz);
        double out = p.known[0] * head[0] + p.known[1] * head[1] + p.open_set * head[2];
        return out;
    };

    auto numeric_w = finite_diff_grad(
        [&](const std::vector<double>& w) { return run(w, clf.b, z); }, clf.w, 1e-6);
    for (size_t i = 0; i < numeric_w.size(); ++i) {
        const double denom = std::max(1e-8, std::abs(numeric_w[i]));
        CHECK(std::abs(grads.w[i] - numeric_w[i]) / denom < 1e-4);
    }
    auto numeric_z = finite_diff_grad(
        [&](const std::vector<double>& zz) { return run(clf.w, clf.b, zz); }, z, 1e-6);
    for (size_t i = 0; i < numeric_z.size(); ++i) {
        const double denom = std::max(1e-8, std::abs(numeric_z[i]));
        CHECK(std::abs(dz[i] - numeric_z[i]) / denom < 1e-4);
    }
}
