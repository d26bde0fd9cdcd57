#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "epimerge/numeric.hpp"

using namespace epimerge;

TEST_CASE("softmax basics") {
    auto s = softmax({0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK(softmax({3.7})[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(softmax({-123.0})[0] == doctest::Approx(1.0).epsilon(1e-12));

    s = softmax({0.7, 0.3});
    CHECK(s[0] == doctest::Approx(0.598688).epsilon(1e-6));
    CHECK(s[1] == doctest::Approx(0.401312).epsilon(1e-6));

    CHECK_THROWS_AS(softmax({}), std::invalid_argument);
    CHECK_THROWS_AS(softmax({1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(softmax({std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST_CASE("softmax properties: sum, shift invariance, argmax") {
    SeededRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 1 + rng.uniform_index(10000);
        std::vector<double> scores(n);
        for (double& v : scores) v = 200.0 * (rng.uniform() - 0.5);
        auto p = softmax(scores);
        double sum = 0.0;
        for (double v : p) {
            sum += v;
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        // shift invariance
        const double c = 100.0 * (rng.uniform() - 0.5);
        std::vector<double> shifted(scores);
        for (double& v : shifted) v += c;
        auto q = softmax(shifted);
        for (size_t i = 0; i < n; ++i)
            CHECK(std::abs(p[i] - q[i]) < 1e-12);

        // argmax preservation (scores here are continuous draws, ties unlikely)
        size_t am_s = 0, am_p = 0;
        for (size_t i = 1; i < n; ++i) {
            if (scores[i] > scores[am_s]) am_s = i;
            if (p[i] > p[am_p]) am_p = i;
        }
        CHECK(am_s == am_p);
    }
}

TEST_CASE("cosine similarity") {
    std::vector<double> v = {1.0, 2.0, -3.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> nv = {-1.0, -2.0, 3.0};
    CHECK(cosine_similarity(v, nv) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(cosine_similarity({1, 0}, {1, 1}) == doctest::Approx(0.707107).epsilon(1e-6));
    CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 1}), std::domain_error);
    CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("l2_normalize") {
    auto u = l2_normalize({3.0, 4.0});
    CHECK(u[0] == doctest::Approx(0.6));
    CHECK(u[1] == doctest::Approx(0.8));
    CHECK(std::abs(l2_norm(u) - 1.0) < 1e-12);

    std::vector<double> unit = {0.0, 1.0, 0.0};
    auto same = l2_normalize(unit);
    for (size_t i = 0; i < unit.size(); ++i) CHECK(same[i] == doctest::Approx(unit[i]));

    CHECK_THROWS_AS(l2_normalize({0.0, 0.0}), std::domain_error);
}

TEST_CASE("finite difference gradient oracle") {
    auto quad = [](const std::vector<double>& x) { return dot(x, x); };
    auto g = finite_diff_grad(quad, {1.0, 2.0}, 1e-5);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

    auto constant = [](const std::vector<double>&) { return 3.14; };
    for (double v : finite_diff_grad(constant, {1.0, -2.0, 0.5}, 1e-5)) CHECK(v == 0.0);

    auto sum = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    };
    for (double v : finite_diff_grad(sum, {0.3, -1.0, 8.0}, 1e-5))
        CHECK(v == doctest::Approx(1.0).epsilon(1e-8));

    CHECK_THROWS_AS(finite_diff_grad(quad, {1.0}, 0.0), std::invalid_argument);
    auto bad = [](const std::vector<double>&) { return std::nan(""); };
    CHECK_THROWS_AS(finite_diff_grad(bad, {1.0}, 1e-5), std::runtime_error);
}

TEST_CASE("ParamVector arithmetic") {
    ParamVector a{{1.0, 2.5, -3.0}, "layout"};
    ParamVector b{{0.5, -1.0, 4.0}, "layout"};
    ParamVector diff = a - b;
    CHECK(diff.values == std::vector<double>{0.5, 3.5, -7.0});
    ParamVector back = diff + b;
    CHECK(back.values == a.values);  // bitwise at representable values

    ParamVector scaled = a * 2.0;
    CHECK(scaled.values == std::vector<double>{2.0, 5.0, -6.0});

    CHECK(a.l1_norm() == doctest::Approx(6.5));

    ParamVector other{{1.0, 2.0, 3.0}, "different"};
    CHECK_THROWS_AS(a + other, std::invalid_argument);
}

TEST_CASE("SeededRng determinism") {
    SeededRng a(123456789), b(123456789);
    for (int i = 0; i < 1000000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    SeededRng c(1), d(2);
    bool differ = false;
    for (int i = 0; i < 10 && !differ; ++i) differ = c.next_u64() != d.next_u64();
    CHECK(differ);

    SeededRng e(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = e.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }

    // derive produces distinct child seeds
    CHECK(SeededRng::derive(1, 0, 0) != SeededRng::derive(1, 1, 0));
    CHECK(SeededRng::derive(1, 0, 0) != SeededRng::derive(1, 0, 1));
    CHECK(SeededRng::derive(1, 0, 0) == SeededRng::derive(1, 0, 0));
}

TEST_CASE("SeededRng normal draws have sane moments") {
    SeededRng rng(99);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.03);
}
