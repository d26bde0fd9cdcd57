#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "epimerge/synth.hpp"

using namespace epimerge;

namespace {

DomainSpec identity_domain(int dim, const std::string& id = "id",
                           DomainRole role = DomainRole::episode_train) {
    DomainSpec d;
    d.domain_id = id;
    d.role = role;
    d.scale_factors.assign(dim, 1.0);
    d.shift.assign(dim, 0.0);
    return d;
}

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        const double fa = static_cast<double>(i) / a.size();
        const double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace

TEST_CASE("generate_source cardinalities and separation") {
    SeededRng rng(11);
    auto [classes, samples] = generate_source(7, 8, 50, 1.0, rng);
    CHECK(classes.size() == 7);
    CHECK(samples.size() == 350);
    std::map<int, int> counts;
    for (const auto& s : samples) ++counts[s.label];
    for (const auto& [cid, n] : counts) CHECK(n == 50);

    for (size_t i = 0; i < classes.size(); ++i)
        for (size_t j = i + 1; j < classes.size(); ++j) {
            double d2 = 0.0;
            for (size_t k = 0; k < classes[i].mean.size(); ++k) {
                const double d = classes[i].mean[k] - classes[j].mean[k];
                d2 += d * d;
            }
            CHECK(std::sqrt(d2) >= 4.0 * classes[i].covariance_scale);
        }
}

TEST_CASE("generate_source minimal and deterministic") {
    SeededRng rng(5);
    auto [classes, samples] = generate_source(2, 2, 1, 1.0, rng);
    CHECK(samples.size() == 2);
    CHECK(samples[0].label != samples[1].label);

    SeededRng r1(77), r2(77);
    auto a = generate_source(5, 4, 10, 1.0, r1);
    auto b = generate_source(5, 4, 10, 1.0, r2);
    REQUIRE(a.second.size() == b.second.size());
    for (size_t i = 0; i < a.second.size(); ++i)
        CHECK(a.second[i].features == b.second[i].features);

    CHECK_THROWS_AS(generate_source(1, 2, 1, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate_source(2, 1, 1, 1.0, rng), std::invalid_argument);
}

TEST_CASE("identity domain preserves marginals (KS at 0.01)") {
    SeededRng rng(21);
    auto [classes, source] = generate_source(3, 4, 1, 1.0, rng);
    const int n = 10000;
    DomainSpec id = identity_domain(4);

    SeededRng r1(100), r2(200);
    auto direct = generate_pseudo_target(classes, id, n / 3, r1);
    auto shifted = generate_pseudo_target(classes, id, n / 3, r2);
    for (int coord = 0; coord < 4; ++coord) {
        std::vector<double> a, b;
        for (const auto& s : direct) a.push_back(s.features[coord]);
        for (const auto& s : shifted) b.push_back(s.features[coord]);
        const double d = ks_statistic(a, b);
        // critical value at alpha = 0.01 for the two-sample test
        const double crit =
            1.628 * std::sqrt((a.size() + b.size()) / static_cast<double>(a.size() * b.size()));
        CHECK(d < crit);
    }
}

TEST_CASE("shift-only domain displaces per-class means") {
    SeededRng rng(33);
    auto [classes, source] = generate_source(2, 3, 1, 1.0, rng);
    DomainSpec d = identity_domain(3, "shifted");
    d.shift = {5.0, -2.0, 1.0};
    SeededRng r(9);
    auto samples = generate_pseudo_target(classes, d, 10000, r);
    for (const auto& c : classes) {
        std::vector<double> mean(3, 0.0);
        int n = 0;
        for (const auto& s : samples) {
            if (s.hidden_label != c.class_id) continue;
            for (int k = 0; k < 3; ++k) mean[k] += s.features[k];
            ++n;
        }
        for (int k = 0; k < 3; ++k) {
            mean[k] /= n;
            CHECK(std::abs(mean[k] - (c.mean[k] + d.shift[k])) < 0.05);
        }
    }
}

TEST_CASE("pseudo-target label preservation and domain variation") {
    SeededRng rng(44);
    auto [classes, source] = generate_source(4, 3, 2, 1.0, rng);

    DomainSpec d1 = identity_domain(3, "a");
    DomainSpec d2 = identity_domain(3, "b");
    d2.rotation_angle = 0.5;
    SeededRng ra(7), rb(7);
    auto sa = generate_pseudo_target(classes, d1, 5, ra);
    auto sb = generate_pseudo_target(classes, d2, 5, rb);
    bool any_diff = false;
    for (size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].hidden_label == sb[i].hidden_label);
        if (sa[i].features != sb[i].features) any_diff = true;
    }
    CHECK(any_diff);

    DomainSpec bad = identity_domain(5, "bad");
    SeededRng rc(1);
    CHECK_THROWS_AS(generate_pseudo_target(classes, bad, 2, rc), std::invalid_argument);
}

TEST_CASE("sample_episode known-class subsets") {
    SeededRng rng(55);
    auto [classes, source] = generate_source(7, 4, 10, 1.0, rng);
    std::vector<DomainSpec> domains = {identity_domain(4, "t0")};

    SeededRng er(5);
    EpisodeData ep = sample_episode(source, classes, domains, 123, 0, 4.0 / 7.0, er);
    CHECK(ep.known_classes.size() == 4);
    for (const auto& s : ep.labeled_source) CHECK(ep.known_classes.count(s.label) == 1);
    // pseudo-target covers all classes
    std::set<int> covered;
    for (const auto& s : ep.unlabeled_pseudo_target) covered.insert(s.hidden_label);
    CHECK(covered.size() == 7);

    // distinct episodes generally get distinct subsets
    int collisions = 0;
    std::set<std::set<int>> seen;
    for (int e = 0; e < 100; ++e) {
        SeededRng r(1000 + e);
        EpisodeData x = sample_episode(source, classes, domains, 123, e, 4.0 / 7.0, r);
        if (!seen.insert(x.known_classes).second) ++collisions;
    }
    CHECK(seen.size() > 1);

    // static split pins the subset for every episode index
    SeededRng r1(9), r2(10);
    EpisodeData s1 = sample_episode(source, classes, domains, 123, 0, 4.0 / 7.0, r1, true);
    EpisodeData s2 = sample_episode(source, classes, domains, 123, 5, 4.0 / 7.0, r2, true);
    CHECK(s1.known_classes == s2.known_classes);

    SeededRng r3(1);
    CHECK_THROWS_AS(sample_episode(source, classes, domains, 123, 0, 0.01, r3),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_episode(source, classes, domains, 123, 0, 0.99, r3),
                    std::invalid_argument);
}

TEST_CASE("build_validation_set pooling and disjointness") {
    SeededRng rng(66);
    auto [classes, source] = generate_source(7, 4, 5, 1.0, rng);
    std::vector<DomainSpec> valid_domains;
    for (int i = 0; i < 3; ++i)
        valid_domains.push_back(identity_domain(4, "v" + std::to_string(i), DomainRole::validation));
    std::vector<DomainSpec> train_domains = {identity_domain(4, "t0")};

    SeededRng r(3);
    ValidationSet vs = build_validation_set(classes, valid_domains, train_domains, 20, r);
    CHECK(vs.samples.size() == 7 * 3 * 20);

    SeededRng r2(3);
    ValidationSet vs2 = build_validation_set(classes, valid_domains, train_domains, 20, r2);
    for (size_t i = 0; i < vs.samples.size(); ++i)
        CHECK(vs.samples[i].features == vs2.samples[i].features);

    std::vector<DomainSpec> overlapping = {identity_domain(4, "v0", DomainRole::validation)};
    std::vector<DomainSpec> episode = {identity_domain(4, "v0")};
    SeededRng r3(3);
    CHECK_THROWS_AS(build_validation_set(classes, overlapping, episode, 5, r3),
                    std::invalid_argument);
}

TEST_CASE("augment") {
    std::vector<double> x = {1.0, -2.0, 0.5, 3.0};
    SeededRng rng(8);
    auto y = augment(x, rng, 0.0, 0.0);
    CHECK(y == x);

    // Monte Carlo displacement bound
    const double jitter = 0.1, max_rot = 0.2;
    const double bound = l2_norm(x) * max_rot + 6.0 * jitter * std::sqrt(4.0);
    int violations = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        auto z = augment(x, rng, jitter, max_rot);
        double d2 = 0.0;
        for (size_t k = 0; k < x.size(); ++k) {
            const double d = z[k] - x[k];
            d2 += d * d;
        }
        if (std::sqrt(d2) > bound) ++violations;
    }
    CHECK(violations < trials / 1000);  // probability > 0.999

    SeededRng a(12), b(12);
    CHECK(augment(x, a, 0.3, 0.4) == augment(x, b, 0.3, 0.4));

    CHECK_THROWS_AS(augment(x, rng, -0.1, 0.0), std::invalid_argument);
}

TEST_CASE("CSV export/import round trip") {
    SeededRng rng(77);
    auto [classes, source] = generate_source(3, 4, 5, 1.0, rng);
    DomainSpec d = identity_domain(4, "dom");
    SeededRng r(2);
    auto samples = generate_pseudo_target(classes, d, 4, r);

    const std::string path = "/tmp/epimerge_test_samples.csv";
    export_samples_csv(path, samples);
    auto loaded = import_samples_csv(path);
    REQUIRE(loaded.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].domain_id == samples[i].domain_id);
        CHECK(loaded[i].hidden_label == samples[i].hidden_label);
        REQUIRE(loaded[i].features.size() == samples[i].features.size());
        for (size_t k = 0; k < samples[i].features.size(); ++k)
            CHECK(loaded[i].features[k] == samples[i].features[k]);  // %.17g is lossless
    }
    std::remove(path.c_str());
}
