#include "epimerge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

namespace epimerge {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest_center(const std::vector<double>& p,
                   const std::vector<std::vector<double>>& centers) {
    int best = 0;
    double best_d = sq_dist(p, centers[0]);
    for (size_t c = 1; c < centers.size(); ++c) {
        const double d = sq_dist(p, centers[c]);
        if (d < best_d - 1e-12) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

ClusteringResult kmeans(const std::vector<std::vector<double>>& points, int k, SeededRng& rng,
                        int max_iters) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    const size_t n = points.size();
    if (static_cast<int>(n) < k) throw std::invalid_argument("kmeans: fewer points than clusters");

    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    centers.push_back(points[rng.uniform_index(n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centers) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(n);
        } else {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) { pick = i; break; }
            }
        }
        centers.push_back(points[pick]);
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            const int c = nearest_center(points[i], centers);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
        }
        // recompute centers; re-seed empties to the globally farthest point
        std::vector<std::vector<double>> sums(k, std::vector<double>(points[0].size(), 0.0));
        std::vector<int> counts(k, 0);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < points[i].size(); ++j) sums[assign[i]][j] += points[i][j];
            ++counts[assign[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (double& v : sums[c]) v /= counts[c];
                centers[c] = std::move(sums[c]);
            } else {
                size_t far = 0;
                double far_d = -1.0;
                for (size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(points[i], centers[assign[i]]);
                    if (d > far_d) { far_d = d; far = i; }
                }
                centers[c] = points[far];
                changed = true;
            }
        }
        if (!changed) break;
    }

    ClusteringResult res;
    res.centers = std::move(centers);
    res.assignments.resize(n);
    for (size_t i = 0; i < n; ++i) {
        res.assignments[i] = nearest_center(points[i], res.centers);
        res.inertia += sq_dist(points[i], res.centers[res.assignments[i]]);
    }
    return res;
}

ClusteringResult kmeans_restarts(const std::vector<std::vector<double>>& points, int k,
                                 uint64_t base_seed, int restarts, int max_iters) {
    if (restarts < 1) throw std::invalid_argument("kmeans_restarts: restarts must be >= 1");
    ClusteringResult best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        SeededRng rng(SeededRng::derive(base_seed, 0x6d, static_cast<uint64_t>(r)));
        ClusteringResult cur = kmeans(points, k, rng, max_iters);
        if (!have || cur.inertia < best.inertia) {
            best = std::move(cur);
            have = true;
        }
    }
    return best;
}

// Jonker-Volgenant style shortest augmenting path, O(n^3), minimizing.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("solve_assignment: matrix must be square");

    const double INF = std::numeric_limits<double>::max();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

GcdMetrics hungarian_accuracy(const std::vector<int>& assignments,
                              const std::vector<int>& hidden_labels,
                              const std::set<int>& old_class_set) {
    if (assignments.empty() || assignments.size() != hidden_labels.size())
        throw std::invalid_argument("hungarian_accuracy: empty or mismatched inputs");

    const size_t n = assignments.size();
    const int n_clusters = 1 + *std::max_element(assignments.begin(), assignments.end());
    std::vector<int> class_list;
    std::map<int, int> class_index;
    for (int l : hidden_labels) {
        if (!class_index.count(l)) {
            class_index[l] = static_cast<int>(class_list.size());
            class_list.push_back(l);
        }
    }
    const int n_classes = static_cast<int>(class_list.size());
    const int dim = std::max(n_clusters, n_classes);

    // contingency counts, padded square with zeros
    std::vector<std::vector<double>> counts(dim, std::vector<double>(dim, 0.0));
    for (size_t i = 0; i < n; ++i)
        counts[assignments[i]][class_index.at(hidden_labels[i])] += 1.0;

    // maximize agreement -> minimize (max - count)
    double cmax = 0.0;
    for (const auto& row : counts)
        for (double c : row) cmax = std::max(cmax, c);
    std::vector<std::vector<double>> cost(dim, std::vector<double>(dim));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) cost[i][j] = cmax - counts[i][j];
    const std::vector<int> match = solve_assignment(cost);

    GcdMetrics m;
    m.matched_permutation.assign(n_clusters, -1);
    for (int c = 0; c < n_clusters; ++c)
        if (match[c] >= 0 && match[c] < n_classes) m.matched_permutation[c] = class_list[match[c]];

    size_t correct = 0, n_old = 0, n_new = 0, correct_old = 0, correct_new = 0;
    for (size_t i = 0; i < n; ++i) {
        const bool hit = m.matched_permutation[assignments[i]] == hidden_labels[i];
        if (hit) ++correct;
        if (old_class_set.count(hidden_labels[i])) {
            ++n_old;
            if (hit) ++correct_old;
        } else {
            ++n_new;
            if (hit) ++correct_new;
        }
    }
    m.all = static_cast<double>(correct) / static_cast<double>(n);
    m.old_acc = n_old ? static_cast<double>(correct_old) / static_cast<double>(n_old) : 0.0;
    m.new_acc = n_new ? static_cast<double>(correct_new) / static_cast<double>(n_new) : 0.0;
    return m;
}

double brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                      int max_iters) {
    // Brent's localmin: golden-section fallback with parabolic interpolation.
    const double golden = 0.3819660112501051;
    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        const double m = 0.5 * (a + b);
        const double tol1 = tol * std::abs(x) + 1e-10;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
        bool use_golden = true;
        if (std::abs(e) > tol1) {
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (m > x) ? tol1 : -tol1;
                use_golden = false;
            }
        }
        if (use_golden) {
            e = (x < m) ? b - x : a - x;
            d = golden * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
        const double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

KEstimate estimate_k(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<std::vector<double>>& labeled_embeddings,
                     const std::vector<int>& labels, int k_min, int k_max, SeededRng& rng) {
    if (k_min < 1 || k_max <= k_min) throw std::invalid_argument("estimate_k: invalid bounds");
    if (labeled_embeddings.size() != labels.size() || labels.empty())
        throw std::invalid_argument("estimate_k: bad labeled subset");
    k_max = std::min<int>(k_max, static_cast<int>(embeddings.size()));

    KEstimate est;
    est.k_min = k_min;
    est.k_max = k_max;
    const uint64_t base_seed = rng.seed();
    const std::set<int> all_old(labels.begin(), labels.end());

    std::map<int, double> memo;
    auto score = [&](int k) {
        auto it = memo.find(k);
        if (it != memo.end()) return it->second;
        ClusteringResult cl =
            kmeans_restarts(embeddings, k, SeededRng::derive(base_seed, 0x6b, static_cast<uint64_t>(k)));
        // labeled-subset accuracy: assign labeled points to the learned centers
        std::vector<int> assign(labeled_embeddings.size());
        for (size_t i = 0; i < labeled_embeddings.size(); ++i)
            assign[i] = nearest_center(labeled_embeddings[i], cl.centers);
        const double acc = hungarian_accuracy(assign, labels, all_old).all;
        memo[k] = acc;
        est.objective_trace.emplace_back(k, acc);
        return acc;
    };

    const double x = brent_minimize(
        [&](double kf) {
            int k = static_cast<int>(std::lround(kf));
            k = std::clamp(k, k_min, k_max);
            return -score(k);
        },
        static_cast<double>(k_min), static_cast<double>(k_max), 1e-2);

    int k_star = std::clamp(static_cast<int>(std::lround(x)), k_min, k_max);
    int best = k_star;
    double best_score = score(k_star);
    for (int k : {k_star - 1, k_star + 1}) {
        if (k < k_min || k > k_max) continue;
        const double s = score(k);
        if (s > best_score || (s == best_score && k < best)) {
            best_score = s;
            best = k;
        }
    }
    est.k_hat = best;
    return est;
}

}  // namespace epimerge
