// Clustering-based evaluation: seeded k-means++, Hungarian-matched All/Old/New
// accuracies under a single global matching, and Brent's-method estimation of
// the cluster count.
#pragma once

#include <set>
#include <vector>

#include "epimerge/numeric.hpp"

namespace epimerge {

struct ClusteringResult {
    std::vector<int> assignments;
    std::vector<std::vector<double>> centers;
    double inertia = 0.0;
};

struct GcdMetrics {
    double all = 0.0, old_acc = 0.0, new_acc = 0.0;
    std::vector<int> matched_permutation;  // cluster index -> class label (-1 if unmatched)
};

struct KEstimate {
    int k_hat = 0;
    int k_min = 0, k_max = 0;
    std::vector<std::pair<int, double>> objective_trace;
};

// Lloyd's algorithm with k-means++ init; empty clusters are re-seeded to the
// farthest point; iterates to an assignment fixpoint or max_iters.
ClusteringResult kmeans(const std::vector<std::vector<double>>& points, int k, SeededRng& rng,
                        int max_iters = 100);

// Best-of-restarts k-means: lowest inertia wins, ties to the earliest
// restart; deterministic given base_seed.
ClusteringResult kmeans_restarts(const std::vector<std::vector<double>>& points, int k,
                                 uint64_t base_seed, int restarts = 8, int max_iters = 100);

// Maximum-weight cluster/class matching on the contingency matrix; Old/New
// are computed on their subsets under the same global matching.
GcdMetrics hungarian_accuracy(const std::vector<int>& assignments,
                              const std::vector<int>& hidden_labels,
                              const std::set<int>& old_class_set);

// Minimum-cost assignment on a square cost matrix; returns row -> column.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

// Brent's method on the continuous relaxation of
//   k -> Hungarian accuracy of the labeled subset under k-means(full set, k),
// evaluated at round(k), followed by an exhaustive check of {k*-1, k*, k*+1}.
KEstimate estimate_k(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<std::vector<double>>& labeled_embeddings,
                     const std::vector<int>& labels, int k_min, int k_max, SeededRng& rng);

// Scalar minimizer (Brent, 1973) on [a, b]; returns argmin.
double brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                      int max_iters = 100);

}  // namespace epimerge
