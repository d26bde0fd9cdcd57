#include "epimerge/merging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epimerge {

MergeStrategy merge_strategy_from_string(const std::string& s) {
    if (s == "weighted_ta") return MergeStrategy::weighted_ta;
    if (s == "fixed_ta") return MergeStrategy::fixed_ta;
    if (s == "ties") return MergeStrategy::ties;
    if (s == "fisher") return MergeStrategy::fisher;
    if (s == "minmax_ta") return MergeStrategy::minmax_ta;
    throw std::invalid_argument("unknown merge strategy: " + s);
}

std::string to_string(MergeStrategy s) {
    switch (s) {
        case MergeStrategy::weighted_ta: return "weighted_ta";
        case MergeStrategy::fixed_ta: return "fixed_ta";
        case MergeStrategy::ties: return "ties";
        case MergeStrategy::fisher: return "fisher";
        case MergeStrategy::minmax_ta: return "minmax_ta";
    }
    return "?";
}

TaskVector task_vector(const ParamVector& global, const ParamVector& local, int episode_index,
                       int global_index) {
    require_same_layout(global, local);
    TaskVector tv;
    tv.delta = global;
    tv.delta -= local;
    tv.episode_index = episode_index;
    tv.global_index = global_index;
    return tv;
}

MergeWeights softmax_weights(const std::vector<double>& all_scores) {
    if (all_scores.empty()) throw std::invalid_argument("softmax_weights: empty scores");
    return {softmax(all_scores), WeightScheme::softmax};
}

MergeWeights minmax_weights(const std::vector<double>& all_scores) {
    if (all_scores.size() < 2) throw std::invalid_argument("minmax_weights: need >= 2 episodes");
    const double lo = *std::min_element(all_scores.begin(), all_scores.end());
    const double hi = *std::max_element(all_scores.begin(), all_scores.end());
    std::vector<double> w(all_scores.size());
    if (hi == lo) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return {std::move(w), WeightScheme::minmax};
    }
    double sum = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        w[i] = (all_scores[i] - lo) / (hi - lo);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return {std::move(w), WeightScheme::minmax};
}

ParamVector apply_update(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                         const MergeWeights& weights) {
    if (task_vectors.size() != weights.weights.size())
        throw std::invalid_argument("apply_update: weight/task-vector count mismatch");
    ParamVector out = global;
    for (size_t e = 0; e < task_vectors.size(); ++e) {
        require_same_layout(global, task_vectors[e].delta);
        const double w = weights.weights[e];
        for (size_t i = 0; i < out.values.size(); ++i)
            out.values[i] -= w * task_vectors[e].delta.values[i];
    }
    return out;
}

ParamVector fixed_ta_merge(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                           double scale) {
    ParamVector out = global;
    for (const auto& tv : task_vectors) {
        require_same_layout(global, tv.delta);
        for (size_t i = 0; i < out.values.size(); ++i)
            out.values[i] -= scale * tv.delta.values[i];
    }
    return out;
}

ParamVector ties_merge(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                       double trim_fraction) {
    if (trim_fraction <= 0.0 || trim_fraction >= 1.0)
        throw std::invalid_argument("ties_merge: trim_fraction must be in (0,1)");
    if (task_vectors.empty()) throw std::invalid_argument("ties_merge: no task vectors");
    const size_t n = global.values.size();
    const size_t n_keep = std::max<size_t>(
        1, static_cast<size_t>(std::llround(trim_fraction * static_cast<double>(n))));

    // stage 1: keep only each task vector's top-magnitude coordinates
    std::vector<std::vector<double>> trimmed;
    trimmed.reserve(task_vectors.size());
    for (const auto& tv : task_vectors) {
        require_same_layout(global, tv.delta);
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::nth_element(idx.begin(), idx.begin() + (n_keep - 1), idx.end(),
                         [&](size_t a, size_t b) {
                             const double ma = std::abs(tv.delta.values[a]);
                             const double mb = std::abs(tv.delta.values[b]);
                             return ma != mb ? ma > mb : a < b;
                         });
        std::vector<double> t(n, 0.0);
        for (size_t k = 0; k < n_keep; ++k) t[idx[k]] = tv.delta.values[idx[k]];
        trimmed.push_back(std::move(t));
    }

    // stage 2+3: elect sign of the trimmed sum, mean over agreeing survivors
    ParamVector out = global;
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& t : trimmed) sum += t[i];
        if (sum == 0.0) continue;  // sign tie (or nothing kept): drop coordinate
        const double sgn = sum > 0.0 ? 1.0 : -1.0;
        double acc = 0.0;
        int count = 0;
        for (const auto& t : trimmed) {
            if (t[i] != 0.0 && t[i] * sgn > 0.0) {
                acc += t[i];
                ++count;
            }
        }
        if (count > 0) out.values[i] -= acc / count;
    }
    return out;
}

ParamVector fisher_merge(const ParamVector& global, const std::vector<ParamVector>& locals,
                         const std::vector<ParamVector>& fisher_diagonals) {
    if (locals.empty() || locals.size() != fisher_diagonals.size())
        throw std::invalid_argument("fisher_merge: count mismatch");
    for (size_t m = 0; m < locals.size(); ++m) {
        require_same_layout(global, locals[m]);
        require_same_layout(global, fisher_diagonals[m]);
        for (double f : fisher_diagonals[m].values)
            if (f < 0.0) throw std::invalid_argument("fisher_merge: negative Fisher entry");
    }
    ParamVector out = global;
    const size_t n = global.values.size();
    for (size_t i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        for (size_t m = 0; m < locals.size(); ++m) {
            num += fisher_diagonals[m].values[i] * locals[m].values[i];
            den += fisher_diagonals[m].values[i];
        }
        if (den > 0.0) {
            out.values[i] = num / den;
        } else {
            double mean = 0.0;
            for (const auto& l : locals) mean += l.values[i];
            out.values[i] = mean / static_cast<double>(locals.size());
        }
    }
    return out;
}

double sign_conflict_fraction(const std::vector<TaskVector>& task_vectors) {
    if (task_vectors.size() < 2)
        throw std::invalid_argument("sign_conflict_fraction: need >= 2 task vectors");
    for (size_t m = 1; m < task_vectors.size(); ++m)
        require_same_layout(task_vectors[0].delta, task_vectors[m].delta);
    const size_t n = task_vectors[0].delta.values.size();
    size_t active = 0, conflicts = 0;
    for (size_t i = 0; i < n; ++i) {
        bool pos = false, neg = false, nonzero = false;
        for (const auto& tv : task_vectors) {
            const double v = tv.delta.values[i];
            if (v > 0.0) pos = true;
            if (v < 0.0) neg = true;
            if (v != 0.0) nonzero = true;
        }
        if (nonzero) {
            ++active;
            if (pos && neg) ++conflicts;
        }
    }
    if (active == 0) return 0.0;
    return static_cast<double>(conflicts) / static_cast<double>(active);
}

}  // namespace epimerge
