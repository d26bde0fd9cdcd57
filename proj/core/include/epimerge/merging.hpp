// Task-vector computation and model aggregation strategies: validation
// softmax-weighted updates, fixed-coefficient task arithmetic, TIES-style
// trim/elect/merge, Fisher merging, min-max weighting, and the
// sign-conflict diagnostic.
#pragma once

#include <string>
#include <vector>

#include "epimerge/numeric.hpp"

namespace epimerge {

struct TaskVector {
    ParamVector delta;  // theta_global - theta_local
    int episode_index = 0;
    int global_index = 0;
};

enum class WeightScheme { softmax, minmax, fixed };

struct MergeWeights {
    std::vector<double> weights;
    WeightScheme scheme = WeightScheme::softmax;
};

enum class MergeStrategy { weighted_ta, fixed_ta, ties, fisher, minmax_ta };

struct MergeConfig {
    MergeStrategy strategy = MergeStrategy::weighted_ta;
    double fixed_scale = 0.0;     // fixed_ta; 0 means 1/n_e
    double trim_fraction = 0.2;   // ties: fraction of coordinates kept
    int fisher_samples = 64;      // fisher: samples for the diagonal estimate
    bool scores_as_percent = true;  // feed 100x scores into the softmax
};

MergeStrategy merge_strategy_from_string(const std::string& s);
std::string to_string(MergeStrategy s);

TaskVector task_vector(const ParamVector& global, const ParamVector& local, int episode_index,
                       int global_index);

// Softmax over per-episode validation All scores (fractions in [0,1]).
MergeWeights softmax_weights(const std::vector<double>& all_scores);

// (s - min)/(max - min), renormalized to sum 1; all-equal scores -> uniform.
MergeWeights minmax_weights(const std::vector<double>& all_scores);

// theta_global^g = theta_global^{g-1} - sum_e w_e * delta_e
ParamVector apply_update(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                         const MergeWeights& weights);

// theta - scale * sum(delta_e), no validation weighting.
ParamVector fixed_ta_merge(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                           double scale);

// Trim to top trim_fraction coordinates by magnitude per task vector, elect
// the per-coordinate sign of the trimmed sum, average sign-agreeing survivors;
// exact sign ties drop the coordinate.
ParamVector ties_merge(const ParamVector& global, const std::vector<TaskVector>& task_vectors,
                       double trim_fraction);

// Per-coordinate Fisher-weighted average of local models; zero total Fisher
// at a coordinate falls back to the plain mean.
ParamVector fisher_merge(const ParamVector& global, const std::vector<ParamVector>& locals,
                         const std::vector<ParamVector>& fisher_diagonals);

// Fraction of coordinates where two task vectors carry nonzero entries of
// opposite sign; all-zero coordinates are excluded from the denominator.
double sign_conflict_fraction(const std::vector<TaskVector>& task_vectors);

}  // namespace epimerge
