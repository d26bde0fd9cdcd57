// Episode objective: supervised/unsupervised contrastive terms, source
// cross-entropy, adversarial open-set loss, and the margin hinge, each with
// analytic gradients.
#pragma once

#include <vector>

#include "epimerge/encoder.hpp"

namespace epimerge {

struct LossConfig {
    double tau = 0.1;            // contrastive temperature
    double lambda_margin = 0.20; // weight on the margin hinge inside L_da
    double margin_m = 0.7;       // margin, must be in (0,1)
    double alpha = 0.5;          // adversarial open-set boundary
    double grl_factor = 1.0;     // gradient reversal strength on the adversarial branch
    void validate() const;
};

// Per-class mean embeddings, unit-normalized after averaging.
struct PrototypeSet {
    std::vector<int> class_ids;
    std::vector<std::vector<double>> prototypes;

    int index_of(int class_id) const;  // -1 if absent
};

// Batch prototypes with an optional fallback for classes absent from the batch.
PrototypeSet compute_prototypes(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels,
                                const PrototypeSet* fallback = nullptr);

struct ContrastiveResult {
    double loss = 0.0;
    std::vector<std::vector<double>> dembeddings;
};

// -log softmax over cosine(z, prototype)/tau, positive = own class prototype.
// Prototypes are constants within the step.
ContrastiveResult sup_contrastive(const std::vector<std::vector<double>>& embeddings,
                                  const std::vector<int>& labels, const PrototypeSet& protos,
                                  double tau);

// views[0..n_anchors) are anchors; pos_index[i] names anchor i's positive as
// an index into views. Denominator for anchor i is the index set
// {j != i, j < n_anchors} united with {pos_index[i]}, so a positive that is
// itself a batch member is counted once. Gradients cover all views.
ContrastiveResult unsup_contrastive(const std::vector<std::vector<double>>& views,
                                    size_t n_anchors, const std::vector<size_t>& pos_index,
                                    double tau);

struct ProbLossResult {
    double loss = 0.0;
    std::vector<double> dprobs;  // length n_known+1, open slot last
    bool clamped = false;
};

// -log p_label; probabilities below 1e-12 are clamped and flagged.
ProbLossResult source_ce(const ClassProbabilities& probs, int label_index);

// -alpha log(p_open) - (1-alpha) log(1 - p_open). Minimized by the
// classifier; the encoder maximizes it through gradient reversal.
ProbLossResult adv_osda(const ClassProbabilities& probs, double alpha);

// max(0, m - |max p_known - p_open|); subgradient 0 at the hinge point,
// argmax ties broken by lowest class index.
ProbLossResult margin(const ClassProbabilities& probs, double m);

struct ObjectiveBatch {
    std::vector<std::vector<double>> source_x;
    std::vector<int> source_label_index;  // index into the classifier's known classes
    std::vector<std::vector<double>> source_aug;
    std::vector<std::vector<double>> target_x;  // pseudo-target, unlabeled
    std::vector<std::vector<double>> target_aug;
};

struct ObjectiveTerms {
    double total = 0.0, con_s = 0.0, con_u = 0.0, ce = 0.0, adv = 0.0, margin = 0.0;
};

struct ObjectiveResult {
    ObjectiveTerms terms;
    EncoderGrads enc_grads;
    ClassifierGrads clf_grads;
};

// L_con^s + L_con^u + L_ce + L_adv + lambda * L_margin on one batch pair.
// Encoder gradients through L_adv are scaled by -grl_factor; classifier
// gradients are standard. When protos is null, prototypes are recomputed
// from the batch; either way they are constants within the step.
ObjectiveResult episode_objective(const EncoderParams& enc, const ClassifierParams& clf,
                                  const ObjectiveBatch& batch, const LossConfig& cfg,
                                  const PrototypeSet* protos = nullptr);

}  // namespace epimerge
