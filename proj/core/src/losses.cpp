#include "epimerge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace epimerge {

namespace {

constexpr double kProbFloor = 1e-12;

// d cos(a,b) / da, exact for non-unit inputs.
void add_cos_grad_a(const std::vector<double>& a, const std::vector<double>& b, double coeff,
                    std::vector<double>& out) {
    const double na = l2_norm(a), nb = l2_norm(b);
    const double s = dot(a, b) / (na * nb);
    const double inv = 1.0 / (na * nb);
    const double inv_a2 = 1.0 / (na * na);
    for (size_t i = 0; i < a.size(); ++i)
        out[i] += coeff * (b[i] * inv - s * a[i] * inv_a2);
}

}  // namespace

void LossConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("LossConfig: tau must be positive");
    if (margin_m <= 0.0 || margin_m >= 1.0)
        throw std::invalid_argument("LossConfig: margin_m must be in (0,1)");
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("LossConfig: alpha must be in (0,1)");
    if (lambda_margin < 0.0)
        throw std::invalid_argument("LossConfig: lambda_margin must be non-negative");
}

int PrototypeSet::index_of(int class_id) const {
    for (size_t i = 0; i < class_ids.size(); ++i)
        if (class_ids[i] == class_id) return static_cast<int>(i);
    return -1;
}

PrototypeSet compute_prototypes(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels, const PrototypeSet* fallback) {
    if (embeddings.size() != labels.size())
        throw std::invalid_argument("compute_prototypes: size mismatch");
    std::map<int, std::pair<std::vector<double>, int>> sums;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        auto& [sum, count] = sums[labels[i]];
        if (sum.empty()) sum.assign(embeddings[i].size(), 0.0);
        for (size_t j = 0; j < embeddings[i].size(); ++j) sum[j] += embeddings[i][j];
        ++count;
    }
    PrototypeSet out;
    for (auto& [cid, sc] : sums) {
        for (double& v : sc.first) v /= sc.second;
        out.class_ids.push_back(cid);
        out.prototypes.push_back(l2_normalize(sc.first));
    }
    if (fallback) {
        for (size_t i = 0; i < fallback->class_ids.size(); ++i) {
            if (out.index_of(fallback->class_ids[i]) < 0) {
                out.class_ids.push_back(fallback->class_ids[i]);
                out.prototypes.push_back(fallback->prototypes[i]);
            }
        }
    }
    return out;
}

ContrastiveResult sup_contrastive(const std::vector<std::vector<double>>& embeddings,
                                  const std::vector<int>& labels, const PrototypeSet& protos,
                                  double tau) {
    if (embeddings.empty()) throw std::invalid_argument("sup_contrastive: empty batch");
    if (embeddings.size() != labels.size())
        throw std::invalid_argument("sup_contrastive: size mismatch");
    if (tau <= 0.0) throw std::invalid_argument("sup_contrastive: tau must be positive");

    const size_t n = embeddings.size();
    const size_t n_proto = protos.prototypes.size();
    ContrastiveResult res;
    res.dembeddings.assign(n, std::vector<double>(embeddings[0].size(), 0.0));

    for (size_t i = 0; i < n; ++i) {
        const int pos = protos.index_of(labels[i]);
        if (pos < 0)
            throw std::invalid_argument("sup_contrastive: label without prototype: " +
                                        std::to_string(labels[i]));
        std::vector<double> sims(n_proto);
        for (size_t p = 0; p < n_proto; ++p)
            sims[p] = cosine_similarity(embeddings[i], protos.prototypes[p]) / tau;
        const std::vector<double> q = softmax(sims);
        const double m = *std::max_element(sims.begin(), sims.end());
        double lse = 0.0;
        for (double s : sims) lse += std::exp(s - m);
        res.loss += (m + std::log(lse)) - sims[pos];
        for (size_t p = 0; p < n_proto; ++p) {
            const double ds = (q[p] - (static_cast<int>(p) == pos ? 1.0 : 0.0)) / tau;
            add_cos_grad_a(embeddings[i], protos.prototypes[p], ds, res.dembeddings[i]);
        }
    }
    res.loss /= static_cast<double>(n);
    for (auto& g : res.dembeddings)
        for (double& v : g) v /= static_cast<double>(n);
    return res;
}

ContrastiveResult unsup_contrastive(const std::vector<std::vector<double>>& views,
                                    size_t n_anchors, const std::vector<size_t>& pos_index,
                                    double tau) {
    if (n_anchors < 2) throw std::invalid_argument("unsup_contrastive: need at least 2 anchors");
    if (n_anchors > views.size() || pos_index.size() != n_anchors)
        throw std::invalid_argument("unsup_contrastive: inconsistent sizes");
    if (tau <= 0.0) throw std::invalid_argument("unsup_contrastive: tau must be positive");

    ContrastiveResult res;
    res.dembeddings.assign(views.size(), std::vector<double>(views[0].size(), 0.0));

    for (size_t i = 0; i < n_anchors; ++i) {
        const size_t pos = pos_index[i];
        if (pos >= views.size() || pos == i)
            throw std::invalid_argument("unsup_contrastive: bad positive index");
        // denominator index set: other anchors, plus the positive (once)
        std::vector<size_t> denom;
        for (size_t j = 0; j < n_anchors; ++j)
            if (j != i) denom.push_back(j);
        if (std::find(denom.begin(), denom.end(), pos) == denom.end()) denom.push_back(pos);

        std::vector<double> sims(denom.size());
        double s_pos = 0.0;
        for (size_t k = 0; k < denom.size(); ++k) {
            sims[k] = cosine_similarity(views[i], views[denom[k]]) / tau;
            if (denom[k] == pos) s_pos = sims[k];
        }
        const std::vector<double> q = softmax(sims);
        const double m = *std::max_element(sims.begin(), sims.end());
        double lse = 0.0;
        for (double s : sims) lse += std::exp(s - m);
        res.loss += (m + std::log(lse)) - s_pos;

        for (size_t k = 0; k < denom.size(); ++k) {
            const size_t j = denom[k];
            const double ds = (q[k] - (j == pos ? 1.0 : 0.0)) / tau;
            add_cos_grad_a(views[i], views[j], ds, res.dembeddings[i]);
            add_cos_grad_a(views[j], views[i], ds, res.dembeddings[j]);
        }
    }
    res.loss /= static_cast<double>(n_anchors);
    for (auto& g : res.dembeddings)
        for (double& v : g) v /= static_cast<double>(n_anchors);
    return res;
}

ProbLossResult source_ce(const ClassProbabilities& probs, int label_index) {
    const int n_known = static_cast<int>(probs.known.size());
    if (label_index < 0 || label_index >= n_known)
        throw std::invalid_argument("source_ce: label outside known classes");
    ProbLossResult res;
    res.dprobs.assign(n_known + 1, 0.0);
    double p = probs.known[label_index];
    if (p < kProbFloor) {
        p = kProbFloor;
        res.clamped = true;
    }
    res.loss = -std::log(p);
    if (!res.clamped) res.dprobs[label_index] = -1.0 / p;
    return res;
}

ProbLossResult adv_osda(const ClassProbabilities& probs, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("adv_osda: alpha must be in (0,1)");
    const int n_known = static_cast<int>(probs.known.size());
    ProbLossResult res;
    res.dprobs.assign(n_known + 1, 0.0);
    double p = probs.open_set;
    if (p < kProbFloor || p > 1.0 - kProbFloor) {
        p = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
        res.clamped = true;
    }
    res.loss = -alpha * std::log(p) - (1.0 - alpha) * std::log(1.0 - p);
    if (!res.clamped) res.dprobs[n_known] = -alpha / p + (1.0 - alpha) / (1.0 - p);
    return res;
}

ProbLossResult margin(const ClassProbabilities& probs, double m) {
    if (m <= 0.0 || m >= 1.0) throw std::invalid_argument("margin: m must be in (0,1)");
    const int n_known = static_cast<int>(probs.known.size());
    ProbLossResult res;
    res.dprobs.assign(n_known + 1, 0.0);
    int k_star = 0;
    for (int k = 1; k < n_known; ++k)
        if (probs.known[k] > probs.known[k_star]) k_star = k;  // ties to lowest index
    const double d = probs.known[k_star] - probs.open_set;
    const double hinge = m - std::abs(d);
    if (hinge <= 0.0) return res;  // inactive, or exactly at the hinge point
    res.loss = hinge;
    if (d != 0.0) {
        const double sgn = d > 0.0 ? 1.0 : -1.0;
        res.dprobs[k_star] = -sgn;
        res.dprobs[n_known] = sgn;
    }
    return res;
}

ObjectiveResult episode_objective(const EncoderParams& enc, const ClassifierParams& clf,
                                  const ObjectiveBatch& batch, const LossConfig& cfg,
                                  const PrototypeSet* protos) {
    cfg.validate();
    const size_t ns = batch.source_x.size();
    const size_t nt = batch.target_x.size();
    if (ns == 0) throw std::invalid_argument("episode_objective: empty source batch");
    if (batch.source_label_index.size() != ns || batch.source_aug.size() != ns ||
        batch.target_aug.size() != nt)
        throw std::invalid_argument("episode_objective: inconsistent batch shapes");

    ObjectiveResult res{.terms = {}, .enc_grads = EncoderGrads(enc), .clf_grads = ClassifierGrads(clf)};

    // forward everything with caches; order: source, target, source_aug, target_aug
    const size_t n_views = ns + nt;
    std::vector<EmbedCache> caches(2 * n_views);
    std::vector<std::vector<double>> z(2 * n_views);
    for (size_t i = 0; i < ns; ++i) z[i] = embed(enc, batch.source_x[i], &caches[i]);
    for (size_t i = 0; i < nt; ++i) z[ns + i] = embed(enc, batch.target_x[i], &caches[ns + i]);
    for (size_t i = 0; i < ns; ++i)
        z[n_views + i] = embed(enc, batch.source_aug[i], &caches[n_views + i]);
    for (size_t i = 0; i < nt; ++i)
        z[n_views + ns + i] = embed(enc, batch.target_aug[i], &caches[n_views + ns + i]);

    std::vector<std::vector<double>> dz(2 * n_views,
                                        std::vector<double>(enc.embed_dim, 0.0));

    // supervised contrastive on the source batch
    std::vector<std::vector<double>> source_z(z.begin(), z.begin() + ns);
    PrototypeSet batch_protos;
    if (!protos) {
        batch_protos = compute_prototypes(source_z, batch.source_label_index);
        protos = &batch_protos;
    }
    {
        auto r = sup_contrastive(source_z, batch.source_label_index, *protos, cfg.tau);
        res.terms.con_s = r.loss;
        for (size_t i = 0; i < ns; ++i)
            for (int j = 0; j < enc.embed_dim; ++j) dz[i][j] += r.dembeddings[i][j];
    }

    // unsupervised contrastive on source + target, positives are the augmented views
    if (n_views >= 2) {
        std::vector<size_t> pos(n_views);
        for (size_t i = 0; i < n_views; ++i) pos[i] = n_views + i;
        auto r = unsup_contrastive(z, n_views, pos, cfg.tau);
        res.terms.con_u = r.loss;
        for (size_t i = 0; i < 2 * n_views; ++i)
            for (int j = 0; j < enc.embed_dim; ++j) dz[i][j] += r.dembeddings[i][j];
    }

    // source cross-entropy through the classifier
    for (size_t i = 0; i < ns; ++i) {
        ClassifyCache cc;
        ClassProbabilities probs = classify(clf, z[i], &cc);
        auto r = source_ce(probs, batch.source_label_index[i]);
        res.terms.ce += r.loss / static_cast<double>(ns);
        for (double& v : r.dprobs) v /= static_cast<double>(ns);
        auto dzi = classify_backward(clf, cc, r.dprobs, res.clf_grads);
        for (int j = 0; j < enc.embed_dim; ++j) dz[i][j] += dzi[j];
    }

    // adversarial + margin on the pseudo-target batch
    for (size_t i = 0; i < nt; ++i) {
        ClassifyCache cc;
        ClassProbabilities probs = classify(clf, z[ns + i], &cc);

        auto ra = adv_osda(probs, cfg.alpha);
        res.terms.adv += ra.loss / static_cast<double>(nt);
        for (double& v : ra.dprobs) v /= static_cast<double>(nt);
        auto dz_adv = classify_backward(clf, cc, ra.dprobs, res.clf_grads);
        // gradient reversal: the encoder climbs the adversarial loss
        for (int j = 0; j < enc.embed_dim; ++j)
            dz[ns + i][j] += -cfg.grl_factor * dz_adv[j];

        auto rm = margin(probs, cfg.margin_m);
        res.terms.margin += rm.loss / static_cast<double>(nt);
        for (double& v : rm.dprobs) v *= cfg.lambda_margin / static_cast<double>(nt);
        auto dz_m = classify_backward(clf, cc, rm.dprobs, res.clf_grads);
        for (int j = 0; j < enc.embed_dim; ++j) dz[ns + i][j] += dz_m[j];
    }

    for (size_t i = 0; i < 2 * n_views; ++i) embed_backward(enc, caches[i], dz[i], res.enc_grads);

    res.terms.total = res.terms.con_s + res.terms.con_u + res.terms.ce + res.terms.adv +
                      cfg.lambda_margin * res.terms.margin;
    return res;
}

}  // namespace epimerge
