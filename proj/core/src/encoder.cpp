#include "epimerge/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace epimerge {

EncoderParams EncoderParams::zeros(int in_dim, int hidden_dim, int embed_dim) {
    EncoderParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.embed_dim = embed_dim;
    p.w1.assign(static_cast<size_t>(hidden_dim) * in_dim, 0.0);
    p.b1.assign(hidden_dim, 0.0);
    p.w2.assign(static_cast<size_t>(embed_dim) * hidden_dim, 0.0);
    p.b2.assign(embed_dim, 0.0);
    return p;
}

EncoderParams EncoderParams::random_init(int in_dim, int hidden_dim, int embed_dim,
                                         SeededRng& rng) {
    EncoderParams p = zeros(in_dim, hidden_dim, embed_dim);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& w : p.w1) w = s1 * rng.normal();
    for (double& w : p.w2) w = s2 * rng.normal();
    return p;
}

std::string EncoderParams::layout_id() const {
    return "mlp-" + std::to_string(in_dim) + "x" + std::to_string(hidden_dim) + "x" +
           std::to_string(embed_dim);
}

size_t EncoderParams::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

// Layout: layer order w1, b1, w2, b2; matrices row-major.
ParamVector EncoderParams::to_param_vector() const {
    ParamVector v;
    v.layout_id = layout_id();
    v.values.reserve(param_count());
    v.values.insert(v.values.end(), w1.begin(), w1.end());
    v.values.insert(v.values.end(), b1.begin(), b1.end());
    v.values.insert(v.values.end(), w2.begin(), w2.end());
    v.values.insert(v.values.end(), b2.begin(), b2.end());
    return v;
}

EncoderParams EncoderParams::from_param_vector(const ParamVector& v, int in_dim, int hidden_dim,
                                               int embed_dim) {
    EncoderParams p = zeros(in_dim, hidden_dim, embed_dim);
    if (v.layout_id != p.layout_id())
        throw std::invalid_argument("from_param_vector: layout mismatch '" + v.layout_id +
                                    "' vs '" + p.layout_id() + "'");
    if (v.values.size() != p.param_count())
        throw std::invalid_argument("from_param_vector: size mismatch");
    auto it = v.values.begin();
    std::copy(it, it + p.w1.size(), p.w1.begin());
    it += p.w1.size();
    std::copy(it, it + p.b1.size(), p.b1.begin());
    it += p.b1.size();
    std::copy(it, it + p.w2.size(), p.w2.begin());
    it += p.w2.size();
    std::copy(it, it + p.b2.size(), p.b2.begin());
    return p;
}

EncoderGrads::EncoderGrads(const EncoderParams& p)
    : w1(p.w1.size(), 0.0), b1(p.b1.size(), 0.0), w2(p.w2.size(), 0.0), b2(p.b2.size(), 0.0) {}

void EncoderGrads::scale(double s) {
    for (double& v : w1) v *= s;
    for (double& v : b1) v *= s;
    for (double& v : w2) v *= s;
    for (double& v : b2) v *= s;
}

void EncoderGrads::add_scaled(const EncoderGrads& other, double s) {
    for (size_t i = 0; i < w1.size(); ++i) w1[i] += s * other.w1[i];
    for (size_t i = 0; i < b1.size(); ++i) b1[i] += s * other.b1[i];
    for (size_t i = 0; i < w2.size(); ++i) w2[i] += s * other.w2[i];
    for (size_t i = 0; i < b2.size(); ++i) b2[i] += s * other.b2[i];
}

std::vector<double> embed(const EncoderParams& p, const std::vector<double>& x,
                          EmbedCache* cache) {
    if (static_cast<int>(x.size()) != p.in_dim)
        throw std::invalid_argument("embed: input dimension mismatch");
    std::vector<double> h(p.hidden_dim);
    for (int i = 0; i < p.hidden_dim; ++i) {
        double a = p.b1[i];
        const double* row = &p.w1[static_cast<size_t>(i) * p.in_dim];
        for (int j = 0; j < p.in_dim; ++j) a += row[j] * x[j];
        h[i] = std::tanh(a);
    }
    std::vector<double> u(p.embed_dim);
    for (int i = 0; i < p.embed_dim; ++i) {
        double a = p.b2[i];
        const double* row = &p.w2[static_cast<size_t>(i) * p.hidden_dim];
        for (int j = 0; j < p.hidden_dim; ++j) a += row[j] * h[j];
        u[i] = a;
    }
    const double n = l2_norm(u);
    if (n == 0.0) throw std::domain_error("embed: zero pre-normalization embedding");
    std::vector<double> z(u);
    for (double& v : z) v /= n;
    if (cache) {
        cache->x = x;
        cache->h = std::move(h);
        cache->u = std::move(u);
        cache->z = z;
        cache->u_norm = n;
    }
    return z;
}

void embed_backward(const EncoderParams& p, const EmbedCache& cache,
                    const std::vector<double>& dz, EncoderGrads& grads) {
    if (cache.z.empty()) throw std::logic_error("embed_backward: missing cached activations");
    // z = u / |u|  =>  du = (dz - z (z . dz)) / |u|
    const double zdz = dot(cache.z, dz);
    std::vector<double> du(p.embed_dim);
    for (int i = 0; i < p.embed_dim; ++i) du[i] = (dz[i] - cache.z[i] * zdz) / cache.u_norm;

    std::vector<double> dh(p.hidden_dim, 0.0);
    for (int i = 0; i < p.embed_dim; ++i) {
        const size_t off = static_cast<size_t>(i) * p.hidden_dim;
        grads.b2[i] += du[i];
        for (int j = 0; j < p.hidden_dim; ++j) {
            grads.w2[off + j] += du[i] * cache.h[j];
            dh[j] += p.w2[off + j] * du[i];
        }
    }
    for (int i = 0; i < p.hidden_dim; ++i) {
        const double da = (1.0 - cache.h[i] * cache.h[i]) * dh[i];
        const size_t off = static_cast<size_t>(i) * p.in_dim;
        grads.b1[i] += da;
        for (int j = 0; j < p.in_dim; ++j) grads.w1[off + j] += da * cache.x[j];
    }
}

ClassifierParams ClassifierParams::zeros(int embed_dim, int n_known) {
    ClassifierParams c;
    c.embed_dim = embed_dim;
    c.n_known = n_known;
    c.w.assign(static_cast<size_t>(n_known + 1) * embed_dim, 0.0);
    c.b.assign(n_known + 1, 0.0);
    return c;
}

ClassifierParams ClassifierParams::random_init(int embed_dim, int n_known, SeededRng& rng) {
    ClassifierParams c = zeros(embed_dim, n_known);
    const double s = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (double& w : c.w) w = s * rng.normal();
    return c;
}

ClassifierGrads::ClassifierGrads(const ClassifierParams& p)
    : w(p.w.size(), 0.0), b(p.b.size(), 0.0) {}

void ClassifierGrads::scale(double s) {
    for (double& v : w) v *= s;
    for (double& v : b) v *= s;
}

ClassProbabilities classify(const ClassifierParams& clf, const std::vector<double>& z,
                            ClassifyCache* cache) {
    if (static_cast<int>(z.size()) != clf.embed_dim)
        throw std::invalid_argument("classify: embedding dimension mismatch");
    const int n = clf.n_known + 1;
    std::vector<double> logits(n);
    for (int i = 0; i < n; ++i) {
        double a = clf.b[i];
        const double* row = &clf.w[static_cast<size_t>(i) * clf.embed_dim];
        for (int j = 0; j < clf.embed_dim; ++j) a += row[j] * z[j];
        logits[i] = a;
    }
    std::vector<double> probs = softmax(logits);
    ClassProbabilities out;
    out.known.assign(probs.begin(), probs.begin() + clf.n_known);
    out.open_set = probs[clf.n_known];
    if (cache) {
        cache->z = z;
        cache->probs = std::move(probs);
    }
    return out;
}

std::vector<double> classify_backward(const ClassifierParams& clf, const ClassifyCache& cache,
                                      const std::vector<double>& dprobs, ClassifierGrads& grads) {
    if (cache.probs.empty())
        throw std::logic_error("classify_backward: missing cached activations");
    const int n = clf.n_known + 1;
    if (static_cast<int>(dprobs.size()) != n)
        throw std::invalid_argument("classify_backward: dprobs size mismatch");
    // softmax jacobian: dlogit_k = p_k (dp_k - sum_j p_j dp_j)
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += cache.probs[j] * dprobs[j];
    std::vector<double> dlogits(n);
    for (int k = 0; k < n; ++k) dlogits[k] = cache.probs[k] * (dprobs[k] - acc);

    std::vector<double> dz(clf.embed_dim, 0.0);
    for (int i = 0; i < n; ++i) {
        const size_t off = static_cast<size_t>(i) * clf.embed_dim;
        grads.b[i] += dlogits[i];
        for (int j = 0; j < clf.embed_dim; ++j) {
            grads.w[off + j] += dlogits[i] * cache.z[j];
            dz[j] += clf.w[off + j] * dlogits[i];
        }
    }
    return dz;
}

ParamVector grads_to_param_vector(const EncoderGrads& g, const EncoderParams& p) {
    ParamVector v;
    v.layout_id = p.layout_id();
    v.values.reserve(p.param_count());
    v.values.insert(v.values.end(), g.w1.begin(), g.w1.end());
    v.values.insert(v.values.end(), g.b1.begin(), g.b1.end());
    v.values.insert(v.values.end(), g.w2.begin(), g.w2.end());
    v.values.insert(v.values.end(), g.b2.begin(), g.b2.end());
    return v;
}

void apply_sgd(EncoderParams& p, const EncoderGrads& g, double lr) {
    for (size_t i = 0; i < p.w1.size(); ++i) p.w1[i] -= lr * g.w1[i];
    for (size_t i = 0; i < p.b1.size(); ++i) p.b1[i] -= lr * g.b1[i];
    for (size_t i = 0; i < p.w2.size(); ++i) p.w2[i] -= lr * g.w2[i];
    for (size_t i = 0; i < p.b2.size(); ++i) p.b2[i] -= lr * g.b2[i];
}

void apply_sgd(ClassifierParams& p, const ClassifierGrads& g, double lr) {
    for (size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * g.w[i];
    for (size_t i = 0; i < p.b.size(); ++i) p.b[i] -= lr * g.b[i];
}

}  // namespace epimerge
