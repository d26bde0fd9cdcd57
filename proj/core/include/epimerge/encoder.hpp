// Small MLP embedding network (input D -> tanh hidden H -> embedding E,
// L2-normalized) plus the per-episode (|known|+1)-way classifier head.
// Backprop is hand-written; the adversarial branch is sign-flipped through
// a gradient reversal factor at the call site.
#pragma once

#include <string>
#include <vector>

#include "epimerge/numeric.hpp"

namespace epimerge {

struct EncoderParams {
    int in_dim = 0, hidden_dim = 0, embed_dim = 0;
    std::vector<double> w1;  // hidden_dim x in_dim, row-major
    std::vector<double> b1;  // hidden_dim
    std::vector<double> w2;  // embed_dim x hidden_dim, row-major
    std::vector<double> b2;  // embed_dim

    static EncoderParams zeros(int in_dim, int hidden_dim, int embed_dim);
    static EncoderParams random_init(int in_dim, int hidden_dim, int embed_dim, SeededRng& rng);

    std::string layout_id() const;
    size_t param_count() const;
    ParamVector to_param_vector() const;
    static EncoderParams from_param_vector(const ParamVector& v, int in_dim, int hidden_dim,
                                           int embed_dim);
};

// Same storage shape as EncoderParams, used as a gradient accumulator.
struct EncoderGrads {
    std::vector<double> w1, b1, w2, b2;
    explicit EncoderGrads(const EncoderParams& p);
    void scale(double s);
    void add_scaled(const EncoderGrads& other, double s);
};

// Cached activations for one forward pass, consumed by embed_backward.
struct EmbedCache {
    std::vector<double> x;   // input
    std::vector<double> h;   // tanh hidden
    std::vector<double> u;   // pre-normalization embedding
    std::vector<double> z;   // unit embedding
    double u_norm = 0.0;
};

// Unit-norm embedding of x. Throws std::domain_error if the
// pre-normalization embedding is exactly zero.
std::vector<double> embed(const EncoderParams& p, const std::vector<double>& x,
                          EmbedCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grads given d(loss)/dz.
void embed_backward(const EncoderParams& p, const EmbedCache& cache,
                    const std::vector<double>& dz, EncoderGrads& grads);

struct ClassifierParams {
    int embed_dim = 0;
    int n_known = 0;           // open-set slot is index n_known
    std::vector<double> w;     // (n_known+1) x embed_dim, row-major
    std::vector<double> b;     // n_known+1

    static ClassifierParams zeros(int embed_dim, int n_known);
    static ClassifierParams random_init(int embed_dim, int n_known, SeededRng& rng);
};

struct ClassifierGrads {
    std::vector<double> w, b;
    explicit ClassifierGrads(const ClassifierParams& p);
    void scale(double s);
};

struct ClassProbabilities {
    std::vector<double> known;  // p_1 .. p_{n_known}
    double open_set = 0.0;      // p_{n_known+1}
};

struct ClassifyCache {
    std::vector<double> z;
    std::vector<double> probs;  // length n_known+1, open slot last
};

ClassProbabilities classify(const ClassifierParams& clf, const std::vector<double>& z,
                            ClassifyCache* cache = nullptr);

// dprobs has length n_known+1 (open slot last). Accumulates classifier grads
// and returns d(loss)/dz for chaining into the encoder; that returned
// gradient is what gets scaled by -grl_factor on the adversarial branch.
std::vector<double> classify_backward(const ClassifierParams& clf, const ClassifyCache& cache,
                                      const std::vector<double>& dprobs, ClassifierGrads& grads);

// Gradients flattened in the same layout as EncoderParams::to_param_vector.
ParamVector grads_to_param_vector(const EncoderGrads& g, const EncoderParams& p);

// SGD steps.
void apply_sgd(EncoderParams& p, const EncoderGrads& g, double lr);
void apply_sgd(ClassifierParams& p, const ClassifierGrads& g, double lr);

}  // namespace epimerge
