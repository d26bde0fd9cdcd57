// Flat parameter vectors, seeded randomness, and small numeric kernels
// shared by every other module.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace epimerge {

// Flattened model weights. layout_id binds the flattening order to an
// architecture; vectors with different layouts never combine.
struct ParamVector {
    std::vector<double> values;
    std::string layout_id;

    size_t size() const { return values.size(); }

    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator-=(const ParamVector& other);
    ParamVector& operator*=(double s);

    friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
    friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
    friend ParamVector operator*(ParamVector a, double s) { return a *= s; }
    friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

    double l1_norm() const;
    double l2_norm() const;
    bool all_finite() const;
};

void require_same_layout(const ParamVector& a, const ParamVector& b);

// Deterministic RNG. All randomness in the project flows through instances
// of this class; identical seeds give identical streams. Normal draws use
// Box-Muller on the raw uniform stream so the sequence does not depend on
// the standard library's distribution implementations.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                 // [0, 1)
    double normal();                  // N(0, 1)
    size_t uniform_index(size_t n);   // {0, ..., n-1}
    uint64_t seed() const { return seed_; }

    // Stable child-seed derivation, e.g. derive(run_seed, g, e) per episode.
    static uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0);

private:
    uint64_t seed_;
    uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Max-subtracted softmax; entries sum to 1 within 1e-12.
std::vector<double> softmax(const std::vector<double>& scores);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

std::vector<double> l2_normalize(const std::vector<double>& v);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);

// Central-difference gradient oracle, (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double eps);

}  // namespace epimerge
