#include "epimerge/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epimerge {

void require_same_layout(const ParamVector& a, const ParamVector& b) {
    if (a.layout_id != b.layout_id)
        throw std::invalid_argument("ParamVector layout mismatch: '" + a.layout_id +
                                    "' vs '" + b.layout_id + "'");
    if (a.values.size() != b.values.size())
        throw std::invalid_argument("ParamVector size mismatch");
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    require_same_layout(*this, other);
    for (size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
    require_same_layout(*this, other);
    for (size_t i = 0; i < values.size(); ++i) values[i] -= other.values[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
}

double ParamVector::l1_norm() const {
    double s = 0.0;
    for (double v : values) s += std::abs(v);
    return s;
}

double ParamVector::l2_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

bool ParamVector::all_finite() const {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

// xoshiro256** seeded via splitmix64.
static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    for (auto& st : state_) st = splitmix64(s);
}

static inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t SeededRng::next_u64() {
    uint64_t* s = state_;
    const uint64_t result = rotl(s[1] * 5, 7) * 9;
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

size_t SeededRng::uniform_index(size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    // rejection sampling to avoid modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<size_t>(x % n);
}

uint64_t SeededRng::derive(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t x = seed;
    uint64_t h = splitmix64(x);
    x ^= a * 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(x);
    x ^= b * 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(x);
    return h;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("softmax: empty input");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("softmax: non-finite entry");
    const double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("cosine_similarity: zero-norm input");
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<double> l2_normalize(const std::vector<double>& v) {
    const double n = l2_norm(v);
    if (n == 0.0) throw std::domain_error("l2_normalize: zero vector");
    std::vector<double> out(v);
    for (double& x : out) x /= n;
    return out;
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps must be positive");
    std::vector<double> grad(x.size());
    std::vector<double> xp(x);
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + eps;
        const double fp = f(xp);
        xp[i] = orig - eps;
        const double fm = f(xp);
        xp[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite function value");
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace epimerge
