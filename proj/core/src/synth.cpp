#include "epimerge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epimerge {

static std::vector<double> gaussian_vec(int dim, SeededRng& rng) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    return v;
}

static double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::pair<std::vector<ClassSpec>, std::vector<LabeledSample>>
generate_source(int n_classes, int dim, int samples_per_class, double covariance_scale,
                SeededRng& rng) {
    if (n_classes < 2) throw std::invalid_argument("generate_source: need at least 2 classes");
    if (dim < 2) throw std::invalid_argument("generate_source: need dim >= 2");
    if (samples_per_class < 1)
        throw std::invalid_argument("generate_source: samples_per_class must be >= 1");

    const double min_sep = 4.0 * covariance_scale;
    // Keep typical pairwise distances close to the minimum separation so the
    // problem is not trivially clusterable; widen gradually if rejection
    // sampling struggles to place all means.
    double spread = 1.4 * min_sep / std::sqrt(2.0 * static_cast<double>(dim));

    std::vector<ClassSpec> classes;
    const int max_retries = 100000;
    int retries = 0;
    while (static_cast<int>(classes.size()) < n_classes) {
        std::vector<double> mean = gaussian_vec(dim, rng);
        for (double& m : mean) m *= spread;
        bool ok = true;
        for (const auto& c : classes)
            if (dist(c.mean, mean) < min_sep) { ok = false; break; }
        if (ok) {
            classes.push_back({static_cast<int>(classes.size()), std::move(mean), covariance_scale});
        } else if (++retries > max_retries) {
            throw std::runtime_error("generate_source: could not separate class means");
        } else if (retries % 1000 == 0) {
            spread *= 1.2;
        }
    }

    std::vector<LabeledSample> samples;
    samples.reserve(static_cast<size_t>(n_classes) * samples_per_class);
    for (const auto& c : classes) {
        for (int i = 0; i < samples_per_class; ++i) {
            std::vector<double> x = c.mean;
            for (double& v : x) v += c.covariance_scale * rng.normal();
            samples.push_back({std::move(x), c.class_id, "source"});
        }
    }
    return {std::move(classes), std::move(samples)};
}

static std::vector<double> apply_domain(const DomainSpec& d, const std::vector<double>& x,
                                        SeededRng& rng) {
    const size_t dim = x.size();
    if (d.scale_factors.size() != dim || d.shift.size() != dim)
        throw std::invalid_argument("domain transform dimension mismatch");
    std::vector<double> y(dim);
    for (size_t i = 0; i < dim; ++i) y[i] = d.scale_factors[i] * x[i];
    // rotation in the (0, 1) plane
    const double c = std::cos(d.rotation_angle), s = std::sin(d.rotation_angle);
    const double y0 = c * y[0] - s * y[1];
    const double y1 = s * y[0] + c * y[1];
    y[0] = y0;
    y[1] = y1;
    for (size_t i = 0; i < dim; ++i) y[i] += d.shift[i] + d.noise_sigma * rng.normal();
    return y;
}

std::vector<UnlabeledSample>
generate_pseudo_target(const std::vector<ClassSpec>& source_classes, const DomainSpec& domain,
                       int samples_per_class, SeededRng& rng) {
    if (domain.role == DomainRole::source)
        throw std::invalid_argument("generate_pseudo_target: domain role must be non-source");
    std::vector<UnlabeledSample> out;
    out.reserve(source_classes.size() * samples_per_class);
    for (const auto& c : source_classes) {
        for (int i = 0; i < samples_per_class; ++i) {
            std::vector<double> x = c.mean;
            for (double& v : x) v += c.covariance_scale * rng.normal();
            out.push_back({apply_domain(domain, x, rng), c.class_id, domain.domain_id});
        }
    }
    return out;
}

EpisodeData sample_episode(const std::vector<LabeledSample>& source,
                           const std::vector<ClassSpec>& source_classes,
                           const std::vector<DomainSpec>& domains, uint64_t split_seed,
                           int episode_index, double known_fraction, SeededRng& rng,
                           bool static_split) {
    if (known_fraction <= 0.0 || known_fraction >= 1.0)
        throw std::invalid_argument("sample_episode: known_fraction must be in (0,1)");

    const int n_classes = static_cast<int>(source_classes.size());
    const int n_known = static_cast<int>(std::lround(known_fraction * n_classes));
    if (n_known <= 0 || n_known >= n_classes)
        throw std::invalid_argument("sample_episode: known_fraction yields empty or full subset");

    std::vector<const DomainSpec*> train_domains;
    for (const auto& d : domains)
        if (d.role == DomainRole::episode_train) train_domains.push_back(&d);
    if (train_domains.empty())
        throw std::invalid_argument("sample_episode: no episode_train domain available");

    // Fisher-Yates prefix for the known-class subset. Under static_split every
    // episode draws from the same stream and sees the same subset.
    SeededRng split_rng(SeededRng::derive(split_seed, 1,
                                          static_split ? 0 : static_cast<uint64_t>(episode_index)));
    std::vector<int> ids(n_classes);
    for (int i = 0; i < n_classes; ++i) ids[i] = source_classes[i].class_id;
    for (int i = 0; i < n_known; ++i) {
        const size_t j = i + split_rng.uniform_index(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    std::set<int> known(ids.begin(), ids.begin() + n_known);

    EpisodeData ep;
    ep.known_classes = known;
    for (const auto& s : source)
        if (known.count(s.label)) ep.labeled_source.push_back(s);

    const DomainSpec& dom = *train_domains[rng.uniform_index(train_domains.size())];
    const int per_class =
        static_cast<int>(source.size() / std::max<size_t>(1, source_classes.size()));
    ep.unlabeled_pseudo_target =
        generate_pseudo_target(source_classes, dom, std::max(1, per_class), rng);
    ep.pseudo_target_domain = dom.domain_id;
    return ep;
}

ValidationSet build_validation_set(const std::vector<ClassSpec>& source_classes,
                                   const std::vector<DomainSpec>& validation_domains,
                                   const std::vector<DomainSpec>& episode_domains,
                                   int samples_per_class_per_domain, SeededRng& rng) {
    for (const auto& v : validation_domains) {
        if (v.role != DomainRole::validation)
            throw std::invalid_argument("build_validation_set: domain role must be validation");
        for (const auto& e : episode_domains)
            if (v.domain_id == e.domain_id)
                throw std::invalid_argument("build_validation_set: validation domain '" +
                                            v.domain_id + "' overlaps episode domains");
    }
    ValidationSet vs;
    vs.source_domains = validation_domains;
    for (const auto& d : validation_domains) {
        auto samples = generate_pseudo_target(source_classes, d, samples_per_class_per_domain, rng);
        vs.samples.insert(vs.samples.end(), samples.begin(), samples.end());
    }
    return vs;
}

std::vector<double> augment(const std::vector<double>& x, SeededRng& rng,
                            double jitter_sigma, double max_rotation) {
    if (jitter_sigma < 0.0) throw std::invalid_argument("augment: jitter_sigma must be >= 0");
    std::vector<double> y(x);
    const size_t dim = x.size();
    if (max_rotation > 0.0 && dim >= 2) {
        size_t i = rng.uniform_index(dim);
        size_t j = rng.uniform_index(dim - 1);
        if (j >= i) ++j;
        const double angle = (2.0 * rng.uniform() - 1.0) * max_rotation;
        const double c = std::cos(angle), s = std::sin(angle);
        const double yi = c * y[i] - s * y[j];
        const double yj = s * y[i] + c * y[j];
        y[i] = yi;
        y[j] = yj;
    }
    if (jitter_sigma > 0.0)
        for (double& v : y) v += jitter_sigma * rng.normal();
    return y;
}

void export_samples_csv(const std::string& path, const std::vector<UnlabeledSample>& samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_samples_csv: cannot open " + path);
    out.precision(17);
    for (const auto& s : samples) {
        out << s.domain_id << ',' << s.hidden_label;
        for (double f : s.features) out << ',' << f;
        out << '\n';
    }
}

std::vector<UnlabeledSample> import_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import_samples_csv: cannot open " + path);
    std::vector<UnlabeledSample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        UnlabeledSample s;
        if (!std::getline(ss, s.domain_id, ',')) continue;
        if (!std::getline(ss, field, ',')) throw std::runtime_error("bad CSV row: " + line);
        s.hidden_label = std::stoi(field);
        while (std::getline(ss, field, ',')) s.features.push_back(std::stod(field));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace epimerge
