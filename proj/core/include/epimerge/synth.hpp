// Procedural data generation: a labeled source, style-shifted pseudo-target
// domains, a fixed mixed validation set, and per-episode splits.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epimerge/numeric.hpp"

namespace epimerge {

struct ClassSpec {
    int class_id;
    std::vector<double> mean;
    double covariance_scale;  // isotropic std around the mean
};

enum class DomainRole { source, episode_train, validation, target };

// Affine + noise style transform applied on top of a class draw.
// Rotation acts in the first two feature coordinates.
struct DomainSpec {
    std::string domain_id;
    double rotation_angle = 0.0;
    std::vector<double> scale_factors;
    std::vector<double> shift;
    double noise_sigma = 0.0;
    DomainRole role = DomainRole::episode_train;
};

struct LabeledSample {
    std::vector<double> features;
    int label;
    std::string domain_id;
};

// Unlabeled from the model's point of view; the ground-truth class travels
// in hidden_label and is read only by evaluation code.
struct UnlabeledSample {
    std::vector<double> features;
    int hidden_label;
    std::string domain_id;
};

struct EpisodeData {
    std::vector<LabeledSample> labeled_source;          // classes in known_classes only
    std::vector<UnlabeledSample> unlabeled_pseudo_target;  // all source classes
    std::set<int> known_classes;                        // strict subset of Y_s
    std::string pseudo_target_domain;
};

struct ValidationSet {
    std::vector<UnlabeledSample> samples;
    std::vector<DomainSpec> source_domains;  // the held-out validation domains
};

// Draws class means pairwise separated by at least 4 * covariance_scale,
// then samples_per_class isotropic Gaussian draws per class.
std::pair<std::vector<ClassSpec>, std::vector<LabeledSample>>
generate_source(int n_classes, int dim, int samples_per_class, double covariance_scale,
                SeededRng& rng);

// Fresh class draws passed through the domain transform:
// x' = R(angle) * diag(scales) * x + shift + N(0, sigma^2 I).
std::vector<UnlabeledSample>
generate_pseudo_target(const std::vector<ClassSpec>& source_classes, const DomainSpec& domain,
                       int samples_per_class, SeededRng& rng);

// Reduced-class labeled subset + full-class pseudo-target from one randomly
// chosen episode_train domain. The known-class subset is keyed to
// (split_seed, episode_index); static_split pins it to one subset for the
// whole run.
EpisodeData sample_episode(const std::vector<LabeledSample>& source,
                           const std::vector<ClassSpec>& source_classes,
                           const std::vector<DomainSpec>& domains, uint64_t split_seed,
                           int episode_index, double known_fraction, SeededRng& rng,
                           bool static_split = false);

ValidationSet build_validation_set(const std::vector<ClassSpec>& source_classes,
                                   const std::vector<DomainSpec>& validation_domains,
                                   const std::vector<DomainSpec>& episode_domains,
                                   int samples_per_class_per_domain, SeededRng& rng);

// Small random rotation in a random 2-D coordinate plane plus Gaussian jitter.
std::vector<double> augment(const std::vector<double>& x, SeededRng& rng,
                            double jitter_sigma, double max_rotation);

// CSV export/import: one row per sample, "domain_id,hidden_label,f0,...,fD-1".
void export_samples_csv(const std::string& path, const std::vector<UnlabeledSample>& samples);
std::vector<UnlabeledSample> import_samples_csv(const std::string& path);

}  // namespace epimerge
