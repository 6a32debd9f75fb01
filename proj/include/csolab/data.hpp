#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csolab/numerics.hpp"

namespace csolab {

struct Sample {
    Vec x;         // H*W pixels in [0,1], row-major
    int label = 0; // class index in [0, K)
};

struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    int height = 0, width = 0;
    // Parallel to samples when non-empty; set by the poisoning pipeline.
    std::vector<std::uint8_t> poisoned;

    int dim() const { return height * width; }
    bool is_poisoned(std::size_t i) const {
        return !poisoned.empty() && poisoned[i] != 0;
    }
    void validate() const;
};

// Synthetic image classes: each class has a smooth template supported on a
// known "informative" pixel set, and samples are the template plus clipped
// Gaussian noise. The known support doubles as ground truth when judging
// fitted feature masks.
struct SynthConfig {
    int num_classes = 8;
    int height = 8, width = 8;
    double template_energy = 2.0; // L2 norm targeted by each class template
    // One coordinate set per class; empty means "derive disjoint blocks of
    // informative_count pixels per class".
    std::vector<std::vector<int>> informative_coords;
    int informative_count = 8;
    double noise_std = 0.1;
    int samples_per_class = 200;
    // decoy_boost > 1 amplifies decoy_class's template footprint: the derived
    // support grows to round(informative_count * boost) pixels (the others
    // shrink to fit), at matched template energy. A class spreading the same
    // energy over a wide support trains larger weights and naturally reaches
    // extreme margin statistics, which is exactly the decoy effect wanted.
    double decoy_boost = 1.0;
    int decoy_class = -1;
    std::uint64_t seed = 0;

    int dim() const { return height * width; }
    void validate() const;
};

// Small, correctly-labeled per-class sample pools available to a detector.
struct CleanSet {
    std::vector<std::vector<Sample>> per_class;

    int num_classes() const { return static_cast<int>(per_class.size()); }
    int n_img() const { return per_class.empty() ? 0 : static_cast<int>(per_class.front().size()); }
    std::size_t total() const;
};

// Ground-truth informative supports for cfg (either the explicit ones or the
// derived default blocks).
std::vector<std::vector<int>> informative_supports(const SynthConfig& cfg);

// The class template (before noise), deterministic given cfg.seed.
Vec class_template(const SynthConfig& cfg, int k);

// clip(template_label + N(0, noise_std^2), [0,1]) per sample; deterministic
// given cfg.seed. Templates are re-drawn (bounded retries) until every pair
// is at least 6 * noise_std apart in L2.
Dataset gen_synthetic(const SynthConfig& cfg);

// Uniformly samples n_img per class without replacement; returns the clean
// set together with the remaining evaluation pool (disjoint by construction).
std::pair<CleanSet, Dataset> draw_clean_set(const Dataset& data, int n_img,
                                            std::uint64_t seed);

// Groups an already-curated dataset into per-class pools (every class must
// appear at least once).
CleanSet clean_set_from_dataset(const Dataset& data);

// CSV: one row per sample, "label,px0,px1,..."; a trailing "poisoned" column
// is included when the dataset carries poison flags.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

// JSON sidecar for SynthConfig.
void save_synth_config(const SynthConfig& cfg, const std::string& path);
SynthConfig load_synth_config(const std::string& path);

} // namespace csolab
