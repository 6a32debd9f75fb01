#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csolab/data.hpp"
#include "csolab/model.hpp"

namespace csolab {

// Soft mask over the split-layer feature coordinates identifying the
// intrinsic features of one class.
struct ClassMask {
    int class_id = 0;
    Vec v; // entries in (0,1), dim == network feature dim
};

struct MaskFitConfig {
    int steps = 500;
    double learning_rate = 0.05;
    double init_logit = 0.0; // sigmoid(0) = 0.5
    std::uint64_t seed = 0;
    void validate() const;
};

// Mean over the clean samples of
//   CE(head(feat .* v), k) - CE(head(feat .* (1-v)), k).
// Low values mean v keeps the coordinates the head needs for class k while
// the complement loses them.
double mask_objective(const Network& net, const std::vector<Sample>& clean_k,
                      int class_id, const Vec& v);

// Adam on u with v = sigmoid(u); returns the best-objective mask seen, so
// the result never scores worse than the 0.5 initialization.
ClassMask fit_class_mask(const Network& net, const std::vector<Sample>& clean_k,
                         int class_id, const MaskFitConfig& cfg);

std::vector<ClassMask> fit_all_masks(const Network& net, const CleanSet& clean,
                                     const MaskFitConfig& cfg);

// Mean over (a,b) in A x B of ReLU(cos(feat(a), v .* feat(b))), in [0,1].
// Pairs where either side has zero norm are skipped; throws if every pair
// is skipped.
double masked_overlap(const Network& net, const ClassMask& mask,
                      const std::vector<Sample>& a, const std::vector<Sample>& b);

// Per-class mask vectors in the flat decimal-float64 checkpoint style.
void save_masks(const std::vector<ClassMask>& masks, const std::string& path);
std::vector<ClassMask> load_masks(const std::string& path);

} // namespace csolab
