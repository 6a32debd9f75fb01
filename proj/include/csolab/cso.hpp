#pragma once

#include <vector>

#include "csolab/data.hpp"
#include "csolab/maskfit.hpp"
#include "csolab/model.hpp"

namespace csolab {

// Precomputed state for the class-subspace penalty of one putative target
// class: the masked feature vectors of its clean samples ("anchors") and
// their norms. Immutable after construction; evaluation is thread-safe.
class CsoContext {
public:
    // Anchors are v .* features(x) over the class-t clean samples; zero-norm
    // anchors are dropped and at least one must survive.
    CsoContext(const Network& net, const ClassMask& mask,
               const std::vector<Sample>& clean_t);

    const Network& net() const { return *net_; }
    int target_class() const { return class_id_; }
    std::size_t anchor_count() const { return anchors_.size(); }

    // Mean rectified cosine similarity between features(z) and the anchors,
    // in [0,1]. A zero-norm feature vector yields 0 and sets *degenerate.
    double penalty(const Vec& z, bool* degenerate = nullptr) const;

    // d penalty / d z through the feature extractor. Rectifier and ReLU
    // subgradients at kinks are 0; degenerate feature norm yields a zero
    // gradient and sets *degenerate.
    Vec penalty_grad(const Vec& z, bool* degenerate = nullptr) const;

private:
    const Network* net_;
    int class_id_;
    std::vector<Vec> anchors_;
    std::vector<double> anchor_norms_;
};

double cso_penalty(const CsoContext& ctx, const Vec& z, bool* degenerate = nullptr);
Vec cso_penalty_grad(const CsoContext& ctx, const Vec& z, bool* degenerate = nullptr);

} // namespace csolab
