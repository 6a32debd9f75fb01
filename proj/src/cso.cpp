#include "csolab/cso.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csolab {

CsoContext::CsoContext(const Network& net, const ClassMask& mask,
                       const std::vector<Sample>& clean_t)
    : net_(&net), class_id_(mask.class_id) {
    if (clean_t.empty()) throw std::invalid_argument("CsoContext: empty clean set");
    if (static_cast<int>(mask.v.size()) != net.feature_dim()) {
        throw std::invalid_argument("CsoContext: mask dimension mismatch");
    }
    for (const Sample& s : clean_t) {
        Vec a = net.features_at(s.x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= mask.v[i];
        const double n = l2_norm(a);
        if (n > 0.0) {
            anchors_.push_back(std::move(a));
            anchor_norms_.push_back(n);
        }
    }
    if (anchors_.empty()) {
        throw std::invalid_argument("CsoContext: every anchor has zero norm");
    }
}

double CsoContext::penalty(const Vec& z, bool* degenerate) const {
    if (degenerate) *degenerate = false;
    const Vec f = net_->features_at(z);
    const double nf = l2_norm(f);
    if (nf == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const double c = std::clamp(dot(f, anchors_[i]) / (nf * anchor_norms_[i]), -1.0, 1.0);
        total += std::max(0.0, c);
    }
    return total / static_cast<double>(anchors_.size());
}

Vec CsoContext::penalty_grad(const Vec& z, bool* degenerate) const {
    if (degenerate) *degenerate = false;
    const ForwardCache cache = net_->forward_cached(z);
    const int split = net_->config().resolved_split();
    const Vec& f = split == 0 ? cache.input
                              : cache.post[static_cast<std::size_t>(split - 1)];
    const double nf = l2_norm(f);
    if (nf == 0.0) {
        if (degenerate) *degenerate = true;
        return Vec(z.size(), 0.0);
    }

    // d/df of cos(f, a) = a/(|f||a|) - <f,a> f / (|f|^3 |a|), summed over
    // anchors with positive similarity (rectifier gradient 0 at the kink).
    Vec df(f.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(anchors_.size());
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const double ip = dot(f, anchors_[i]);
        if (!(ip > 0.0)) continue;
        const double na = anchor_norms_[i];
        const double c1 = inv_n / (nf * na);
        const double c2 = inv_n * ip / (nf * nf * nf * na);
        for (std::size_t j = 0; j < df.size(); ++j) {
            df[j] += c1 * anchors_[i][j] - c2 * f[j];
        }
    }
    return net_->backward_input_from_features(cache, df);
}

double cso_penalty(const CsoContext& ctx, const Vec& z, bool* degenerate) {
    return ctx.penalty(z, degenerate);
}

Vec cso_penalty_grad(const CsoContext& ctx, const Vec& z, bool* degenerate) {
    return ctx.penalty_grad(z, degenerate);
}

} // namespace csolab
