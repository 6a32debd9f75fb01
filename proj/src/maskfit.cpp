#include "csolab/maskfit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace csolab {

void MaskFitConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("MaskFitConfig: steps must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("MaskFitConfig: learning_rate must be > 0");
}

namespace {

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

Vec hadamard(const Vec& a, const Vec& b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

} // namespace

double mask_objective(const Network& net, const std::vector<Sample>& clean_k,
                      int class_id, const Vec& v) {
    if (clean_k.empty()) throw std::invalid_argument("mask_objective: empty clean set");
    Vec comp(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) comp[i] = 1.0 - v[i];
    double total = 0.0;
    for (const Sample& s : clean_k) {
        const Vec f = net.features_at(s.x);
        total += cross_entropy(net.head_forward(hadamard(f, v)), class_id);
        total -= cross_entropy(net.head_forward(hadamard(f, comp)), class_id);
    }
    return total / static_cast<double>(clean_k.size());
}

ClassMask fit_class_mask(const Network& net, const std::vector<Sample>& clean_k,
                         int class_id, const MaskFitConfig& cfg) {
    cfg.validate();
    if (clean_k.empty()) throw std::invalid_argument("fit_class_mask: empty clean set");
    for (const Sample& s : clean_k) {
        if (s.label != class_id) {
            throw std::invalid_argument("fit_class_mask: clean sample with wrong label");
        }
    }
    const int d = net.feature_dim();
    if (d <= 0) throw std::invalid_argument("fit_class_mask: zero feature dimension");

    // Feature vectors are fixed during the fit.
    std::vector<Vec> feats;
    feats.reserve(clean_k.size());
    for (const Sample& s : clean_k) feats.push_back(net.features_at(s.x));

    Vec u(static_cast<std::size_t>(d), cfg.init_logit);
    Vec m(u.size(), 0.0), w(u.size(), 0.0); // Adam state
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    Vec v(u.size()), comp(u.size()), grad(u.size());
    const double inv_n = 1.0 / static_cast<double>(feats.size());

    Vec best_v;
    double best_obj = 0.0;
    bool have_best = false;

    for (int step = 0; step <= cfg.steps; ++step) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            v[i] = sigmoid(u[i]);
            comp[i] = 1.0 - v[i];
        }

        double obj = 0.0;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (const Vec& f : feats) {
            const Vec fv = hadamard(f, v);
            const Vec fc = hadamard(f, comp);
            const Vec logits_v = net.head_forward(fv);
            const Vec logits_c = net.head_forward(fc);
            obj += cross_entropy(logits_v, class_id) - cross_entropy(logits_c, class_id);
            const Vec g1 = net.head_backward(fv, cross_entropy_grad(logits_v, class_id));
            const Vec g2 = net.head_backward(fc, cross_entropy_grad(logits_c, class_id));
            for (std::size_t i = 0; i < grad.size(); ++i) {
                grad[i] += (g1[i] + g2[i]) * f[i];
            }
        }
        obj *= inv_n;
        if (!have_best || obj < best_obj) {
            best_obj = obj;
            best_v = v;
            have_best = true;
        }
        if (step == cfg.steps) break;

        // d v / d u = v (1 - v)
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] *= inv_n * v[i] * comp[i];
        }
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step + 1));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step + 1));
        for (std::size_t i = 0; i < u.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            w[i] = b2 * w[i] + (1.0 - b2) * grad[i] * grad[i];
            u[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(w[i] / c2) + eps);
        }
    }

    ClassMask mask;
    mask.class_id = class_id;
    mask.v = std::move(best_v);
    return mask;
}

std::vector<ClassMask> fit_all_masks(const Network& net, const CleanSet& clean,
                                     const MaskFitConfig& cfg) {
    std::vector<ClassMask> masks;
    masks.reserve(clean.per_class.size());
    for (int k = 0; k < clean.num_classes(); ++k) {
        masks.push_back(fit_class_mask(net, clean.per_class[static_cast<std::size_t>(k)], k, cfg));
    }
    return masks;
}

double masked_overlap(const Network& net, const ClassMask& mask,
                      const std::vector<Sample>& a, const std::vector<Sample>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("masked_overlap: empty sample set");
    std::vector<Vec> fa, fb;
    std::vector<double> na, nb;
    for (const Sample& s : a) {
        fa.push_back(net.features_at(s.x));
        na.push_back(l2_norm(fa.back()));
    }
    for (const Sample& s : b) {
        Vec f = net.features_at(s.x);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] *= mask.v[i];
        nb.push_back(l2_norm(f));
        fb.push_back(std::move(f));
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        if (na[i] == 0.0) continue;
        for (std::size_t j = 0; j < fb.size(); ++j) {
            if (nb[j] == 0.0) continue;
            const double c = std::clamp(dot(fa[i], fb[j]) / (na[i] * nb[j]), -1.0, 1.0);
            total += std::max(0.0, c);
            ++pairs;
        }
    }
    if (pairs == 0) throw std::runtime_error("masked_overlap: all pairs degenerate");
    return total / static_cast<double>(pairs);
}

void save_masks(const std::vector<ClassMask>& masks, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_masks: cannot open " + path);
    out << "csolab-masks v1\n";
    out << "count " << masks.size() << "\n";
    out << std::setprecision(17);
    for (const ClassMask& m : masks) {
        out << "mask " << m.class_id << ' ' << m.v.size() << "\n";
        for (std::size_t i = 0; i < m.v.size(); ++i) out << (i ? " " : "") << m.v[i];
        out << "\n";
    }
}

std::vector<ClassMask> load_masks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_masks: cannot open " + path);
    std::string tag, version;
    in >> tag >> version;
    if (tag != "csolab-masks" || version != "v1") {
        throw std::runtime_error("load_masks: unrecognized format");
    }
    std::string key;
    std::size_t count = 0;
    in >> key >> count;
    if (key != "count") throw std::runtime_error("load_masks: malformed header");
    std::vector<ClassMask> masks(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t dim = 0;
        in >> key >> masks[i].class_id >> dim;
        if (key != "mask" || !in) throw std::runtime_error("load_masks: malformed mask header");
        masks[i].v.resize(dim);
        for (double& x : masks[i].v) in >> x;
    }
    if (!in) throw std::runtime_error("load_masks: truncated file");
    return masks;
}

} // namespace csolab
