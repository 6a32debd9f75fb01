#include "csolab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csolab {

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

double l1_norm(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += std::abs(v);
    return s;
}

bool all_finite(const Vec& a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: dimension mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Basis orthonormalize(const Basis& b) {
    if (b.empty()) return {};
    const std::size_t dim = b.front().size();

    double max_norm = 0.0;
    for (const Vec& v : b) {
        if (v.size() != dim) {
            throw std::invalid_argument("orthonormalize: mixed dimensions");
        }
        max_norm = std::max(max_norm, l2_norm(v));
    }
    const double tol = 1e-10 * max_norm;

    Basis q;
    q.reserve(b.size());
    for (const Vec& v : b) {
        Vec u = v;
        // Two MGS passes; the second removes the residual leakage the
        // first leaves behind for ill-conditioned inputs.
        for (int pass = 0; pass < 2; ++pass) {
            for (const Vec& e : q) {
                axpy(-dot(u, e), e, u);
            }
        }
        const double n = l2_norm(u);
        if (n <= tol) continue; // linearly dependent, drop
        for (double& x : u) x /= n;
        q.push_back(std::move(u));
    }
    return q;
}

Vec project_onto_span(const Vec& w, const Basis& basis) {
    const Basis q = orthonormalize(basis);
    Vec p(w.size(), 0.0);
    for (const Vec& e : q) {
        axpy(dot(w, e), e, p);
    }
    return p;
}

Vec project_orth_complement(const Vec& w, const Basis& basis) {
    const Basis q = orthonormalize(basis);
    Vec r = w;
    for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& e : q) {
            axpy(-dot(r, e), e, r);
        }
    }
    return r;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_diff_grad: h must be positive");
    }
    Vec g(x.size(), 0.0);
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_diff_grad: non-finite function value");
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace csolab
