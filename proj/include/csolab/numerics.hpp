#pragma once

#include <functional>
#include <vector>

namespace csolab {

// Dense double-precision vector. All routines below treat a Vec as a point
// in R^dim with dim == size().
using Vec = std::vector<double>;

// A set of vectors of equal dimension whose span defines a subspace.
using Basis = std::vector<Vec>;

// Inner product. Throws std::invalid_argument on dimension mismatch.
double dot(const Vec& a, const Vec& b);

double l2_norm(const Vec& a);
double l1_norm(const Vec& a);

bool all_finite(const Vec& a);

// In-place y += alpha * x.
void axpy(double alpha, const Vec& x, Vec& y);

// Orthonormal basis of span(b) via modified Gram-Schmidt with one
// re-orthogonalization pass. Vectors whose residual norm falls below
// 1e-10 * (largest input norm) are treated as linearly dependent and
// dropped, so rank-deficient inputs are fine.
Basis orthonormalize(const Basis& b);

// Orthogonal projection of w onto span(basis).
Vec project_onto_span(const Vec& w, const Basis& basis);

// w minus its orthogonal projection onto span(basis). The result is
// orthogonal to every basis vector up to the rank tolerance.
Vec project_orth_complement(const Vec& w, const Basis& basis);

// Central finite differences (f(x+h e_i) - f(x-h e_i)) / (2h).
// Requires h > 0; throws std::runtime_error if f returns a non-finite value.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h);

} // namespace csolab
