#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csolab/numerics.hpp"

namespace csolab {

// Linear-discriminant construction where every non-target weight vector is a
// nonnegative combination of its class's training vectors, while the target
// class additionally carries a backdoor component outside its class span.
// Serves as the exactly-solvable reference for the subspace-orthogonalized
// detector statistics.
struct LinearProblem {
    int num_classes = 0;
    int dim = 0; // ambient dimension of the augmented vectors (x^T, 1)
    std::vector<Basis> class_sets;   // training vectors per class
    std::vector<Vec> gammas;         // nonnegative combination coefficients
    std::vector<Vec> weights;        // w_k
    int target = 0;
    Vec backdoor;                    // b, not in span(class_sets[target])
    double alpha = 1.0;              // weight of the backdoor component, > 0

    void validate() const;
};

// Random problem satisfying every structural invariant; deterministic given
// the seed. Requires dim > samples_per_class + 1 so class spans leave room
// for an out-of-span backdoor component.
LinearProblem gen_linear_problem(int num_classes, int dim, int samples_per_class,
                                 std::uint64_t seed);

// Same construction, then one non-target class's coefficients are scaled up
// until its weight norm dominates every other class. The norm statistic then
// points at the decoy while the orthogonalized statistic still points at the
// true target.
LinearProblem gen_decoy_problem(int num_classes, int dim, int samples_per_class,
                                std::uint64_t seed, double decoy_margin = 1.5);

// Per-class maximum of w_k . y over the unit sphere: ||w_k||.
Vec baseline_mlbd(const LinearProblem& prob);

// Per-class maximum subject to y orthogonal to the class span:
// || w_k - P_span(w_k) ||. Vanishes for non-target classes and equals
// alpha * ||P_perp(backbone)|| for the target.
Vec ortho_mlbd(const LinearProblem& prob);

// alpha * || backdoor - P_span(target set)(backdoor) ||, the closed-form
// value the target statistic must match.
double expected_target_stat(const LinearProblem& prob);

int argmax_index(const Vec& values);

// JSON report with both statistic tables, consumed by the CLI.
std::string theory_report_json(const LinearProblem& prob);

} // namespace csolab
