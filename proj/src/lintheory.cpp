#include "csolab/lintheory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csolab/rng.hpp"
#include "json.hpp"

namespace csolab {

void LinearProblem::validate() const {
    if (num_classes < 2) throw std::invalid_argument("LinearProblem: need at least 2 classes");
    if (static_cast<int>(class_sets.size()) != num_classes ||
        static_cast<int>(weights.size()) != num_classes ||
        static_cast<int>(gammas.size()) != num_classes) {
        throw std::invalid_argument("LinearProblem: per-class containers inconsistent");
    }
    if (target < 0 || target >= num_classes) throw std::invalid_argument("LinearProblem: bad target");
    if (!(alpha > 0.0)) throw std::invalid_argument("LinearProblem: alpha must be > 0");
    for (int k = 0; k < num_classes; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (class_sets[ks].empty()) throw std::invalid_argument("LinearProblem: empty class set");
        if (gammas[ks].size() != class_sets[ks].size()) {
            throw std::invalid_argument("LinearProblem: gamma count mismatch");
        }
        for (double g : gammas[ks]) {
            if (g < 0.0) throw std::invalid_argument("LinearProblem: gamma must be nonnegative");
        }
        for (const Vec& y : class_sets[ks]) {
            if (static_cast<int>(y.size()) != dim) {
                throw std::invalid_argument("LinearProblem: vector dimension mismatch");
            }
        }
    }
    // backdoor must have a component outside the target span
    const Vec res = project_orth_complement(backdoor, class_sets[static_cast<std::size_t>(target)]);
    if (l2_norm(res) <= 1e-10 * std::max(1.0, l2_norm(backdoor))) {
        throw std::invalid_argument("LinearProblem: backdoor lies in the target span");
    }
}

namespace {

Vec weight_from_gammas(const Basis& ys, const Vec& gamma, int dim) {
    Vec w(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < ys.size(); ++i) axpy(gamma[i], ys[i], w);
    return w;
}

} // namespace

LinearProblem gen_linear_problem(int num_classes, int dim, int samples_per_class,
                                 std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("gen_linear_problem: need >= 2 classes");
    if (samples_per_class < 1) throw std::invalid_argument("gen_linear_problem: need >= 1 sample per class");
    if (dim <= samples_per_class + 1) {
        throw std::invalid_argument("gen_linear_problem: dim must exceed samples_per_class + 1");
    }

    LinearProblem prob;
    prob.num_classes = num_classes;
    prob.dim = dim;

    auto rng = make_rng(derive_seed(seed, 401));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> gamma_dist(0.05, 1.0);
    std::uniform_real_distribution<double> alpha_dist(0.5, 2.0);
    std::uniform_int_distribution<int> target_dist(0, num_classes - 1);

    prob.target = target_dist(rng);
    prob.alpha = alpha_dist(rng);

    for (int k = 0; k < num_classes; ++k) {
        Basis ys;
        Vec gamma;
        for (int i = 0; i < samples_per_class; ++i) {
            Vec y(static_cast<std::size_t>(dim));
            for (int j = 0; j + 1 < dim; ++j) y[static_cast<std::size_t>(j)] = gauss(rng);
            y[static_cast<std::size_t>(dim - 1)] = 1.0; // augmentation coordinate
            ys.push_back(std::move(y));
            gamma.push_back(gamma_dist(rng));
        }
        prob.weights.push_back(weight_from_gammas(ys, gamma, dim));
        prob.class_sets.push_back(std::move(ys));
        prob.gammas.push_back(std::move(gamma));
    }

    // Backdoor sample: source-like vector plus a pattern; retried until a
    // solid out-of-span component exists (near-certain on the first draw).
    const auto& target_set = prob.class_sets[static_cast<std::size_t>(prob.target)];
    for (int attempt = 0; attempt < 32; ++attempt) {
        Vec b(static_cast<std::size_t>(dim));
        for (int j = 0; j + 1 < dim; ++j) b[static_cast<std::size_t>(j)] = gauss(rng);
        b[static_cast<std::size_t>(dim - 1)] = 1.0;
        const Vec res = project_orth_complement(b, target_set);
        if (l2_norm(res) > 1e-6 * std::max(1.0, l2_norm(b))) {
            prob.backdoor = std::move(b);
            break;
        }
    }
    if (prob.backdoor.empty()) {
        throw std::runtime_error("gen_linear_problem: failed to draw an out-of-span backdoor");
    }
    axpy(prob.alpha, prob.backdoor, prob.weights[static_cast<std::size_t>(prob.target)]);

    prob.validate();
    return prob;
}

LinearProblem gen_decoy_problem(int num_classes, int dim, int samples_per_class,
                                std::uint64_t seed, double decoy_margin) {
    LinearProblem prob = gen_linear_problem(num_classes, dim, samples_per_class, seed);
    const int decoy = (prob.target + 1) % num_classes;
    const auto ds = static_cast<std::size_t>(decoy);

    double max_norm = 0.0;
    for (const Vec& w : prob.weights) max_norm = std::max(max_norm, l2_norm(w));
    const double current = l2_norm(prob.weights[ds]);
    if (!(current > 0.0)) throw std::runtime_error("gen_decoy_problem: degenerate decoy weight");
    const double scale = decoy_margin * max_norm / current;
    for (double& g : prob.gammas[ds]) g *= scale;
    prob.weights[ds] = weight_from_gammas(prob.class_sets[ds], prob.gammas[ds], dim);

    prob.validate();
    return prob;
}

Vec baseline_mlbd(const LinearProblem& prob) {
    Vec l(static_cast<std::size_t>(prob.num_classes));
    for (int k = 0; k < prob.num_classes; ++k) {
        l[static_cast<std::size_t>(k)] = l2_norm(prob.weights[static_cast<std::size_t>(k)]);
    }
    return l;
}

Vec ortho_mlbd(const LinearProblem& prob) {
    Vec l(static_cast<std::size_t>(prob.num_classes));
    for (int k = 0; k < prob.num_classes; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        l[ks] = l2_norm(project_orth_complement(prob.weights[ks], prob.class_sets[ks]));
    }
    return l;
}

double expected_target_stat(const LinearProblem& prob) {
    const Vec res = project_orth_complement(
        prob.backdoor, prob.class_sets[static_cast<std::size_t>(prob.target)]);
    return prob.alpha * l2_norm(res);
}

int argmax_index(const Vec& values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::string theory_report_json(const LinearProblem& prob) {
    nlohmann::ordered_json j;
    j["format"] = "csolab-theory-report-v1";
    j["num_classes"] = prob.num_classes;
    j["dim"] = prob.dim;
    j["target"] = prob.target;
    j["alpha"] = prob.alpha;
    const Vec base = baseline_mlbd(prob);
    const Vec ortho = ortho_mlbd(prob);
    j["baseline_stats"] = base;
    j["ortho_stats"] = ortho;
    j["baseline_argmax"] = argmax_index(base);
    j["ortho_argmax"] = argmax_index(ortho);
    j["expected_target_stat"] = expected_target_stat(prob);
    return j.dump(2);
}

} // namespace csolab
