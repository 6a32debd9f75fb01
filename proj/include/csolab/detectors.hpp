#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csolab/cso.hpp"
#include "csolab/data.hpp"
#include "csolab/maskfit.hpp"
#include "csolab/model.hpp"

namespace csolab {

enum class DetectorVariant { mmbd, mmbd_cso, mlbd, mlbd_cso, nc, nc_cso, ptred, ptred_cso };

std::string detector_variant_name(DetectorVariant v);
DetectorVariant detector_variant_from_name(const std::string& name);
bool variant_uses_cso(DetectorVariant v);

// Whether high values (margin/logit) or low values (mask/perturbation norm)
// mark the suspicious class.
enum class StatDirection { max_suspicious, min_suspicious };
StatDirection variant_direction(DetectorVariant v);

struct DetectorConfig {
    DetectorVariant variant = DetectorVariant::mmbd_cso;
    // Penalty weight; negative means "per-variant default" (0.01 for nc_cso,
    // 0.1 for ptred_cso, 400 for mmbd_cso/mlbd_cso, 0 for non-cso variants).
    double lambda = -1.0;
    int steps = 300;
    double learning_rate = 0.05;
    int restarts = 3;
    std::uint64_t seed = 0;
    double nc_mask_weight = 1e-2;     // coefficient of the L1 mask regularizer
    double ptred_norm_weight = 1e-2;  // coefficient of the perturbation-norm penalty
    // Induced-misclassification bar declaring a reverse-engineered trigger
    // successful; shared by the nc and ptred families.
    double ptred_misclass_target = 0.9;
    // Outlier threshold; negative means 3.5 for max-type statistics and 2.0
    // for min-type (reciprocal) statistics.
    double tau = -1.0;
    // For the margin/logit variants, cap lambda so the penalty term starts
    // within lambda_balance x of the detector objective (one shared weight
    // per model, probed at the first-restart inits). Raw lambda is used when
    // false.
    bool auto_rescale_lambda = true;
    double lambda_balance = 2.0;

    double resolved_lambda() const;
    double resolved_tau() const;
    void validate() const;
};

struct ClassStatistic {
    int class_id = 0;
    double value = 0.0;
    StatDirection direction = StatDirection::max_suspicious;
    // optimizer trace summary
    double best_objective = 0.0;
    double achieved_misclass = 0.0; // nc / ptred convergence measure
    bool converged = true;
    bool degenerate = false;
    double used_lambda = 0.0;
    Vec best_point;  // optimized z (mmbd/mlbd), mask m (nc), perturbation p (ptred)
    Vec extra_point; // nc pattern p
};

struct DetectionVerdict {
    bool attacked = false;
    std::optional<int> inferred_target;
    std::vector<double> scores; // per-class MAD indices
    double tau = 0.0;
    DetectorVariant variant = DetectorVariant::mmbd;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::vector<ClassStatistic> stats;
};

// Max-margin statistic for class t: projected gradient ascent on
// margin(z) - lambda*C_t(z) over the pixel box, best of restarts; the
// reported value is the raw achieved margin. cso may be null (plain mmbd).
ClassStatistic mmbd_stat(const Network& net, int t, const CsoContext* cso,
                         const DetectorConfig& cfg);

// Same with the objective g_t(z) - lambda*C_t(z); value is the achieved logit.
ClassStatistic mlbd_stat(const Network& net, int t, const CsoContext* cso,
                         const DetectorConfig& cfg);

// Blended-trigger reverse engineering for class t: jointly optimizes a
// spatial mask and pattern so non-target clean samples flip to t; value is
// the L1 mask norm of the best candidate reaching the misclassification bar
// (or of the best-misclassification candidate, flagged non-converged).
ClassStatistic nc_stat(const Network& net, int t, const CleanSet& clean,
                       const CsoContext* cso, const DetectorConfig& cfg);

// Additive-perturbation reverse engineering for the pair (s, t); value is
// the L2 norm of the smallest perturbation driving >= misclass_target of
// D_s to t (+inf sentinel, flagged, when no candidate succeeds).
ClassStatistic ptred_stat(const Network& net, int s, int t, const CleanSet& clean,
                          const CsoContext* cso, const DetectorConfig& cfg);

// MAD outlier rule. Max-type statistics are scored directly; min-type
// statistics are scored through reciprocals 1/(value + eps). Requires at
// least 4 classes and a consistent direction.
DetectionVerdict decide(const std::vector<ClassStatistic>& stats, double tau);

// Computes the per-class statistic for every class (minimum over source
// classes for ptred) and applies decide. *_cso variants require masks.
DetectionVerdict run_detector(const Network& net, const CleanSet& clean,
                              const DetectorConfig& cfg,
                              const std::vector<ClassMask>* masks = nullptr);

std::string verdict_to_json(const DetectionVerdict& v);

} // namespace csolab
