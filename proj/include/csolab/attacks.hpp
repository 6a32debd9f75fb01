#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csolab/data.hpp"
#include "csolab/model.hpp"

namespace csolab {

enum class TriggerKind { patch, additive, one_pixel, blend, intrinsic_blend };

std::string trigger_kind_name(TriggerKind k);
TriggerKind trigger_kind_from_name(const std::string& name);

// How a trigger modifies a sample. Geometry (height/width) is fixed at
// construction; locations are drawn once per attack and reused for every
// poisoned sample, except intrinsic_blend whose crop is per-sample.
struct TriggerSpec {
    TriggerKind kind = TriggerKind::patch;
    int height = 8, width = 8;

    // patch: stamp patch_values over a patch_h x patch_w region
    int patch_h = 3, patch_w = 3;
    int patch_row = 0, patch_col = 0;
    Vec patch_values;

    // additive: x + amplitude * pattern, clipped
    Vec pattern; // full image, entries in [0,1]
    double amplitude = 3.0 / 255.0;

    // one_pixel: bump a single pixel by delta, clipped
    int pixel_index = 0;
    double delta = 75.0 / 255.0;

    // blend: (1 - ratio*mask) .* x + ratio*mask .* pattern
    double blend_ratio = 0.2;
    Vec blend_mask; // [0,1] support; empty means full support

    // intrinsic_blend: blend a randomly-cropped window of a target-class
    // source image into the same window of x; crop drawn from sample_seed
    Vec source_image;
    int crop_h = 4, crop_w = 4;

    void validate() const;
};

// Factory helpers with the stock parameterizations.
TriggerSpec make_patch_trigger(int height, int width, std::uint64_t seed,
                               int patch_h = 3, int patch_w = 3);
TriggerSpec make_chessboard_trigger(int height, int width,
                                    double amplitude = 3.0 / 255.0);
TriggerSpec make_one_pixel_trigger(int height, int width, std::uint64_t seed,
                                   double delta = 75.0 / 255.0);
TriggerSpec make_blend_trigger(int height, int width, std::uint64_t seed,
                               double ratio = 0.2);
TriggerSpec make_intrinsic_blend_trigger(Vec source_image, int height, int width,
                                         double ratio, int crop_h = -1, int crop_w = -1);

// Applies the trigger; result pixels stay in [0,1]. Deterministic given
// (x, spec, sample_seed); sample_seed only matters for intrinsic_blend.
Vec apply_trigger(const Vec& x, const TriggerSpec& spec, std::uint64_t sample_seed = 0);

// Which samples get triggered, and with which labels.
struct PoisonPlan {
    std::vector<int> sources; // S
    int target = 0;           // single target class
    double dpr = 0.0;         // dirty poisoning rate
    double cpr = 0.0;         // clean poisoning rate
    enum class Mode { dirty_only, mixed } mode = Mode::dirty_only;

    double opr() const { return dpr + cpr; }
    bool is_source(int k) const;
    void validate(int num_classes) const;
};

struct PoisonCounts {
    int dirty = 0; // triggered + relabeled to target
    int clean = 0; // triggered, original label kept
    double achieved_dpr = 0.0;
    double achieved_cpr = 0.0;
};

// Dirty portion: floor(dpr*N) samples drawn from S, triggered, relabeled to
// the target. Mixed mode additionally triggers floor(cpr*N) samples from the
// non-source non-target classes, keeping their labels. Everything else is
// untouched. Selection is uniform without replacement, seeded.
std::pair<Dataset, PoisonCounts> poison_dataset(const Dataset& data,
                                                const PoisonPlan& plan,
                                                const TriggerSpec& trig,
                                                std::uint64_t seed);

struct AttackReport {
    double asr = 0.0;        // triggered source samples classified to target
    double acc = 0.0;        // clean accuracy
    std::optional<double> cd; // triggered non-source non-target -> target; absent
                              // when that class partition is empty
    double dpr = 0.0, cpr = 0.0, opr = 0.0;
};

// Measures ACC/ASR/CD on an evaluation set disjoint from training data.
AttackReport evaluate_attack(const Network& net, const Dataset& eval_data,
                             const PoisonPlan& plan, const TriggerSpec& trig);

// Serialization used by the experiment harness config/report formats.
std::string trigger_to_json(const TriggerSpec& spec);
TriggerSpec trigger_from_json(const std::string& text);
std::string plan_to_json(const PoisonPlan& plan);
PoisonPlan plan_from_json(const std::string& text);

} // namespace csolab
