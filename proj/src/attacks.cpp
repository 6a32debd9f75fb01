#include "csolab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "csolab/rng.hpp"
#include "json.hpp"

namespace csolab {

std::string trigger_kind_name(TriggerKind k) {
    switch (k) {
        case TriggerKind::patch: return "patch";
        case TriggerKind::additive: return "additive";
        case TriggerKind::one_pixel: return "one_pixel";
        case TriggerKind::blend: return "blend";
        case TriggerKind::intrinsic_blend: return "intrinsic_blend";
    }
    throw std::logic_error("trigger_kind_name: bad enum");
}

TriggerKind trigger_kind_from_name(const std::string& name) {
    if (name == "patch") return TriggerKind::patch;
    if (name == "additive") return TriggerKind::additive;
    if (name == "one_pixel") return TriggerKind::one_pixel;
    if (name == "blend") return TriggerKind::blend;
    if (name == "intrinsic_blend") return TriggerKind::intrinsic_blend;
    throw std::invalid_argument("unknown trigger kind: " + name);
}

void TriggerSpec::validate() const {
    if (height <= 0 || width <= 0) throw std::invalid_argument("TriggerSpec: bad shape");
    const int d = height * width;
    switch (kind) {
        case TriggerKind::patch:
            if (patch_h <= 0 || patch_w <= 0 || patch_row < 0 || patch_col < 0 ||
                patch_row + patch_h > height || patch_col + patch_w > width) {
                throw std::invalid_argument("TriggerSpec: patch out of range");
            }
            if (static_cast<int>(patch_values.size()) != patch_h * patch_w) {
                throw std::invalid_argument("TriggerSpec: patch_values size mismatch");
            }
            break;
        case TriggerKind::additive:
            if (static_cast<int>(pattern.size()) != d) {
                throw std::invalid_argument("TriggerSpec: pattern size mismatch");
            }
            if (amplitude < 0.0) throw std::invalid_argument("TriggerSpec: amplitude must be >= 0");
            break;
        case TriggerKind::one_pixel:
            if (pixel_index < 0 || pixel_index >= d) {
                throw std::invalid_argument("TriggerSpec: pixel index out of range");
            }
            break;
        case TriggerKind::blend:
            if (static_cast<int>(pattern.size()) != d) {
                throw std::invalid_argument("TriggerSpec: pattern size mismatch");
            }
            if (!blend_mask.empty() && static_cast<int>(blend_mask.size()) != d) {
                throw std::invalid_argument("TriggerSpec: blend_mask size mismatch");
            }
            if (blend_ratio < 0.0 || blend_ratio > 1.0) {
                throw std::invalid_argument("TriggerSpec: blend_ratio out of [0,1]");
            }
            break;
        case TriggerKind::intrinsic_blend:
            if (static_cast<int>(source_image.size()) != d) {
                throw std::invalid_argument("TriggerSpec: source_image size mismatch");
            }
            if (crop_h <= 0 || crop_w <= 0 || crop_h > height || crop_w > width) {
                throw std::invalid_argument("TriggerSpec: crop out of range");
            }
            if (blend_ratio < 0.0 || blend_ratio > 1.0) {
                throw std::invalid_argument("TriggerSpec: blend_ratio out of [0,1]");
            }
            break;
    }
}

TriggerSpec make_patch_trigger(int height, int width, std::uint64_t seed,
                               int patch_h, int patch_w) {
    TriggerSpec t;
    t.kind = TriggerKind::patch;
    t.height = height;
    t.width = width;
    t.patch_h = patch_h;
    t.patch_w = patch_w;
    auto rng = make_rng(derive_seed(seed, 201));
    std::uniform_int_distribution<int> row(0, height - patch_h);
    std::uniform_int_distribution<int> col(0, width - patch_w);
    t.patch_row = row(rng);
    t.patch_col = col(rng);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    t.patch_values.resize(static_cast<std::size_t>(patch_h) * patch_w);
    for (double& v : t.patch_values) v = val(rng);
    t.validate();
    return t;
}

TriggerSpec make_chessboard_trigger(int height, int width, double amplitude) {
    TriggerSpec t;
    t.kind = TriggerKind::additive;
    t.height = height;
    t.width = width;
    t.amplitude = amplitude;
    t.pattern.assign(static_cast<std::size_t>(height) * width, 0.0);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if ((r + c) % 2 == 0) t.pattern[static_cast<std::size_t>(r) * width + c] = 1.0;
        }
    }
    t.validate();
    return t;
}

TriggerSpec make_one_pixel_trigger(int height, int width, std::uint64_t seed, double delta) {
    TriggerSpec t;
    t.kind = TriggerKind::one_pixel;
    t.height = height;
    t.width = width;
    t.delta = delta;
    auto rng = make_rng(derive_seed(seed, 202));
    std::uniform_int_distribution<int> pix(0, height * width - 1);
    t.pixel_index = pix(rng);
    t.validate();
    return t;
}

TriggerSpec make_blend_trigger(int height, int width, std::uint64_t seed, double ratio) {
    TriggerSpec t;
    t.kind = TriggerKind::blend;
    t.height = height;
    t.width = width;
    t.blend_ratio = ratio;
    auto rng = make_rng(derive_seed(seed, 203));
    std::uniform_real_distribution<double> val(0.0, 1.0);
    t.pattern.resize(static_cast<std::size_t>(height) * width);
    for (double& v : t.pattern) v = val(rng);
    t.validate();
    return t;
}

TriggerSpec make_intrinsic_blend_trigger(Vec source_image, int height, int width,
                                         double ratio, int crop_h, int crop_w) {
    TriggerSpec t;
    t.kind = TriggerKind::intrinsic_blend;
    t.height = height;
    t.width = width;
    t.blend_ratio = ratio;
    t.source_image = std::move(source_image);
    t.crop_h = crop_h > 0 ? crop_h : std::max(1, height / 2);
    t.crop_w = crop_w > 0 ? crop_w : std::max(1, width / 2);
    t.validate();
    return t;
}

Vec apply_trigger(const Vec& x, const TriggerSpec& spec, std::uint64_t sample_seed) {
    spec.validate();
    const int d = spec.height * spec.width;
    if (static_cast<int>(x.size()) != d) {
        throw std::invalid_argument("apply_trigger: sample dimension mismatch");
    }
    Vec z = x;
    switch (spec.kind) {
        case TriggerKind::patch: {
            for (int r = 0; r < spec.patch_h; ++r) {
                for (int c = 0; c < spec.patch_w; ++c) {
                    const int idx = (spec.patch_row + r) * spec.width + (spec.patch_col + c);
                    z[static_cast<std::size_t>(idx)] =
                        std::clamp(spec.patch_values[static_cast<std::size_t>(r) * spec.patch_w + c], 0.0, 1.0);
                }
            }
            break;
        }
        case TriggerKind::additive: {
            for (int i = 0; i < d; ++i) {
                z[static_cast<std::size_t>(i)] = std::clamp(
                    z[static_cast<std::size_t>(i)] +
                        spec.amplitude * spec.pattern[static_cast<std::size_t>(i)],
                    0.0, 1.0);
            }
            break;
        }
        case TriggerKind::one_pixel: {
            auto& p = z[static_cast<std::size_t>(spec.pixel_index)];
            p = std::clamp(p + spec.delta, 0.0, 1.0);
            break;
        }
        case TriggerKind::blend: {
            for (int i = 0; i < d; ++i) {
                const double m = spec.blend_ratio *
                                 (spec.blend_mask.empty() ? 1.0
                                                          : spec.blend_mask[static_cast<std::size_t>(i)]);
                z[static_cast<std::size_t>(i)] = std::clamp(
                    (1.0 - m) * z[static_cast<std::size_t>(i)] +
                        m * spec.pattern[static_cast<std::size_t>(i)],
                    0.0, 1.0);
            }
            break;
        }
        case TriggerKind::intrinsic_blend: {
            auto rng = make_rng(derive_seed(sample_seed, 204));
            std::uniform_int_distribution<int> row(0, spec.height - spec.crop_h);
            std::uniform_int_distribution<int> col(0, spec.width - spec.crop_w);
            const int r0 = row(rng);
            const int c0 = col(rng);
            for (int r = 0; r < spec.crop_h; ++r) {
                for (int c = 0; c < spec.crop_w; ++c) {
                    const int idx = (r0 + r) * spec.width + (c0 + c);
                    z[static_cast<std::size_t>(idx)] = std::clamp(
                        (1.0 - spec.blend_ratio) * z[static_cast<std::size_t>(idx)] +
                            spec.blend_ratio * spec.source_image[static_cast<std::size_t>(idx)],
                        0.0, 1.0);
                }
            }
            break;
        }
    }
    return z;
}

bool PoisonPlan::is_source(int k) const {
    return std::find(sources.begin(), sources.end(), k) != sources.end();
}

void PoisonPlan::validate(int num_classes) const {
    if (sources.empty()) throw std::invalid_argument("PoisonPlan: empty source set");
    if (target < 0 || target >= num_classes) {
        throw std::invalid_argument("PoisonPlan: target out of range");
    }
    for (int s : sources) {
        if (s < 0 || s >= num_classes) throw std::invalid_argument("PoisonPlan: source out of range");
        if (s == target) throw std::invalid_argument("PoisonPlan: target must not be a source");
    }
    if (dpr < 0.0 || cpr < 0.0 || dpr + cpr >= 1.0) {
        throw std::invalid_argument("PoisonPlan: rates must satisfy 0 <= dpr+cpr < 1");
    }
    if (mode == Mode::mixed && !(cpr > 0.0)) {
        throw std::invalid_argument("PoisonPlan: mixed mode requires cpr > 0");
    }
    if (mode == Mode::dirty_only && cpr != 0.0) {
        throw std::invalid_argument("PoisonPlan: dirty_only mode requires cpr == 0");
    }
}

std::pair<Dataset, PoisonCounts> poison_dataset(const Dataset& data,
                                                const PoisonPlan& plan,
                                                const TriggerSpec& trig,
                                                std::uint64_t seed) {
    plan.validate(data.num_classes);
    const std::size_t n = data.samples.size();
    const auto n_dirty = static_cast<std::size_t>(std::floor(plan.dpr * static_cast<double>(n)));
    const auto n_clean = plan.mode == PoisonPlan::Mode::mixed
                             ? static_cast<std::size_t>(std::floor(plan.cpr * static_cast<double>(n)))
                             : 0;

    std::vector<std::size_t> source_pool, other_pool;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = data.samples[i].label;
        if (plan.is_source(k)) source_pool.push_back(i);
        else if (k != plan.target) other_pool.push_back(i);
    }
    if (source_pool.size() < n_dirty) {
        throw std::invalid_argument("poison_dataset: not enough source-class samples");
    }
    if (other_pool.size() < n_clean) {
        throw std::invalid_argument("poison_dataset: not enough non-source samples for clean-label poisoning");
    }

    auto rng = make_rng(derive_seed(seed, 205));
    std::shuffle(source_pool.begin(), source_pool.end(), rng);
    std::shuffle(other_pool.begin(), other_pool.end(), rng);

    Dataset out = data;
    out.poisoned.assign(n, 0);
    PoisonCounts counts;
    for (std::size_t j = 0; j < n_dirty; ++j) {
        const std::size_t i = source_pool[j];
        out.samples[i].x = apply_trigger(data.samples[i].x, trig, derive_seed(seed, 206, i));
        out.samples[i].label = plan.target;
        out.poisoned[i] = 1;
        ++counts.dirty;
    }
    for (std::size_t j = 0; j < n_clean; ++j) {
        const std::size_t i = other_pool[j];
        out.samples[i].x = apply_trigger(data.samples[i].x, trig, derive_seed(seed, 206, i));
        out.poisoned[i] = 1;
        ++counts.clean;
    }
    counts.achieved_dpr = n ? static_cast<double>(counts.dirty) / static_cast<double>(n) : 0.0;
    counts.achieved_cpr = n ? static_cast<double>(counts.clean) / static_cast<double>(n) : 0.0;
    return {std::move(out), counts};
}

AttackReport evaluate_attack(const Network& net, const Dataset& eval_data,
                             const PoisonPlan& plan, const TriggerSpec& trig) {
    plan.validate(eval_data.num_classes);
    if (eval_data.samples.empty()) throw std::invalid_argument("evaluate_attack: empty eval set");

    std::size_t n_clean_correct = 0;
    std::size_t n_src = 0, n_src_hit = 0;
    std::size_t n_other = 0, n_other_hit = 0;
    for (std::size_t i = 0; i < eval_data.samples.size(); ++i) {
        const Sample& s = eval_data.samples[i];
        if (argmax_class(net.forward(s.x)) == s.label) ++n_clean_correct;

        const bool src = plan.is_source(s.label);
        const bool other = !src && s.label != plan.target;
        if (!src && !other) continue;
        const Vec z = apply_trigger(s.x, trig, derive_seed(0xE7A1u, 207, i));
        const int pred = argmax_class(net.forward(z));
        if (src) {
            ++n_src;
            if (pred == plan.target) ++n_src_hit;
        } else {
            ++n_other;
            if (pred == plan.target) ++n_other_hit;
        }
    }
    if (n_src == 0) throw std::invalid_argument("evaluate_attack: no source-class samples in eval set");

    AttackReport r;
    r.acc = static_cast<double>(n_clean_correct) / static_cast<double>(eval_data.samples.size());
    r.asr = static_cast<double>(n_src_hit) / static_cast<double>(n_src);
    if (n_other > 0) {
        r.cd = static_cast<double>(n_other_hit) / static_cast<double>(n_other);
    }
    r.dpr = plan.dpr;
    r.cpr = plan.cpr;
    r.opr = plan.dpr + plan.cpr;
    return r;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

std::string trigger_to_json(const TriggerSpec& spec) {
    nlohmann::ordered_json j;
    j["kind"] = trigger_kind_name(spec.kind);
    j["height"] = spec.height;
    j["width"] = spec.width;
    j["patch_h"] = spec.patch_h;
    j["patch_w"] = spec.patch_w;
    j["patch_row"] = spec.patch_row;
    j["patch_col"] = spec.patch_col;
    j["patch_values"] = spec.patch_values;
    j["pattern"] = spec.pattern;
    j["amplitude"] = spec.amplitude;
    j["pixel_index"] = spec.pixel_index;
    j["delta"] = spec.delta;
    j["blend_ratio"] = spec.blend_ratio;
    j["blend_mask"] = spec.blend_mask;
    j["source_image"] = spec.source_image;
    j["crop_h"] = spec.crop_h;
    j["crop_w"] = spec.crop_w;
    return j.dump();
}

TriggerSpec trigger_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TriggerSpec spec;
    spec.kind = trigger_kind_from_name(j.at("kind").get<std::string>());
    spec.height = j.at("height").get<int>();
    spec.width = j.at("width").get<int>();
    spec.patch_h = j.at("patch_h").get<int>();
    spec.patch_w = j.at("patch_w").get<int>();
    spec.patch_row = j.at("patch_row").get<int>();
    spec.patch_col = j.at("patch_col").get<int>();
    spec.patch_values = j.at("patch_values").get<Vec>();
    spec.pattern = j.at("pattern").get<Vec>();
    spec.amplitude = j.at("amplitude").get<double>();
    spec.pixel_index = j.at("pixel_index").get<int>();
    spec.delta = j.at("delta").get<double>();
    spec.blend_ratio = j.at("blend_ratio").get<double>();
    spec.blend_mask = j.at("blend_mask").get<Vec>();
    spec.source_image = j.at("source_image").get<Vec>();
    spec.crop_h = j.at("crop_h").get<int>();
    spec.crop_w = j.at("crop_w").get<int>();
    spec.validate();
    return spec;
}

std::string plan_to_json(const PoisonPlan& plan) {
    nlohmann::ordered_json j;
    j["sources"] = plan.sources;
    j["target"] = plan.target;
    j["dpr"] = plan.dpr;
    j["cpr"] = plan.cpr;
    j["mode"] = plan.mode == PoisonPlan::Mode::mixed ? "mixed" : "dirty_only";
    return j.dump();
}

PoisonPlan plan_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PoisonPlan plan;
    plan.sources = j.at("sources").get<std::vector<int>>();
    plan.target = j.at("target").get<int>();
    plan.dpr = j.at("dpr").get<double>();
    plan.cpr = j.at("cpr").get<double>();
    plan.mode = j.at("mode").get<std::string>() == "mixed" ? PoisonPlan::Mode::mixed
                                                           : PoisonPlan::Mode::dirty_only;
    return plan;
}

} // namespace csolab
