#include "csolab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "csolab/rng.hpp"
#include "json.hpp"

namespace csolab {

namespace fs = std::filesystem;

std::uint64_t model_seed(std::uint64_t master, int model_index) {
    return derive_seed(master, 11, static_cast<std::uint64_t>(model_index));
}

std::uint64_t trial_seed(std::uint64_t master, int model_index, int repeat_index) {
    return derive_seed(master, 13,
                       static_cast<std::uint64_t>(model_index) * 1024 +
                           static_cast<std::uint64_t>(repeat_index));
}

namespace {

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "synth.num_classes", "synth.height", "synth.width", "synth.noise_std",
        "synth.template_energy", "synth.informative_count", "synth.decoy_class",
        "synth.decoy_boost",
        "data.train_per_class", "data.eval_per_class", "data.n_img",
        "attack.kind", "attack.scope", "attack.dpr", "attack.cpr", "attack.mode",
        "attack.randomize_target", "attack.target", "attack.source",
        "attack.patch_size", "attack.amplitude", "attack.delta", "attack.blend_ratio",
        "model.hidden", "model.split_index",
        "train.epochs", "train.batch_size", "train.learning_rate", "train.optimizer",
        "maskfit.steps", "maskfit.learning_rate",
        "detect.steps", "detect.learning_rate", "detect.restarts", "detect.lambda",
        "detect.tau", "detect.nc_mask_weight", "detect.ptred_norm_weight",
        "detect.misclass_target", "detect.auto_rescale_lambda", "detect.lambda_balance",
        "detectors",
        "n_models", "n_detector_repeats", "master_seed", "workers", "out_dir",
    };
    return keys;
}

} // namespace

ExperimentConfig ExperimentConfig::from_flat(const FlatConfig& flat) {
    flat.validate_keys(known_keys());
    ExperimentConfig cfg;

    cfg.synth.num_classes = static_cast<int>(flat.get_int("synth.num_classes", 8));
    cfg.synth.height = static_cast<int>(flat.get_int("synth.height", 8));
    cfg.synth.width = static_cast<int>(flat.get_int("synth.width", 8));
    cfg.synth.noise_std = flat.get_double("synth.noise_std", 0.1);
    cfg.synth.template_energy = flat.get_double("synth.template_energy", 2.0);
    cfg.synth.informative_count = static_cast<int>(flat.get_int("synth.informative_count", 8));
    cfg.synth.decoy_class = static_cast<int>(flat.get_int("synth.decoy_class", -1));
    cfg.synth.decoy_boost = flat.get_double("synth.decoy_boost", 1.0);

    cfg.train_per_class = static_cast<int>(flat.get_int("data.train_per_class", 150));
    cfg.eval_per_class = static_cast<int>(flat.get_int("data.eval_per_class", 100));
    cfg.n_img = static_cast<int>(flat.get_int("data.n_img", 10));

    const std::string kind = flat.get_string("attack.kind", "clean");
    cfg.attack.clean = kind == "clean";
    if (!cfg.attack.clean) {
        cfg.attack.kind = kind;
        trigger_kind_from_name(kind); // validates
    }
    cfg.attack.scope = flat.get_string("attack.scope", "all_to_one");
    if (cfg.attack.scope != "all_to_one" && cfg.attack.scope != "one_to_one") {
        throw std::runtime_error("config: attack.scope must be all_to_one or one_to_one");
    }
    cfg.attack.dpr = flat.get_double("attack.dpr", 0.05);
    cfg.attack.cpr = flat.get_double("attack.cpr", 0.0);
    cfg.attack.mode = flat.get_string("attack.mode", cfg.attack.cpr > 0.0 ? "mixed" : "dirty_only");
    if (cfg.attack.mode != "dirty_only" && cfg.attack.mode != "mixed") {
        throw std::runtime_error("config: attack.mode must be dirty_only or mixed");
    }
    cfg.attack.randomize_target = flat.get_bool("attack.randomize_target", true);
    cfg.attack.target = static_cast<int>(flat.get_int("attack.target", 0));
    cfg.attack.source = static_cast<int>(flat.get_int("attack.source", 1));
    cfg.attack.patch_size = static_cast<int>(flat.get_int("attack.patch_size", 3));
    cfg.attack.amplitude = flat.get_double("attack.amplitude", 3.0 / 255.0);
    cfg.attack.delta = flat.get_double("attack.delta", 75.0 / 255.0);
    cfg.attack.blend_ratio = flat.get_double("attack.blend_ratio", 0.2);

    cfg.model_hidden.clear();
    for (const std::string& tok : flat.get_list("model.hidden")) {
        cfg.model_hidden.push_back(std::stoi(tok));
    }
    if (cfg.model_hidden.empty()) cfg.model_hidden = {64, 32};
    cfg.model_split_index = static_cast<int>(flat.get_int("model.split_index", -1));

    cfg.train.epochs = static_cast<int>(flat.get_int("train.epochs", 40));
    cfg.train.batch_size = static_cast<int>(flat.get_int("train.batch_size", 32));
    cfg.train.learning_rate = flat.get_double("train.learning_rate", 0.01);
    const std::string opt = flat.get_string("train.optimizer", "adam");
    if (opt == "adam") cfg.train.optimizer = TrainConfig::Optimizer::adam;
    else if (opt == "sgd") cfg.train.optimizer = TrainConfig::Optimizer::sgd;
    else throw std::runtime_error("config: train.optimizer must be sgd or adam");

    cfg.maskfit.steps = static_cast<int>(flat.get_int("maskfit.steps", 500));
    cfg.maskfit.learning_rate = flat.get_double("maskfit.learning_rate", 0.05);

    DetectorConfig base;
    base.steps = static_cast<int>(flat.get_int("detect.steps", 300));
    base.learning_rate = flat.get_double("detect.learning_rate", 0.05);
    base.restarts = static_cast<int>(flat.get_int("detect.restarts", 3));
    base.lambda = flat.get_double("detect.lambda", -1.0);
    base.tau = flat.get_double("detect.tau", -1.0);
    base.nc_mask_weight = flat.get_double("detect.nc_mask_weight", 1e-2);
    base.ptred_norm_weight = flat.get_double("detect.ptred_norm_weight", 1e-2);
    base.ptred_misclass_target = flat.get_double("detect.misclass_target", 0.9);
    base.auto_rescale_lambda = flat.get_bool("detect.auto_rescale_lambda", true);
    base.lambda_balance = flat.get_double("detect.lambda_balance", 2.0);
    for (const std::string& name : flat.get_list("detectors")) {
        DetectorConfig d = base;
        d.variant = detector_variant_from_name(name);
        cfg.detectors.push_back(d);
    }

    cfg.n_models = static_cast<int>(flat.get_int("n_models", 10));
    cfg.n_detector_repeats = static_cast<int>(flat.get_int("n_detector_repeats", 5));
    cfg.master_seed = static_cast<std::uint64_t>(flat.get_int("master_seed", 0));
    cfg.workers = static_cast<int>(flat.get_int("workers", 1));
    cfg.out_dir = flat.get_string("out_dir", "");

    cfg.validate();
    return cfg;
}

FlatConfig ExperimentConfig::to_flat() const {
    FlatConfig flat;
    auto set_num = [&flat](const std::string& key, double v) {
        std::ostringstream ss;
        ss << std::setprecision(17) << v;
        flat.set(key, ss.str());
    };
    flat.set("synth.num_classes", std::to_string(synth.num_classes));
    flat.set("synth.height", std::to_string(synth.height));
    flat.set("synth.width", std::to_string(synth.width));
    set_num("synth.noise_std", synth.noise_std);
    set_num("synth.template_energy", synth.template_energy);
    flat.set("synth.informative_count", std::to_string(synth.informative_count));
    flat.set("synth.decoy_class", std::to_string(synth.decoy_class));
    set_num("synth.decoy_boost", synth.decoy_boost);
    flat.set("data.train_per_class", std::to_string(train_per_class));
    flat.set("data.eval_per_class", std::to_string(eval_per_class));
    flat.set("data.n_img", std::to_string(n_img));
    flat.set("attack.kind", attack.clean ? "clean" : attack.kind);
    flat.set("attack.scope", attack.scope);
    set_num("attack.dpr", attack.dpr);
    set_num("attack.cpr", attack.cpr);
    flat.set("attack.mode", attack.mode);
    flat.set("attack.randomize_target", attack.randomize_target ? "true" : "false");
    flat.set("attack.target", std::to_string(attack.target));
    flat.set("attack.source", std::to_string(attack.source));
    flat.set("attack.patch_size", std::to_string(attack.patch_size));
    set_num("attack.amplitude", attack.amplitude);
    set_num("attack.delta", attack.delta);
    set_num("attack.blend_ratio", attack.blend_ratio);
    {
        std::string hidden;
        for (int h : model_hidden) {
            if (!hidden.empty()) hidden += ", ";
            hidden += std::to_string(h);
        }
        flat.set("model.hidden", hidden);
        flat.set("model.split_index", std::to_string(model_split_index));
    }
    flat.set("train.epochs", std::to_string(train.epochs));
    flat.set("train.batch_size", std::to_string(train.batch_size));
    set_num("train.learning_rate", train.learning_rate);
    flat.set("train.optimizer",
             train.optimizer == TrainConfig::Optimizer::adam ? "adam" : "sgd");
    flat.set("maskfit.steps", std::to_string(maskfit.steps));
    set_num("maskfit.learning_rate", maskfit.learning_rate);
    if (!detectors.empty()) {
        const DetectorConfig& d = detectors.front();
        flat.set("detect.steps", std::to_string(d.steps));
        set_num("detect.learning_rate", d.learning_rate);
        flat.set("detect.restarts", std::to_string(d.restarts));
        set_num("detect.lambda", d.lambda);
        set_num("detect.tau", d.tau);
        set_num("detect.nc_mask_weight", d.nc_mask_weight);
        set_num("detect.ptred_norm_weight", d.ptred_norm_weight);
        set_num("detect.misclass_target", d.ptred_misclass_target);
        flat.set("detect.auto_rescale_lambda", d.auto_rescale_lambda ? "true" : "false");
        set_num("detect.lambda_balance", d.lambda_balance);
        std::string names;
        for (const DetectorConfig& dc : detectors) {
            if (!names.empty()) names += ", ";
            names += detector_variant_name(dc.variant);
        }
        flat.set("detectors", names);
    }
    flat.set("n_models", std::to_string(n_models));
    flat.set("n_detector_repeats", std::to_string(n_detector_repeats));
    flat.set("master_seed", std::to_string(master_seed));
    flat.set("workers", std::to_string(workers));
    if (!out_dir.empty()) flat.set("out_dir", out_dir);
    return flat;
}

void ExperimentConfig::validate() const {
    if (n_models < 1) throw std::invalid_argument("ExperimentConfig: n_models must be >= 1");
    if (n_detector_repeats < 1) {
        throw std::invalid_argument("ExperimentConfig: n_detector_repeats must be >= 1");
    }
    if (train_per_class < 1 || eval_per_class < 1 || n_img < 1) {
        throw std::invalid_argument("ExperimentConfig: per-class sample counts must be >= 1");
    }
    if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
    SynthConfig synth_check = synth;
    synth_check.samples_per_class = train_per_class + eval_per_class + n_img;
    synth_check.validate();
    train.validate();
    maskfit.validate();
    for (const DetectorConfig& d : detectors) d.validate();
    if (!attack.clean) {
        if (attack.dpr <= 0.0) {
            throw std::invalid_argument("ExperimentConfig: attack needs dpr > 0");
        }
        if (attack.mode == "mixed" && attack.cpr <= 0.0) {
            throw std::invalid_argument("ExperimentConfig: mixed mode needs cpr > 0");
        }
        if (attack.mode == "dirty_only" && attack.cpr != 0.0) {
            throw std::invalid_argument("ExperimentConfig: dirty_only mode needs cpr == 0");
        }
    }
}

namespace {

struct MaterializedAttack {
    TriggerSpec trigger;
    PoisonPlan plan;
};

// Resolve the per-model trigger/plan: target (and one-to-one source) come
// from the model seed when randomize_target is on; trigger geometry is drawn
// once per model as well.
MaterializedAttack materialize_attack(const ExperimentConfig& cfg, const SynthConfig& synth,
                                      std::uint64_t mseed) {
    MaterializedAttack out;
    const int K = cfg.synth.num_classes;

    int target = cfg.attack.target;
    int source = cfg.attack.source;
    if (cfg.attack.randomize_target) {
        auto rng = make_rng(derive_seed(mseed, 21));
        std::uniform_int_distribution<int> cls(0, K - 1);
        target = cls(rng);
        do {
            source = cls(rng);
        } while (source == target);
    }

    out.plan.target = target;
    if (cfg.attack.scope == "all_to_one") {
        for (int k = 0; k < K; ++k) {
            if (k != target) out.plan.sources.push_back(k);
        }
    } else {
        out.plan.sources.push_back(source);
    }
    out.plan.dpr = cfg.attack.dpr;
    out.plan.cpr = cfg.attack.cpr;
    out.plan.mode = cfg.attack.mode == "mixed" ? PoisonPlan::Mode::mixed
                                               : PoisonPlan::Mode::dirty_only;

    const std::uint64_t tseed = derive_seed(mseed, 22);
    const TriggerKind kind = trigger_kind_from_name(cfg.attack.kind);
    switch (kind) {
        case TriggerKind::patch:
            out.trigger = make_patch_trigger(synth.height, synth.width, tseed,
                                             cfg.attack.patch_size, cfg.attack.patch_size);
            break;
        case TriggerKind::additive:
            out.trigger = make_chessboard_trigger(synth.height, synth.width, cfg.attack.amplitude);
            break;
        case TriggerKind::one_pixel:
            out.trigger = make_one_pixel_trigger(synth.height, synth.width, tseed, cfg.attack.delta);
            break;
        case TriggerKind::blend:
            out.trigger = make_blend_trigger(synth.height, synth.width, tseed, cfg.attack.blend_ratio);
            break;
        case TriggerKind::intrinsic_blend:
            out.trigger = make_intrinsic_blend_trigger(class_template(synth, target),
                                                       synth.height, synth.width,
                                                       cfg.attack.blend_ratio);
            break;
    }
    return out;
}

// Per-class split of the generated pool into a training set and the rest.
std::pair<Dataset, Dataset> split_train(const Dataset& data, int train_per_class,
                                        std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        by_class[static_cast<std::size_t>(data.samples[i].label)].push_back(i);
    }
    std::vector<bool> train_mask(data.samples.size(), false);
    for (int k = 0; k < data.num_classes; ++k) {
        auto& idx = by_class[static_cast<std::size_t>(k)];
        if (static_cast<int>(idx.size()) < train_per_class) {
            throw std::invalid_argument("split_train: class too small");
        }
        auto rng = make_rng(derive_seed(seed, 23, static_cast<std::uint64_t>(k)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int j = 0; j < train_per_class; ++j) train_mask[idx[static_cast<std::size_t>(j)]] = true;
    }
    Dataset train, rest;
    train.num_classes = rest.num_classes = data.num_classes;
    train.height = rest.height = data.height;
    train.width = rest.width = data.width;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        (train_mask[i] ? train : rest).samples.push_back(data.samples[i]);
    }
    return {std::move(train), std::move(rest)};
}

struct ModelPipelineResult {
    ModelRecord record;
    Network net;
    CleanSet clean;
    std::vector<ClassMask> masks;
    bool usable = false;
};

bool any_cso(const std::vector<DetectorConfig>& detectors) {
    return std::any_of(detectors.begin(), detectors.end(),
                       [](const DetectorConfig& d) { return variant_uses_cso(d.variant); });
}

ModelPipelineResult run_model_pipeline(const ExperimentConfig& cfg, int index,
                                       StageTimings& timing, const std::string& model_dir) {
    using clock = std::chrono::steady_clock;
    ModelPipelineResult out;
    out.record.index = index;
    const std::uint64_t mseed = model_seed(cfg.master_seed, index);
    out.record.seed = mseed;
    out.record.attacked = !cfg.attack.clean;

    try {
        SynthConfig synth = cfg.synth;
        synth.samples_per_class = cfg.train_per_class + cfg.eval_per_class + cfg.n_img;
        synth.seed = derive_seed(mseed, 24);

        auto t0 = clock::now();
        const Dataset full = gen_synthetic(synth);
        auto [train_set_clean, pool] = split_train(full, cfg.train_per_class, mseed);
        auto [clean, eval_set] = draw_clean_set(pool, cfg.n_img, derive_seed(mseed, 25));
        out.clean = std::move(clean);
        timing.gen_s += std::chrono::duration<double>(clock::now() - t0).count();

        Dataset train_set = std::move(train_set_clean);
        std::optional<MaterializedAttack> attack;
        t0 = clock::now();
        if (!cfg.attack.clean) {
            attack = materialize_attack(cfg, synth, mseed);
            auto [poisoned, counts] = poison_dataset(train_set, attack->plan, attack->trigger,
                                                     derive_seed(mseed, 26));
            train_set = std::move(poisoned);
            out.record.target = attack->plan.target;
            out.record.sources = attack->plan.sources;
        }
        timing.poison_s += std::chrono::duration<double>(clock::now() - t0).count();

        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(mseed, 27);
        ModelConfig mc;
        mc.input_dim = synth.dim();
        mc.hidden_dims = cfg.model_hidden;
        mc.split_index = cfg.model_split_index;
        mc.num_classes = synth.num_classes;
        mc.seed = derive_seed(mseed, 28);
        t0 = clock::now();
        out.net = train(Network(mc), train_set, tc);
        timing.train_s += std::chrono::duration<double>(clock::now() - t0).count();
        out.record.train_accuracy = accuracy(out.net, train_set);

        if (attack) {
            out.record.attack = evaluate_attack(out.net, eval_set, attack->plan, attack->trigger);
        } else {
            AttackReport r;
            r.acc = accuracy(out.net, eval_set);
            r.asr = 0.0;
            out.record.attack = r;
        }

        if (any_cso(cfg.detectors)) {
            MaskFitConfig mfc = cfg.maskfit;
            mfc.seed = derive_seed(mseed, 29);
            t0 = clock::now();
            out.masks = fit_all_masks(out.net, out.clean, mfc);
            timing.maskfit_s += std::chrono::duration<double>(clock::now() - t0).count();
        }

        if (!model_dir.empty()) {
            fs::create_directories(model_dir);
            save_dataset_csv(train_set, model_dir + "/train.csv");
            save_dataset_csv(eval_set, model_dir + "/eval.csv");
            save_synth_config(synth, model_dir + "/synth.json");
            out.record.checkpoint_path = model_dir + "/checkpoint.txt";
            out.net.save(out.record.checkpoint_path);
            if (!out.masks.empty()) save_masks(out.masks, model_dir + "/masks.txt");
            if (attack) {
                std::ofstream aout(model_dir + "/attack.json");
                aout << "{\"trigger\": " << trigger_to_json(attack->trigger)
                     << ", \"plan\": " << plan_to_json(attack->plan) << "}\n";
            }
        }
        out.usable = true;
    } catch (const std::exception& e) {
        out.record.error = e.what();
    }
    return out;
}

} // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    RunReport report;
    report.config = cfg;

    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

    // Stage 1: per-model pipelines (parallel across models).
    std::vector<ModelPipelineResult> pipelines(static_cast<std::size_t>(cfg.n_models));
    std::vector<StageTimings> timings(static_cast<std::size_t>(cfg.n_models));
    {
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= cfg.n_models) break;
                const std::string model_dir =
                    cfg.out_dir.empty() ? "" : cfg.out_dir + "/model_" + std::to_string(i);
                pipelines[static_cast<std::size_t>(i)] =
                    run_model_pipeline(cfg, i, timings[static_cast<std::size_t>(i)], model_dir);
            }
        };
        const int n_threads = std::min(cfg.workers, cfg.n_models);
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool_threads;
            for (int w = 0; w < n_threads; ++w) pool_threads.emplace_back(worker);
            for (auto& th : pool_threads) th.join();
        }
    }
    for (const auto& t : timings) {
        report.timing.gen_s += t.gen_s;
        report.timing.poison_s += t.poison_s;
        report.timing.train_s += t.train_s;
        report.timing.maskfit_s += t.maskfit_s;
    }
    for (auto& p : pipelines) report.models.push_back(p.record);

    // Stage 2: detector trials, fixed (model, detector, repeat) order.
    using clock = std::chrono::steady_clock;
    struct TrialJob {
        int model;
        std::size_t detector;
        int repeat;
    };
    std::vector<TrialJob> jobs;
    for (int i = 0; i < cfg.n_models; ++i) {
        for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
            for (int r = 0; r < cfg.n_detector_repeats; ++r) {
                jobs.push_back({i, d, r});
            }
        }
    }
    std::vector<TrialRecord> trials(jobs.size());
    const auto detect_start = clock::now();
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t j = next.fetch_add(1);
                if (j >= jobs.size()) break;
                const TrialJob& job = jobs[j];
                const ModelPipelineResult& p = pipelines[static_cast<std::size_t>(job.model)];
                TrialRecord& trial = trials[j];
                trial.model = job.model;
                trial.repeat = job.repeat;
                trial.variant = cfg.detectors[job.detector].variant;
                trial.seed = trial_seed(cfg.master_seed, job.model, job.repeat);
                if (!p.usable) {
                    trial.error = "model pipeline failed: " + p.record.error;
                    continue;
                }
                try {
                    DetectorConfig dc = cfg.detectors[job.detector];
                    dc.seed = trial.seed;
                    trial.verdict = run_detector(p.net, p.clean, dc,
                                                 p.masks.empty() ? nullptr : &p.masks);
                    if (p.record.attacked) {
                        trial.success = trial.verdict.attacked &&
                                        trial.verdict.inferred_target &&
                                        *trial.verdict.inferred_target == p.record.target;
                    } else {
                        trial.success = !trial.verdict.attacked;
                    }
                } catch (const std::exception& e) {
                    trial.error = e.what();
                    trial.success = false;
                }
            }
        };
        const int n_threads = std::min<std::size_t>(cfg.workers, jobs.size()) > 1
                                  ? std::min<int>(cfg.workers, static_cast<int>(jobs.size()))
                                  : 1;
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool_threads;
            for (int w = 0; w < n_threads; ++w) pool_threads.emplace_back(worker);
            for (auto& th : pool_threads) th.join();
        }
    }
    report.timing.detect_s = std::chrono::duration<double>(clock::now() - detect_start).count();
    report.trials = std::move(trials);

    // Stage 3: per-detector aggregation.
    for (const DetectorConfig& d : cfg.detectors) {
        DetectorSummary s;
        s.variant = d.variant;
        int n_att = 0, n_att_ok = 0, n_clean = 0, n_clean_ok = 0, n_ok = 0;
        double gap_sum = 0.0;
        int gap_n = 0;
        for (const TrialRecord& t : report.trials) {
            if (t.variant != d.variant) continue;
            ++s.n_trials;
            if (!t.error.empty()) ++s.n_failed;
            if (t.success) ++n_ok;
            const ModelRecord& m = report.models[static_cast<std::size_t>(t.model)];
            if (m.attacked) {
                ++n_att;
                if (t.success) ++n_att_ok;
                if (t.error.empty() && m.target >= 0 &&
                    m.target < static_cast<int>(t.verdict.scores.size())) {
                    double best_other = -1e300;
                    for (std::size_t k = 0; k < t.verdict.scores.size(); ++k) {
                        if (static_cast<int>(k) == m.target) continue;
                        best_other = std::max(best_other, t.verdict.scores[k]);
                    }
                    gap_sum += t.verdict.scores[static_cast<std::size_t>(m.target)] - best_other;
                    ++gap_n;
                }
            } else {
                ++n_clean;
                if (t.success) ++n_clean_ok;
            }
        }
        s.da_overall = s.n_trials ? static_cast<double>(n_ok) / s.n_trials : 0.0;
        s.da_attacked = n_att ? static_cast<double>(n_att_ok) / n_att : 0.0;
        s.da_clean = n_clean ? static_cast<double>(n_clean_ok) / n_clean : 0.0;
        s.fp_rate = n_clean ? 1.0 - s.da_clean : 0.0;
        s.mean_gap = gap_n ? gap_sum / gap_n : 0.0;
        report.summary.push_back(s);
    }

    if (!cfg.out_dir.empty()) {
        {
            std::ofstream out(cfg.out_dir + "/report.json");
            out << report_to_json(report);
        }
        {
            std::ofstream out(cfg.out_dir + "/summary.csv");
            out << summary_to_csv(report);
        }
        {
            std::ofstream out(cfg.out_dir + "/timing.csv");
            out << "stage,seconds\n";
            out << "gen," << report.timing.gen_s << "\n";
            out << "poison," << report.timing.poison_s << "\n";
            out << "train," << report.timing.train_s << "\n";
            out << "maskfit," << report.timing.maskfit_s << "\n";
            out << "detect," << report.timing.detect_s << "\n";
        }
        for (const TrialRecord& t : report.trials) {
            if (!t.error.empty()) continue;
            const std::string dir = cfg.out_dir + "/model_" + std::to_string(t.model);
            fs::create_directories(dir);
            std::ofstream out(dir + "/verdict_" + detector_variant_name(t.variant) + "_r" +
                              std::to_string(t.repeat) + ".json");
            out << verdict_to_json(t.verdict) << "\n";
        }
    }
    return report;
}

std::vector<CprSweepRow> cpr_sweep(const ExperimentConfig& base,
                                   const std::vector<double>& cpr_values) {
    if (base.attack.clean) throw std::invalid_argument("cpr_sweep: needs an attack");
    std::vector<CprSweepRow> rows;
    for (double cpr : cpr_values) {
        ExperimentConfig cfg = base;
        cfg.attack.cpr = cpr;
        cfg.attack.mode = cpr > 0.0 ? "mixed" : "dirty_only";
        if (!base.out_dir.empty()) {
            std::ostringstream dir;
            dir << base.out_dir << "/cpr_" << cpr;
            cfg.out_dir = dir.str();
        }
        const RunReport report = run_experiment(cfg);

        CprSweepRow row;
        row.cpr = cpr;
        int n = 0, n_cd = 0;
        double cd_sum = 0.0;
        for (const ModelRecord& m : report.models) {
            if (!m.attack || !m.error.empty()) continue;
            row.asr += m.attack->asr;
            row.acc += m.attack->acc;
            if (m.attack->cd) {
                cd_sum += *m.attack->cd;
                ++n_cd;
            }
            ++n;
        }
        if (n > 0) {
            row.asr /= n;
            row.acc /= n;
        }
        if (n_cd > 0) row.cd = cd_sum / n_cd;
        for (const DetectorSummary& s : report.summary) {
            row.da[detector_variant_name(s.variant)] = s.da_attacked;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json attack_report_json(const AttackReport& r) {
    nlohmann::ordered_json j;
    j["asr"] = r.asr;
    j["acc"] = r.acc;
    if (r.cd) j["cd"] = *r.cd;
    else j["cd"] = nullptr;
    j["dpr"] = r.dpr;
    j["cpr"] = r.cpr;
    j["opr"] = r.opr;
    return j;
}

} // namespace

std::string report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "csolab-report-v1";
    {
        nlohmann::ordered_json cj;
        const FlatConfig flat = report.config.to_flat();
        for (const auto& [key, value] : flat.entries()) cj[key] = value;
        j["config"] = std::move(cj);
    }
    auto models = nlohmann::ordered_json::array();
    for (const ModelRecord& m : report.models) {
        nlohmann::ordered_json mj;
        mj["index"] = m.index;
        mj["seed"] = m.seed;
        mj["attacked"] = m.attacked;
        mj["target"] = m.target;
        mj["sources"] = m.sources;
        if (m.attack) mj["attack"] = attack_report_json(*m.attack);
        mj["train_accuracy"] = m.train_accuracy;
        mj["checkpoint"] = m.checkpoint_path;
        mj["error"] = m.error;
        models.push_back(std::move(mj));
    }
    j["models"] = std::move(models);

    auto trials = nlohmann::ordered_json::array();
    for (const TrialRecord& t : report.trials) {
        nlohmann::ordered_json tj;
        tj["model"] = t.model;
        tj["detector"] = detector_variant_name(t.variant);
        tj["repeat"] = t.repeat;
        tj["seed"] = t.seed;
        tj["success"] = t.success;
        tj["error"] = t.error;
        if (t.error.empty()) tj["verdict"] = nlohmann::ordered_json::parse(verdict_to_json(t.verdict));
        trials.push_back(std::move(tj));
    }
    j["trials"] = std::move(trials);

    auto summary = nlohmann::ordered_json::array();
    for (const DetectorSummary& s : report.summary) {
        nlohmann::ordered_json sj;
        sj["detector"] = detector_variant_name(s.variant);
        sj["da_overall"] = s.da_overall;
        sj["da_attacked"] = s.da_attacked;
        sj["da_clean"] = s.da_clean;
        sj["fp_rate"] = s.fp_rate;
        sj["mean_gap"] = s.mean_gap;
        sj["n_trials"] = s.n_trials;
        sj["n_failed"] = s.n_failed;
        summary.push_back(std::move(sj));
    }
    j["summary"] = std::move(summary);
    return j.dump(2);
}

std::string summary_to_csv(const RunReport& report) {
    std::ostringstream out;
    out << "detector,da_overall,da_attacked,da_clean,fp_rate,mean_gap,n_trials,n_failed\n";
    for (const DetectorSummary& s : report.summary) {
        out << detector_variant_name(s.variant) << ',' << s.da_overall << ','
            << s.da_attacked << ',' << s.da_clean << ',' << s.fp_rate << ','
            << s.mean_gap << ',' << s.n_trials << ',' << s.n_failed << "\n";
    }
    return out.str();
}

std::string sweep_to_csv(const std::vector<CprSweepRow>& rows) {
    std::ostringstream out;
    std::vector<std::string> detectors;
    for (const CprSweepRow& r : rows) {
        for (const auto& [name, da] : r.da) {
            if (std::find(detectors.begin(), detectors.end(), name) == detectors.end()) {
                detectors.push_back(name);
            }
        }
    }
    out << "cpr,asr,cd,acc";
    for (const std::string& d : detectors) out << ",da_" << d;
    out << "\n";
    for (const CprSweepRow& r : rows) {
        out << r.cpr << ',' << r.asr << ',';
        if (r.cd) out << *r.cd;
        out << ',' << r.acc;
        for (const std::string& d : detectors) {
            out << ',';
            const auto it = r.da.find(d);
            if (it != r.da.end()) out << it->second;
        }
        out << "\n";
    }
    return out.str();
}

std::string sweep_to_json(const std::vector<CprSweepRow>& rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const CprSweepRow& r : rows) {
        nlohmann::ordered_json j;
        j["cpr"] = r.cpr;
        j["asr"] = r.asr;
        if (r.cd) j["cd"] = *r.cd;
        else j["cd"] = nullptr;
        j["acc"] = r.acc;
        j["da"] = r.da;
        arr.push_back(std::move(j));
    }
    nlohmann::ordered_json root;
    root["format"] = "csolab-cpr-sweep-v1";
    root["rows"] = std::move(arr);
    return root.dump(2);
}

} // namespace csolab
