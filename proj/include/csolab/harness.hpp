#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csolab/attacks.hpp"
#include "csolab/config.hpp"
#include "csolab/data.hpp"
#include "csolab/detectors.hpp"
#include "csolab/maskfit.hpp"
#include "csolab/model.hpp"

namespace csolab {

// Attack half of an experiment: which trigger, which classes, which rates.
// When randomize_target is set, the target (and for one-to-one scope the
// source) is re-drawn per model from that model's seed.
struct AttackSection {
    bool clean = true; // no poisoning
    std::string kind = "patch";
    std::string scope = "all_to_one"; // or one_to_one
    double dpr = 0.05;
    double cpr = 0.0;
    std::string mode = "dirty_only"; // or mixed
    bool randomize_target = true;
    int target = 0;
    int source = 1;
    int patch_size = 3;
    double amplitude = 3.0 / 255.0;
    double delta = 75.0 / 255.0;
    double blend_ratio = 0.2;
};

struct ExperimentConfig {
    SynthConfig synth;          // samples_per_class is derived, see below
    int train_per_class = 150;
    int eval_per_class = 100;
    int n_img = 10;
    std::vector<int> model_hidden{64, 32};
    int model_split_index = -1;
    AttackSection attack;
    TrainConfig train;
    MaskFitConfig maskfit;
    // One entry per detector to run; common optimizer knobs come from the
    // config file, seeds are injected per trial.
    std::vector<DetectorConfig> detectors;
    int n_models = 10;
    int n_detector_repeats = 5;
    std::uint64_t master_seed = 0;
    std::string out_dir;
    int workers = 1;

    static ExperimentConfig from_flat(const FlatConfig& flat);
    FlatConfig to_flat() const;
    void validate() const;
};

struct ModelRecord {
    int index = 0;
    std::uint64_t seed = 0;
    bool attacked = false;
    int target = -1;
    std::vector<int> sources;
    std::optional<AttackReport> attack;
    double train_accuracy = 0.0;
    std::string checkpoint_path;
    std::string error; // empty when the stage pipeline succeeded
};

struct TrialRecord {
    int model = 0;
    int repeat = 0;
    DetectorVariant variant = DetectorVariant::mmbd;
    std::uint64_t seed = 0;
    DetectionVerdict verdict;
    bool success = false; // detection correctness per the DA rule
    std::string error;
};

struct DetectorSummary {
    DetectorVariant variant = DetectorVariant::mmbd;
    double da_overall = 0.0;
    double da_attacked = 0.0; // over attacked models: detected with correct target
    double da_clean = 0.0;    // over clean models: correctly not flagged
    double fp_rate = 0.0;
    double mean_gap = 0.0; // mean (target score - best other score) on attacked models
    int n_trials = 0;
    int n_failed = 0;
};

struct StageTimings {
    double gen_s = 0.0, poison_s = 0.0, train_s = 0.0, maskfit_s = 0.0, detect_s = 0.0;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<ModelRecord> models;
    std::vector<TrialRecord> trials;
    std::vector<DetectorSummary> summary;
    StageTimings timing;
};

// Generate -> poison -> train -> fit masks -> detect -> score, over
// n_models x detectors x repeats, deterministic given master_seed. Artifacts
// are persisted under cfg.out_dir when it is non-empty; per-trial failures
// are recorded and do not abort the run. Timing goes to a separate log so
// report.json is byte-stable for a fixed config.
RunReport run_experiment(const ExperimentConfig& cfg);

struct CprSweepRow {
    double cpr = 0.0;
    double asr = 0.0;
    std::optional<double> cd;
    double acc = 0.0;
    std::map<std::string, double> da; // per detector name
};

// Re-runs the experiment at each clean-label poisoning rate, all other
// settings (and seeds) fixed; cpr == 0 degenerates to the dirty-only attack.
std::vector<CprSweepRow> cpr_sweep(const ExperimentConfig& base,
                                   const std::vector<double>& cpr_values);

std::string report_to_json(const RunReport& report);
std::string summary_to_csv(const RunReport& report);
std::string sweep_to_csv(const std::vector<CprSweepRow>& rows);
std::string sweep_to_json(const std::vector<CprSweepRow>& rows);

// Derived per-model / per-trial seeds (documented counter scheme, exposed
// for tests): model seeds use stream 11, repeat seeds stream 13.
std::uint64_t model_seed(std::uint64_t master, int model_index);
std::uint64_t trial_seed(std::uint64_t master, int model_index, int repeat_index);

} // namespace csolab
