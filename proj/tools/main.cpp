#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csolab/harness.hpp"
#include "csolab/lintheory.hpp"
#include "csolab/rng.hpp"

namespace fs = std::filesystem;
using namespace csolab;

namespace {

FlatConfig load_config_or_empty(const std::string& path) {
    if (path.empty()) return FlatConfig{};
    return FlatConfig::parse_file(path);
}

ExperimentConfig experiment_from_options(const std::string& config_path,
                                         const std::string& out_dir,
                                         std::optional<long long> seed,
                                         std::optional<int> workers,
                                         const std::vector<std::string>& detector_names,
                                         std::optional<double> lambda) {
    FlatConfig flat = load_config_or_empty(config_path);
    if (!out_dir.empty()) flat.set("out_dir", out_dir);
    if (seed) flat.set("master_seed", std::to_string(*seed));
    if (workers) flat.set("workers", std::to_string(*workers));
    if (!detector_names.empty()) {
        std::string joined;
        for (const std::string& d : detector_names) {
            if (!joined.empty()) joined += ",";
            joined += d;
        }
        flat.set("detectors", joined);
    }
    if (lambda) flat.set("detect.lambda", std::to_string(*lambda));
    return ExperimentConfig::from_flat(flat);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backdoor poisoning and detection laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_path, model_path, masks_path, clean_path;
    std::optional<long long> seed;
    std::optional<int> workers;
    std::optional<double> lambda;
    std::vector<std::string> detector_names;
    std::vector<double> cpr_values;
    int theory_classes = 4, theory_dim = 24, theory_samples = 5;
    bool theory_decoy = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key=value config file (or JSON)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "master seed override");
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen);

    auto* poison = app.add_subcommand("poison", "poison a dataset CSV");
    add_common(poison);
    poison->add_option("--data", data_path, "input dataset CSV")->required();

    auto* train_cmd = app.add_subcommand("train", "train a classifier on a dataset CSV");
    add_common(train_cmd);
    train_cmd->add_option("--data", data_path, "training dataset CSV")->required();

    auto* maskfit_cmd = app.add_subcommand("maskfit", "fit per-class feature masks");
    add_common(maskfit_cmd);
    maskfit_cmd->add_option("--model", model_path, "checkpoint file")->required();
    maskfit_cmd->add_option("--clean", clean_path, "clean samples CSV")->required();

    auto* detect = app.add_subcommand("detect", "run a detector against a checkpoint");
    add_common(detect);
    detect->add_option("--model", model_path, "checkpoint file")->required();
    detect->add_option("--clean", clean_path, "clean samples CSV")->required();
    detect->add_option("--masks", masks_path, "mask file (required for *_cso)");
    detect->add_option("--detector", detector_names, "detector variant (repeatable)");
    detect->add_option("--lambda", lambda, "penalty weight override");

    auto* experiment = app.add_subcommand("experiment", "run the full ensemble experiment");
    add_common(experiment);
    experiment->add_option("--workers", workers, "parallel worker count");
    experiment->add_option("--detector", detector_names, "detector variant (repeatable)");
    experiment->add_option("--lambda", lambda, "penalty weight override");

    auto* sweep = app.add_subcommand("cpr-sweep", "re-run the attack at several clean-label rates");
    add_common(sweep);
    sweep->add_option("--workers", workers, "parallel worker count");
    sweep->add_option("--detector", detector_names, "detector variant (repeatable)");
    sweep->add_option("--lambda", lambda, "penalty weight override");
    sweep->add_option("--cpr", cpr_values, "clean poisoning rates")->required();

    auto* theory = app.add_subcommand("theory", "exact linear-model statistic tables");
    theory->add_option("--classes", theory_classes, "number of classes");
    theory->add_option("--dim", theory_dim, "ambient dimension");
    theory->add_option("--samples", theory_samples, "training vectors per class");
    theory->add_option("--seed", seed, "problem seed");
    theory->add_flag("--decoy", theory_decoy, "scale one non-target class into a decoy");
    theory->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::uint64_t s = static_cast<std::uint64_t>(seed.value_or(0));

        if (gen->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("gen: --out is required");
            FlatConfig flat = load_config_or_empty(config_path);
            if (seed) flat.set("master_seed", std::to_string(*seed));
            ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
            SynthConfig synth = cfg.synth;
            synth.samples_per_class = cfg.train_per_class + cfg.eval_per_class + cfg.n_img;
            synth.seed = cfg.master_seed;
            fs::create_directories(out_dir);
            save_dataset_csv(gen_synthetic(synth), out_dir + "/dataset.csv");
            save_synth_config(synth, out_dir + "/synth.json");
            std::cout << "wrote " << out_dir << "/dataset.csv\n";
        } else if (poison->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("poison: --out is required");
            FlatConfig flat = load_config_or_empty(config_path);
            if (seed) flat.set("master_seed", std::to_string(*seed));
            ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
            if (cfg.attack.clean) throw std::runtime_error("poison: config has attack.kind = clean");
            const Dataset data = load_dataset_csv(data_path);

            PoisonPlan plan;
            plan.target = cfg.attack.target;
            if (cfg.attack.scope == "all_to_one") {
                for (int k = 0; k < data.num_classes; ++k) {
                    if (k != plan.target) plan.sources.push_back(k);
                }
            } else {
                plan.sources.push_back(cfg.attack.source);
            }
            plan.dpr = cfg.attack.dpr;
            plan.cpr = cfg.attack.cpr;
            plan.mode = cfg.attack.mode == "mixed" ? PoisonPlan::Mode::mixed
                                                   : PoisonPlan::Mode::dirty_only;

            const std::uint64_t tseed = derive_seed(cfg.master_seed, 22);
            TriggerSpec trig;
            const TriggerKind kind = trigger_kind_from_name(cfg.attack.kind);
            switch (kind) {
                case TriggerKind::patch:
                    trig = make_patch_trigger(data.height, data.width, tseed,
                                              cfg.attack.patch_size, cfg.attack.patch_size);
                    break;
                case TriggerKind::additive:
                    trig = make_chessboard_trigger(data.height, data.width, cfg.attack.amplitude);
                    break;
                case TriggerKind::one_pixel:
                    trig = make_one_pixel_trigger(data.height, data.width, tseed, cfg.attack.delta);
                    break;
                case TriggerKind::blend:
                    trig = make_blend_trigger(data.height, data.width, tseed, cfg.attack.blend_ratio);
                    break;
                case TriggerKind::intrinsic_blend: {
                    SynthConfig synth = cfg.synth;
                    synth.samples_per_class = cfg.train_per_class + cfg.eval_per_class + cfg.n_img;
                    synth.seed = cfg.master_seed;
                    trig = make_intrinsic_blend_trigger(class_template(synth, plan.target),
                                                        data.height, data.width,
                                                        cfg.attack.blend_ratio);
                    break;
                }
            }
            auto [poisoned, counts] = poison_dataset(data, plan, trig, derive_seed(cfg.master_seed, 26));
            fs::create_directories(out_dir);
            save_dataset_csv(poisoned, out_dir + "/poisoned.csv");
            write_text(out_dir + "/attack.json",
                       "{\"trigger\": " + trigger_to_json(trig) +
                           ", \"plan\": " + plan_to_json(plan) +
                           ", \"dirty\": " + std::to_string(counts.dirty) +
                           ", \"clean\": " + std::to_string(counts.clean) + "}\n");
            std::cout << "poisoned " << counts.dirty << " dirty + " << counts.clean
                      << " clean-label samples -> " << out_dir << "/poisoned.csv\n";
        } else if (train_cmd->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("train: --out is required");
            FlatConfig flat = load_config_or_empty(config_path);
            if (seed) flat.set("master_seed", std::to_string(*seed));
            ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
            const Dataset data = load_dataset_csv(data_path);
            ModelConfig mc;
            mc.input_dim = data.dim();
            mc.num_classes = data.num_classes;
            mc.seed = derive_seed(cfg.master_seed, 28);
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.master_seed, 27);
            const Network net = train(Network(mc), data, tc);
            fs::create_directories(out_dir);
            net.save(out_dir + "/checkpoint.txt");
            write_text(out_dir + "/train.json",
                       "{\"train_accuracy\": " + std::to_string(accuracy(net, data)) + "}\n");
            std::cout << "train accuracy " << accuracy(net, data) << ", checkpoint at "
                      << out_dir << "/checkpoint.txt\n";
        } else if (maskfit_cmd->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("maskfit: --out is required");
            FlatConfig flat = load_config_or_empty(config_path);
            if (seed) flat.set("master_seed", std::to_string(*seed));
            ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
            const Network net = Network::load(model_path);
            const CleanSet clean = clean_set_from_dataset(load_dataset_csv(clean_path));
            MaskFitConfig mfc = cfg.maskfit;
            mfc.seed = cfg.master_seed;
            const auto masks = fit_all_masks(net, clean, mfc);
            fs::create_directories(out_dir);
            save_masks(masks, out_dir + "/masks.txt");
            std::cout << "wrote " << out_dir << "/masks.txt\n";
        } else if (detect->parsed()) {
            FlatConfig flat = load_config_or_empty(config_path);
            if (seed) flat.set("master_seed", std::to_string(*seed));
            if (!detector_names.empty()) {
                std::string joined;
                for (const std::string& d : detector_names) {
                    if (!joined.empty()) joined += ",";
                    joined += d;
                }
                flat.set("detectors", joined);
            }
            if (lambda) flat.set("detect.lambda", std::to_string(*lambda));
            ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
            if (cfg.detectors.empty()) throw std::runtime_error("detect: pass --detector");
            const Network net = Network::load(model_path);
            const CleanSet clean = clean_set_from_dataset(load_dataset_csv(clean_path));
            std::vector<ClassMask> masks;
            if (!masks_path.empty()) masks = load_masks(masks_path);
            if (!out_dir.empty()) fs::create_directories(out_dir);
            for (DetectorConfig dc : cfg.detectors) {
                dc.seed = cfg.master_seed;
                const DetectionVerdict v =
                    run_detector(net, clean, dc, masks.empty() ? nullptr : &masks);
                const std::string text = verdict_to_json(v);
                std::cout << text << "\n";
                if (!out_dir.empty()) {
                    write_text(out_dir + "/verdict_" + detector_variant_name(dc.variant) + ".json",
                               text + "\n");
                }
            }
        } else if (experiment->parsed()) {
            const ExperimentConfig cfg = experiment_from_options(config_path, out_dir, seed,
                                                                 workers, detector_names, lambda);
            const RunReport report = run_experiment(cfg);
            std::cout << summary_to_csv(report);
            if (cfg.out_dir.empty()) std::cout << report_to_json(report) << "\n";
        } else if (sweep->parsed()) {
            ExperimentConfig cfg = experiment_from_options(config_path, out_dir, seed,
                                                           workers, detector_names, lambda);
            const auto rows = cpr_sweep(cfg, cpr_values);
            const std::string csv = sweep_to_csv(rows);
            std::cout << csv;
            if (!cfg.out_dir.empty()) {
                write_text(cfg.out_dir + "/cpr_sweep.csv", csv);
                write_text(cfg.out_dir + "/cpr_sweep.json", sweep_to_json(rows) + "\n");
            }
        } else if (theory->parsed()) {
            const LinearProblem prob =
                theory_decoy ? gen_decoy_problem(theory_classes, theory_dim, theory_samples, s)
                             : gen_linear_problem(theory_classes, theory_dim, theory_samples, s);
            const std::string text = theory_report_json(prob);
            std::cout << text << "\n";
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_text(out_dir + "/theory.json", text + "\n");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
