#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "csolab/attacks.hpp"
#include "csolab/cso.hpp"
#include "csolab/data.hpp"
#include "csolab/detectors.hpp"
#include "csolab/harness.hpp"
#include "csolab/lintheory.hpp"
#include "csolab/maskfit.hpp"
#include "csolab/model.hpp"
#include "csolab/numerics.hpp"

namespace py = pybind11;
using namespace csolab;

PYBIND11_MODULE(_csolab, m) {
    m.doc() = "Backdoor poisoning and detection laboratory (C++ core)";

    // numerics
    m.def("dot", &dot);
    m.def("l2_norm", &l2_norm);
    m.def("project_orth_complement", &project_orth_complement);
    m.def("finite_diff_grad",
          [](const std::function<double(const Vec&)>& f, const Vec& x, double h) {
              return finite_diff_grad(f, x, h);
          });

    // data
    py::class_<Sample>(m, "Sample")
        .def(py::init<>())
        .def_readwrite("x", &Sample::x)
        .def_readwrite("label", &Sample::label);
    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("samples", &Dataset::samples)
        .def_readwrite("num_classes", &Dataset::num_classes)
        .def_readwrite("height", &Dataset::height)
        .def_readwrite("width", &Dataset::width)
        .def("dim", &Dataset::dim)
        .def("__len__", [](const Dataset& d) { return d.samples.size(); });
    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("num_classes", &SynthConfig::num_classes)
        .def_readwrite("height", &SynthConfig::height)
        .def_readwrite("width", &SynthConfig::width)
        .def_readwrite("template_energy", &SynthConfig::template_energy)
        .def_readwrite("informative_count", &SynthConfig::informative_count)
        .def_readwrite("noise_std", &SynthConfig::noise_std)
        .def_readwrite("samples_per_class", &SynthConfig::samples_per_class)
        .def_readwrite("decoy_boost", &SynthConfig::decoy_boost)
        .def_readwrite("decoy_class", &SynthConfig::decoy_class)
        .def_readwrite("seed", &SynthConfig::seed);
    py::class_<CleanSet>(m, "CleanSet")
        .def(py::init<>())
        .def_readwrite("per_class", &CleanSet::per_class)
        .def("n_img", &CleanSet::n_img)
        .def("total", &CleanSet::total);
    m.def("gen_synthetic", &gen_synthetic);
    m.def("draw_clean_set", &draw_clean_set);
    m.def("informative_supports", &informative_supports);
    m.def("class_template", &class_template);
    m.def("save_dataset_csv", &save_dataset_csv);
    m.def("load_dataset_csv", &load_dataset_csv);

    // model
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &ModelConfig::input_dim)
        .def_readwrite("hidden_dims", &ModelConfig::hidden_dims)
        .def_readwrite("num_classes", &ModelConfig::num_classes)
        .def_readwrite("split_index", &ModelConfig::split_index)
        .def_readwrite("seed", &ModelConfig::seed);
    py::class_<TrainConfig> train_config(m, "TrainConfig");
    train_config.def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("optimizer", &TrainConfig::optimizer)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("head_only", &TrainConfig::head_only);
    py::enum_<TrainConfig::Optimizer>(train_config, "Optimizer")
        .value("sgd", TrainConfig::Optimizer::sgd)
        .value("adam", TrainConfig::Optimizer::adam);
    py::class_<Network>(m, "Network")
        .def(py::init<const ModelConfig&>())
        .def("forward", &Network::forward)
        .def("features_at", &Network::features_at)
        .def("head_forward", &Network::head_forward)
        .def("feature_dim", &Network::feature_dim)
        .def("num_classes", &Network::num_classes)
        .def("save", &Network::save)
        .def_static("load", &Network::load);
    m.def("train", &train);
    m.def("accuracy", &accuracy);
    m.def("cross_entropy", &cross_entropy);
    m.def("argmax_class", &argmax_class);
    m.def("grad_input", [](const Network& net, const Vec& x, int label) {
        return grad_input(net, x, make_cross_entropy_loss(label));
    });

    // attacks
    py::enum_<TriggerKind>(m, "TriggerKind")
        .value("patch", TriggerKind::patch)
        .value("additive", TriggerKind::additive)
        .value("one_pixel", TriggerKind::one_pixel)
        .value("blend", TriggerKind::blend)
        .value("intrinsic_blend", TriggerKind::intrinsic_blend);
    py::class_<TriggerSpec>(m, "TriggerSpec")
        .def(py::init<>())
        .def_readwrite("kind", &TriggerSpec::kind)
        .def_readwrite("height", &TriggerSpec::height)
        .def_readwrite("width", &TriggerSpec::width)
        .def_readwrite("patch_row", &TriggerSpec::patch_row)
        .def_readwrite("patch_col", &TriggerSpec::patch_col)
        .def_readwrite("patch_values", &TriggerSpec::patch_values)
        .def_readwrite("blend_ratio", &TriggerSpec::blend_ratio)
        .def_readwrite("delta", &TriggerSpec::delta)
        .def_readwrite("pixel_index", &TriggerSpec::pixel_index)
        .def_readwrite("amplitude", &TriggerSpec::amplitude);
    py::class_<PoisonPlan> plan(m, "PoisonPlan");
    plan.def(py::init<>())
        .def_readwrite("sources", &PoisonPlan::sources)
        .def_readwrite("target", &PoisonPlan::target)
        .def_readwrite("dpr", &PoisonPlan::dpr)
        .def_readwrite("cpr", &PoisonPlan::cpr)
        .def_readwrite("mode", &PoisonPlan::mode)
        .def("opr", &PoisonPlan::opr);
    py::enum_<PoisonPlan::Mode>(plan, "Mode")
        .value("dirty_only", PoisonPlan::Mode::dirty_only)
        .value("mixed", PoisonPlan::Mode::mixed);
    py::class_<PoisonCounts>(m, "PoisonCounts")
        .def_readonly("dirty", &PoisonCounts::dirty)
        .def_readonly("clean", &PoisonCounts::clean)
        .def_readonly("achieved_dpr", &PoisonCounts::achieved_dpr)
        .def_readonly("achieved_cpr", &PoisonCounts::achieved_cpr);
    py::class_<AttackReport>(m, "AttackReport")
        .def_readonly("asr", &AttackReport::asr)
        .def_readonly("acc", &AttackReport::acc)
        .def_readonly("cd", &AttackReport::cd)
        .def_readonly("dpr", &AttackReport::dpr)
        .def_readonly("cpr", &AttackReport::cpr)
        .def_readonly("opr", &AttackReport::opr);
    m.def("make_patch_trigger", &make_patch_trigger, py::arg("height"), py::arg("width"),
          py::arg("seed"), py::arg("patch_h") = 3, py::arg("patch_w") = 3);
    m.def("make_chessboard_trigger", &make_chessboard_trigger, py::arg("height"),
          py::arg("width"), py::arg("amplitude") = 3.0 / 255.0);
    m.def("make_one_pixel_trigger", &make_one_pixel_trigger, py::arg("height"),
          py::arg("width"), py::arg("seed"), py::arg("delta") = 75.0 / 255.0);
    m.def("make_blend_trigger", &make_blend_trigger, py::arg("height"), py::arg("width"),
          py::arg("seed"), py::arg("ratio") = 0.2);
    m.def("apply_trigger", &apply_trigger, py::arg("x"), py::arg("spec"),
          py::arg("sample_seed") = 0);
    m.def("poison_dataset", &poison_dataset);
    m.def("evaluate_attack", &evaluate_attack);

    // maskfit + cso
    py::class_<ClassMask>(m, "ClassMask")
        .def(py::init<>())
        .def_readwrite("class_id", &ClassMask::class_id)
        .def_readwrite("v", &ClassMask::v);
    py::class_<MaskFitConfig>(m, "MaskFitConfig")
        .def(py::init<>())
        .def_readwrite("steps", &MaskFitConfig::steps)
        .def_readwrite("learning_rate", &MaskFitConfig::learning_rate)
        .def_readwrite("seed", &MaskFitConfig::seed);
    m.def("fit_class_mask", &fit_class_mask);
    m.def("fit_all_masks", &fit_all_masks);
    m.def("masked_overlap", &masked_overlap);
    py::class_<CsoContext>(m, "CsoContext")
        .def(py::init<const Network&, const ClassMask&, const std::vector<Sample>&>(),
             py::keep_alive<1, 2>())
        .def("penalty", [](const CsoContext& ctx, const Vec& z) { return ctx.penalty(z); })
        .def("penalty_grad",
             [](const CsoContext& ctx, const Vec& z) { return ctx.penalty_grad(z); })
        .def("anchor_count", &CsoContext::anchor_count);

    // detectors
    py::enum_<DetectorVariant>(m, "DetectorVariant")
        .value("mmbd", DetectorVariant::mmbd)
        .value("mmbd_cso", DetectorVariant::mmbd_cso)
        .value("mlbd", DetectorVariant::mlbd)
        .value("mlbd_cso", DetectorVariant::mlbd_cso)
        .value("nc", DetectorVariant::nc)
        .value("nc_cso", DetectorVariant::nc_cso)
        .value("ptred", DetectorVariant::ptred)
        .value("ptred_cso", DetectorVariant::ptred_cso);
    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("variant", &DetectorConfig::variant)
        .def_readwrite("lambda_", &DetectorConfig::lambda)
        .def_readwrite("steps", &DetectorConfig::steps)
        .def_readwrite("learning_rate", &DetectorConfig::learning_rate)
        .def_readwrite("restarts", &DetectorConfig::restarts)
        .def_readwrite("seed", &DetectorConfig::seed)
        .def_readwrite("tau", &DetectorConfig::tau);
    py::class_<ClassStatistic>(m, "ClassStatistic")
        .def_readonly("class_id", &ClassStatistic::class_id)
        .def_readonly("value", &ClassStatistic::value)
        .def_readonly("converged", &ClassStatistic::converged)
        .def_readonly("achieved_misclass", &ClassStatistic::achieved_misclass);
    py::class_<DetectionVerdict>(m, "DetectionVerdict")
        .def_readonly("attacked", &DetectionVerdict::attacked)
        .def_readonly("inferred_target", &DetectionVerdict::inferred_target)
        .def_readonly("scores", &DetectionVerdict::scores)
        .def_readonly("tau", &DetectionVerdict::tau)
        .def_readonly("stats", &DetectionVerdict::stats);
    m.def("mmbd_stat", &mmbd_stat, py::arg("net"), py::arg("t"),
          py::arg("cso") = nullptr, py::arg("cfg") = DetectorConfig{});
    m.def("run_detector",
          [](const Network& net, const CleanSet& clean, const DetectorConfig& cfg,
             const std::vector<ClassMask>& masks) {
              return run_detector(net, clean, cfg, masks.empty() ? nullptr : &masks);
          },
          py::arg("net"), py::arg("clean"), py::arg("cfg"),
          py::arg("masks") = std::vector<ClassMask>{});
    m.def("decide", &decide);
    m.def("verdict_to_json", &verdict_to_json);

    // linear theory
    py::class_<LinearProblem>(m, "LinearProblem")
        .def_readonly("num_classes", &LinearProblem::num_classes)
        .def_readonly("dim", &LinearProblem::dim)
        .def_readonly("target", &LinearProblem::target)
        .def_readonly("alpha", &LinearProblem::alpha)
        .def_readonly("weights", &LinearProblem::weights);
    m.def("gen_linear_problem", &gen_linear_problem);
    m.def("gen_decoy_problem", &gen_decoy_problem, py::arg("num_classes"), py::arg("dim"),
          py::arg("samples_per_class"), py::arg("seed"), py::arg("decoy_margin") = 1.5);
    m.def("baseline_mlbd", &baseline_mlbd);
    m.def("ortho_mlbd", &ortho_mlbd);
    m.def("expected_target_stat", &expected_target_stat);
    m.def("argmax_index", &argmax_index);
    m.def("theory_report_json", &theory_report_json);

    // harness
    m.def("run_experiment_from_config_text", [](const std::string& text) {
        const ExperimentConfig cfg = ExperimentConfig::from_flat(FlatConfig::parse_string(text));
        return report_to_json(run_experiment(cfg));
    });
}
