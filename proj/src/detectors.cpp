#include "csolab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "csolab/rng.hpp"
#include "json.hpp"

namespace csolab {

std::string detector_variant_name(DetectorVariant v) {
    switch (v) {
        case DetectorVariant::mmbd: return "mmbd";
        case DetectorVariant::mmbd_cso: return "mmbd_cso";
        case DetectorVariant::mlbd: return "mlbd";
        case DetectorVariant::mlbd_cso: return "mlbd_cso";
        case DetectorVariant::nc: return "nc";
        case DetectorVariant::nc_cso: return "nc_cso";
        case DetectorVariant::ptred: return "ptred";
        case DetectorVariant::ptred_cso: return "ptred_cso";
    }
    throw std::logic_error("detector_variant_name: bad enum");
}

DetectorVariant detector_variant_from_name(const std::string& name) {
    if (name == "mmbd") return DetectorVariant::mmbd;
    if (name == "mmbd_cso") return DetectorVariant::mmbd_cso;
    if (name == "mlbd") return DetectorVariant::mlbd;
    if (name == "mlbd_cso") return DetectorVariant::mlbd_cso;
    if (name == "nc") return DetectorVariant::nc;
    if (name == "nc_cso") return DetectorVariant::nc_cso;
    if (name == "ptred") return DetectorVariant::ptred;
    if (name == "ptred_cso") return DetectorVariant::ptred_cso;
    throw std::invalid_argument("unknown detector variant: " + name);
}

bool variant_uses_cso(DetectorVariant v) {
    return v == DetectorVariant::mmbd_cso || v == DetectorVariant::mlbd_cso ||
           v == DetectorVariant::nc_cso || v == DetectorVariant::ptred_cso;
}

StatDirection variant_direction(DetectorVariant v) {
    switch (v) {
        case DetectorVariant::mmbd:
        case DetectorVariant::mmbd_cso:
        case DetectorVariant::mlbd:
        case DetectorVariant::mlbd_cso:
            return StatDirection::max_suspicious;
        default:
            return StatDirection::min_suspicious;
    }
}

double DetectorConfig::resolved_lambda() const {
    if (lambda >= 0.0) return variant_uses_cso(variant) ? lambda : 0.0;
    switch (variant) {
        case DetectorVariant::nc_cso: return 0.01;
        case DetectorVariant::ptred_cso: return 0.1;
        case DetectorVariant::mmbd_cso:
        case DetectorVariant::mlbd_cso: return 400.0;
        default: return 0.0;
    }
}

double DetectorConfig::resolved_tau() const {
    if (tau >= 0.0) return tau;
    return variant_direction(variant) == StatDirection::max_suspicious ? 3.5 : 2.0;
}

void DetectorConfig::validate() const {
    if (restarts < 1) throw std::invalid_argument("DetectorConfig: restarts must be >= 1");
    if (steps < 0) throw std::invalid_argument("DetectorConfig: steps must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("DetectorConfig: learning_rate must be > 0");
    if (!(ptred_misclass_target > 0.0) || ptred_misclass_target > 1.0) {
        throw std::invalid_argument("DetectorConfig: misclass target must be in (0,1]");
    }
    if (nc_mask_weight < 0.0 || ptred_norm_weight < 0.0) {
        throw std::invalid_argument("DetectorConfig: regularizer weights must be >= 0");
    }
    if (!(lambda_balance > 0.0)) {
        throw std::invalid_argument("DetectorConfig: lambda_balance must be > 0");
    }
}

namespace {

constexpr double kMadConsistency = 1.4826;
constexpr double kEps = 1e-9;

double decayed_lr(const DetectorConfig& cfg, int step) {
    return cfg.learning_rate * std::pow(0.5, step / 100);
}

void clip_box(Vec& v, double lo = 0.0, double hi = 1.0) {
    for (double& x : v) x = std::clamp(x, lo, hi);
}

// margin = g_t - max_{k != t} g_k; also returns d margin / d logits.
double margin_of(const Vec& logits, int t, Vec& dlogits) {
    int runner = -1;
    for (int k = 0; k < static_cast<int>(logits.size()); ++k) {
        if (k == t) continue;
        if (runner < 0 || logits[static_cast<std::size_t>(k)] > logits[static_cast<std::size_t>(runner)]) {
            runner = k;
        }
    }
    dlogits.assign(logits.size(), 0.0);
    dlogits[static_cast<std::size_t>(t)] = 1.0;
    dlogits[static_cast<std::size_t>(runner)] = -1.0;
    return logits[static_cast<std::size_t>(t)] - logits[static_cast<std::size_t>(runner)];
}

// First-restart initialization point for class t; shared by the statistic
// loop and the lambda balancing probe.
Vec init_point(const DetectorConfig& cfg, int dim, int t, int restart) {
    auto rng = make_rng(derive_seed(cfg.seed, 301, static_cast<std::uint64_t>(t) * 4096 +
                                                       static_cast<std::uint64_t>(restart)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec z(static_cast<std::size_t>(dim));
    for (double& x : z) x = u(rng);
    return z;
}

// Shared ascent loop for the margin (mmbd) and logit (mlbd) statistics.
// lambda_override >= 0 pins the penalty weight (used by run_detector, which
// balances one weight for the whole model so class statistics stay
// comparable).
ClassStatistic input_space_stat_impl(const Network& net, int t, const CsoContext* cso,
                                     const DetectorConfig& cfg, bool use_margin,
                                     double lambda_override) {
    cfg.validate();
    if (t < 0 || t >= net.num_classes()) throw std::invalid_argument("input_space_stat: bad class");
    const int dim = net.config().input_dim;
    double lambda = cso ? cfg.resolved_lambda() : 0.0;
    if (lambda_override >= 0.0 && cso) lambda = lambda_override;

    ClassStatistic best;
    best.class_id = t;
    best.direction = StatDirection::max_suspicious;
    best.converged = false;
    bool have_best = false;
    bool lambda_fixed = lambda_override >= 0.0 || !(lambda > 0.0) || !cfg.auto_rescale_lambda;

    for (int r = 0; r < cfg.restarts; ++r) {
        Vec z = init_point(cfg, dim, t, r);

        for (int step = 0; step <= cfg.steps; ++step) {
            const ForwardCache cache = net.forward_cached(z);
            Vec dlogits;
            double stat_value;
            if (use_margin) {
                stat_value = margin_of(cache.logits(), t, dlogits);
            } else {
                stat_value = cache.logits()[static_cast<std::size_t>(t)];
                dlogits.assign(cache.logits().size(), 0.0);
                dlogits[static_cast<std::size_t>(t)] = 1.0;
            }

            double pen = 0.0;
            if (lambda > 0.0 || !lambda_fixed) {
                pen = cso->penalty(z);
            }
            if (!lambda_fixed) {
                // Balance the two terms once, at the very first evaluation.
                const double cap = 10.0 * std::max(std::abs(stat_value), 1.0);
                if (pen > 0.0 && lambda * pen > cap) lambda = cap / pen;
                lambda_fixed = true;
            }
            // Candidates are judged at the full penalty weight; the gradient
            // ramps the weight in so the ascent can locate high-margin routes
            // before orthogonality starts bending it away from intrinsic ones.
            const double obj = stat_value - lambda * pen;
            if (!std::isfinite(obj)) break; // discard the rest of this restart

            if (!have_best || obj > best.best_objective) {
                best.best_objective = obj;
                best.value = stat_value;
                best.best_point = z;
                best.converged = true;
                have_best = true;
            }
            if (step == cfg.steps) break;

            Vec g = net.backward_input(cache, dlogits);
            if (lambda > 0.0) {
                const double ramp =
                    cfg.steps > 0 ? std::min(1.0, 2.0 * step / cfg.steps) : 1.0;
                const Vec gp = cso->penalty_grad(z);
                axpy(-lambda * ramp, gp, g);
            }
            axpy(decayed_lr(cfg, step), g, z);
            clip_box(z);
        }
    }
    if (!have_best) throw std::runtime_error("input_space_stat: every restart diverged");
    best.used_lambda = lambda;
    return best;
}

// One penalty weight for the whole model: cap the raw lambda so the initial
// penalty magnitude stays within 10x of the initial objective magnitude,
// averaged over classes. Deterministic given (net, cfg.seed).
double balanced_lambda(const Network& net, const std::vector<CsoContext>& contexts,
                       const DetectorConfig& cfg, bool use_margin) {
    const double raw = cfg.resolved_lambda();
    if (!(raw > 0.0) || !cfg.auto_rescale_lambda) return raw;
    const int dim = net.config().input_dim;
    double stat_sum = 0.0, pen_sum = 0.0;
    for (int t = 0; t < net.num_classes(); ++t) {
        const Vec z = init_point(cfg, dim, t, 0);
        const Vec logits = net.forward(z);
        if (use_margin) {
            Vec dlogits;
            stat_sum += std::abs(margin_of(logits, t, dlogits));
        } else {
            stat_sum += std::abs(logits[static_cast<std::size_t>(t)]);
        }
        pen_sum += contexts[static_cast<std::size_t>(t)].penalty(z);
    }
    const double mean_stat = stat_sum / net.num_classes();
    const double mean_pen = pen_sum / net.num_classes();
    const double cap = cfg.lambda_balance * std::max(mean_stat, 1.0);
    if (mean_pen > 0.0 && raw * mean_pen > cap) return cap / mean_pen;
    return raw;
}

} // namespace

ClassStatistic mmbd_stat(const Network& net, int t, const CsoContext* cso,
                         const DetectorConfig& cfg) {
    return input_space_stat_impl(net, t, cso, cfg, /*use_margin=*/true, -1.0);
}

ClassStatistic mlbd_stat(const Network& net, int t, const CsoContext* cso,
                         const DetectorConfig& cfg) {
    return input_space_stat_impl(net, t, cso, cfg, /*use_margin=*/false, -1.0);
}

ClassStatistic nc_stat(const Network& net, int t, const CleanSet& clean,
                       const CsoContext* cso, const DetectorConfig& cfg) {
    cfg.validate();
    if (t < 0 || t >= net.num_classes()) throw std::invalid_argument("nc_stat: bad class");
    const int dim = net.config().input_dim;
    const double lambda = cso ? cfg.resolved_lambda() : 0.0;

    std::vector<const Sample*> pool;
    for (int k = 0; k < clean.num_classes(); ++k) {
        if (k == t) continue;
        for (const Sample& s : clean.per_class[static_cast<std::size_t>(k)]) pool.push_back(&s);
    }
    if (pool.empty()) throw std::invalid_argument("nc_stat: no non-target clean samples");
    const double inv_n = 1.0 / static_cast<double>(pool.size());

    ClassStatistic best;
    best.class_id = t;
    best.direction = StatDirection::min_suspicious;
    best.converged = false;
    double best_rate = -1.0;
    bool have_any = false;

    Vec z(static_cast<std::size_t>(dim));
    for (int r = 0; r < cfg.restarts; ++r) {
        auto rng = make_rng(derive_seed(cfg.seed, 302, static_cast<std::uint64_t>(t) * 4096 +
                                                           static_cast<std::uint64_t>(r)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Vec m(static_cast<std::size_t>(dim), 0.0); // grown from zero support
        Vec p(static_cast<std::size_t>(dim));
        for (double& x : p) x = u(rng);

        // L1 cost anneals upward while the flip keeps succeeding and backs
        // off when it fails, squeezing the mask toward minimal support.
        double mask_w = cfg.nc_mask_weight;
        int up_streak = 0, down_streak = 0;

        for (int step = 0; step <= cfg.steps; ++step) {
            Vec gm(static_cast<std::size_t>(dim), 0.0);
            Vec gp(static_cast<std::size_t>(dim), 0.0);
            double ce_total = 0.0;
            int flipped = 0;
            for (const Sample* s : pool) {
                for (int i = 0; i < dim; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    z[ii] = (1.0 - m[ii]) * s->x[ii] + m[ii] * p[ii];
                }
                const ForwardCache cache = net.forward_cached(z);
                if (argmax_class(cache.logits()) == t) ++flipped;
                ce_total += cross_entropy(cache.logits(), t);
                Vec dz = net.backward_input(cache, cross_entropy_grad(cache.logits(), t));
                if (lambda > 0.0) {
                    axpy(lambda, cso->penalty_grad(z), dz);
                }
                for (int i = 0; i < dim; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    gm[ii] += inv_n * dz[ii] * (p[ii] - s->x[ii]);
                    gp[ii] += inv_n * dz[ii] * m[ii];
                }
            }
            const double rate = static_cast<double>(flipped) * inv_n;
            const double mask_l1 = l1_norm(m);
            const double obj = ce_total * inv_n + mask_w * mask_l1;

            const bool success = rate >= cfg.ptred_misclass_target;
            if (success) {
                ++up_streak;
                down_streak = 0;
            } else {
                ++down_streak;
                up_streak = 0;
            }
            if (up_streak >= 5) {
                mask_w = std::min(mask_w * 1.5, 1e4 * cfg.nc_mask_weight);
                up_streak = 0;
            } else if (down_streak >= 5) {
                mask_w = std::max(mask_w / 1.5, 1e-2 * cfg.nc_mask_weight);
                down_streak = 0;
            }
            const bool better =
                success ? (!best.converged || mask_l1 < best.value)
                        : (!best.converged &&
                           (rate > best_rate || (rate == best_rate && (!have_any || mask_l1 < best.value))));
            if (better) {
                best.value = mask_l1;
                best.best_objective = obj;
                best.achieved_misclass = rate;
                best.converged = success || best.converged;
                best.best_point = m;
                best.extra_point = p;
                best_rate = std::max(best_rate, rate);
                have_any = true;
            }
            if (step == cfg.steps) break;

            // L1 regularizer: m >= 0, so d|m|/dm = 1.
            for (double& g : gm) g += mask_w;
            const double lr = decayed_lr(cfg, step);
            axpy(-lr, gm, m);
            axpy(-lr, gp, p);
            clip_box(m);
            clip_box(p);
        }
    }
    best.used_lambda = lambda;
    return best;
}

ClassStatistic ptred_stat(const Network& net, int s, int t, const CleanSet& clean,
                          const CsoContext* cso, const DetectorConfig& cfg) {
    cfg.validate();
    if (s == t) throw std::invalid_argument("ptred_stat: source equals target");
    if (s < 0 || s >= clean.num_classes() || t < 0 || t >= net.num_classes()) {
        throw std::invalid_argument("ptred_stat: class out of range");
    }
    const auto& pool = clean.per_class[static_cast<std::size_t>(s)];
    if (pool.empty()) throw std::invalid_argument("ptred_stat: empty source clean set");
    const int dim = net.config().input_dim;
    const double lambda = cso ? cfg.resolved_lambda() : 0.0;
    const double inv_n = 1.0 / static_cast<double>(pool.size());

    // Fraction of the source pool mapped to t by perturbation q.
    const auto success_rate = [&](const Vec& q) {
        int flipped = 0;
        Vec z(static_cast<std::size_t>(dim));
        for (const Sample& sample : pool) {
            for (int i = 0; i < dim; ++i) {
                z[static_cast<std::size_t>(i)] =
                    std::clamp(sample.x[static_cast<std::size_t>(i)] + q[static_cast<std::size_t>(i)], 0.0, 1.0);
            }
            if (argmax_class(net.forward(z)) == t) ++flipped;
        }
        return static_cast<double>(flipped) * inv_n;
    };

    ClassStatistic best;
    best.class_id = t;
    best.direction = StatDirection::min_suspicious;
    best.converged = false;
    best.value = std::numeric_limits<double>::infinity();
    double best_rate = -1.0;

    Vec z(static_cast<std::size_t>(dim));
    for (int r = 0; r < cfg.restarts; ++r) {
        Vec p(static_cast<std::size_t>(dim), 0.0);
        if (r > 0) {
            auto rng = make_rng(derive_seed(cfg.seed, 303,
                                            (static_cast<std::uint64_t>(s) * 256 + static_cast<std::uint64_t>(t)) * 4096 +
                                                static_cast<std::uint64_t>(r)));
            std::uniform_real_distribution<double> u(-0.1, 0.1);
            for (double& x : p) x = u(rng);
        }

        for (int step = 0; step <= cfg.steps; ++step) {
            Vec grad(static_cast<std::size_t>(dim), 0.0);
            double ce_total = 0.0;
            int flipped = 0;
            std::vector<bool> interior(static_cast<std::size_t>(dim));
            for (const Sample& sample : pool) {
                for (int i = 0; i < dim; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    const double raw = sample.x[ii] + p[ii];
                    z[ii] = std::clamp(raw, 0.0, 1.0);
                    interior[ii] = raw > 0.0 && raw < 1.0;
                }
                const ForwardCache cache = net.forward_cached(z);
                if (argmax_class(cache.logits()) == t) ++flipped;
                ce_total += cross_entropy(cache.logits(), t);
                Vec dz = net.backward_input(cache, cross_entropy_grad(cache.logits(), t));
                if (lambda > 0.0) {
                    axpy(lambda, cso->penalty_grad(z), dz);
                }
                for (int i = 0; i < dim; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    if (interior[ii]) grad[ii] += inv_n * dz[ii];
                }
            }
            const double rate = static_cast<double>(flipped) * inv_n;
            const double norm = l2_norm(p);
            const bool success = rate >= cfg.ptred_misclass_target;
            if (success) {
                if (!best.converged || norm < best.value) {
                    best.value = norm;
                    best.best_objective = ce_total * inv_n;
                    best.achieved_misclass = rate;
                    best.best_point = p;
                }
                best.converged = true;
            } else if (!best.converged && rate > best_rate) {
                best.achieved_misclass = rate;
            }
            best_rate = std::max(best_rate, rate);
            if (step == cfg.steps) break;

            // norm penalty: d(w*|p|^2)/dp = 2 w p
            for (int i = 0; i < dim; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                grad[ii] += 2.0 * cfg.ptred_norm_weight * p[ii];
            }
            axpy(-decayed_lr(cfg, step), grad, p);
            clip_box(p, -1.0, 1.0);
        }
    }

    // Scale refinement: the smallest c in [0,1] with c*p still successful
    // tightens the norm toward the decision boundary.
    if (best.converged && best.value > 0.0) {
        Vec scaled(best.best_point.size());
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = mid * best.best_point[i];
            if (success_rate(scaled) >= cfg.ptred_misclass_target) hi = mid;
            else lo = mid;
        }
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = hi * best.best_point[i];
        best.best_point = scaled;
        best.value = l2_norm(scaled);
        best.achieved_misclass = success_rate(scaled);
    }
    best.used_lambda = lambda;
    return best;
}

DetectionVerdict decide(const std::vector<ClassStatistic>& stats, double tau) {
    if (stats.size() < 4) {
        throw std::invalid_argument("decide: need at least 4 classes for a MAD rule");
    }
    const StatDirection dir = stats.front().direction;
    for (const ClassStatistic& s : stats) {
        if (s.direction != dir) throw std::invalid_argument("decide: inconsistent directions");
    }

    std::vector<double> w(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        w[i] = dir == StatDirection::max_suspicious
                   ? stats[i].value
                   : 1.0 / (stats[i].value + kEps);
    }

    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double med = median_of(w);
    std::vector<double> dev(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) dev[i] = std::abs(w[i] - med);
    const double mad = median_of(dev);
    const double scale = kMadConsistency * std::max(mad, kEps);

    DetectionVerdict verdict;
    verdict.tau = tau;
    verdict.scores.resize(w.size());
    int arg = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        verdict.scores[i] = (w[i] - med) / scale;
        if (verdict.scores[i] > verdict.scores[static_cast<std::size_t>(arg)]) {
            arg = static_cast<int>(i);
        }
    }
    if (verdict.scores[static_cast<std::size_t>(arg)] > tau) {
        verdict.attacked = true;
        verdict.inferred_target = stats[static_cast<std::size_t>(arg)].class_id;
    }
    verdict.stats = stats;
    return verdict;
}

DetectionVerdict run_detector(const Network& net, const CleanSet& clean,
                              const DetectorConfig& cfg,
                              const std::vector<ClassMask>* masks) {
    cfg.validate();
    const int K = net.num_classes();
    const bool wants_cso = variant_uses_cso(cfg.variant);
    if (wants_cso) {
        if (masks == nullptr || static_cast<int>(masks->size()) != K) {
            throw std::invalid_argument("run_detector: cso variant requires one mask per class");
        }
        if (clean.num_classes() != K) {
            throw std::invalid_argument("run_detector: clean set classes mismatch");
        }
    }

    // Anchor contexts are shared by the statistic passes; the margin/logit
    // variants additionally balance one penalty weight for the whole model
    // so per-class statistics stay comparable.
    std::vector<CsoContext> contexts;
    double lambda_override = -1.0;
    if (wants_cso) {
        contexts.reserve(static_cast<std::size_t>(K));
        for (int t = 0; t < K; ++t) {
            contexts.emplace_back(net, (*masks)[static_cast<std::size_t>(t)],
                                  clean.per_class[static_cast<std::size_t>(t)]);
        }
        if (cfg.variant == DetectorVariant::mmbd_cso || cfg.variant == DetectorVariant::mlbd_cso) {
            lambda_override = balanced_lambda(net, contexts, cfg,
                                              cfg.variant == DetectorVariant::mmbd_cso);
        }
    }

    std::vector<ClassStatistic> stats;
    stats.reserve(static_cast<std::size_t>(K));
    for (int t = 0; t < K; ++t) {
        const CsoContext* cso = wants_cso ? &contexts[static_cast<std::size_t>(t)] : nullptr;
        switch (cfg.variant) {
            case DetectorVariant::mmbd:
            case DetectorVariant::mmbd_cso:
                stats.push_back(input_space_stat_impl(net, t, cso, cfg, true, lambda_override));
                break;
            case DetectorVariant::mlbd:
            case DetectorVariant::mlbd_cso:
                stats.push_back(input_space_stat_impl(net, t, cso, cfg, false, lambda_override));
                break;
            case DetectorVariant::nc:
            case DetectorVariant::nc_cso:
                stats.push_back(nc_stat(net, t, clean, cso, cfg));
                break;
            case DetectorVariant::ptred:
            case DetectorVariant::ptred_cso: {
                // Per-class statistic is the easiest source-to-target flip.
                ClassStatistic agg;
                agg.class_id = t;
                agg.direction = StatDirection::min_suspicious;
                agg.converged = false;
                agg.value = std::numeric_limits<double>::infinity();
                for (int s = 0; s < K; ++s) {
                    if (s == t) continue;
                    ClassStatistic st = ptred_stat(net, s, t, clean, cso, cfg);
                    if (st.converged && (!agg.converged || st.value < agg.value)) {
                        agg = st;
                        agg.class_id = t;
                    } else if (!agg.converged) {
                        agg.achieved_misclass = std::max(agg.achieved_misclass, st.achieved_misclass);
                    }
                }
                agg.used_lambda = cso ? cfg.resolved_lambda() : 0.0;
                stats.push_back(std::move(agg));
                break;
            }
        }
    }

    DetectionVerdict verdict = decide(stats, cfg.resolved_tau());
    verdict.variant = cfg.variant;
    verdict.lambda = cfg.resolved_lambda();
    verdict.seed = cfg.seed;
    return verdict;
}

std::string verdict_to_json(const DetectionVerdict& v) {
    nlohmann::ordered_json j;
    j["variant"] = detector_variant_name(v.variant);
    j["lambda"] = v.lambda;
    auto per_class = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < v.stats.size(); ++i) {
        nlohmann::ordered_json c;
        c["class"] = v.stats[i].class_id;
        if (std::isfinite(v.stats[i].value)) c["value"] = v.stats[i].value;
        else c["value"] = nullptr;
        c["score"] = v.scores[i];
        c["converged"] = v.stats[i].converged;
        per_class.push_back(std::move(c));
    }
    j["per_class"] = std::move(per_class);
    j["attacked"] = v.attacked;
    if (v.inferred_target) j["inferred_target"] = *v.inferred_target;
    else j["inferred_target"] = nullptr;
    j["tau"] = v.tau;
    j["seed"] = v.seed;
    return j.dump();
}

} // namespace csolab
