#include "csolab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "csolab/rng.hpp"
#include "json.hpp"

namespace csolab {

void Dataset::validate() const {
    if (!poisoned.empty() && poisoned.size() != samples.size()) {
        throw std::invalid_argument("Dataset: poisoned flags size mismatch");
    }
    for (const Sample& s : samples) {
        if (s.label < 0 || s.label >= num_classes) {
            throw std::invalid_argument("Dataset: label out of range");
        }
        if (static_cast<int>(s.x.size()) != dim()) {
            throw std::invalid_argument("Dataset: sample dimension mismatch");
        }
    }
}

void SynthConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("SynthConfig: need at least 2 classes");
    if (height <= 0 || width <= 0) throw std::invalid_argument("SynthConfig: bad image shape");
    if (noise_std < 0.0) throw std::invalid_argument("SynthConfig: noise_std must be >= 0");
    if (samples_per_class < 1) throw std::invalid_argument("SynthConfig: samples_per_class must be >= 1");
    if (!(template_energy > 0.0)) throw std::invalid_argument("SynthConfig: template_energy must be > 0");
    if (!informative_coords.empty()) {
        if (static_cast<int>(informative_coords.size()) != num_classes) {
            throw std::invalid_argument("SynthConfig: informative_coords must cover every class");
        }
        for (const auto& set : informative_coords) {
            if (set.empty()) throw std::invalid_argument("SynthConfig: empty informative set");
            for (int c : set) {
                if (c < 0 || c >= dim()) {
                    throw std::invalid_argument("SynthConfig: informative coordinate out of range");
                }
            }
        }
    } else if (informative_count < 1 || informative_count > dim()) {
        throw std::invalid_argument("SynthConfig: informative_count out of range");
    }
    if (decoy_class >= num_classes) {
        throw std::invalid_argument("SynthConfig: decoy_class out of range");
    }
    if (decoy_boost < 1.0) throw std::invalid_argument("SynthConfig: decoy_boost must be >= 1");
}

std::size_t CleanSet::total() const {
    std::size_t n = 0;
    for (const auto& v : per_class) n += v.size();
    return n;
}

std::vector<std::vector<int>> informative_supports(const SynthConfig& cfg) {
    cfg.validate();
    if (!cfg.informative_coords.empty()) return cfg.informative_coords;
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(cfg.num_classes));
    const int d = cfg.dim();

    const bool has_decoy = cfg.decoy_class >= 0 && cfg.decoy_boost > 1.0;
    if (has_decoy) {
        // Decoy gets a widened footprint; the remaining pixels are divided
        // evenly among the other classes.
        const int wide = std::min(
            static_cast<int>(std::lround(cfg.informative_count * cfg.decoy_boost)),
            d - (cfg.num_classes - 1));
        const int rest = std::max(1, (d - wide) / (cfg.num_classes - 1));
        int cursor = 0;
        for (int j = 0; j < wide; ++j) {
            sets[static_cast<std::size_t>(cfg.decoy_class)].push_back(cursor++);
        }
        for (int k = 0; k < cfg.num_classes; ++k) {
            if (k == cfg.decoy_class) continue;
            for (int j = 0; j < rest; ++j) {
                sets[static_cast<std::size_t>(k)].push_back((cursor + j) % d);
            }
            cursor += rest;
        }
        return sets;
    }

    // Disjoint contiguous blocks when they fit, evenly strided (possibly
    // overlapping) starts otherwise.
    const bool disjoint = cfg.num_classes * cfg.informative_count <= d;
    for (int k = 0; k < cfg.num_classes; ++k) {
        const int start = disjoint ? k * cfg.informative_count
                                   : (k * d) / cfg.num_classes;
        for (int j = 0; j < cfg.informative_count; ++j) {
            sets[static_cast<std::size_t>(k)].push_back((start + j) % d);
        }
    }
    return sets;
}

namespace {

// Sum of 3 seeded low-frequency 2-D cosines on the class support, mapped to
// [0,1] and rescaled toward the target L2 energy (clipped at 1 per pixel).
Vec make_template(const SynthConfig& cfg, const std::vector<int>& support, int k,
                  double energy, int attempt) {
    auto rng = make_rng(derive_seed(cfg.seed, 101, static_cast<std::uint64_t>(k) * 1000 +
                                                      static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> freq(0.5, 2.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    double fr[3], fc[3], ph[3];
    for (int j = 0; j < 3; ++j) {
        fr[j] = freq(rng);
        fc[j] = freq(rng);
        ph[j] = phase(rng);
    }
    Vec t(static_cast<std::size_t>(cfg.dim()), 0.0);
    for (int idx : support) {
        const int r = idx / cfg.width;
        const int c = idx % cfg.width;
        double raw = 0.0;
        for (int j = 0; j < 3; ++j) {
            raw += std::cos(2.0 * M_PI * (fr[j] * r / cfg.height + fc[j] * c / cfg.width) + ph[j]);
        }
        t[static_cast<std::size_t>(idx)] = (raw + 3.0) / 6.0; // [0,1]
    }
    const double n = l2_norm(t);
    if (n > 0.0) {
        const double s = energy / n;
        for (double& v : t) v = std::min(1.0, v * s);
    }
    return t;
}

std::vector<Vec> make_all_templates(const SynthConfig& cfg) {
    const auto supports = informative_supports(cfg);
    const double min_sep = 6.0 * cfg.noise_std;
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Vec> templates;
        for (int k = 0; k < cfg.num_classes; ++k) {
            templates.push_back(make_template(cfg, supports[static_cast<std::size_t>(k)], k,
                                              cfg.template_energy, attempt));
        }
        bool ok = true;
        for (int a = 0; a < cfg.num_classes && ok; ++a) {
            for (int b = a + 1; b < cfg.num_classes && ok; ++b) {
                Vec diff = templates[static_cast<std::size_t>(a)];
                axpy(-1.0, templates[static_cast<std::size_t>(b)], diff);
                if (l2_norm(diff) < min_sep) ok = false;
            }
        }
        if (ok) return templates;
    }
    throw std::runtime_error("gen_synthetic: could not separate class templates; "
                             "lower noise_std or raise template_energy");
}

} // namespace

Vec class_template(const SynthConfig& cfg, int k) {
    if (k < 0 || k >= cfg.num_classes) throw std::invalid_argument("class_template: bad class");
    return make_all_templates(cfg)[static_cast<std::size_t>(k)];
}

Dataset gen_synthetic(const SynthConfig& cfg) {
    const auto templates = make_all_templates(cfg);
    Dataset data;
    data.num_classes = cfg.num_classes;
    data.height = cfg.height;
    data.width = cfg.width;
    data.samples.reserve(static_cast<std::size_t>(cfg.num_classes) * cfg.samples_per_class);
    for (int k = 0; k < cfg.num_classes; ++k) {
        auto rng = make_rng(derive_seed(cfg.seed, 102, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int i = 0; i < cfg.samples_per_class; ++i) {
            Sample s;
            s.label = k;
            s.x = templates[static_cast<std::size_t>(k)];
            if (cfg.noise_std > 0.0) {
                for (double& v : s.x) {
                    v = std::clamp(v + cfg.noise_std * noise(rng), 0.0, 1.0);
                }
            }
            data.samples.push_back(std::move(s));
        }
    }
    return data;
}

std::pair<CleanSet, Dataset> draw_clean_set(const Dataset& data, int n_img,
                                            std::uint64_t seed) {
    if (n_img < 1) throw std::invalid_argument("draw_clean_set: n_img must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        by_class[static_cast<std::size_t>(data.samples[i].label)].push_back(i);
    }
    for (int k = 0; k < data.num_classes; ++k) {
        if (static_cast<int>(by_class[static_cast<std::size_t>(k)].size()) < n_img) {
            throw std::invalid_argument("draw_clean_set: class " + std::to_string(k) +
                                        " has fewer than n_img samples");
        }
    }

    std::vector<bool> taken(data.samples.size(), false);
    CleanSet clean;
    clean.per_class.resize(static_cast<std::size_t>(data.num_classes));
    for (int k = 0; k < data.num_classes; ++k) {
        auto idx = by_class[static_cast<std::size_t>(k)];
        auto rng = make_rng(derive_seed(seed, 103, static_cast<std::uint64_t>(k)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int j = 0; j < n_img; ++j) {
            taken[idx[static_cast<std::size_t>(j)]] = true;
            clean.per_class[static_cast<std::size_t>(k)].push_back(
                data.samples[idx[static_cast<std::size_t>(j)]]);
        }
    }

    Dataset rest;
    rest.num_classes = data.num_classes;
    rest.height = data.height;
    rest.width = data.width;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (!taken[i]) {
            rest.samples.push_back(data.samples[i]);
            if (!data.poisoned.empty()) rest.poisoned.push_back(data.poisoned[i]);
        }
    }
    return {std::move(clean), std::move(rest)};
}

CleanSet clean_set_from_dataset(const Dataset& data) {
    CleanSet clean;
    clean.per_class.resize(static_cast<std::size_t>(data.num_classes));
    for (const Sample& s : data.samples) {
        clean.per_class[static_cast<std::size_t>(s.label)].push_back(s);
    }
    for (int k = 0; k < data.num_classes; ++k) {
        if (clean.per_class[static_cast<std::size_t>(k)].empty()) {
            throw std::invalid_argument("clean_set_from_dataset: class " + std::to_string(k) +
                                        " has no samples");
        }
    }
    return clean;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset_csv: cannot open " + path);
    out << "# csolab-dataset v1 classes=" << data.num_classes
        << " height=" << data.height << " width=" << data.width
        << " flags=" << (data.poisoned.empty() ? 0 : 1) << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const Sample& s = data.samples[i];
        out << s.label;
        for (double v : s.x) out << ',' << v;
        if (!data.poisoned.empty()) out << ',' << static_cast<int>(data.poisoned[i]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("save_dataset_csv: write failed");
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
    std::string header;
    std::getline(in, header);
    Dataset data;
    int flags = 0;
    {
        std::istringstream hs(header);
        std::string tok;
        hs >> tok; // '#'
        hs >> tok;
        if (tok != "csolab-dataset") throw std::runtime_error("load_dataset_csv: bad header");
        hs >> tok; // version
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const int value = std::stoi(tok.substr(eq + 1));
            if (key == "classes") data.num_classes = value;
            else if (key == "height") data.height = value;
            else if (key == "width") data.width = value;
            else if (key == "flags") flags = value;
        }
    }
    const int d = data.dim();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        Sample s;
        std::getline(ls, cell, ',');
        s.label = std::stoi(cell);
        s.x.reserve(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            if (!std::getline(ls, cell, ',')) {
                throw std::runtime_error("load_dataset_csv: truncated row");
            }
            s.x.push_back(std::stod(cell));
        }
        if (flags) {
            if (!std::getline(ls, cell, ',')) {
                throw std::runtime_error("load_dataset_csv: missing poisoned flag");
            }
            data.poisoned.push_back(static_cast<std::uint8_t>(std::stoi(cell)));
        }
        data.samples.push_back(std::move(s));
    }
    data.validate();
    return data;
}

void save_synth_config(const SynthConfig& cfg, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "csolab-synth-config-v1";
    j["num_classes"] = cfg.num_classes;
    j["height"] = cfg.height;
    j["width"] = cfg.width;
    j["template_energy"] = cfg.template_energy;
    j["informative_coords"] = cfg.informative_coords;
    j["informative_count"] = cfg.informative_count;
    j["noise_std"] = cfg.noise_std;
    j["samples_per_class"] = cfg.samples_per_class;
    j["decoy_boost"] = cfg.decoy_boost;
    j["decoy_class"] = cfg.decoy_class;
    j["seed"] = cfg.seed;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_synth_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_synth_config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    SynthConfig cfg;
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.height = j.at("height").get<int>();
    cfg.width = j.at("width").get<int>();
    cfg.template_energy = j.at("template_energy").get<double>();
    cfg.informative_coords = j.at("informative_coords").get<std::vector<std::vector<int>>>();
    cfg.informative_count = j.at("informative_count").get<int>();
    cfg.noise_std = j.at("noise_std").get<double>();
    cfg.samples_per_class = j.at("samples_per_class").get<int>();
    cfg.decoy_boost = j.at("decoy_boost").get<double>();
    cfg.decoy_class = j.at("decoy_class").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

} // namespace csolab
