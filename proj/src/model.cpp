#include "csolab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "csolab/data.hpp"
#include "csolab/rng.hpp"

namespace csolab {

void ModelConfig::validate() const {
    if (input_dim <= 0) throw std::invalid_argument("ModelConfig: input_dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: need at least 2 classes");
    for (int h : hidden_dims) {
        if (h <= 0) throw std::invalid_argument("ModelConfig: hidden dims must be positive");
    }
    const int split = resolved_split();
    const int n_hidden = static_cast<int>(hidden_dims.size());
    if (n_hidden == 0) {
        if (split != 0) {
            throw std::invalid_argument("ModelConfig: linear network requires split_index 0");
        }
    } else if (split < 1 || split > n_hidden) {
        throw std::invalid_argument("ModelConfig: split_index out of range");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
}

Network::Network(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::vector<int> dims;
    dims.push_back(cfg_.input_dim);
    dims.insert(dims.end(), cfg_.hidden_dims.begin(), cfg_.hidden_dims.end());
    dims.push_back(cfg_.num_classes);

    auto rng = make_rng(cfg_.seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        l.in = dims[i];
        l.out = dims[i + 1];
        l.w.resize(static_cast<std::size_t>(l.in) * l.out);
        l.b.assign(static_cast<std::size_t>(l.out), 0.0);
        const double bound = std::sqrt(6.0 / l.in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& w : l.w) w = u(rng);
        layers_.push_back(std::move(l));
    }
}

int Network::feature_dim() const {
    const int split = cfg_.resolved_split();
    if (split == 0) return cfg_.input_dim;
    return layers_[static_cast<std::size_t>(split - 1)].out;
}

namespace {

void affine(const Layer& l, const Vec& x, Vec& out) {
    if (static_cast<int>(x.size()) != l.in) {
        throw std::invalid_argument("Network: dimension mismatch in affine layer");
    }
    out.assign(static_cast<std::size_t>(l.out), 0.0);
    for (int r = 0; r < l.out; ++r) {
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.in;
        double s = l.b[static_cast<std::size_t>(r)];
        for (int c = 0; c < l.in; ++c) s += wr[c] * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = s;
    }
}

// grad w.r.t. layer input given grad w.r.t. layer output: W^T delta
void affine_backward_input(const Layer& l, const Vec& dout, Vec& din) {
    din.assign(static_cast<std::size_t>(l.in), 0.0);
    for (int r = 0; r < l.out; ++r) {
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.in;
        const double d = dout[static_cast<std::size_t>(r)];
        if (d == 0.0) continue;
        for (int c = 0; c < l.in; ++c) din[static_cast<std::size_t>(c)] += wr[c] * d;
    }
}

void relu_inplace(Vec& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// ReLU subgradient at 0 is 0: mask by pre > 0.
void relu_backward_inplace(const Vec& pre, Vec& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(pre[i] > 0.0)) d[i] = 0.0;
    }
}

} // namespace

Vec Network::forward(const Vec& x) const {
    Vec cur = x;
    Vec next;
    const int n = num_layers();
    for (int i = 0; i < n; ++i) {
        affine(layers_[static_cast<std::size_t>(i)], cur, next);
        if (i + 1 < n) relu_inplace(next);
        cur.swap(next);
    }
    return cur;
}

ForwardCache Network::forward_cached(const Vec& x) const {
    ForwardCache c;
    c.input = x;
    const int n = num_layers();
    c.pre.resize(static_cast<std::size_t>(n));
    c.post.resize(static_cast<std::size_t>(n));
    const Vec* cur = &c.input;
    for (int i = 0; i < n; ++i) {
        affine(layers_[static_cast<std::size_t>(i)], *cur, c.pre[static_cast<std::size_t>(i)]);
        c.post[static_cast<std::size_t>(i)] = c.pre[static_cast<std::size_t>(i)];
        if (i + 1 < n) relu_inplace(c.post[static_cast<std::size_t>(i)]);
        cur = &c.post[static_cast<std::size_t>(i)];
    }
    return c;
}

Vec Network::features_at(const Vec& x) const {
    const int split = cfg_.resolved_split();
    if (split == 0) {
        if (static_cast<int>(x.size()) != cfg_.input_dim) {
            throw std::invalid_argument("features_at: dimension mismatch");
        }
        return x;
    }
    Vec cur = x;
    Vec next;
    for (int i = 0; i < split; ++i) {
        affine(layers_[static_cast<std::size_t>(i)], cur, next);
        relu_inplace(next);
        cur.swap(next);
    }
    return cur;
}

Vec Network::head_forward(const Vec& features) const {
    const int split = cfg_.resolved_split();
    const int n = num_layers();
    Vec cur = features;
    Vec next;
    for (int i = split; i < n; ++i) {
        affine(layers_[static_cast<std::size_t>(i)], cur, next);
        if (i + 1 < n) relu_inplace(next);
        cur.swap(next);
    }
    return cur;
}

Vec Network::backward_input(const ForwardCache& c, const Vec& dlogits) const {
    const int n = num_layers();
    Vec d = dlogits;
    Vec din;
    for (int i = n - 1; i >= 0; --i) {
        affine_backward_input(layers_[static_cast<std::size_t>(i)], d, din);
        d.swap(din);
        if (i > 0) relu_backward_inplace(c.pre[static_cast<std::size_t>(i - 1)], d);
    }
    return d;
}

Vec Network::backward_input_from_features(const ForwardCache& c, const Vec& dfeatures) const {
    const int split = cfg_.resolved_split();
    if (split == 0) return dfeatures;
    Vec d = dfeatures;
    Vec din;
    for (int i = split - 1; i >= 0; --i) {
        relu_backward_inplace(c.pre[static_cast<std::size_t>(i)], d);
        affine_backward_input(layers_[static_cast<std::size_t>(i)], d, din);
        d.swap(din);
    }
    return d;
}

Vec Network::head_backward(const Vec& features, const Vec& dlogits) const {
    const int split = cfg_.resolved_split();
    const int n = num_layers();
    // forward through the head, caching pre-activations
    std::vector<Vec> pre(static_cast<std::size_t>(n - split));
    Vec cur = features;
    for (int i = split; i < n; ++i) {
        affine(layers_[static_cast<std::size_t>(i)], cur, pre[static_cast<std::size_t>(i - split)]);
        cur = pre[static_cast<std::size_t>(i - split)];
        if (i + 1 < n) relu_inplace(cur);
    }
    Vec d = dlogits;
    Vec din;
    for (int i = n - 1; i >= split; --i) {
        affine_backward_input(layers_[static_cast<std::size_t>(i)], d, din);
        d.swap(din);
        if (i > split) relu_backward_inplace(pre[static_cast<std::size_t>(i - 1 - split)], d);
    }
    return d;
}

void Network::zero_parameters() {
    for (Layer& l : layers_) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

Vec grad_input(const Network& net, const Vec& x, const LogitLoss& loss) {
    const ForwardCache c = net.forward_cached(x);
    auto [value, dlogits] = loss(c.logits());
    if (!std::isfinite(value) || !all_finite(dlogits)) {
        throw std::runtime_error("grad_input: non-finite loss");
    }
    Vec g = net.backward_input(c, dlogits);
    if (!all_finite(g)) throw std::runtime_error("grad_input: non-finite gradient");
    return g;
}

double cross_entropy(const Vec& logits, int label) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    return m + std::log(s) - logits[static_cast<std::size_t>(label)];
}

Vec cross_entropy_grad(const Vec& logits, int label) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double s = 0.0;
    Vec g(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        g[i] = std::exp(logits[i] - m);
        s += g[i];
    }
    for (double& v : g) v /= s;
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

LogitLoss make_cross_entropy_loss(int label) {
    return [label](const Vec& logits) {
        return std::make_pair(cross_entropy(logits, label), cross_entropy_grad(logits, label));
    };
}

int argmax_class(const Vec& logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace {

struct ParamGrads {
    std::vector<std::vector<double>> gw;
    std::vector<Vec> gb;

    explicit ParamGrads(const Network& net) {
        const int n = net.num_layers();
        gw.resize(static_cast<std::size_t>(n));
        gb.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            gw[static_cast<std::size_t>(i)].assign(net.layer(i).w.size(), 0.0);
            gb[static_cast<std::size_t>(i)].assign(net.layer(i).b.size(), 0.0);
        }
    }
    void zero() {
        for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
        for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0);
    }
};

// Accumulates d(CE)/d(params) for one sample into grads.
void accumulate_sample_grads(const Network& net, const ForwardCache& c, int label,
                             ParamGrads& grads) {
    const int n = net.num_layers();
    Vec d = cross_entropy_grad(c.logits(), label);
    Vec din;
    for (int i = n - 1; i >= 0; --i) {
        const Layer& l = net.layer(i);
        const Vec& in = (i == 0) ? c.input : c.post[static_cast<std::size_t>(i - 1)];
        auto& gw = grads.gw[static_cast<std::size_t>(i)];
        auto& gb = grads.gb[static_cast<std::size_t>(i)];
        for (int r = 0; r < l.out; ++r) {
            const double dr = d[static_cast<std::size_t>(r)];
            if (dr == 0.0) continue;
            gb[static_cast<std::size_t>(r)] += dr;
            double* gwr = gw.data() + static_cast<std::size_t>(r) * l.in;
            for (int cidx = 0; cidx < l.in; ++cidx) {
                gwr[cidx] += dr * in[static_cast<std::size_t>(cidx)];
            }
        }
        if (i > 0) {
            affine_backward_input(l, d, din);
            d.swap(din);
            relu_backward_inplace(c.pre[static_cast<std::size_t>(i - 1)], d);
        }
    }
}

struct AdamState {
    std::vector<std::vector<double>> mw, vw;
    std::vector<Vec> mb, vb;
    long step = 0;

    explicit AdamState(const Network& net) {
        const int n = net.num_layers();
        mw.resize(static_cast<std::size_t>(n));
        vw.resize(static_cast<std::size_t>(n));
        mb.resize(static_cast<std::size_t>(n));
        vb.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            mw[static_cast<std::size_t>(i)].assign(net.layer(i).w.size(), 0.0);
            vw[static_cast<std::size_t>(i)].assign(net.layer(i).w.size(), 0.0);
            mb[static_cast<std::size_t>(i)].assign(net.layer(i).b.size(), 0.0);
            vb[static_cast<std::size_t>(i)].assign(net.layer(i).b.size(), 0.0);
        }
    }
};

void adam_update(std::vector<double>& p, const std::vector<double>& g,
                 std::vector<double>& m, std::vector<double>& v, double lr, long step) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

} // namespace

Network train(Network net, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");
    for (const Sample& s : data.samples) {
        if (s.label < 0 || s.label >= net.num_classes()) {
            throw std::invalid_argument("train: label out of range");
        }
    }

    const int first_trained = cfg.head_only ? net.config().resolved_split() : 0;
    ParamGrads grads(net);
    AdamState adam(net);

    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.seed);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            grads.zero();
            for (std::size_t j = start; j < end; ++j) {
                const Sample& s = data.samples[order[j]];
                const ForwardCache c = net.forward_cached(s.x);
                accumulate_sample_grads(net, c, s.label, grads);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& g : grads.gw) for (double& x : g) x *= inv;
            for (auto& g : grads.gb) for (double& x : g) x *= inv;
            if (cfg.weight_decay > 0.0) {
                for (int i = first_trained; i < net.num_layers(); ++i) {
                    const auto li = static_cast<std::size_t>(i);
                    for (std::size_t k = 0; k < net.layer(i).w.size(); ++k) {
                        grads.gw[li][k] += cfg.weight_decay * net.layer(i).w[k];
                    }
                }
            }

            ++adam.step;
            for (int i = first_trained; i < net.num_layers(); ++i) {
                const auto li = static_cast<std::size_t>(i);
                if (cfg.optimizer == TrainConfig::Optimizer::adam) {
                    adam_update(net.layer(i).w, grads.gw[li], adam.mw[li], adam.vw[li],
                                cfg.learning_rate, adam.step);
                    adam_update(net.layer(i).b, grads.gb[li], adam.mb[li], adam.vb[li],
                                cfg.learning_rate, adam.step);
                } else {
                    for (std::size_t k = 0; k < net.layer(i).w.size(); ++k) {
                        net.layer(i).w[k] -= cfg.learning_rate * grads.gw[li][k];
                    }
                    for (std::size_t k = 0; k < net.layer(i).b.size(); ++k) {
                        net.layer(i).b[k] -= cfg.learning_rate * grads.gb[li][k];
                    }
                }
            }
        }
    }
    return net;
}

double accuracy(const Network& net, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("accuracy: empty dataset");
    std::size_t correct = 0;
    for (const Sample& s : data.samples) {
        if (argmax_class(net.forward(s.x)) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: text header, then row-major float64 values in decimal.
// ---------------------------------------------------------------------------

void Network::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Network::save: cannot open " + path);
    out << "csolab-net v1\n";
    out << "input_dim " << cfg_.input_dim << "\n";
    out << "hidden";
    for (int h : cfg_.hidden_dims) out << ' ' << h;
    out << "\n";
    out << "num_classes " << cfg_.num_classes << "\n";
    out << "split_index " << cfg_.resolved_split() << "\n";
    out << "seed " << cfg_.seed << "\n";
    out << "layers " << num_layers() << "\n";
    out << std::setprecision(17);
    for (const Layer& l : layers_) {
        out << "layer " << l.out << ' ' << l.in << "\n";
        for (int r = 0; r < l.out; ++r) {
            const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.in;
            for (int c = 0; c < l.in; ++c) out << (c ? " " : "") << wr[c];
            out << "\n";
        }
        for (int r = 0; r < l.out; ++r) out << (r ? " " : "") << l.b[static_cast<std::size_t>(r)];
        out << "\n";
    }
    if (!out) throw std::runtime_error("Network::save: write failed for " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Network::load: cannot open " + path);
    std::string tag, version;
    in >> tag >> version;
    if (tag != "csolab-net" || version != "v1") {
        throw std::runtime_error("Network::load: unrecognized checkpoint format");
    }
    ModelConfig cfg;
    cfg.hidden_dims.clear();
    int n_layers = 0;
    std::string key;
    while (in >> key) {
        if (key == "input_dim") in >> cfg.input_dim;
        else if (key == "hidden") {
            std::string rest;
            std::getline(in, rest);
            std::istringstream hs(rest);
            int h;
            while (hs >> h) cfg.hidden_dims.push_back(h);
        } else if (key == "num_classes") in >> cfg.num_classes;
        else if (key == "split_index") in >> cfg.split_index;
        else if (key == "seed") in >> cfg.seed;
        else if (key == "layers") { in >> n_layers; break; }
        else throw std::runtime_error("Network::load: unexpected token " + key);
    }
    Network net;
    net.cfg_ = cfg;
    net.cfg_.validate();
    for (int i = 0; i < n_layers; ++i) {
        std::string lt;
        Layer l;
        in >> lt >> l.out >> l.in;
        if (lt != "layer" || !in) throw std::runtime_error("Network::load: malformed layer header");
        l.w.resize(static_cast<std::size_t>(l.in) * l.out);
        for (double& w : l.w) in >> w;
        l.b.resize(static_cast<std::size_t>(l.out));
        for (double& b : l.b) in >> b;
        if (!in) throw std::runtime_error("Network::load: truncated checkpoint");
        net.layers_.push_back(std::move(l));
    }
    return net;
}

} // namespace csolab
