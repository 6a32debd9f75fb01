#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "csolab/numerics.hpp"

namespace csolab {

struct Dataset; // data.hpp

// Fully-connected classifier with ReLU hidden activations and an affine
// output layer. split_index names the hidden layer whose post-activation
// output is the feature vector used by the mask / orthogonalization
// machinery; everything after it is the classification head.
struct ModelConfig {
    int input_dim = 64;
    std::vector<int> hidden_dims{64, 32};
    int num_classes = 8;
    // 1-based hidden-layer index; -1 means the last hidden layer. 0 is only
    // valid for a pure-linear network (no hidden layers) and makes the
    // feature extractor the identity.
    int split_index = -1;
    std::uint64_t seed = 0;

    int resolved_split() const {
        return split_index < 0 ? static_cast<int>(hidden_dims.size()) : split_index;
    }
    void validate() const;
};

struct Layer {
    int in = 0, out = 0;
    std::vector<double> w; // row-major, out x in
    Vec b;                 // out
};

// Per-layer activations from one forward pass, kept for backprop.
struct ForwardCache {
    Vec input;
    std::vector<Vec> pre;  // pre-activation per layer
    std::vector<Vec> post; // post-activation (ReLU for hidden, identity for last)
    const Vec& logits() const { return post.back(); }
};

class Network {
public:
    Network() = default;
    explicit Network(const ModelConfig& cfg); // seeded He-uniform init

    const ModelConfig& config() const { return cfg_; }
    int num_layers() const { return static_cast<int>(layers_.size()); }
    int feature_dim() const;
    int num_classes() const { return cfg_.num_classes; }
    Layer& layer(int i) { return layers_[static_cast<std::size_t>(i)]; }
    const Layer& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }

    Vec forward(const Vec& x) const;
    ForwardCache forward_cached(const Vec& x) const;

    // Post-activation feature vector at the split layer (input itself when
    // split_index == 0).
    Vec features_at(const Vec& x) const;

    // Runs the layers after the split on a (possibly masked) feature vector.
    Vec head_forward(const Vec& features) const;

    // d(loss)/d(input) given d(loss)/d(logits) at the cached point.
    Vec backward_input(const ForwardCache& c, const Vec& dlogits) const;

    // d(loss)/d(input) for a scalar that depends on the split features only.
    Vec backward_input_from_features(const ForwardCache& c, const Vec& dfeatures) const;

    // d(loss)/d(features fed to the head) given d(loss)/d(logits).
    Vec head_backward(const Vec& features, const Vec& dlogits) const;

    void zero_parameters();

    void save(const std::string& path) const;
    static Network load(const std::string& path);

private:
    ModelConfig cfg_;
    std::vector<Layer> layers_;

    friend Network train(Network net, const Dataset& data, const struct TrainConfig& cfg);
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 0.01;
    enum class Optimizer { sgd, adam } optimizer = Optimizer::adam;
    std::uint64_t seed = 0;
    double weight_decay = 0.0; // L2 on weights (not biases)
    // When set, only the layers after the split are updated. Used to train a
    // head on top of a hand-constructed feature extractor.
    bool head_only = false;
    void validate() const;
};

// Loss on the logits: returns (value, d value / d logits).
using LogitLoss = std::function<std::pair<double, Vec>(const Vec& logits)>;

// Analytic gradient of loss(forward(x)) w.r.t. x. ReLU subgradient at a
// kink is taken as 0. Throws on non-finite intermediates.
Vec grad_input(const Network& net, const Vec& x, const LogitLoss& loss);

double cross_entropy(const Vec& logits, int label);
Vec cross_entropy_grad(const Vec& logits, int label); // softmax - onehot
LogitLoss make_cross_entropy_loss(int label);

int argmax_class(const Vec& logits);

// Mini-batch training on cross-entropy; deterministic given cfg.seed
// (seeded shuffling, fixed accumulation order). Throws on empty data.
Network train(Network net, const Dataset& data, const TrainConfig& cfg);

double accuracy(const Network& net, const Dataset& data);

} // namespace csolab
