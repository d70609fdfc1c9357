#ifndef OZSL_NETWORKS_HPP
#define OZSL_NETWORKS_HPP

// Single-hidden-layer networks for the sampler S, generator G and critic D,
// plus the linear softmax classifier.

#include "ozsl/adam.hpp"
#include "ozsl/autodiff.hpp"
#include "ozsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace ozsl {

/// Layer sizes at width divisor 1.
namespace full_size {
inline constexpr std::size_t generator_hidden = 4096;
inline constexpr std::size_t critic_hidden = 4096;
inline constexpr std::size_t sampler_hidden = 2048;
inline constexpr std::size_t feature_dim = 2048;
}  // namespace full_size

inline std::size_t scaled_width(std::size_t full, std::size_t width_divisor) {
    if (width_divisor == 0) {
        throw contract_error("width divisor must be >= 1");
    }
    return std::max<std::size_t>(1, full / width_divisor);
}

enum class output_activation { none, relu };

inline std::size_t mlp_parameter_count(std::size_t input_dim, std::size_t hidden, std::size_t output_dim) {
    return input_dim * hidden + hidden + hidden * output_dim + output_dim;
}

/// input -> leaky-rectified hidden layer -> output (optionally rectified).
struct MlpParams {
    ad::Var w1, b1, w2, b2;
    double slope = 0.2;
    output_activation out = output_activation::none;

    [[nodiscard]] std::size_t input_dim() const { return w1.rows(); }
    [[nodiscard]] std::size_t hidden() const { return w1.cols(); }
    [[nodiscard]] std::size_t output_dim() const { return w2.cols(); }
    [[nodiscard]] std::vector<ad::Var> parameters() const { return {w1, b1, w2, b2}; }
    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto &p : parameters()) {
            n += p.value().size();
        }
        return n;
    }

    [[nodiscard]] ad::Var forward(const ad::Var &x) const {
        if (x.cols() != input_dim()) {
            throw dimension_error("mlp: input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(input_dim()));
        }
        const ad::Var h = ad::leaky_relu(ad::add_bias(ad::matmul(x, w1), b1), slope);
        const ad::Var y = ad::add_bias(ad::matmul(h, w2), b2);
        return out == output_activation::relu ? ad::relu(y) : y;
    }
};

/// Uniform Glorot initialization, zero biases.
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng &rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rng.uniform_matrix(fan_in, fan_out, -limit, limit);
}

inline MlpParams make_mlp(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, double slope, output_activation out, Rng &rng) {
    if (input_dim == 0 || hidden == 0 || output_dim == 0) {
        throw contract_error("mlp: all dimensions must be >= 1");
    }
    MlpParams p;
    p.w1 = ad::Var::parameter(glorot_uniform(input_dim, hidden, rng));
    p.b1 = ad::Var::parameter(Matrix{1, hidden});
    p.w2 = ad::Var::parameter(glorot_uniform(hidden, output_dim, rng));
    p.b2 = ad::Var::parameter(Matrix{1, output_dim});
    p.slope = slope;
    p.out = out;
    return p;
}

inline MlpParams zero_mlp(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, double slope, output_activation out) {
    MlpParams p;
    p.w1 = ad::Var::parameter(Matrix{input_dim, hidden});
    p.b1 = ad::Var::parameter(Matrix{1, hidden});
    p.w2 = ad::Var::parameter(Matrix{hidden, output_dim});
    p.b2 = ad::Var::parameter(Matrix{1, output_dim});
    p.slope = slope;
    p.out = out;
    return p;
}

/// Shapes of the three adversarial networks for one dataset.
struct ModelConfig {
    std::size_t feature_dim = full_size::feature_dim;
    std::size_t embed_dim = 0;
    std::size_t width_divisor = 1;
    double leaky_slope = 0.2;
    // Initial bias of the log(sqrt(sigma)) head; -1 starts sigma at exp(-2).
    double sampler_log_sigma_init = -1.0;

    [[nodiscard]] std::size_t generator_hidden() const { return scaled_width(full_size::generator_hidden, width_divisor); }
    [[nodiscard]] std::size_t critic_hidden() const { return scaled_width(full_size::critic_hidden, width_divisor); }
    [[nodiscard]] std::size_t sampler_hidden() const { return scaled_width(full_size::sampler_hidden, width_divisor); }
};

/// Batch of sampler outputs, one row per conditioning embedding.
struct SamplerOutput {
    ad::Var mu;
    ad::Var log_sqrt_sigma;
};

/// Semantic sampler S: class embedding -> (mu, log(sqrt(sigma))).
struct Sampler {
    MlpParams net;
    std::size_t embed_dim = 0;

    [[nodiscard]] SamplerOutput forward(const ad::Var &embeddings) const {
        if (embeddings.cols() != embed_dim) {
            throw dimension_error("sampler: embedding has " + std::to_string(embeddings.cols()) + " columns, expected " + std::to_string(embed_dim));
        }
        const ad::Var out = net.forward(embeddings);
        return {ad::slice_cols(out, 0, embed_dim), ad::slice_cols(out, embed_dim, embed_dim)};
    }

    [[nodiscard]] std::vector<ad::Var> parameters() const { return net.parameters(); }
};

inline Sampler make_sampler(const ModelConfig &cfg, Rng &rng) {
    Sampler s{make_mlp(cfg.embed_dim, cfg.sampler_hidden(), 2 * cfg.embed_dim, cfg.leaky_slope, output_activation::none, rng), cfg.embed_dim};
    Matrix bias{1, 2 * cfg.embed_dim};
    for (std::size_t j = cfg.embed_dim; j < 2 * cfg.embed_dim; ++j) {
        bias(0, j) = cfg.sampler_log_sigma_init;
    }
    s.net.b2.assign(std::move(bias));
    return s;
}

/// s = mu + sigma * u with sigma = exp(log_sqrt_sigma)^2; differentiable in mu and sigma.
inline ad::Var reparameterized_sample(const SamplerOutput &out, const ad::Var &u) {
    require_same_shape(out.mu.value(), u.value(), "reparameterized_sample");
    const ad::Var sigma = ad::square(ad::exp(out.log_sqrt_sigma));
    return ad::add(out.mu, ad::mul(sigma, u));
}

/// Generator G: [s, z] -> rectified visual feature.
struct Generator {
    MlpParams net;

    [[nodiscard]] ad::Var forward(const ad::Var &s, const ad::Var &z) const {
        if (s.cols() != z.cols() || s.rows() != z.rows()) {
            throw dimension_error("generator: noise " + z.value().shape() + " must match semantic input " + s.value().shape());
        }
        return net.forward(ad::concat_cols(s, z));
    }

    [[nodiscard]] std::size_t feature_dim() const { return net.output_dim(); }
    [[nodiscard]] std::vector<ad::Var> parameters() const { return net.parameters(); }
};

inline Generator make_generator(const ModelConfig &cfg, Rng &rng) {
    return {make_mlp(2 * cfg.embed_dim, cfg.generator_hidden(), cfg.feature_dim, cfg.leaky_slope, output_activation::relu, rng)};
}

/// Critic D: [x, c] -> unconstrained real, one row per sample.
struct Critic {
    MlpParams net;

    [[nodiscard]] ad::Var forward(const ad::Var &x, const ad::Var &c) const { return net.forward(ad::concat_cols(x, c)); }
    [[nodiscard]] std::vector<ad::Var> parameters() const { return net.parameters(); }
};

inline Critic make_critic(const ModelConfig &cfg, Rng &rng) {
    return {make_mlp(cfg.feature_dim + cfg.embed_dim, cfg.critic_hidden(), 1, cfg.leaky_slope, output_activation::none, rng)};
}

/// Linear softmax classifier over visual features.
struct Classifier {
    ad::Var weight;
    ad::Var bias;

    [[nodiscard]] std::size_t feature_dim() const { return weight.rows(); }
    [[nodiscard]] std::size_t num_classes() const { return weight.cols(); }

    [[nodiscard]] ad::Var logits(const ad::Var &x) const {
        if (x.cols() != feature_dim()) {
            throw dimension_error("classifier: feature has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(feature_dim()));
        }
        return ad::add_bias(ad::matmul(x, weight), bias);
    }

    [[nodiscard]] Matrix logits(const Matrix &x) const {
        const ad::no_grad_guard guard;
        return logits(ad::Var::constant(x)).value();
    }

    [[nodiscard]] Matrix probabilities(const Matrix &x) const {
        const ad::no_grad_guard guard;
        return ad::softmax(logits(ad::Var::constant(x))).value();
    }

    [[nodiscard]] std::vector<ad::Var> parameters() const { return {weight, bias}; }
};

inline Classifier make_classifier(std::size_t feature_dim, std::size_t num_classes, Rng &rng) {
    return {ad::Var::parameter(glorot_uniform(feature_dim, num_classes, rng)), ad::Var::parameter(Matrix{1, num_classes})};
}

struct ClassifierTraining {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    adam_parameters optimizer{1e-3, 0.9, 0.999, 1e-8};
};

/// Minibatch softmax regression on (features, labels).
inline Classifier train_classifier(const Matrix &features, std::span<const std::size_t> labels, std::size_t num_classes, const ClassifierTraining &opts, Rng &rng) {
    if (features.rows() != labels.size() || features.rows() == 0) {
        throw dimension_error("train_classifier: " + std::to_string(labels.size()) + " labels for " + features.shape() + " features");
    }
    Classifier clf = make_classifier(features.cols(), num_classes, rng);
    auto params = clf.parameters();
    AdamState adam{params, opts.optimizer};
    std::vector<std::size_t> order(features.rows());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opts.batch_size);
            std::span<const std::size_t> idx{order.data() + start, stop - start};
            std::vector<std::size_t> batch_labels;
            batch_labels.reserve(idx.size());
            for (std::size_t i : idx) {
                batch_labels.push_back(labels[i]);
            }
            const ad::Var x = ad::Var::constant(gather_rows(features, idx));
            const ad::Var loss = ad::softmax_cross_entropy(clf.logits(x), batch_labels);
            const auto grads = ad::gradients(loss, params);
            adam.update(params, grads);
        }
    }
    return clf;
}

}  // namespace ozsl

#endif  // OZSL_NETWORKS_HPP
