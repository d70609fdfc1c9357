#ifndef OZSL_VACWGAN_HPP
#define OZSL_VACWGAN_HPP

// Variationally conditioned WGAN: the sampler S turns a class embedding into
// a Gaussian over conditioning vectors, G maps (s, z) to a visual feature and
// the critic D scores (feature, s) pairs. Trained on seen classes only.

#include "ozsl/adam.hpp"
#include "ozsl/networks.hpp"
#include "ozsl/random.hpp"
#include "ozsl/sampling.hpp"
#include "ozsl/split.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ozsl {

struct TrainConfig {
    std::size_t critic_steps = 5;  // M
    std::size_t batch_size = 64;
    std::size_t iterations = 2000;  // outer loops, one G and one S update each
    double gp_weight = 10.0;        // lambda
    double cls_weight = 0.01;       // beta
    std::uint64_t seed = 0;
    ModelConfig model{};
    adam_parameters optimizer{};
    ClassifierTraining classifier{};
    // Also add the gradient penalty to the G and S objectives.
    bool gp_in_generator_update = false;
    // Added under the square root of the interpolate gradient norm.
    double gp_norm_epsilon = 1e-12;
    // Weight of KL(N(mu, sigma^2) || N(C, prior_std^2)) in the G/S objective; 0 leaves S unanchored.
    double sampler_prior_weight = 1.0;
    double sampler_prior_std = 0.1;
    // Start the generator's output bias at the mean real feature, so the output
    // ReLU begins in its active region.
    bool generator_bias_from_data = true;
    // Learning rate decays linearly to this fraction of its initial value by the last iteration.
    double final_lr_fraction = 1.0;
    // Exponential moving average of the G and S weights, used as the returned
    // models; 0 returns the raw final weights.
    double weight_average_decay = 0.995;
    // false keeps S at its initialization (ablation: fixed conditioning).
    bool update_sampler = true;

    void validate() const {
        if (critic_steps < 1) {
            throw validation_error("train: critic steps must be >= 1");
        }
        if (batch_size < 1) {
            throw validation_error("train: batch size must be >= 1");
        }
        if (!(weight_average_decay >= 0.0 && weight_average_decay < 1.0)) {
            throw validation_error("train: weight average decay must be in [0, 1)");
        }
        if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
            throw validation_error("train: final learning-rate fraction must be in [0, 1]");
        }
        if (!(sampler_prior_std > 0.0)) {
            throw validation_error("train: sampler prior std must be positive");
        }
        if (gp_weight < 0.0 || cls_weight < 0.0 || sampler_prior_weight < 0.0) {
            throw validation_error("train: loss weights must be non-negative");
        }
    }
};

struct LossBreakdown {
    std::size_t step = 0;
    double wasserstein = 0.0;       // L from the last critic update
    double gradient_penalty = 0.0;  // R from the last critic update
    double classification = 0.0;    // C from the generator update
    double elapsed_seconds = 0.0;
};

/// E[D(x, s)] - E[D(x~, s)].
inline ad::Var wgan_loss(const Critic &critic, const ad::Var &real, const ad::Var &fake, const ad::Var &conditioning) {
    if (real.rows() == 0 || fake.rows() == 0) {
        throw validation_error("wgan_loss: empty batch");
    }
    if (real.rows() != conditioning.rows() || fake.rows() != conditioning.rows()) {
        throw dimension_error("wgan_loss: conditioning rows must align with the feature batches");
    }
    return ad::sub(ad::mean(critic.forward(real, conditioning)), ad::mean(critic.forward(fake, conditioning)));
}

/// E[(||grad_x D(t x + (1 - t) x~, s)||_2 - 1)^2] with one t per row.
///
/// The gradient is taken with respect to the interpolated features only and
/// kept in the graph, so the penalty is differentiable in the critic weights
/// (and in the generator when `fake` carries a graph).
inline ad::Var gradient_penalty(const Critic &critic, const ad::Var &real, const ad::Var &fake, const ad::Var &conditioning, std::span<const double> t,
                                double norm_epsilon = 1e-12) {
    require_same_shape(real.value(), fake.value(), "gradient_penalty");
    const std::size_t n = real.rows();
    const std::size_t f = real.cols();
    if (t.size() != n || conditioning.rows() != n) {
        throw dimension_error("gradient_penalty: need one t and one conditioning row per sample");
    }
    Matrix weight_real{n, f};
    Matrix weight_fake{n, f};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            weight_real(i, j) = t[i];
            weight_fake(i, j) = 1.0 - t[i];
        }
    }
    ad::Var interp = ad::add(ad::mul(ad::Var::constant(std::move(weight_real)), real), ad::mul(ad::Var::constant(std::move(weight_fake)), fake));
    if (!interp.requires_grad()) {
        interp = ad::Var::parameter(interp.value());
    }
    const ad::Var scores = ad::sum(critic.forward(interp, conditioning));
    const std::vector<ad::Var> wrt{interp};
    const ad::Var g = ad::grad(scores, wrt, true).front();
    const ad::Var norms = ad::sqrt(ad::add(ad::sum_cols(ad::square(g)), ad::Var::constant(Matrix{n, 1, norm_epsilon})));
    return ad::mean(ad::square(ad::sub(norms, ad::Var::constant(Matrix{n, 1, 1.0}))));
}

/// -E[log p(y | x~)] under a fixed classifier.
inline ad::Var classification_loss(const Classifier &classifier, const ad::Var &fake, std::span<const std::size_t> labels) {
    for (std::size_t y : labels) {
        if (y >= classifier.num_classes()) {
            throw validation_error("classification_loss: label " + std::to_string(y) + " outside the classifier's " +
                                   std::to_string(classifier.num_classes()) + " classes");
        }
    }
    return ad::softmax_cross_entropy(classifier.logits(fake), labels);
}

/// Mean over rows of KL(N(mu, diag sigma^2) || N(C, prior_std^2 I)), sigma = exp(log_sqrt_sigma)^2.
inline ad::Var sampler_prior(const SamplerOutput &out, const ad::Var &embeddings, double prior_std) {
    require_same_shape(out.mu.value(), embeddings.value(), "sampler_prior");
    const std::size_t n = out.mu.rows();
    const std::size_t e = out.mu.cols();
    const ad::Var sigma = ad::square(ad::exp(out.log_sqrt_sigma));
    const ad::Var quad = ad::scale(ad::add(ad::square(sigma), ad::square(ad::sub(out.mu, embeddings))), 0.5 / (prior_std * prior_std));
    const ad::Var per_coord = ad::sub(quad, ad::scale(out.log_sqrt_sigma, 2.0));
    const ad::Var offset = ad::Var::constant(Matrix{n, 1, static_cast<double>(e) * (std::log(prior_std) - 0.5)});
    return ad::mean(ad::add(ad::sum_cols(per_coord), offset));
}

/// Critic minimizes -(L - lambda R).
inline ad::Var critic_objective(const ad::Var &wasserstein, const ad::Var &penalty, double gp_weight) {
    return ad::sub(ad::scale(penalty, gp_weight), wasserstein);
}

/// G and S minimize -E[D(x~, s)] + beta C (+ lambda R when requested).
inline ad::Var generator_objective(const ad::Var &fake_score, const ad::Var &classification, double cls_weight, const ad::Var *penalty, double gp_weight) {
    ad::Var total = ad::add(ad::scale(fake_score, -1.0), ad::scale(classification, cls_weight));
    if (penalty != nullptr) {
        total = ad::add(total, ad::scale(*penalty, gp_weight));
    }
    return total;
}

struct VacWgan {
    ModelConfig config;
    Sampler sampler;
    Generator generator;
    Critic critic;
    Classifier classifier;  // pretrained on real seen features, frozen
};

struct TrainResult {
    VacWgan models;
    std::vector<LossBreakdown> history;
    std::size_t critic_updates = 0;
    std::size_t generator_updates = 0;
    std::size_t sampler_updates = 0;
};

namespace detail {

struct Batch {
    Matrix features;
    Matrix embeddings;
    std::vector<std::size_t> labels;
};

// Uniform over seen classes, then uniform within the class.
class BatchSampler {
  public:
    explicit BatchSampler(const TrainView &view) : view_{view} {
        by_class_.resize(view.num_seen);
        for (std::size_t i = 0; i < view.labels.size(); ++i) {
            by_class_[view.labels[i]].push_back(i);
        }
        for (std::size_t c = 0; c < by_class_.size(); ++c) {
            if (!by_class_[c].empty()) {
                populated_.push_back(c);
            }
        }
        if (populated_.empty()) {
            throw validation_error("train: no seen training instances");
        }
    }

    Batch draw(std::size_t n, Rng &rng) const {
        Batch b;
        std::vector<std::size_t> rows;
        rows.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t c = populated_[rng.index(populated_.size())];
            const auto &members = by_class_[c];
            rows.push_back(members[rng.index(members.size())]);
            b.labels.push_back(c);
        }
        b.features = gather_rows(view_.features, rows);
        b.embeddings = gather_rows(view_.known_embeddings, b.labels);
        return b;
    }

  private:
    const TrainView &view_;
    std::vector<std::vector<std::size_t>> by_class_;
    std::vector<std::size_t> populated_;
};

inline std::vector<Matrix> values_of_params(const std::vector<ad::Var> &params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto &p : params) {
        out.push_back(p.value());
    }
    return out;
}

inline std::vector<double> uniform_vector(std::size_t n, Rng &rng) {
    std::vector<double> v(n);
    for (double &x : v) {
        x = rng.uniform();
    }
    return v;
}

}  // namespace detail

/// The adversarial loop: per outer iteration, M critic updates, then one G
/// update, then one S update. `on_record` sees each history entry as it is made.
inline TrainResult train(const TrainView &view, const TrainConfig &cfg, const std::function<void(const LossBreakdown &)> &on_record = {}) {
    cfg.validate();
    if (view.features.cols() != cfg.model.feature_dim || view.known_embeddings.cols() != cfg.model.embed_dim) {
        throw dimension_error("train: view dimensions do not match the model config");
    }
    const auto started = std::chrono::steady_clock::now();
    Rng rng{cfg.seed};

    TrainResult result;
    VacWgan &m = result.models;
    m.config = cfg.model;
    m.sampler = make_sampler(cfg.model, rng);
    m.generator = make_generator(cfg.model, rng);
    if (cfg.generator_bias_from_data && view.features.rows() > 0) {
        Matrix mean{1, view.features.cols()};
        for (std::size_t i = 0; i < view.features.rows(); ++i) {
            for (std::size_t j = 0; j < mean.cols(); ++j) {
                mean(0, j) += view.features(i, j);
            }
        }
        m.generator.net.b2.assign((1.0 / static_cast<double>(view.features.rows())) * mean);
    }
    m.critic = make_critic(cfg.model, rng);
    m.classifier = train_classifier(view.features, view.labels, view.num_seen, cfg.classifier, rng);

    auto critic_params = m.critic.parameters();
    auto generator_params = m.generator.parameters();
    auto sampler_params = m.sampler.parameters();
    AdamState critic_opt{critic_params, cfg.optimizer};
    AdamState generator_opt{generator_params, cfg.optimizer};
    AdamState sampler_opt{sampler_params, cfg.optimizer};

    std::vector<Matrix> generator_avg = detail::values_of_params(generator_params);
    std::vector<Matrix> sampler_avg = detail::values_of_params(sampler_params);
    const auto accumulate = [&](std::vector<Matrix> &avg, const std::vector<ad::Var> &params) {
        const double d = cfg.weight_average_decay;
        for (std::size_t i = 0; i < avg.size(); ++i) {
            avg[i] = d * avg[i] + (1.0 - d) * params[i].value();
        }
    };

    const detail::BatchSampler batches{view};
    const std::size_t e = cfg.model.embed_dim;
    const std::size_t n = cfg.batch_size;

    LossBreakdown record;
    try {
        for (std::size_t it = 1; it <= cfg.iterations; ++it) {
            record = LossBreakdown{};
            record.step = it;
            if (cfg.final_lr_fraction != 1.0) {
                const double progress = cfg.iterations > 1 ? static_cast<double>(it - 1) / static_cast<double>(cfg.iterations - 1) : 1.0;
                const double lr = cfg.optimizer.learning_rate * (1.0 - progress * (1.0 - cfg.final_lr_fraction));
                critic_opt.set_learning_rate(lr);
                generator_opt.set_learning_rate(lr);
                sampler_opt.set_learning_rate(lr);
            }

            for (std::size_t i = 0; i < cfg.critic_steps; ++i) {
                const auto b = batches.draw(n, rng);
                const Matrix u = rng.normal_matrix(n, e);
                const Matrix z = rng.normal_matrix(n, e);
                const auto t = detail::uniform_vector(n, rng);
                ad::Var s;
                ad::Var fake;
                {
                    const ad::no_grad_guard guard;
                    s = reparameterized_sample(m.sampler.forward(ad::Var::constant(b.embeddings)), ad::Var::constant(u));
                    fake = m.generator.forward(s, ad::Var::constant(z));
                }
                const ad::Var real = ad::Var::constant(b.features);
                const ad::Var wass = wgan_loss(m.critic, real, fake, s);
                const ad::Var pen = gradient_penalty(m.critic, real, fake, s, t, cfg.gp_norm_epsilon);
                const ad::Var loss = critic_objective(wass, pen, cfg.gp_weight);
                critic_opt.update(critic_params, ad::gradients(loss, critic_params));
                ++result.critic_updates;
                record.wasserstein = wass.scalar();
                record.gradient_penalty = pen.scalar();
            }

            // G then S, on one shared batch and noise draw.
            const auto b = batches.draw(n, rng);
            const Matrix u = rng.normal_matrix(n, e);
            const Matrix z = rng.normal_matrix(n, e);
            const auto t = detail::uniform_vector(n, rng);
            const ad::Var cond = ad::Var::constant(b.embeddings);
            const auto objective = [&]() {
                const SamplerOutput so = m.sampler.forward(cond);
                const ad::Var s = reparameterized_sample(so, ad::Var::constant(u));
                const ad::Var fake = m.generator.forward(s, ad::Var::constant(z));
                const ad::Var fake_score = ad::mean(m.critic.forward(fake, s));
                const ad::Var cls = classification_loss(m.classifier, fake, b.labels);
                record.classification = cls.scalar();
                ad::Var total = generator_objective(fake_score, cls, cfg.cls_weight, nullptr, cfg.gp_weight);
                if (cfg.gp_in_generator_update) {
                    const ad::Var pen = gradient_penalty(m.critic, ad::Var::constant(b.features), fake, s, t, cfg.gp_norm_epsilon);
                    total = generator_objective(fake_score, cls, cfg.cls_weight, &pen, cfg.gp_weight);
                }
                if (cfg.sampler_prior_weight > 0.0) {
                    total = ad::add(total, ad::scale(sampler_prior(so, cond, cfg.sampler_prior_std), cfg.sampler_prior_weight));
                }
                return total;
            };

            generator_opt.update(generator_params, ad::gradients(objective(), generator_params));
            ++result.generator_updates;
            if (cfg.update_sampler) {
                sampler_opt.update(sampler_params, ad::gradients(objective(), sampler_params));
                ++result.sampler_updates;
            }
            if (cfg.weight_average_decay > 0.0) {
                accumulate(generator_avg, generator_params);
                accumulate(sampler_avg, sampler_params);
            }

            record.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            result.history.push_back(record);
            if (on_record) {
                on_record(record);
            }
        }
    } catch (const runtime_failure &err) {
        char snapshot[256];
        std::snprintf(snapshot, sizeof(snapshot), " [iteration %zu, critic updates %zu, last L=%.6g R=%.6g C=%.6g]", record.step, result.critic_updates,
                      record.wasserstein, record.gradient_penalty, record.classification);
        throw training_error(std::string{"training aborted: "} + err.what() + snapshot);
    }
    if (cfg.weight_average_decay > 0.0 && cfg.iterations > 0) {
        for (std::size_t i = 0; i < generator_params.size(); ++i) {
            generator_params[i].assign(generator_avg[i]);
        }
        for (std::size_t i = 0; i < sampler_params.size(); ++i) {
            sampler_params[i].assign(sampler_avg[i]);
        }
    }
    return result;
}

/// `per_class` generated features for each requested row of `embeddings`,
/// ordered by (position in `class_ids`, sample index) and labelled with the class id.
inline LabeledFeatures synthesize_features(const VacWgan &models, const Matrix &embeddings, std::span<const std::size_t> class_ids, std::size_t per_class,
                                           std::uint64_t seed) {
    for (std::size_t c : class_ids) {
        if (c >= embeddings.rows()) {
            throw validation_error("synthesize_features: unknown class id " + std::to_string(c));
        }
    }
    LabeledFeatures out;
    out.features = Matrix{0, models.generator.feature_dim()};
    const std::size_t total = class_ids.size() * per_class;
    if (total == 0) {
        return out;
    }
    std::vector<std::size_t> rows;
    rows.reserve(total);
    for (std::size_t c : class_ids) {
        for (std::size_t k = 0; k < per_class; ++k) {
            rows.push_back(c);
            out.labels.push_back(static_cast<Label>(c));
        }
    }
    Rng rng{seed};
    const std::size_t e = embeddings.cols();
    const Matrix u = rng.normal_matrix(total, e);
    const Matrix z = rng.normal_matrix(total, e);
    const ad::no_grad_guard guard;
    const ad::Var s = reparameterized_sample(models.sampler.forward(ad::Var::constant(gather_rows(embeddings, rows))), ad::Var::constant(u));
    out.features = models.generator.forward(s, ad::Var::constant(z)).value();
    return out;
}

/// One line-delimited record per outer iteration.
inline void write_loss_record(std::ostream &out, const LossBreakdown &r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "{\"step\":%zu,\"wasserstein\":%.17g,\"gp\":%.17g,\"cls\":%.17g}\n", r.step, r.wasserstein, r.gradient_penalty,
                  r.classification);
    out << buf;
}

}  // namespace ozsl

#endif  // OZSL_VACWGAN_HPP
