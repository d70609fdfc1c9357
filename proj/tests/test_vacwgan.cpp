#include "ozsl/vacwgan.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <sstream>

namespace {

using namespace ozsl;
using ozsl::testing::check_gradient;

Matrix m(std::size_t r, std::size_t c, std::vector<double> v) { return Matrix{r, c, std::move(v)}; }

// D(x, s) = a . x, built from an MLP with an identity hidden layer and slope 1.
Critic linear_critic(const std::vector<double> &a, std::size_t embed_dim) {
    const std::size_t f = a.size();
    const std::size_t in = f + embed_dim;
    MlpParams p = zero_mlp(in, in, 1, 1.0, output_activation::none);
    p.w1.assign(Matrix::identity(in));
    Matrix w2{in, 1};
    for (std::size_t j = 0; j < f; ++j) {
        w2(j, 0) = a[j];
    }
    p.w2.assign(w2);
    return Critic{p};
}

// Two well-separated blobs in two dimensions, embeddings on the unit axes.
TrainView blob_view(std::size_t n, double sd, std::uint64_t seed) {
    Rng rng{seed};
    TrainView v;
    v.known_classes = {"a", "b"};
    v.num_seen = 2;
    v.known_embeddings = m(2, 2, {1, 0, 0, 1});
    v.features = Matrix{n, 2};
    const double mu[2][2] = {{1.0, 2.0}, {2.5, 1.0}};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 2;
        v.labels.push_back(c);
        for (std::size_t j = 0; j < 2; ++j) {
            v.features(i, j) = mu[c][j] + rng.normal(0.0, sd);
        }
    }
    return v;
}

TrainConfig small_config(std::size_t iterations) {
    TrainConfig c;
    c.iterations = iterations;
    c.batch_size = 16;
    c.model.feature_dim = 2;
    c.model.embed_dim = 2;
    c.model.width_divisor = 256;
    c.classifier.epochs = 3;
    c.seed = 5;
    return c;
}

TEST(WganLoss, ZeroCriticGivesZero) {
    const Critic d{zero_mlp(5, 3, 1, 0.2, output_activation::none)};
    Rng rng{1};
    const auto real = ad::Var::constant(rng.normal_matrix(4, 3));
    const auto fake = ad::Var::constant(rng.normal_matrix(4, 3));
    const auto c = ad::Var::constant(rng.normal_matrix(4, 2));
    EXPECT_EQ(wgan_loss(d, real, fake, c).scalar(), 0.0);
}

TEST(WganLoss, IdenticalBatchesGiveZero) {
    Rng rng{2};
    ModelConfig cfg;
    cfg.feature_dim = 3;
    cfg.embed_dim = 2;
    cfg.width_divisor = 512;
    const Critic d = make_critic(cfg, rng);
    const auto x = ad::Var::constant(rng.normal_matrix(6, 3));
    const auto c = ad::Var::constant(rng.normal_matrix(6, 2));
    EXPECT_NEAR(wgan_loss(d, x, x, c).scalar(), 0.0, 1e-15);
}

TEST(WganLoss, LinearCriticByHand) {
    const Critic d = linear_critic({2.0, -1.0}, 1);
    const auto real = ad::Var::constant(m(2, 2, {1, 0, 3, 1}));
    const auto fake = ad::Var::constant(m(2, 2, {0, 1, 1, 1}));
    const auto c = ad::Var::constant(m(2, 1, {0.3, -0.7}));
    // real scores 2, 5; fake scores -1, 1
    EXPECT_NEAR(wgan_loss(d, real, fake, c).scalar(), 3.5 - 0.0, 1e-12);
}

TEST(WganLoss, EmptyOrMisalignedBatchesThrow) {
    const Critic d = linear_critic({1.0}, 1);
    EXPECT_THROW(wgan_loss(d, ad::Var::constant(Matrix{0, 1}), ad::Var::constant(Matrix{0, 1}), ad::Var::constant(Matrix{0, 1})), validation_error);
    EXPECT_THROW(wgan_loss(d, ad::Var::constant(Matrix{2, 1}), ad::Var::constant(Matrix{2, 1}), ad::Var::constant(Matrix{3, 1})), dimension_error);
}

TEST(GradientPenalty, UnitNormLinearCriticHasNoPenalty) {
    const Critic d = linear_critic({0.6, 0.8}, 1);
    Rng rng{3};
    const std::vector<double> t{0.1, 0.5, 0.9};
    const double r = gradient_penalty(d, ad::Var::constant(rng.normal_matrix(3, 2)), ad::Var::constant(rng.normal_matrix(3, 2)),
                                      ad::Var::constant(rng.normal_matrix(3, 1)), t)
                         .scalar();
    EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(GradientPenalty, ZeroCriticHasUnitPenalty) {
    const Critic d{zero_mlp(3, 4, 1, 0.2, output_activation::none)};
    Rng rng{4};
    const std::vector<double> t{0.2, 0.7};
    const double r = gradient_penalty(d, ad::Var::constant(rng.normal_matrix(2, 2)), ad::Var::constant(rng.normal_matrix(2, 2)),
                                      ad::Var::constant(rng.normal_matrix(2, 1)), t)
                         .scalar();
    EXPECT_NEAR(r, 1.0, 1e-5);
}

TEST(GradientPenalty, ScaledLinearCriticByHand) {
    // ||a|| = 5, so every row contributes (5 - 1)^2.
    const Critic d = linear_critic({3.0, 4.0}, 1);
    Rng rng{5};
    const std::vector<double> t{0.3, 0.4};
    const double r = gradient_penalty(d, ad::Var::constant(rng.normal_matrix(2, 2)), ad::Var::constant(rng.normal_matrix(2, 2)),
                                      ad::Var::constant(rng.normal_matrix(2, 1)), t)
                         .scalar();
    EXPECT_NEAR(r, 16.0, 1e-9);
}

TEST(GradientPenalty, CriticGradientMatchesFiniteDifferences) {
    Rng rng{6};
    ModelConfig cfg;
    cfg.feature_dim = 3;
    cfg.embed_dim = 2;
    cfg.width_divisor = 512;
    const Critic d = make_critic(cfg, rng);
    const auto real = ad::Var::constant(rng.normal_matrix(4, 3));
    const auto fake = ad::Var::constant(rng.normal_matrix(4, 3));
    const auto c = ad::Var::constant(rng.normal_matrix(4, 2));
    const auto t = std::vector<double>{0.1, 0.4, 0.6, 0.95};
    EXPECT_LT(check_gradient([&] { return gradient_penalty(d, real, fake, c, t); }, d.parameters()), 1e-4);
}

// With one leaky-rectified hidden layer, grad_x D depends on x only through the
// activation pattern, so the penalty is flat in the features almost everywhere.
TEST(GradientPenalty, FlatInTheFakeFeaturesForAPiecewiseLinearCritic) {
    Rng rng{7};
    ModelConfig cfg;
    cfg.feature_dim = 3;
    cfg.embed_dim = 2;
    cfg.width_divisor = 512;
    const Critic d = make_critic(cfg, rng);
    const auto s = ad::Var::constant(rng.normal_matrix(4, 2));
    const auto real = ad::Var::constant(rng.normal_matrix(4, 3));
    const auto fake = ad::Var::parameter(rng.normal_matrix(4, 3));
    const auto t = std::vector<double>{0.2, 0.4, 0.6, 0.8};
    const auto build = [&] { return gradient_penalty(d, real, fake, s, t); };
    const auto analytic = ad::gradients(build(), std::vector<ad::Var>{fake});
    const auto numeric = ozsl::testing::finite_difference([&] { return build().scalar(); }, {fake});
    EXPECT_EQ(squared_norm(analytic[0].data()), 0.0);
    EXPECT_LT(squared_norm(numeric[0].data()), 1e-16);
}

TEST(GradientPenalty, DetachedFakesCarryNoGraph) {
    Rng rng{7};
    ModelConfig cfg;
    cfg.feature_dim = 3;
    cfg.embed_dim = 2;
    cfg.width_divisor = 512;
    const Generator g = make_generator(cfg, rng);
    ad::Var detached;
    {
        const ad::no_grad_guard guard;
        detached = g.forward(ad::Var::constant(rng.normal_matrix(4, 2)), ad::Var::constant(rng.normal_matrix(4, 2)));
    }
    EXPECT_FALSE(detached.requires_grad());
}

TEST(ClassificationLoss, UniformClassifierGivesLogK) {
    const Classifier clf{ad::Var::parameter(Matrix{3, 4}), ad::Var::parameter(Matrix{1, 4})};
    Rng rng{8};
    const std::vector<std::size_t> y{0, 3, 2};
    EXPECT_NEAR(classification_loss(clf, ad::Var::constant(rng.normal_matrix(3, 3)), y).scalar(), std::log(4.0), 1e-12);
}

TEST(ClassificationLoss, KnownProbabilities) {
    const Classifier clf{ad::Var::parameter(Matrix{2, 3}), ad::Var::parameter(m(1, 3, {std::log(0.7), std::log(0.2), std::log(0.1)}))};
    const std::vector<std::size_t> y{0, 1};
    const double expected = -(std::log(0.7) + std::log(0.2)) / 2.0;
    EXPECT_NEAR(classification_loss(clf, ad::Var::constant(Matrix{2, 2, 1.0}), y).scalar(), expected, 1e-12);
}

TEST(ClassificationLoss, LabelOutsideClassifierThrows) {
    const Classifier clf{ad::Var::parameter(Matrix{2, 3}), ad::Var::parameter(Matrix{1, 3})};
    const std::vector<std::size_t> y{3};
    EXPECT_THROW(classification_loss(clf, ad::Var::constant(Matrix{1, 2}), y), validation_error);
}

TEST(SamplerPrior, VanishesWhenDistributionsCoincide) {
    const double p = 0.1;
    const auto c = ad::Var::constant(m(2, 2, {1.0, -1.0, 0.5, 2.0}));
    const SamplerOutput out{c, ad::Var::constant(Matrix{2, 2, 0.5 * std::log(p)})};
    EXPECT_NEAR(sampler_prior(out, c, p).scalar(), 0.0, 1e-12);
}

TEST(SamplerPrior, MatchesClosedFormKl) {
    Rng rng{9};
    const double p = 0.3;
    const Matrix mu = rng.normal_matrix(3, 4);
    const Matrix lss = rng.uniform_matrix(3, 4, -1.0, 0.5);
    const Matrix c = rng.normal_matrix(3, 4);
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double sd = std::exp(2.0 * lss(i, j));
            const double d = mu(i, j) - c(i, j);
            expected += std::log(p / sd) + (sd * sd + d * d) / (2.0 * p * p) - 0.5;
        }
    }
    expected /= 3.0;
    const SamplerOutput out{ad::Var::constant(mu), ad::Var::constant(lss)};
    EXPECT_NEAR(sampler_prior(out, ad::Var::constant(c), p).scalar(), expected, 1e-9 * std::abs(expected));
}

TEST(Objectives, ZeroWeightsReduceToTheWassersteinTerms) {
    const auto w = ad::Var::constant(m(1, 1, {1.25}));
    const auto r = ad::Var::constant(m(1, 1, {7.0}));
    const auto score = ad::Var::constant(m(1, 1, {-0.4}));
    const auto cls = ad::Var::constant(m(1, 1, {2.3}));
    EXPECT_EQ(critic_objective(w, r, 0.0).scalar(), -1.25);
    EXPECT_EQ(generator_objective(score, cls, 0.0, nullptr, 10.0).scalar(), 0.4);
    EXPECT_EQ(generator_objective(score, cls, 0.0, &r, 0.0).scalar(), 0.4);
    EXPECT_DOUBLE_EQ(critic_objective(w, r, 10.0).scalar(), 70.0 - 1.25);
    EXPECT_DOUBLE_EQ(generator_objective(score, cls, 0.5, &r, 2.0).scalar(), 0.4 + 1.15 + 14.0);
}

TEST(Train, CriticRunsMTimesPerGeneratorUpdate) {
    const TrainView v = blob_view(40, 0.1, 1);
    TrainConfig c = small_config(4);
    c.critic_steps = 3;
    const auto r = train(v, c);
    EXPECT_EQ(r.generator_updates, 4u);
    EXPECT_EQ(r.sampler_updates, 4u);
    EXPECT_EQ(r.critic_updates, 3u * r.generator_updates);
    EXPECT_EQ(r.history.size(), 4u);
    EXPECT_EQ(r.history.back().step, 4u);
}

TEST(Train, FixedSamplerAblationSkipsSamplerUpdates) {
    TrainConfig c = small_config(3);
    c.update_sampler = false;
    c.weight_average_decay = 0.0;
    const auto r = train(blob_view(40, 0.1, 1), c);
    EXPECT_EQ(r.sampler_updates, 0u);
    const auto fresh = train(blob_view(40, 0.1, 1), small_config(0));
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(r.models.sampler.parameters()[i].value(), fresh.models.sampler.parameters()[i].value());
    }
}

TEST(Train, ClassifierIsFrozenDuringAdversarialTraining) {
    const TrainView v = blob_view(40, 0.1, 1);
    const auto before = train(v, small_config(0));
    const auto after = train(v, small_config(5));
    EXPECT_EQ(before.models.classifier.weight.value(), after.models.classifier.weight.value());
    EXPECT_EQ(before.models.classifier.bias.value(), after.models.classifier.bias.value());
}

TEST(Train, SameSeedReproducesHistoryAndWeights) {
    const TrainView v = blob_view(40, 0.1, 1);
    const auto a = train(v, small_config(5));
    const auto b = train(v, small_config(5));
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].wasserstein, b.history[i].wasserstein);
        EXPECT_EQ(a.history[i].gradient_penalty, b.history[i].gradient_penalty);
        EXPECT_EQ(a.history[i].classification, b.history[i].classification);
    }
    const auto pa = a.models.generator.parameters();
    const auto pb = b.models.generator.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].value(), pb[i].value());
    }
}

TEST(Train, DifferentSeedsDiverge) {
    const TrainView v = blob_view(40, 0.1, 1);
    TrainConfig c = small_config(3);
    const auto a = train(v, c);
    c.seed = 6;
    const auto b = train(v, c);
    EXPECT_NE(a.models.critic.net.w1.value(), b.models.critic.net.w1.value());
}

TEST(Train, CallbackSeesEveryRecord) {
    std::vector<std::size_t> steps;
    train(blob_view(40, 0.1, 1), small_config(3), [&](const LossBreakdown &r) { steps.push_back(r.step); });
    EXPECT_EQ(steps, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Train, RejectsBadConfigurationAndShapes) {
    const TrainView v = blob_view(20, 0.1, 1);
    TrainConfig c = small_config(1);
    c.critic_steps = 0;
    EXPECT_THROW(train(v, c), validation_error);
    c = small_config(1);
    c.gp_weight = -1.0;
    EXPECT_THROW(train(v, c), validation_error);
    c = small_config(1);
    c.weight_average_decay = 1.0;
    EXPECT_THROW(train(v, c), validation_error);
    c = small_config(1);
    c.model.feature_dim = 3;
    EXPECT_THROW(train(v, c), dimension_error);
}

TEST(Train, NonFiniteFeaturesAbortTraining) {
    TrainView v = blob_view(20, 0.1, 1);
    v.features(3, 1) = std::nan("");
    TrainConfig c = small_config(2);
    c.classifier.epochs = 0;
    EXPECT_THROW(train(v, c), numeric_error);
    c.generator_bias_from_data = false;
    EXPECT_THROW(train(v, c), training_error);
}

TEST(Train, GeneratedMeansRecoverTwoBlobs) {
    const double sd = 0.1;
    const TrainView v = blob_view(400, sd, 11);
    TrainConfig c;
    c.iterations = 2000;
    c.model.feature_dim = 2;
    c.model.embed_dim = 2;
    c.model.width_divisor = 64;
    c.optimizer.learning_rate = 1e-3;
    c.classifier = {50, 64, {1e-2, 0.9, 0.999, 1e-8}};
    c.cls_weight = 0.0;
    c.seed = 1;
    const auto r = train(v, c);
    const std::vector<std::size_t> ids{0, 1};
    const auto g = synthesize_features(r.models, v.known_embeddings, ids, 1000, 3);
    const double truth[2][2] = {{1.0, 2.0}, {2.5, 1.0}};
    for (std::size_t k = 0; k < 2; ++k) {
        double m0 = 0.0;
        double m1 = 0.0;
        for (std::size_t s = 0; s < 1000; ++s) {
            m0 += g.features(k * 1000 + s, 0);
            m1 += g.features(k * 1000 + s, 1);
        }
        EXPECT_LT(std::hypot(m0 / 1000 - truth[k][0], m1 / 1000 - truth[k][1]), 0.5 * sd) << "class " << k;
    }
    // The prior keeps each conditioning distribution near N(C, prior_std^2).
    const ad::no_grad_guard guard;
    const auto out = r.models.sampler.forward(ad::Var::constant(v.known_embeddings));
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_LT(std::abs(out.mu.value()(i, j) - v.known_embeddings(i, j)), 3.0 * c.sampler_prior_std);
            const double sigma = std::exp(2.0 * out.log_sqrt_sigma.value()(i, j));
            EXPECT_GT(sigma, 0.5 * c.sampler_prior_std);
            EXPECT_LT(sigma, 2.0 * c.sampler_prior_std);
        }
    }
}

TEST(Synthesize, CountsOrderAndLabels) {
    const auto r = train(blob_view(40, 0.1, 1), small_config(1));
    const Matrix emb = m(3, 2, {1, 0, 0, 1, 1, 1});
    const std::vector<std::size_t> ids{2, 0};
    const auto out = synthesize_features(r.models, emb, ids, 4, 9);
    EXPECT_EQ(out.features.rows(), 8u);
    EXPECT_EQ(out.features.cols(), 2u);
    EXPECT_EQ(out.labels, (std::vector<Label>{2, 2, 2, 2, 0, 0, 0, 0}));
    for (double x : out.features.data()) {
        EXPECT_GE(x, 0.0);
    }
    EXPECT_EQ(synthesize_features(r.models, emb, ids, 4, 9).features, out.features);
}

TEST(Synthesize, ZeroCountAndBadIds) {
    const auto r = train(blob_view(40, 0.1, 1), small_config(1));
    const Matrix emb = m(2, 2, {1, 0, 0, 1});
    const std::vector<std::size_t> ids{0, 1};
    const auto none = synthesize_features(r.models, emb, ids, 0, 1);
    EXPECT_EQ(none.features.rows(), 0u);
    EXPECT_EQ(none.features.cols(), 2u);
    const std::vector<std::size_t> bad{2};
    EXPECT_THROW(synthesize_features(r.models, emb, bad, 1, 1), validation_error);
}

TEST(LossRecord, OneJsonObjectPerLine) {
    std::ostringstream out;
    write_loss_record(out, {7, -0.25, 0.125, 1.5, 3.0});
    const std::string line = out.str();
    ASSERT_EQ(line.back(), '\n');
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<int>(), 7);
    EXPECT_EQ(j.at("wasserstein").get<double>(), -0.25);
    EXPECT_EQ(j.at("gp").get<double>(), 0.125);
    EXPECT_EQ(j.at("cls").get<double>(), 1.5);
    EXPECT_EQ(j.size(), 4u);
}

}  // namespace
