#include "ozsl/adam.hpp"
#include "ozsl/networks.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace ozsl;

ModelConfig tiny() {
    ModelConfig c;
    c.feature_dim = 6;
    c.embed_dim = 3;
    c.width_divisor = 256;
    return c;
}

TEST(Networks, FullWidthsMatchTheReferenceArchitecture) {
    ModelConfig c;
    c.embed_dim = 85;
    EXPECT_EQ(c.generator_hidden(), 4096u);
    EXPECT_EQ(c.critic_hidden(), 4096u);
    EXPECT_EQ(c.sampler_hidden(), 2048u);
    EXPECT_EQ(c.feature_dim, 2048u);
    c.width_divisor = 64;
    EXPECT_EQ(c.generator_hidden(), 64u);
    EXPECT_EQ(c.sampler_hidden(), 32u);
}

TEST(Networks, ParameterCountByHand) {
    // 3*5 + 5 + 5*2 + 2
    EXPECT_EQ(mlp_parameter_count(3, 5, 2), 32u);
    Rng rng{1};
    const auto cfg = tiny();
    const Generator g = make_generator(cfg, rng);
    EXPECT_EQ(g.net.parameter_count(), mlp_parameter_count(6, 16, 6));
    const Critic d = make_critic(cfg, rng);
    EXPECT_EQ(d.net.parameter_count(), mlp_parameter_count(9, 16, 1));
    const Sampler s = make_sampler(cfg, rng);
    EXPECT_EQ(s.net.parameter_count(), mlp_parameter_count(3, 8, 6));
}

TEST(Sampler, ZeroNetworkGivesZeroOutputs) {
    const Sampler s{zero_mlp(3, 4, 6, 0.2, output_activation::none), 3};
    Rng rng{2};
    const auto out = s.forward(ad::Var::constant(rng.normal_matrix(2, 3)));
    EXPECT_EQ(out.mu.value(), (Matrix{2, 3}));
    EXPECT_EQ(out.log_sqrt_sigma.value(), (Matrix{2, 3}));
}

TEST(Sampler, ForwardIsDeterministic) {
    Rng rng{3};
    const Sampler s = make_sampler(tiny(), rng);
    const auto c = ad::Var::constant(rng.normal_matrix(1, 3));
    EXPECT_EQ(s.forward(c).mu.value(), s.forward(c).mu.value());
    EXPECT_EQ(s.forward(c).log_sqrt_sigma.value(), s.forward(c).log_sqrt_sigma.value());
}

TEST(Sampler, WrongEmbeddingWidthThrows) {
    Rng rng{3};
    const Sampler s = make_sampler(tiny(), rng);
    EXPECT_THROW(s.forward(ad::Var::constant(Matrix{1, 4})), dimension_error);
}

TEST(Reparameterization, ZeroNoiseGivesMean) {
    const SamplerOutput out{ad::Var::constant(Matrix{1, 2, std::vector<double>{0.5, -1.0}}), ad::Var::constant(Matrix{1, 2, -0.7})};
    EXPECT_EQ(reparameterized_sample(out, ad::Var::constant(Matrix{1, 2})).value(), out.mu.value());
}

TEST(Reparameterization, UnitVarianceShiftsByNoise) {
    const SamplerOutput out{ad::Var::constant(Matrix{1, 2, std::vector<double>{0.5, -1.0}}), ad::Var::constant(Matrix{1, 2})};
    const auto s = reparameterized_sample(out, ad::Var::constant(Matrix{1, 2, std::vector<double>{1.0, 0.0}})).value();
    EXPECT_DOUBLE_EQ(s(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(s(0, 1), -1.0);
}

TEST(Reparameterization, MonteCarloMeanMatchesMu) {
    const std::size_t n = 100000;
    const double log_sqrt_sigma = -0.3;
    const double sigma = std::exp(2.0 * log_sqrt_sigma);
    Rng rng{4};
    const SamplerOutput out{ad::Var::constant(Matrix{n, 2, 0.25}), ad::Var::constant(Matrix{n, 2, log_sqrt_sigma})};
    const auto s = reparameterized_sample(out, ad::Var::constant(rng.normal_matrix(n, 2))).value();
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += s(i, j);
        }
        mean /= static_cast<double>(n);
        EXPECT_LT(std::abs(mean - 0.25), 4.0 * sigma / std::sqrt(static_cast<double>(n)));
    }
}

TEST(Reparameterization, DifferentiableInSamplerParameters) {
    Rng rng{5};
    const Sampler sampler = make_sampler(tiny(), rng);
    const auto s = reparameterized_sample(sampler.forward(ad::Var::constant(rng.normal_matrix(2, 3))), ad::Var::constant(rng.normal_matrix(2, 3)));
    const auto g = ad::gradients(ad::sum(ad::square(s)), sampler.parameters());
    double total = 0.0;
    for (const auto &m : g) {
        total += squared_norm(m.data());
    }
    EXPECT_GT(total, 0.0);
}

TEST(Generator, ZeroWeightsGiveZeroFeatures) {
    const Generator g{zero_mlp(6, 4, 5, 0.2, output_activation::relu)};
    Rng rng{6};
    EXPECT_EQ(g.forward(ad::Var::constant(rng.normal_matrix(2, 3)), ad::Var::constant(rng.normal_matrix(2, 3))).value(), (Matrix{2, 5}));
}

TEST(Generator, OutputIsNonNegativeAndDeterministic) {
    Rng rng{7};
    const Generator g = make_generator(tiny(), rng);
    const auto s = ad::Var::constant(rng.normal_matrix(50, 3, 3.0));
    const auto z = ad::Var::constant(rng.normal_matrix(50, 3));
    const auto x = g.forward(s, z).value();
    for (double v : x.data()) {
        EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(x, g.forward(s, z).value());
    EXPECT_EQ(x.cols(), 6u);
}

TEST(Generator, NoiseMustMatchSemanticShape) {
    Rng rng{7};
    const Generator g = make_generator(tiny(), rng);
    EXPECT_THROW(g.forward(ad::Var::constant(Matrix{2, 3}), ad::Var::constant(Matrix{2, 2})), dimension_error);
}

TEST(Critic, ZeroParametersScoreZero) {
    const Critic d{zero_mlp(9, 4, 1, 0.2, output_activation::none)};
    Rng rng{8};
    EXPECT_EQ(d.forward(ad::Var::constant(rng.normal_matrix(3, 6)), ad::Var::constant(rng.normal_matrix(3, 3))).value(), (Matrix{3, 1}));
}

TEST(Critic, InputGradientMatchesFiniteDifferences) {
    Rng rng{9};
    const Critic d = make_critic(tiny(), rng);
    const Matrix x0 = rng.normal_matrix(1, 6);
    const auto c = ad::Var::constant(rng.normal_matrix(1, 3));
    const auto x = ad::Var::parameter(x0);
    const auto g = ad::gradients(d.forward(x, c), std::vector<ad::Var>{x})[0];
    const double h = 1e-6;
    for (std::size_t j = 0; j < 6; ++j) {
        Matrix up = x0;
        Matrix down = x0;
        up(0, j) += h;
        down(0, j) -= h;
        const double fd = (d.forward(ad::Var::constant(up), c).scalar() - d.forward(ad::Var::constant(down), c).scalar()) / (2 * h);
        EXPECT_NEAR(g(0, j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Classifier, ProbabilitiesFormASimplex) {
    Rng rng{10};
    const Classifier clf = make_classifier(6, 4, rng);
    const Matrix p = clf.probabilities(rng.normal_matrix(20, 6, 5.0));
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (double v : p.row_span(i)) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Classifier, TrainingSeparatesBlobs) {
    Rng rng{11};
    Matrix x{200, 2};
    std::vector<std::size_t> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = i % 2;
        x(i, 0) = (y[i] == 0 ? -2.0 : 2.0) + rng.normal(0.0, 0.5);
        x(i, 1) = rng.normal(0.0, 0.5);
    }
    const Classifier clf = train_classifier(x, y, 2, {30, 32, {1e-2, 0.9, 0.999, 1e-8}}, rng);
    const Matrix logits = clf.logits(x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        correct += (logits(i, 1) > logits(i, 0)) == (y[i] == 1) ? 1 : 0;
    }
    EXPECT_GE(correct, 195u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    std::vector<ad::Var> p{ad::Var::parameter(Matrix{1, 3, std::vector<double>{1.0, -2.0, 3.0}})};
    AdamState st{p, {}};
    const Matrix before = p[0].value();
    const std::vector<Matrix> g{Matrix{1, 3}};
    for (int i = 0; i < 5; ++i) {
        st.update(p, g);
    }
    EXPECT_EQ(p[0].value(), before);
    EXPECT_EQ(st.step(), 5u);
}

TEST(Adam, ConstantGradientDecreasesMonotonically) {
    std::vector<ad::Var> p{ad::Var::parameter(Matrix{1, 1, 1.0})};
    AdamState st{p, {}};
    double last = p[0].scalar();
    for (int i = 0; i < 50; ++i) {
        st.update(p, std::vector<Matrix>{Matrix{1, 1, 0.3}});
        EXPECT_LT(p[0].scalar(), last);
        last = p[0].scalar();
    }
}

TEST(Adam, QuadraticBowlConverges) {
    std::vector<ad::Var> p{ad::Var::parameter(Matrix{1, 2, 5.0})};
    AdamState st{p, {0.1, 0.9, 0.999, 1e-8}};
    for (int i = 0; i < 500; ++i) {
        st.update(p, ad::gradients(ad::sum(ad::square(p[0])), p));
    }
    EXPECT_LT(std::sqrt(squared_norm(p[0].value().data())), 1e-2);
}

TEST(Adam, NonFiniteGradientIsATrainingError) {
    std::vector<ad::Var> p{ad::Var::parameter(Matrix{1, 1, 1.0})};
    AdamState st{p, {}};
    EXPECT_THROW(st.update(p, std::vector<Matrix>{Matrix{1, 1, std::nan("")}}), training_error);
}

TEST(Adam, MomentShapesMirrorParameters) {
    std::vector<ad::Var> p{ad::Var::parameter(Matrix{2, 3}), ad::Var::parameter(Matrix{1, 3})};
    const AdamState st{p, {}};
    ASSERT_EQ(st.first_moment().size(), 2u);
    EXPECT_EQ(st.first_moment()[0].rows(), 2u);
    EXPECT_EQ(st.second_moment()[1].cols(), 3u);
}

}  // namespace
