#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wordgan/gan.hpp"
#include "wordgan/gradcheck.hpp"

using namespace wordgan;
using T = Tensor<double>;

namespace {

template <class Params>
void zero_parameters(Params& p) {
    for (auto& [name, t] : p.parameters()) {
        auto copy = t;
        for (auto& v : copy.mutable_data()) v = 0;
    }
}

std::vector<T> tensors(const NamedTensors<double>& named) {
    std::vector<T> out;
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

double direct_d_objective(const std::vector<double>& real, const std::vector<std::vector<double>>& fake,
                          const std::vector<double>& mismatch) {
    double total = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
        double words = 0;
        for (double f : fake[i]) words += std::log(1 - f);
        total += std::log(real[i]) + words / static_cast<double>(fake[i].size()) + std::log(1 - mismatch[i]);
    }
    return total / static_cast<double>(real.size());
}

}  // namespace

TEST(Generator, LayerCountFollowsExtent) {
    EXPECT_EQ(init_generator<double>(8, 64, 3, 4, 1).layer_count(), 4u);
    EXPECT_EQ(init_generator<double>(8, 32, 3, 4, 1).layer_count(), 3u);
    EXPECT_THROW(init_generator<double>(8, 48, 3, 4, 1), ConfigError);
    EXPECT_THROW(init_generator<double>(0, 32, 3, 4, 1), ConfigError);
}

TEST(Generator, DefaultShapeAndRange) {
    auto g = init_generator<float>(128, 64, 3, 8, 2);
    auto h = Tensor<float>({2, 128}, std::vector<float>(256, 0.3f));
    for (std::size_t i = 0; i < 128; ++i) h.mutable_data()[i] = -0.5f;
    auto out = generator_forward(g, h);
    EXPECT_EQ(out.shape(), (Shape{2, 3, 64, 64}));
    for (float v : out.data()) {
        EXPECT_GT(v, -1.0f);
        EXPECT_LT(v, 1.0f);
    }
}

TEST(Generator, ZeroParametersGiveZeroImage) {
    auto g = init_generator<double>(4, 8, 3, 4, 3);
    zero_parameters(g);
    auto out = generator_forward(g, oracle::random_tensor({2, 4}, 1));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Generator, SameSeedSameParameters) {
    auto a = init_generator<double>(4, 8, 3, 4, 5).parameters();
    auto b = init_generator<double>(4, 8, 3, 4, 5).parameters();
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(std::ranges::equal(a[k].tensor.data(), b[k].tensor.data()));
}

TEST(Generator, WrongWidthThrows) {
    auto g = init_generator<double>(4, 8, 3, 4, 3);
    EXPECT_THROW(generator_forward(g, T::zeros({2, 5})), ShapeError);
}

TEST(Discriminator, HalvesToFourByFour) {
    auto d = init_discriminator<double>(64, 3, 4, 6, 1);
    EXPECT_EQ(d.kernels.size(), 4u);
    EXPECT_EQ(d.condition_projection.shape(), (Shape{16, 6}));
    auto f = discriminator_features(d, oracle::random_tensor({2, 3, 64, 64}, 1));
    EXPECT_EQ(f.late.shape(), (Shape{2, 32, 4, 4}));
    EXPECT_EQ(f.early.shape(), (Shape{2, 4, 32, 32}));
}

TEST(Discriminator, ZeroParametersGiveOneHalf) {
    auto d = init_discriminator<double>(8, 3, 4, 5, 2);
    zero_parameters(d);
    auto p = discriminator_forward(d, oracle::random_tensor({3, 3, 8, 8}, 2), oracle::random_tensor({3, 5}, 3));
    for (double v : p.data()) EXPECT_EQ(v, 0.5);
}

TEST(Discriminator, OutputInOpenUnitInterval) {
    auto d = init_discriminator<double>(16, 3, 4, 5, 3);
    auto p = discriminator_forward(d, oracle::random_tensor({4, 3, 16, 16}, 4), oracle::random_tensor({4, 5}, 5));
    EXPECT_EQ(p.shape(), (Shape{4}));
    for (double v : p.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Discriminator, ConditionChangesOutput) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto d = init_discriminator<double>(8, 3, 4, 5, 10 + seed);
        auto images = oracle::random_tensor({2, 3, 8, 8}, 20 + seed);
        auto a = discriminator_forward(d, images, oracle::random_tensor({2, 5}, 30 + seed, false, -3, 3),
                                       ForwardMode::inference());
        auto b = discriminator_forward(d, images, oracle::random_tensor({2, 5}, 40 + seed, false, -3, 3),
                                       ForwardMode::inference());
        EXPECT_NE(a[0], b[0]);
        EXPECT_NE(a[1], b[1]);
    }
}

TEST(Discriminator, MismatchedShapesThrow) {
    auto d = init_discriminator<double>(8, 3, 4, 5, 2);
    EXPECT_THROW(discriminator_forward(d, oracle::random_tensor({2, 3, 16, 16}, 1), oracle::random_tensor({2, 5}, 2)),
                 ShapeError);
    EXPECT_THROW(discriminator_forward(d, oracle::random_tensor({2, 3, 8, 8}, 1), oracle::random_tensor({2, 4}, 2)),
                 ShapeError);
}

TEST(Objectives, AllOneHalf) {
    for (std::size_t n : {1u, 3u, 8u}) {
        auto layout = WordLayout::uniform(n, 2);
        auto half = [](std::size_t k) { return T::full({k}, 0.5); };
        EXPECT_NEAR(discriminator_objective(half(2), half(2 * n), layout, half(2)).item(), 3 * std::log(0.5), 1e-12);
        EXPECT_NEAR(generator_objective(half(2 * n), layout).item(), std::log(0.5), 1e-12);
    }
}

TEST(Objectives, SupremumAtPerfectDiscriminator) {
    auto layout = WordLayout::uniform(2, 1);
    auto v = discriminator_objective(T({1}, {1.0}), T({2}, {0.0, 0.0}), layout, T({1}, {0.0})).item();
    EXPECT_LE(v, 0.0);
    EXPECT_GT(v, -1e-6);
}

TEST(Objectives, GridMaximum) {
    auto layout = WordLayout::uniform(1, 1);
    double best = -1e9, best_r = 0, best_f = 1, best_m = 1;
    for (double r = 0.05; r < 1; r += 0.1)
        for (double f = 0.05; f < 1; f += 0.1)
            for (double m = 0.05; m < 1; m += 0.1) {
                const double v = discriminator_objective(T({1}, {r}), T({1}, {f}), layout, T({1}, {m})).item();
                if (v > best) std::tie(best, best_r, best_f, best_m) = std::tuple{v, r, f, m};
            }
    EXPECT_GT(best_r, 0.9);
    EXPECT_LT(best_f, 0.1);
    EXPECT_LT(best_m, 0.1);
}

TEST(Objectives, TwoWordArithmetic) {
    auto layout = WordLayout::uniform(2, 1);
    EXPECT_NEAR(generator_objective(T({2}, {0.25, 0.75}), layout).item(), (std::log(0.75) + std::log(0.25)) / 2,
                1e-12);
    EXPECT_NEAR(generator_objective(T({2}, {0.25, 0.75}), layout).item(), -0.83699, 1e-5);
}

TEST(Objectives, ClampBoundsCertainFake) {
    auto layout = WordLayout::uniform(1, 1);
    EXPECT_NEAR(generator_objective(T({1}, {1.0}), layout).item(), std::log(1e-7), 1e-6);
    EXPECT_THROW(generator_objective(T({1}, {1.5}), layout), NumericError);
}

TEST(Objectives, MatchDirectFormulaWithRaggedLengths) {
    const std::vector<std::size_t> lengths{3, 1, 4};
    auto layout = WordLayout::from_lengths(lengths);
    auto real = oracle::random_values(3, 1, 0.01, 0.99);
    auto mismatch = oracle::random_values(3, 2, 0.01, 0.99);
    auto flat = oracle::random_values(layout.entries(), 3, 0.01, 0.99);
    std::vector<std::vector<double>> fake(3);
    for (std::size_t k = 0; k < layout.entries(); ++k) fake[layout.owner[k]].push_back(flat[k]);
    const double expected = direct_d_objective(real, fake, mismatch);
    EXPECT_NEAR(discriminator_objective(T({3}, real), T({flat.size()}, flat), layout, T({3}, mismatch)).item(),
                expected, 1e-12);
    double g = 0;
    for (const auto& f : fake) {
        double s = 0;
        for (double v : f) s += std::log(1 - v);
        g += s / static_cast<double>(f.size());
    }
    EXPECT_NEAR(generator_objective(T({flat.size()}, flat), layout).item(), g / 3, 1e-12);
}

TEST(Objectives, WordMajorLayout) {
    auto layout = WordLayout::from_lengths({2, 1});
    EXPECT_EQ(layout.owner, (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(layout.word, (std::vector<std::size_t>{0, 0, 1}));
    EXPECT_THROW(WordLayout::from_lengths({}), Error);
    EXPECT_THROW(WordLayout::from_lengths({0}), Error);
}

TEST(Objectives, SizeMismatchThrows) {
    auto layout = WordLayout::uniform(2, 2);
    EXPECT_THROW(generator_objective(T::full({3}, 0.5), layout), ShapeError);
    EXPECT_THROW(discriminator_objective(T::full({2}, 0.5), T::full({4}, 0.5), layout, T::full({1}, 0.5)),
                 ShapeError);
}

TEST(TinyModel, DiscriminatorObjectiveGradients) {
    auto d = init_discriminator<double>(8, 3, 4, 5, 7);
    auto real = oracle::random_tensor({2, 3, 8, 8}, 1), fake = oracle::random_tensor({4, 3, 8, 8}, 2);
    auto mis = oracle::random_tensor({2, 3, 8, 8}, 3);
    auto y = oracle::random_tensor({2, 5}, 4);
    auto layout = WordLayout::uniform(2, 2);
    auto y_fake = concat<double>({y, y}, 0);
    auto objective = [&] {
        auto mode = ForwardMode::frozen_stats();
        return discriminator_objective(discriminator_forward(d, real, y, mode),
                                       discriminator_forward(d, fake, y_fake, mode), layout,
                                       discriminator_forward(d, mis, y, mode));
    };
    auto r = finite_diff_check<double>(objective, tensors(d.parameters()), 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(TinyModel, GeneratorObjectiveGradientsReachLstm) {
    auto lstm = init_lstm<double>(3, 8, 1, 0.5);
    auto g = init_generator<double>(8, 8, 3, 4, 2);
    auto d = init_discriminator<double>(8, 3, 4, 5, 3);
    std::vector<T> xs{oracle::random_tensor({2, 3}, 5), oracle::random_tensor({2, 3}, 6)};
    auto y = oracle::random_tensor({2, 5}, 7);
    auto layout = WordLayout::uniform(2, 2);
    auto objective = [&] {
        auto hs = lstm_unroll(lstm, xs);
        auto images = generator_forward(g, concat<double>(hs, 0), ForwardMode::frozen_stats());
        return generator_objective(
            discriminator_forward(d, images, concat<double>({y, y}, 0), ForwardMode::frozen_stats()), layout);
    };
    auto params = tensors(g.parameters());
    for (const auto& t : tensors(lstm.parameters())) params.push_back(t);
    backward(objective());
    double lstm_norm = 0;
    for (const auto& t : tensors(lstm.parameters()))
        for (double v : t.grad()) lstm_norm += v * v;
    EXPECT_GT(lstm_norm, 0.0);
    auto r = finite_diff_check<double>(objective, params, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Sequence, OneImagePerWord) {
    auto lstm = init_lstm<double>(6, 8, 1, 0.3);
    auto g = init_generator<double>(8, 8, 3, 4, 2);
    WordEmbeddingTable table(6, 1);
    auto images = generate_sequence(lstm, g, table, "one small red circle on a white background");
    ASSERT_EQ(images.size(), 8u);
    for (const auto& im : images) EXPECT_EQ(im.height, 8u);
    auto again = generate_sequence(lstm, g, table, "one small red circle on a white background");
    for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(images[t].pixels, again[t].pixels);
    EXPECT_THROW(generate_sequence(lstm, g, table, "..."), Error);
}

TEST(Sequence, PrefixConsistency) {
    auto lstm = init_lstm<double>(6, 8, 3, 0.3);
    auto g = init_generator<double>(8, 8, 3, 4, 4);
    // non-trivial running statistics
    generator_forward(g, oracle::random_tensor({4, 8}, 9));
    WordEmbeddingTable table(6, 2);
    const std::string sentence = "a blue square that is large on white";
    auto full = generate_sequence(lstm, g, table, sentence);
    auto words = tokenize(sentence);
    for (std::size_t k = 1; k <= words.size(); ++k) {
        std::string prefix;
        for (std::size_t t = 0; t < k; ++t) prefix += (t ? " " : "") + words[t];
        auto part = generate_sequence(lstm, g, table, prefix);
        ASSERT_EQ(part.size(), k);
        EXPECT_EQ(part.back().pixels, full[k - 1].pixels);
    }
}
