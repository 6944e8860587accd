#pragma once

// Generator G: R^Z -> R^S (projection + transposed-convolution stack) and
// the conditional discriminator D: R^S x R^T -> (0,1), plus the adversarial
// objectives computed from D's probabilities.

#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "wordgan/batch_norm.hpp"
#include "wordgan/conv.hpp"
#include "wordgan/image.hpp"
#include "wordgan/lstm.hpp"
#include "wordgan/params.hpp"
#include "wordgan/tensor.hpp"
#include "wordgan/text.hpp"

namespace wordgan {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kProbabilityEpsilon = 1e-7;
inline constexpr double kInitStddev = 0.02;

struct ForwardMode {
    NormMode norm = NormMode::train;
    bool update_running = true;

    static ForwardMode training() { return {NormMode::train, true}; }
    // Batch statistics, running estimates left untouched.
    static ForwardMode frozen_stats() { return {NormMode::train, false}; }
    static ForwardMode inference() { return {NormMode::eval, false}; }
};

// Number of stride-2 stages between a 4x4 map and the image extent.
inline std::size_t doubling_stages(std::size_t image_extent) {
    if (image_extent < 8 || image_extent > 256 || !std::has_single_bit(image_extent))
        throw ConfigError("unsupported image extent " + std::to_string(image_extent) +
                          " (expected a power of two between 8 and 256)");
    return static_cast<std::size_t>(std::countr_zero(image_extent / 4));
}

template <std::floating_point T>
struct NormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    RunningStats<T> running;

    static NormLayer make(std::size_t channels, std::mt19937_64& rng) {
        NormLayer n;
        n.gamma = normal_tensor<T>({channels}, 1.0, kInitStddev, rng);
        n.beta = Tensor<T>::zeros({channels}, true);
        n.running = RunningStats<T>::fresh(channels);
        return n;
    }

    Tensor<T> operator()(const Tensor<T>& x, ForwardMode mode, double momentum = 0.1) {
        BatchNormOptions opts;
        opts.momentum = momentum;
        opts.update_running = mode.update_running;
        return batch_norm(x, gamma, beta, mode.norm, running, opts);
    }

    void append(NamedTensors<T>& params, NamedTensors<T>& buffers, const std::string& prefix) const {
        params.push_back({prefix + ".gamma", gamma});
        params.push_back({prefix + ".beta", beta});
        buffers.push_back({prefix + ".running_mean", running.mean});
        buffers.push_back({prefix + ".running_var", running.var});
    }
};

// ---------------------------------------------------------------------------
// Generator

template <std::floating_point T>
struct GeneratorParams {
    std::size_t z_dim = 0;
    std::size_t image_extent = 0;
    std::size_t channels = 0;
    std::size_t base_channels = 0;

    Tensor<T> projection;                 // [C0·16, Z]
    NormLayer<T> projection_norm;         // C0
    std::vector<Tensor<T>> kernels;       // kernel l: [C_l, C_{l+1}, 4, 4]
    std::vector<NormLayer<T>> norms;      // after every kernel but the last

    std::size_t layer_count() const { return kernels.size(); }

    NamedTensors<T> parameters() const {
        NamedTensors<T> params, buffers;
        collect(params, buffers);
        return params;
    }
    NamedTensors<T> buffers() const {
        NamedTensors<T> params, buffers;
        collect(params, buffers);
        return buffers;
    }

private:
    void collect(NamedTensors<T>& params, NamedTensors<T>& buffers) const {
        params.push_back({"gen.projection", projection});
        projection_norm.append(params, buffers, "gen.projection_norm");
        for (std::size_t l = 0; l < kernels.size(); ++l) {
            params.push_back({"gen.deconv" + std::to_string(l) + ".kernel", kernels[l]});
            if (l < norms.size()) norms[l].append(params, buffers, "gen.deconv" + std::to_string(l) + ".norm");
        }
    }
};

// Channel widths C_0 … C_L of the generator chain.
inline std::vector<std::size_t> generator_widths(std::size_t image_extent, std::size_t channels,
                                                 std::size_t base_channels) {
    const std::size_t stages = doubling_stages(image_extent);
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l < stages; ++l) widths.push_back(base_channels << (stages - 1 - l));
    widths.push_back(channels);
    return widths;
}

template <std::floating_point T>
GeneratorParams<T> init_generator(std::size_t z_dim, std::size_t image_extent, std::size_t channels,
                                  std::size_t base_channels, std::uint64_t seed) {
    if (z_dim == 0 || channels == 0 || base_channels == 0)
        throw ConfigError("generator dimensions must be positive");
    const auto widths = generator_widths(image_extent, channels, base_channels);
    std::mt19937_64 rng(seed);
    GeneratorParams<T> g;
    g.z_dim = z_dim;
    g.image_extent = image_extent;
    g.channels = channels;
    g.base_channels = base_channels;
    g.projection = normal_tensor<T>({widths[0] * 16, z_dim}, 0.0, kInitStddev, rng);
    g.projection_norm = NormLayer<T>::make(widths[0], rng);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        g.kernels.push_back(normal_tensor<T>({widths[l], widths[l + 1], 4, 4}, 0.0, kInitStddev, rng));
        if (l + 2 < widths.size()) g.norms.push_back(NormLayer<T>::make(widths[l + 1], rng));
    }
    return g;
}

// h [N,Z] -> images [N,C,extent,extent] in (-1,1).
template <std::floating_point T>
Tensor<T> generator_forward(GeneratorParams<T>& g, const Tensor<T>& h, ForwardMode mode = ForwardMode::training()) {
    if (h.rank() != 2 || h.dim(1) != g.z_dim)
        throw ShapeError("generator input " + to_string(h.shape()) + " does not match Z=" + std::to_string(g.z_dim));
    const std::size_t n = h.dim(0);
    const std::size_t c0 = g.projection.dim(0) / 16;
    auto x = reshape(linear(h, g.projection), {n, c0, 4, 4});
    x = relu(g.projection_norm(x, mode));
    for (std::size_t l = 0; l < g.kernels.size(); ++l) {
        x = conv_transpose2d(x, g.kernels[l], 2, 1);
        if (l < g.norms.size())
            x = relu(g.norms[l](x, mode));
        else
            x = tanh(x);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Discriminator

template <std::floating_point T>
struct DiscriminatorParams {
    std::size_t image_extent = 0;
    std::size_t channels = 0;
    std::size_t base_channels = 0;
    std::size_t condition_dim = 0;
    std::size_t condition_channels = 0;

    std::vector<Tensor<T>> kernels;      // strided 4x4 convs down to 4x4
    std::vector<NormLayer<T>> norms;     // layers 1..L-1
    Tensor<T> condition_projection;      // [condition_channels, T]
    Tensor<T> joint_kernel;              // [Cf, Cf+condition_channels, 1, 1]
    NormLayer<T> joint_norm;
    Tensor<T> dense;                     // [1, Cf·16]
    Tensor<T> dense_bias;                // [1]

    std::size_t feature_channels() const { return kernels.back().dim(0); }

    NamedTensors<T> parameters() const {
        NamedTensors<T> params, buffers;
        collect(params, buffers);
        return params;
    }
    NamedTensors<T> buffers() const {
        NamedTensors<T> params, buffers;
        collect(params, buffers);
        return buffers;
    }

private:
    void collect(NamedTensors<T>& params, NamedTensors<T>& buffers) const {
        for (std::size_t l = 0; l < kernels.size(); ++l) {
            params.push_back({"disc.conv" + std::to_string(l) + ".kernel", kernels[l]});
            if (l >= 1) norms[l - 1].append(params, buffers, "disc.conv" + std::to_string(l) + ".norm");
        }
        params.push_back({"disc.condition_projection", condition_projection});
        params.push_back({"disc.joint.kernel", joint_kernel});
        joint_norm.append(params, buffers, "disc.joint.norm");
        params.push_back({"disc.dense", dense});
        params.push_back({"disc.dense_bias", dense_bias});
    }
};

template <std::floating_point T>
DiscriminatorParams<T> init_discriminator(std::size_t image_extent, std::size_t channels, std::size_t base_channels,
                                          std::size_t condition_dim, std::uint64_t seed,
                                          std::size_t condition_channels = 16) {
    if (channels == 0 || base_channels == 0 || condition_dim == 0 || condition_channels == 0)
        throw ConfigError("discriminator dimensions must be positive");
    const std::size_t stages = doubling_stages(image_extent);
    std::mt19937_64 rng(seed);
    DiscriminatorParams<T> d;
    d.image_extent = image_extent;
    d.channels = channels;
    d.base_channels = base_channels;
    d.condition_dim = condition_dim;
    d.condition_channels = condition_channels;
    std::size_t in = channels;
    for (std::size_t l = 0; l < stages; ++l) {
        const std::size_t out = base_channels << l;
        d.kernels.push_back(normal_tensor<T>({out, in, 4, 4}, 0.0, kInitStddev, rng));
        if (l >= 1) d.norms.push_back(NormLayer<T>::make(out, rng));
        in = out;
    }
    d.condition_projection = normal_tensor<T>({condition_channels, condition_dim}, 0.0, kInitStddev, rng);
    d.joint_kernel = normal_tensor<T>({in, in + condition_channels, 1, 1}, 0.0, kInitStddev, rng);
    d.joint_norm = NormLayer<T>::make(in, rng);
    d.dense = normal_tensor<T>({1, in * 16}, 0.0, kInitStddev, rng);
    d.dense_bias = Tensor<T>::zeros({1}, true);
    return d;
}

template <std::floating_point T>
struct DiscriminatorFeatures {
    Tensor<T> early;  // activations after the first strided conv
    Tensor<T> late;   // activations of the last strided conv (4x4 map)
};

template <std::floating_point T>
DiscriminatorFeatures<T> discriminator_features(DiscriminatorParams<T>& d, const Tensor<T>& images,
                                                ForwardMode mode = ForwardMode::training()) {
    const Shape expected{images.rank() == 4 ? images.dim(0) : 0, d.channels, d.image_extent, d.image_extent};
    if (images.shape() != expected)
        throw ShapeError("discriminator input " + to_string(images.shape()) + " does not match extent " +
                         std::to_string(d.image_extent) + " and " + std::to_string(d.channels) + " channels");
    DiscriminatorFeatures<T> f;
    auto x = images;
    for (std::size_t l = 0; l < d.kernels.size(); ++l) {
        x = conv2d(x, d.kernels[l], 2, 1);
        if (l >= 1) x = d.norms[l - 1](x, mode);
        x = leaky_relu(x, T(kLeakySlope));
        if (l == 0) f.early = x;
    }
    f.late = x;
    return f;
}

// Probability per image [N] that (image, condition) is a real matching pair.
template <std::floating_point T>
Tensor<T> discriminator_forward(DiscriminatorParams<T>& d, const Tensor<T>& images, const Tensor<T>& y,
                                ForwardMode mode = ForwardMode::training()) {
    if (y.rank() != 2 || y.dim(1) != d.condition_dim || (images.rank() == 4 && y.dim(0) != images.dim(0)))
        throw ShapeError("condition " + to_string(y.shape()) + " does not match T=" +
                         std::to_string(d.condition_dim) + " for images " + to_string(images.shape()));
    auto features = discriminator_features(d, images, mode).late;
    const std::size_t n = images.dim(0);
    auto cond = leaky_relu(linear(y, d.condition_projection), T(kLeakySlope));
    auto joint = concat<T>({features, tile_spatial(cond, 4, 4)}, 1);
    joint = leaky_relu(d.joint_norm(conv2d(joint, d.joint_kernel, 1, 0), mode), T(kLeakySlope));
    auto logit = linear(reshape(joint, {n, d.feature_channels() * 16}), d.dense) + d.dense_bias;
    return reshape(sigmoid(logit), {n});
}

// ---------------------------------------------------------------------------
// Objectives

// Fake-image entries of a batch whose sentences have lengths n_i, ordered
// word-major (all first words, then all second words, …). Entry (t,i)
// carries weight 1/(m·n_i), so summing weighted terms gives
// (1/m) Σ_i (1/n_i) Σ_t.
struct WordLayout {
    std::vector<std::size_t> lengths;
    std::vector<std::size_t> owner;  // record index per entry
    std::vector<std::size_t> word;   // 0-based word position per entry

    static WordLayout from_lengths(std::vector<std::size_t> lengths) {
        if (lengths.empty()) throw Error("word layout needs at least one sentence");
        WordLayout w;
        std::size_t longest = 0;
        for (auto n : lengths) {
            if (n == 0) throw Error("sentence of zero words");
            longest = std::max(longest, n);
        }
        for (std::size_t t = 0; t < longest; ++t)
            for (std::size_t i = 0; i < lengths.size(); ++i)
                if (t < lengths[i]) {
                    w.owner.push_back(i);
                    w.word.push_back(t);
                }
        w.lengths = std::move(lengths);
        return w;
    }

    static WordLayout uniform(std::size_t words, std::size_t sentences) {
        return from_lengths(std::vector<std::size_t>(sentences, words));
    }

    std::size_t sentences() const { return lengths.size(); }
    std::size_t entries() const { return owner.size(); }
    std::size_t longest() const { return *std::max_element(lengths.begin(), lengths.end()); }

    template <std::floating_point T>
    Tensor<T> weights() const {
        std::vector<T> w(owner.size());
        const double m = static_cast<double>(lengths.size());
        for (std::size_t k = 0; k < owner.size(); ++k) w[k] = static_cast<T>(1.0 / (m * lengths[owner[k]]));
        const std::size_t n = w.size();
        return Tensor<T>({n}, std::move(w));
    }
};

namespace detail {

template <std::floating_point T>
Tensor<T> clamped(const Tensor<T>& p) {
    for (T v : p.data())
        if (!(v >= 0 && v <= 1)) throw NumericError("probability outside [0,1]");
    return clamp(p, T(kProbabilityEpsilon), T(1 - kProbabilityEpsilon));
}

// log(1 - p) with p clamped.
template <std::floating_point T>
Tensor<T> log_complement(const Tensor<T>& p) {
    return log(affine(clamped(p), T(-1), T(1)));
}

}  // namespace detail

// mean_i [ log D(r|y) + (1/n_i) Σ_t log(1 - D(G(h_t)|y)) + log(1 - D(r*|y)) ].
// The discriminator ascends this.
template <std::floating_point T>
Tensor<T> discriminator_objective(const Tensor<T>& d_real, const Tensor<T>& d_fake, const WordLayout& layout,
                                  const Tensor<T>& d_mismatch) {
    if (d_real.size() != layout.sentences() || d_mismatch.size() != layout.sentences() ||
        d_fake.size() != layout.entries())
        throw ShapeError("discriminator objective inputs do not match the word layout");
    auto real_term = mean(log(detail::clamped(d_real)));
    auto fake_term = sum(detail::log_complement(reshape(d_fake, {d_fake.size()})) * layout.weights<T>());
    auto mismatch_term = mean(detail::log_complement(d_mismatch));
    return real_term + fake_term + mismatch_term;
}

// mean_i (1/n_i) Σ_t log(1 - D(G(h_t)|y)); the generator and LSTM descend this.
template <std::floating_point T>
Tensor<T> generator_objective(const Tensor<T>& d_fake, const WordLayout& layout) {
    if (d_fake.size() != layout.entries()) throw ShapeError("generator objective input does not match word layout");
    return sum(detail::log_complement(reshape(d_fake, {d_fake.size()})) * layout.weights<T>());
}

// ---------------------------------------------------------------------------
// Per-word generation

template <std::floating_point T>
Tensor<T> vectors_to_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) throw ShapeError("no rows");
    const std::size_t width = rows.front().size();
    std::vector<T> data;
    data.reserve(rows.size() * width);
    for (const auto& r : rows) {
        if (r.size() != width) throw ShapeError("ragged rows");
        for (double v : r) data.push_back(static_cast<T>(v));
    }
    return Tensor<T>({rows.size(), width}, std::move(data));
}

template <std::floating_point T>
Image tensor_to_image(const Tensor<T>& batch, std::size_t index) {
    const std::size_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Image im(c, h, w);
    const std::size_t stride = c * h * w;
    for (std::size_t k = 0; k < stride; ++k) im.pixels[k] = static_cast<float>(batch.data()[index * stride + k]);
    return im;
}

// Images for words 1…n of one token sequence as a [n,C,E,E] tensor. Uses
// running batch-norm statistics and one generator pass per word, so image t
// depends only on words 1…t.
template <std::floating_point T>
Tensor<T> generate_sequence_tensor(const LstmParams<T>& lstm, GeneratorParams<T>& gen,
                                   const WordEmbeddingTable& table, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error("cannot generate images for an empty sentence");
    NoGradGuard no_grad;
    std::vector<Tensor<T>> inputs;
    for (const auto& v : embed_words(table, tokens)) inputs.push_back(vectors_to_rows<T>({v}));
    std::vector<Tensor<T>> images;
    for (const auto& h : lstm_unroll(lstm, inputs)) images.push_back(generator_forward(gen, h, ForwardMode::inference()));
    return concat(images, 0);
}

template <std::floating_point T>
std::vector<Image> generate_sequence(const LstmParams<T>& lstm, GeneratorParams<T>& gen,
                                     const WordEmbeddingTable& table, const std::string& sentence) {
    auto batch = generate_sequence_tensor(lstm, gen, table, tokenize(sentence));
    std::vector<Image> images;
    for (std::size_t t = 0; t < batch.dim(0); ++t) images.push_back(tensor_to_image(batch, t));
    return images;
}

}  // namespace wordgan
