#pragma once

// Similarity between generated and real images: windowed structural
// similarity and a Euclidean distance over early+late convolutional
// features, reported per word position.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wordgan/dataset.hpp"
#include "wordgan/gan.hpp"
#include "wordgan/image.hpp"
#include "wordgan/text.hpp"

namespace wordgan {

struct SsimConfig {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;  // images are mapped from [-1,1] to [0,1] first

    void validate() const {
        if (window == 0 || window % 2 == 0) throw ConfigError("SSIM window extent must be odd");
        if (!(sigma > 0 && k1 > 0 && k2 > 0 && dynamic_range > 0)) throw ConfigError("SSIM constants must be positive");
    }
    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

// Normalized separable Gaussian weights, outer product of a 1-D kernel.
inline std::vector<double> gaussian_window(std::size_t extent, double sigma) {
    std::vector<double> k(extent);
    const double c = (static_cast<double>(extent) - 1) / 2;
    for (std::size_t i = 0; i < extent; ++i) k[i] = std::exp(-((i - c) * (i - c)) / (2 * sigma * sigma));
    std::vector<double> w(extent * extent);
    double total = 0;
    for (std::size_t i = 0; i < extent; ++i)
        for (std::size_t j = 0; j < extent; ++j) total += w[i * extent + j] = k[i] * k[j];
    for (auto& v : w) v /= total;
    return w;
}

// Channel mean mapped from [-1,1] to [0,1], row-major H×W.
inline std::vector<double> luminance(const Image& im) {
    std::vector<double> g(im.height * im.width, 0.0);
    for (std::size_t c = 0; c < im.channels; ++c)
        for (std::size_t p = 0; p < g.size(); ++p) g[p] += im.pixels[c * g.size() + p];
    for (auto& v : g) v = (v / static_cast<double>(im.channels) + 1.0) / 2.0;
    return g;
}

// Mean SSIM over all fully contained windows.
inline double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {}) {
    cfg.validate();
    if (a.channels != b.channels || a.height != b.height || a.width != b.width)
        throw ShapeError("ssim requires images of identical shape");
    if (cfg.window > a.height || cfg.window > a.width)
        throw ShapeError("ssim window " + std::to_string(cfg.window) + " larger than image " +
                         std::to_string(a.height) + "x" + std::to_string(a.width));
    const auto ga = luminance(a), gb = luminance(b);
    const auto w = gaussian_window(cfg.window, cfg.sigma);
    const double c1 = cfg.c1(), c2 = cfg.c2();
    const std::size_t W = a.width, K = cfg.window;
    double total = 0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + K <= a.height; ++y)
        for (std::size_t x = 0; x + K <= a.width; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    const double wt = w[i * K + j];
                    const double va = ga[(y + i) * W + x + j], vb = gb[(y + i) * W + x + j];
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * (va * vb);
                }
            const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            ++count;
        }
    return std::clamp(total / static_cast<double>(count), -1.0, 1.0);
}

// Fixed convolutional stack with an early tap (first strided conv) and a
// late tap (last strided conv before the condition joins). Weights come
// from a trained discriminator or a seeded random initialization; running
// batch-norm statistics are used, so features are per-image.
template <std::floating_point T>
class FeatureExtractor {
public:
    explicit FeatureExtractor(DiscriminatorParams<T> disc) : disc_(std::move(disc)) {}

    static FeatureExtractor random(std::size_t image_extent, std::size_t channels, std::size_t base_channels,
                                   std::uint64_t seed) {
        return FeatureExtractor(init_discriminator<T>(image_extent, channels, base_channels, 1, seed));
    }

    std::size_t image_extent() const { return disc_.image_extent; }

    // Concatenated early and late activations, flattened.
    std::vector<double> features(const Image& image) const {
        if (image.channels != disc_.channels || image.height != disc_.image_extent || image.width != disc_.image_extent)
            throw ShapeError("feature extractor expects " + std::to_string(disc_.channels) + "x" +
                             std::to_string(disc_.image_extent) + "x" + std::to_string(disc_.image_extent) + " images");
        NoGradGuard no_grad;
        std::vector<T> data(image.pixels.begin(), image.pixels.end());
        Tensor<T> x({1, image.channels, image.height, image.width}, std::move(data));
        auto f = discriminator_features(disc_, x, ForwardMode::inference());
        std::vector<double> out(f.early.data().begin(), f.early.data().end());
        out.insert(out.end(), f.late.data().begin(), f.late.data().end());
        return out;
    }

private:
    mutable DiscriminatorParams<T> disc_;
};

inline double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("feature vectors differ in length");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

template <std::floating_point T>
double feature_distance(const FeatureExtractor<T>& extractor, const Image& a, const Image& b) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width)
        throw ShapeError("feature_distance requires images of identical shape");
    return euclidean_distance(extractor.features(a), extractor.features(b));
}

struct SimilarityRow {
    std::string sentence_id;  // "ALL" for per-word means
    std::size_t word_index = 0;  // 1-based
    double ssim = 0;
    double feature_distance = 0;
};

struct SimilarityReport {
    std::vector<SimilarityRow> rows;        // one per (sentence, word)
    std::vector<SimilarityRow> aggregates;  // one per word index

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "sentence_id,word_index,ssim,feat_dist\n";
        for (const auto* list : {&rows, &aggregates})
            for (const auto& r : *list)
                os << r.sentence_id << ',' << r.word_index << ',' << r.ssim << ',' << r.feature_distance << '\n';
        return os.str();
    }

    double mean_ssim(std::size_t word_index) const {
        for (const auto& a : aggregates)
            if (a.word_index == word_index) return a.ssim;
        throw Error("no aggregate for word index " + std::to_string(word_index));
    }
};

struct EvaluatedSentence {
    std::size_t record = 0;
    std::size_t caption = 0;
};

// Records drawn without replacement (cycling when more are requested than
// exist) with one uniformly chosen caption each.
inline std::vector<EvaluatedSentence> sample_sentences(const std::vector<CaptionedImage>& dataset,
                                                       std::size_t n_sentences, std::uint64_t seed) {
    if (dataset.empty()) throw Error("cannot evaluate on an empty dataset");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<EvaluatedSentence> out;
    for (std::size_t s = 0; s < n_sentences; ++s) {
        const std::size_t r = order[s % order.size()];
        std::uniform_int_distribution<std::size_t> pick(0, dataset[r].captions.size() - 1);
        out.push_back({r, pick(rng)});
    }
    return out;
}

template <std::floating_point T>
SimilarityReport per_word_report(const LstmParams<T>& lstm, GeneratorParams<T>& gen, const WordEmbeddingTable& table,
                                 const FeatureExtractor<T>& extractor, const std::vector<CaptionedImage>& dataset,
                                 std::size_t n_sentences, std::uint64_t seed, const SsimConfig& ssim_cfg = {}) {
    SimilarityReport report;
    std::vector<double> ssim_sum, dist_sum;
    std::vector<std::size_t> count;
    for (const auto& s : sample_sentences(dataset, n_sentences, seed)) {
        const auto& rec = dataset[s.record];
        auto images = generate_sequence(lstm, gen, table, rec.captions[s.caption]);
        const auto real_features = extractor.features(rec.image);
        for (std::size_t t = 0; t < images.size(); ++t) {
            SimilarityRow row;
            row.sentence_id = caption_id(rec, s.caption);
            row.word_index = t + 1;
            row.ssim = ssim(images[t], rec.image, ssim_cfg);
            row.feature_distance = euclidean_distance(extractor.features(images[t]), real_features);
            if (ssim_sum.size() <= t) {
                ssim_sum.resize(t + 1, 0.0);
                dist_sum.resize(t + 1, 0.0);
                count.resize(t + 1, 0);
            }
            ssim_sum[t] += row.ssim;
            dist_sum[t] += row.feature_distance;
            ++count[t];
            report.rows.push_back(std::move(row));
        }
    }
    for (std::size_t t = 0; t < count.size(); ++t)
        report.aggregates.push_back({"ALL", t + 1, ssim_sum[t] / count[t], dist_sum[t] / count[t]});
    return report;
}

}  // namespace wordgan
