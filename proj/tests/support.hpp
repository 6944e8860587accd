#pragma once

// Independent reference implementations used as test oracles. None of these
// share code with the library beyond plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "wordgan/dataset.hpp"
#include "wordgan/image.hpp"
#include "wordgan/tensor.hpp"

namespace oracle {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline wordgan::Tensor<double> random_tensor(wordgan::Shape shape, std::uint64_t seed, bool track = false,
                                            double lo = -1, double hi = 1) {
    const auto n = wordgan::element_count(shape);
    return wordgan::Tensor<double>(std::move(shape), random_values(n, seed, lo, hi), track);
}

// Direct nested-loop cross-correlation, [N,C,H,W] * [O,C,kh,kw].
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t N, std::size_t C, std::size_t H,
                                  std::size_t W, const std::vector<double>& k, std::size_t O, std::size_t kh,
                                  std::size_t kw, std::size_t stride, std::size_t pad, std::size_t& Ho,
                                  std::size_t& Wo) {
    Ho = (H + 2 * pad - kh) / stride + 1;
    Wo = (W + 2 * pad - kw) / stride + 1;
    std::vector<double> out(N * O * Ho * Wo, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < Ho; ++y)
                for (std::size_t xo = 0; xo < Wo; ++xo) {
                    double s = 0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const long iy = long(y * stride + i) - long(pad);
                                const long ix = long(xo * stride + j) - long(pad);
                                if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
                                s += x[((n * C + c) * H + iy) * W + ix] * k[((o * C + c) * kh + i) * kw + j];
                            }
                    out[((n * O + o) * Ho + y) * Wo + xo] = s;
                }
    return out;
}

// Scatter form of the transposed convolution, kernel [C,O,kh,kw].
inline std::vector<double> conv_transpose2d(const std::vector<double>& x, std::size_t N, std::size_t C,
                                            std::size_t H, std::size_t W, const std::vector<double>& k,
                                            std::size_t O, std::size_t kh, std::size_t kw, std::size_t stride,
                                            std::size_t pad, std::size_t& Ho, std::size_t& Wo) {
    Ho = (H - 1) * stride + kh - 2 * pad;
    Wo = (W - 1) * stride + kw - 2 * pad;
    std::vector<double> out(N * O * Ho * Wo, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xi = 0; xi < W; ++xi)
                    for (std::size_t o = 0; o < O; ++o)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const long oy = long(y * stride + i) - long(pad);
                                const long ox = long(xi * stride + j) - long(pad);
                                if (oy < 0 || ox < 0 || oy >= long(Ho) || ox >= long(Wo)) continue;
                                out[((n * O + o) * Ho + oy) * Wo + ox] +=
                                    x[((n * C + c) * H + y) * W + xi] * k[((c * O + o) * kh + i) * kw + j];
                            }
    return out;
}

// Scalar LSTM with explicit gate weights.
struct ScalarLstm {
    // order: i, f, o, c
    std::array<double, 4> wx, wh, b;

    static double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

    std::pair<double, double> step(double x, double h, double c) const {
        const double i = sig(wx[0] * x + wh[0] * h + b[0]);
        const double f = sig(wx[1] * x + wh[1] * h + b[1]);
        const double o = sig(wx[2] * x + wh[2] * h + b[2]);
        const double g = std::tanh(wx[3] * x + wh[3] * h + b[3]);
        const double c_next = f * c + i * g;
        return {o * std::tanh(c_next), c_next};
    }
};

// Textbook Adam with bias correction on a flat parameter vector.
struct Adam {
    double lr, b1, b2, eps;
    std::vector<double> m, v;
    int t = 0;

    void step(std::vector<double>& p, const std::vector<double>& g, double sign) {
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        ++t;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(b1, t));
            const double vh = v[i] / (1 - std::pow(b2, t));
            p[i] += sign * lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

// SSIM straight from the definition: grayscale as channel mean, [-1,1] to
// [0,1], 11x11 Gaussian sigma 1.5, valid windows, mean of the map.
inline double ssim(const wordgan::Image& a, const wordgan::Image& b, std::size_t win = 11, double sigma = 1.5) {
    const std::size_t H = a.height, W = a.width, P = H * W;
    auto gray = [&](const wordgan::Image& im, std::size_t y, std::size_t x) {
        double s = 0;
        for (std::size_t c = 0; c < im.channels; ++c) s += im.pixels[c * P + y * W + x];
        return (s / im.channels + 1) / 2;
    };
    std::vector<std::vector<double>> w(win, std::vector<double>(win));
    double total = 0;
    const double mid = (win - 1) / 2.0;
    for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
            w[i][j] = std::exp(-((i - mid) * (i - mid) + (j - mid) * (j - mid)) / (2 * sigma * sigma));
            total += w[i][j];
        }
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double acc = 0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + win <= H; ++y)
        for (std::size_t x = 0; x + win <= W; ++x) {
            double mu_a = 0, mu_b = 0;
            for (std::size_t i = 0; i < win; ++i)
                for (std::size_t j = 0; j < win; ++j) {
                    mu_a += w[i][j] / total * gray(a, y + i, x + j);
                    mu_b += w[i][j] / total * gray(b, y + i, x + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (std::size_t i = 0; i < win; ++i)
                for (std::size_t j = 0; j < win; ++j) {
                    const double da = gray(a, y + i, x + j) - mu_a, db = gray(b, y + i, x + j) - mu_b;
                    va += w[i][j] / total * da * da;
                    vb += w[i][j] / total * db * db;
                    cov += w[i][j] / total * da * db;
                }
            acc += ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) / ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2));
            ++count;
        }
    return acc / count;
}

// Dominant foreground color: pixels far from white are assigned to the
// nearest palette entry; the most frequent entry wins. "none" when the
// image has no foreground.
inline std::string dominant_color(const wordgan::Image& im, const std::vector<wordgan::NamedColor>& palette,
                                  double white_threshold = 0.8) {
    const std::size_t P = im.height * im.width;
    std::map<std::string, std::size_t> votes;
    for (std::size_t p = 0; p < P; ++p) {
        const double r = (im.pixels[p] + 1) / 2, g = (im.pixels[P + p] + 1) / 2, b = (im.pixels[2 * P + p] + 1) / 2;
        if (std::min({r, g, b}) > white_threshold) continue;
        double best = 1e9;
        std::string name;
        for (const auto& c : palette) {
            const double dr = r - c.rgb[0] / 255.0, dg = g - c.rgb[1] / 255.0, db = b - c.rgb[2] / 255.0;
            const double d = dr * dr + dg * dg + db * db;
            if (d < best) {
                best = d;
                name = c.name;
            }
        }
        ++votes[name];
    }
    std::string top = "none";
    std::size_t n = 0;
    for (const auto& [k, v] : votes)
        if (v > n) {
            n = v;
            top = k;
        }
    return top;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("wordgan_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace oracle
