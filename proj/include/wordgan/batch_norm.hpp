#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "wordgan/tensor.hpp"

namespace wordgan {

enum class NormMode { train, eval };

template <std::floating_point T>
struct RunningStats {
    Tensor<T> mean;
    Tensor<T> var;

    static RunningStats fresh(std::size_t channels) {
        return {Tensor<T>::zeros({channels}), Tensor<T>::full({channels}, T(1))};
    }
};

struct BatchNormOptions {
    double momentum = 0.1;
    double epsilon = 1e-5;
    // When false, train mode normalizes by batch statistics without touching
    // the running estimates.
    bool update_running = true;
};

// Per-channel normalization of x[N,C,...]. Train mode uses biased batch
// statistics and folds the unbiased variance into the running estimate;
// eval mode uses the running estimates.
template <std::floating_point T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, NormMode mode,
                     RunningStats<T>& running, BatchNormOptions opts = {}) {
    if (x.rank() < 2) throw ShapeError("batch_norm expects [N,C,...], got " + to_string(x.shape()));
    if (!(opts.epsilon > 0)) throw NumericError("batch_norm epsilon must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1);
    const std::size_t plane = x.size() / (n * c);
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || running.mean.shape() != Shape{c} ||
        running.var.shape() != Shape{c})
        throw ShapeError("batch_norm parameter shape does not match channel count " + std::to_string(c));
    if (mode == NormMode::train && n < 2) throw ShapeError("batch_norm in train mode needs a batch of at least 2");

    const T eps = static_cast<T>(opts.epsilon);
    const T count = static_cast<T>(n * plane);
    const auto& xv = x.data();
    std::vector<T> mu(c), inv_std(c);
    if (mode == NormMode::train) {
        auto rm = running.mean.mutable_data();
        auto rv = running.var.mutable_data();
        const T mom = static_cast<T>(opts.momentum);
        for (std::size_t ch = 0; ch < c; ++ch) {
            T s = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < plane; ++p) s += xv[(i * c + ch) * plane + p];
            const T m = s / count;
            T ss = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < plane; ++p) {
                    const T d = xv[(i * c + ch) * plane + p] - m;
                    ss += d * d;
                }
            const T var = ss / count;
            mu[ch] = m;
            inv_std[ch] = T(1) / std::sqrt(var + eps);
            if (opts.update_running) {
                rm[ch] = (T(1) - mom) * rm[ch] + mom * m;
                rv[ch] = (T(1) - mom) * rv[ch] + mom * (ss / (count - T(1)));
            }
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mu[ch] = running.mean.data()[ch];
            inv_std[ch] = T(1) / std::sqrt(running.var.data()[ch] + eps);
        }
    }

    std::vector<T> xhat(x.size()), out(x.size());
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (i * c + ch) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                const T h = (xv[base + p] - mu[ch]) * inv_std[ch];
                xhat[base + p] = h;
                out[base + p] = gv[ch] * h + bv[ch];
            }
        }

    const bool batch_stats = mode == NormMode::train;
    return detail::make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta}, "batch_norm",
                                  [n, c, plane, count, batch_stats, inv_std = std::move(inv_std),
                                   xhat = std::move(xhat)](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& gy = self.grad;
        std::vector<T> sum_dy(c, T(0)), sum_dy_xhat(c, T(0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t base = (i * c + ch) * plane;
                for (std::size_t p = 0; p < plane; ++p) {
                    sum_dy[ch] += gy[base + p];
                    sum_dy_xhat[ch] += gy[base + p] * xhat[base + p];
                }
            }
        if (pg.requires_grad) {
            auto& g = pg.ensure_grad();
            for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
        }
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            const auto& gamma_v = pg.value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t base = (i * c + ch) * plane;
                    const T k = gamma_v[ch] * inv_std[ch];
                    if (batch_stats) {
                        const T mdy = sum_dy[ch] / count;
                        const T mdyx = sum_dy_xhat[ch] / count;
                        for (std::size_t p = 0; p < plane; ++p)
                            g[base + p] += k * (gy[base + p] - mdy - xhat[base + p] * mdyx);
                    } else {
                        for (std::size_t p = 0; p < plane; ++p) g[base + p] += k * gy[base + p];
                    }
                }
        }
    });
}

}  // namespace wordgan
