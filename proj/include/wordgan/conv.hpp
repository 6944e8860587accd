#pragma once

// Strided 2-D convolution (cross-correlation, no kernel flip) and its
// adjoint, the transposed convolution. Both lower to im2col + GEMM over the
// whole batch so the GEMM's wide dimension is N·H·W.

#include <algorithm>
#include <cstddef>
#include <utility>
#include <string>
#include <vector>

#include "wordgan/tensor.hpp"

namespace wordgan {

struct ConvGeometry {
    std::size_t batch = 0;
    std::size_t channels = 0;  // channels of the "image" side
    std::size_t height = 0, width = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1, padding = 0;
    std::size_t out_h = 0, out_w = 0;  // extent of the "column" side

    std::size_t patch() const { return channels * kernel_h * kernel_w; }
    std::size_t columns() const { return batch * out_h * out_w; }
};

namespace detail {

// Output positions o in [lo, hi) whose input index o·stride + k - padding
// falls inside [0, extent).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t extent, std::size_t stride,
                                                       std::size_t k, std::size_t padding) {
    std::size_t lo = 0;
    if (k < padding) lo = (padding - k + stride - 1) / stride;
    const std::size_t limit = extent + padding - k;  // o·stride < limit
    std::size_t hi = (extent + padding <= k) ? 0 : (limit + stride - 1) / stride;
    return {std::min(lo, out), std::min(std::max(hi, lo), out)};
}

// [N,C,H,W] image -> [C·kh·kw][N·out_h·out_w] column matrix.
template <std::floating_point T>
std::vector<T> im2col(const ConvGeometry& g, const T* image) {
    const std::size_t cols = g.columns();
    const std::size_t plane_out = g.out_h * g.out_w;
    std::vector<T> col(g.patch() * cols, T(0));
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            const auto [y0, y1] = valid_range(g.out_h, g.height, g.stride, ki, g.padding);
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const auto [x0, x1] = valid_range(g.out_w, g.width, g.stride, kj, g.padding);
                T* row = col.data() + ((c * g.kernel_h + ki) * g.kernel_w + kj) * cols;
                for (std::size_t n = 0; n < g.batch; ++n) {
                    const T* src = image + (n * g.channels + c) * g.height * g.width;
                    T* dst = row + n * plane_out;
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const std::size_t base = (oy * g.stride + ki - g.padding) * g.width + kj;
                        T* d = dst + oy * g.out_w;
                        for (std::size_t ox = x0; ox < x1; ++ox) d[ox] = src[base + ox * g.stride - g.padding];
                    }
                }
            }
        }
    return col;
}

// Scatter-add of a column matrix back into an [N,C,H,W] image.
template <std::floating_point T>
void col2im(const ConvGeometry& g, const T* col, T* image) {
    const std::size_t cols = g.columns();
    const std::size_t plane_out = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            const auto [y0, y1] = valid_range(g.out_h, g.height, g.stride, ki, g.padding);
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const auto [x0, x1] = valid_range(g.out_w, g.width, g.stride, kj, g.padding);
                const T* row = col + ((c * g.kernel_h + ki) * g.kernel_w + kj) * cols;
                for (std::size_t n = 0; n < g.batch; ++n) {
                    T* dst = image + (n * g.channels + c) * g.height * g.width;
                    const T* src = row + n * plane_out;
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const std::size_t base = (oy * g.stride + ki - g.padding) * g.width + kj;
                        const T* s = src + oy * g.out_w;
                        for (std::size_t ox = x0; ox < x1; ++ox) dst[base + ox * g.stride - g.padding] += s[ox];
                    }
                }
            }
        }
}

// [N,C,P] -> [C][N·P]
template <std::floating_point T>
std::vector<T> to_channel_major(const T* x, std::size_t n, std::size_t c, std::size_t plane) {
    std::vector<T> out(n * c * plane);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            std::copy_n(x + (i * c + ch) * plane, plane, out.begin() + ch * n * plane + i * plane);
    return out;
}

// [C][N·P] -> [N,C,P], accumulating into out.
template <std::floating_point T>
void add_from_channel_major(const T* x, std::size_t n, std::size_t c, std::size_t plane, T* out) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* src = x + ch * n * plane + i * plane;
            T* dst = out + (i * c + ch) * plane;
            for (std::size_t p = 0; p < plane; ++p) dst[p] += src[p];
        }
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                   const char* axis) {
    if (stride == 0) throw ShapeError("convolution stride must be positive");
    if (k > in + 2 * pad)
        throw ShapeError(std::string("kernel larger than padded input along ") + axis);
    const std::size_t span = in + 2 * pad - k;
    if (span % stride != 0)
        throw ShapeError(std::string("non-exact convolution output extent along ") + axis + ": (" +
                         std::to_string(in) + "+2*" + std::to_string(pad) + "-" + std::to_string(k) +
                         ") not divisible by stride " + std::to_string(stride));
    return span / stride + 1;
}

}  // namespace detail

// input [N,C,H,W], kernel [O,C,kh,kw] -> [N,O,H',W']
template <std::floating_point T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride, std::size_t padding) {
    if (input.rank() != 4 || kernel.rank() != 4)
        throw ShapeError("conv2d expects 4-D input and kernel, got " + to_string(input.shape()) + " and " +
                         to_string(kernel.shape()));
    if (input.dim(1) != kernel.dim(1))
        throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) + ", kernel " +
                         to_string(kernel.shape()));
    ConvGeometry g;
    g.batch = input.dim(0);
    g.channels = input.dim(1);
    g.height = input.dim(2);
    g.width = input.dim(3);
    g.kernel_h = kernel.dim(2);
    g.kernel_w = kernel.dim(3);
    g.stride = stride;
    g.padding = padding;
    g.out_h = detail::conv_out_extent(g.height, g.kernel_h, stride, padding, "height");
    g.out_w = detail::conv_out_extent(g.width, g.kernel_w, stride, padding, "width");
    const std::size_t outs = kernel.dim(0);
    const std::size_t plane = g.out_h * g.out_w;

    auto col = detail::im2col(g, input.data().data());
    std::vector<T> out_cm(outs * g.columns(), T(0));
    detail::gemm_nn(outs, g.columns(), g.patch(), kernel.data().data(), col.data(), out_cm.data());
    std::vector<T> out(out_cm.size(), T(0));
    detail::add_from_channel_major(out_cm.data(), g.batch, outs, plane, out.data());

    // The column matrix is only needed for the kernel gradient.
    auto saved = std::make_shared<std::vector<T>>();
    const bool kernel_grad = kernel.requires_grad() && grad_enabled();
    if (kernel_grad) *saved = std::move(col);

    return detail::make_result<T>(Shape{g.batch, outs, g.out_h, g.out_w}, std::move(out), {&input, &kernel},
                                  "conv2d", [g, outs, plane, saved, kernel_grad](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        auto grad_cm = detail::to_channel_major(self.grad.data(), g.batch, outs, plane);
        if (pk.requires_grad && kernel_grad)
            detail::gemm_nt(outs, g.patch(), g.columns(), grad_cm.data(), saved->data(), pk.ensure_grad().data());
        if (px.requires_grad) {
            std::vector<T> dcol(g.patch() * g.columns(), T(0));
            detail::gemm_tn(g.patch(), g.columns(), outs, pk.value.data(), grad_cm.data(), dcol.data());
            detail::col2im(g, dcol.data(), px.ensure_grad().data());
        }
    });
}

// input [N,C,H,W], kernel [C,O,kh,kw] -> [N,O,H',W'] with
// H' = (H-1)·stride - 2·padding + kh. Forward equals conv2d's input-gradient
// with the same kernel.
template <std::floating_point T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride,
                           std::size_t padding) {
    if (input.rank() != 4 || kernel.rank() != 4)
        throw ShapeError("conv_transpose2d expects 4-D input and kernel, got " + to_string(input.shape()) +
                         " and " + to_string(kernel.shape()));
    if (input.dim(1) != kernel.dim(0))
        throw ShapeError("conv_transpose2d channel mismatch: input " + to_string(input.shape()) + ", kernel " +
                         to_string(kernel.shape()));
    if (stride == 0) throw ShapeError("convolution stride must be positive");
    const std::size_t in_c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
    if ((h - 1) * stride + kh <= 2 * padding || (w - 1) * stride + kw <= 2 * padding)
        throw ShapeError("conv_transpose2d output extent would be non-positive");
    // Geometry of the equivalent forward convolution whose input-gradient this is.
    ConvGeometry g;
    g.batch = input.dim(0);
    g.channels = kernel.dim(1);
    g.height = (h - 1) * stride - 2 * padding + kh;
    g.width = (w - 1) * stride - 2 * padding + kw;
    g.kernel_h = kh;
    g.kernel_w = kw;
    g.stride = stride;
    g.padding = padding;
    g.out_h = h;
    g.out_w = w;
    const std::size_t plane = h * w;

    auto x_cm = detail::to_channel_major(input.data().data(), g.batch, in_c, plane);
    std::vector<T> col(g.patch() * g.columns(), T(0));
    detail::gemm_tn(g.patch(), g.columns(), in_c, kernel.data().data(), x_cm.data(), col.data());
    std::vector<T> out(g.batch * g.channels * g.height * g.width, T(0));
    detail::col2im(g, col.data(), out.data());

    auto saved = std::make_shared<std::vector<T>>();
    const bool kernel_grad = kernel.requires_grad() && grad_enabled();
    if (kernel_grad) *saved = std::move(x_cm);

    return detail::make_result<T>(Shape{g.batch, g.channels, g.height, g.width}, std::move(out), {&input, &kernel},
                                  "conv_transpose2d", [g, in_c, plane, saved, kernel_grad](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        auto dcol = detail::im2col(g, self.grad.data());
        if (pk.requires_grad && kernel_grad)  // dK[C][O·kk] += X_cm · dcolᵀ
            detail::gemm_nt(in_c, g.patch(), g.columns(), saved->data(), dcol.data(), pk.ensure_grad().data());
        if (px.requires_grad) {
            std::vector<T> dx_cm(in_c * g.columns(), T(0));
            detail::gemm_nn(in_c, g.columns(), g.patch(), pk.value.data(), dcol.data(), dx_cm.data());
            detail::add_from_channel_major(dx_cm.data(), g.batch, in_c, plane, px.ensure_grad().data());
        }
    });
}

}  // namespace wordgan
