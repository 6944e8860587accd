#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wordgan/tensor.hpp"

namespace wordgan {

struct GradCheckResult {
    double max_relative_error = 0;
    double max_absolute_error = 0;
    std::size_t checked = 0;
};

// Relative error |a-n| / max(|a|, |n|, floor); the floor keeps exact zeros
// from dividing by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

// Compares reverse-mode gradients of a scalar loss against central
// differences (f(p+eps) - f(p-eps)) / 2eps for every element of every
// parameter. Parameters are perturbed in place and restored.
template <std::floating_point T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& loss_fn, std::vector<Tensor<T>> params,
                                  double epsilon, double floor = 1e-6) {
    if (!(epsilon > 0)) throw NumericError("finite difference epsilon must be positive");
    for (auto& p : params) p.zero_grad();
    auto loss = loss_fn();
    backward(loss);
    std::vector<std::vector<T>> analytic;
    for (auto& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(p.size(), T(0));
        p.zero_grad();
    }

    GradCheckResult result;
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const T original = values[i];
            values[i] = original + static_cast<T>(epsilon);
            const double up = loss_fn().item();
            values[i] = original - static_cast<T>(epsilon);
            const double down = loss_fn().item();
            values[i] = original;
            const double numeric = (up - down) / (2 * epsilon);
            const double a = analytic[k][i];
            result.max_relative_error = std::max(result.max_relative_error, relative_error(a, numeric, floor));
            result.max_absolute_error = std::max(result.max_absolute_error, std::abs(a - numeric));
            ++result.checked;
        }
    }
    return result;
}

// Single-input form: function of one point.
template <std::floating_point T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& fn, const Tensor<T>& point,
                                  double epsilon, double floor = 1e-6) {
    auto x = point.clone(true);
    return finite_diff_check<T>([&] { return fn(x); }, {x}, epsilon, floor);
}

}  // namespace wordgan
