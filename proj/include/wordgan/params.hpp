#pragma once

#include <random>
#include <string>
#include <vector>

#include "wordgan/tensor.hpp"

namespace wordgan {

// A parameter or buffer handle paired with its checkpoint name. The handle
// shares storage with the owning model.
template <std::floating_point T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

template <std::floating_point T>
using NamedTensors = std::vector<NamedTensor<T>>;

template <std::floating_point T>
Tensor<T> uniform_tensor(Shape shape, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<T> v(element_count(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <std::floating_point T>
Tensor<T> normal_tensor(Shape shape, double mean, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<T> v(element_count(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <std::floating_point T>
void zero_grads(const NamedTensors<T>& params) {
    for (auto p : params) p.tensor.zero_grad();
}

// Deep copy of values, for before/after comparisons.
template <std::floating_point T>
std::vector<std::vector<T>> snapshot(const NamedTensors<T>& params) {
    std::vector<std::vector<T>> out;
    for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

}  // namespace wordgan
