#pragma once

// Non-peephole LSTM cell:
//   i = σ(W_xi x + W_hi h + b_i)    f = σ(W_xf x + W_hf h + b_f)
//   g = tanh(W_xc x + W_hc h + b_c) o = σ(W_xo x + W_ho h + b_o)
//   c' = f⊙c + i⊙g                  h' = o⊙tanh(c')

#include <array>
#include <random>
#include <string>
#include <vector>

#include "wordgan/params.hpp"
#include "wordgan/tensor.hpp"

namespace wordgan {

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, cell = 3 };

inline constexpr std::array<const char*, 4> gate_names{"i", "f", "o", "c"};

template <std::floating_point T>
struct GateWeights {
    Tensor<T> w_x;  // [Z,E]
    Tensor<T> w_h;  // [Z,Z]
    Tensor<T> bias; // [Z]
};

template <std::floating_point T>
struct LstmParams {
    std::size_t embedding_dim = 0;
    std::size_t hidden_dim = 0;
    std::array<GateWeights<T>, 4> gates;

    GateWeights<T>& gate(Gate g) { return gates[static_cast<std::size_t>(g)]; }
    const GateWeights<T>& gate(Gate g) const { return gates[static_cast<std::size_t>(g)]; }

    NamedTensors<T> parameters() const {
        NamedTensors<T> out;
        for (std::size_t k = 0; k < 4; ++k) {
            const std::string p = std::string("lstm.") + gate_names[k];
            out.push_back({p + ".w_x", gates[k].w_x});
            out.push_back({p + ".w_h", gates[k].w_h});
            out.push_back({p + ".bias", gates[k].bias});
        }
        return out;
    }
};

template <std::floating_point T>
struct LstmState {
    Tensor<T> h;  // [N,Z]
    Tensor<T> c;  // [N,Z]

    static LstmState zeros(std::size_t batch, std::size_t hidden) {
        return {Tensor<T>::zeros({batch, hidden}), Tensor<T>::zeros({batch, hidden})};
    }
};

// Weights uniform in [-init_scale, init_scale]; biases zero except the
// forget gate, which starts at 1.
template <std::floating_point T>
LstmParams<T> init_lstm(std::size_t embedding_dim, std::size_t hidden_dim, std::uint64_t seed, double init_scale) {
    if (embedding_dim == 0 || hidden_dim == 0) throw ConfigError("LSTM dimensions must be positive");
    if (!(init_scale > 0)) throw ConfigError("LSTM init_scale must be positive");
    std::mt19937_64 rng(seed);
    LstmParams<T> p;
    p.embedding_dim = embedding_dim;
    p.hidden_dim = hidden_dim;
    for (std::size_t k = 0; k < 4; ++k) {
        auto& g = p.gates[k];
        g.w_x = uniform_tensor<T>({hidden_dim, embedding_dim}, init_scale, rng);
        g.w_h = uniform_tensor<T>({hidden_dim, hidden_dim}, init_scale, rng);
        g.bias = Tensor<T>::full({hidden_dim}, k == static_cast<std::size_t>(Gate::forget) ? T(1) : T(0), true);
    }
    return p;
}

// One step for a batch x_t [N,E]. The returned state's h is h_t.
template <std::floating_point T>
LstmState<T> lstm_step(const LstmParams<T>& p, const Tensor<T>& x_t, const LstmState<T>& state) {
    if (x_t.rank() != 2 || x_t.dim(1) != p.embedding_dim)
        throw ShapeError("lstm_step input " + to_string(x_t.shape()) + " does not match embedding dimension " +
                         std::to_string(p.embedding_dim));
    const Shape hs{x_t.dim(0), p.hidden_dim};
    if (state.h.shape() != hs || state.c.shape() != hs)
        throw ShapeError("lstm_step state shape does not match " + to_string(hs));
    auto pre = [&](Gate g) {
        const auto& w = p.gate(g);
        return linear(x_t, w.w_x) + linear(state.h, w.w_h) + w.bias;
    };
    auto i = sigmoid(pre(Gate::input));
    auto f = sigmoid(pre(Gate::forget));
    auto o = sigmoid(pre(Gate::output));
    auto g = tanh(pre(Gate::cell));
    auto c = f * state.c + i * g;
    auto h = o * tanh(c);
    return {h, c};
}

// Runs the cell over [x(1)…x(n)] from a zero state; returns [h_1…h_n].
template <std::floating_point T>
std::vector<Tensor<T>> lstm_unroll(const LstmParams<T>& p, const std::vector<Tensor<T>>& inputs) {
    if (inputs.empty()) throw Error("lstm_unroll needs at least one input step");
    auto state = LstmState<T>::zeros(inputs.front().dim(0), p.hidden_dim);
    std::vector<Tensor<T>> hs;
    hs.reserve(inputs.size());
    for (const auto& x : inputs) {
        state = lstm_step(p, x, state);
        hs.push_back(state.h);
    }
    return hs;
}

}  // namespace wordgan
