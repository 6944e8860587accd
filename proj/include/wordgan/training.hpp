#pragma once

// Minibatch adversarial training: k discriminator ascent steps followed by
// one joint generator/LSTM descent step per iteration, all with Adam.

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wordgan/dataset.hpp"
#include "wordgan/gan.hpp"
#include "wordgan/lstm.hpp"
#include "wordgan/params.hpp"
#include "wordgan/text.hpp"

namespace wordgan {

// ---------------------------------------------------------------------------
// Adam

enum class Direction { ascend, descend };

struct AdamHyper {
    double lr = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <std::floating_point T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    static AdamState create(const NamedTensors<T>& params, AdamHyper hyper) {
        AdamState s;
        s.hyper = hyper;
        for (const auto& p : params) {
            s.m.push_back(Tensor<T>::zeros(p.tensor.shape()));
            s.v.push_back(Tensor<T>::zeros(p.tensor.shape()));
        }
        return s;
    }
};

// Current gradient buffer of each parameter (empty span when none was recorded).
template <std::floating_point T>
std::vector<std::span<const T>> gradients_of(const NamedTensors<T>& params) {
    std::vector<std::span<const T>> out;
    for (const auto& p : params) out.push_back(p.tensor.grad());
    return out;
}

// One bias-corrected Adam update. An empty gradient span counts as zero.
template <std::floating_point T>
void adam_step(const NamedTensors<T>& params, const std::vector<std::span<const T>>& grads, AdamState<T>& state,
               Direction direction) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    state.step += 1;
    const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const T sign = direction == Direction::ascend ? T(1) : T(-1);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto theta = Tensor<T>(params[k].tensor).mutable_data();
        auto m = state.m[k].mutable_data();
        auto v = state.v[k].mutable_data();
        const auto& g = grads[k];
        if (!g.empty() && g.size() != theta.size())
            throw ShapeError("adam_step: gradient for '" + params[k].name + "' has the wrong size");
        if (m.size() != theta.size()) throw ShapeError("adam_step: state for '" + params[k].name + "' has the wrong size");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const T gi = g.empty() ? T(0) : g[i];
            m[i] = static_cast<T>(b1) * m[i] + static_cast<T>(1 - b1) * gi;
            v[i] = static_cast<T>(b2) * v[i] + static_cast<T>(1 - b2) * gi * gi;
            const T m_hat = m[i] / static_cast<T>(correction1);
            const T v_hat = v[i] / static_cast<T>(correction2);
            theta[i] += sign * static_cast<T>(state.hyper.lr) * m_hat / (std::sqrt(v_hat) + static_cast<T>(state.hyper.epsilon));
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration and models

struct TrainingConfig {
    double learning_rate = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t batch_size = 64;
    std::size_t epochs = 600;
    std::size_t disc_steps = 2;  // k
    std::size_t image_extent = 64;
    std::size_t channels = 3;
    std::size_t z_dim = 128;          // LSTM hidden size Z
    std::size_t embedding_dim = 100;  // E
    std::size_t g_base_channels = 64;
    std::size_t d_base_channels = 64;
    std::size_t condition_channels = 16;
    double lstm_init_scale = 0.08;
    std::uint64_t seed = 1;
    std::size_t checkpoint_interval = 1;  // epochs
    std::size_t max_iterations = 0;       // 0: no cap
    std::size_t threads = 1;              // >1 enables the batch producer thread

    AdamHyper adam() const { return {learning_rate, beta1, beta2, adam_epsilon}; }

    // Problems with every field, empty when valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        auto positive = [&out](double v, const char* name) {
            if (!(v > 0)) out.push_back(std::string(name) + " must be positive");
        };
        positive(learning_rate, "learning_rate");
        positive(adam_epsilon, "adam_epsilon");
        if (!(beta1 >= 0 && beta1 < 1)) out.push_back("beta1 must lie in [0,1)");
        if (!(beta2 >= 0 && beta2 < 1)) out.push_back("beta2 must lie in [0,1)");
        if (batch_size < 2) out.push_back("batch_size must be at least 2 for batch normalization");
        positive(static_cast<double>(epochs), "epochs");
        positive(static_cast<double>(disc_steps), "disc_steps");
        positive(static_cast<double>(channels), "channels");
        positive(static_cast<double>(z_dim), "z_dim");
        positive(static_cast<double>(embedding_dim), "embedding_dim");
        positive(static_cast<double>(g_base_channels), "g_base_channels");
        positive(static_cast<double>(d_base_channels), "d_base_channels");
        positive(static_cast<double>(condition_channels), "condition_channels");
        positive(lstm_init_scale, "lstm_init_scale");
        positive(static_cast<double>(checkpoint_interval), "checkpoint_interval");
        positive(static_cast<double>(threads), "threads");
        try {
            doubling_stages(image_extent);
        } catch (const ConfigError& e) {
            out.push_back(e.what());
        }
        return out;
    }

    void validate() const {
        const auto found = problems();
        if (found.empty()) return;
        std::string msg = found.front();
        for (std::size_t i = 1; i < found.size(); ++i) msg += "; " + found[i];
        throw ConfigError(msg);
    }
};

template <std::floating_point T>
struct Models {
    LstmParams<T> lstm;
    GeneratorParams<T> gen;
    DiscriminatorParams<T> disc;
};

template <std::floating_point T>
Models<T> init_models(const TrainingConfig& cfg, std::size_t condition_dim) {
    Models<T> m;
    m.lstm = init_lstm<T>(cfg.embedding_dim, cfg.z_dim, cfg.seed * 3 + 0, cfg.lstm_init_scale);
    m.gen = init_generator<T>(cfg.z_dim, cfg.image_extent, cfg.channels, cfg.g_base_channels, cfg.seed * 3 + 1);
    m.disc = init_discriminator<T>(cfg.image_extent, cfg.channels, cfg.d_base_channels, condition_dim,
                                   cfg.seed * 3 + 2, cfg.condition_channels);
    return m;
}

template <std::floating_point T>
struct TrainingState {
    Models<T> models;
    AdamState<T> adam_d;
    AdamState<T> adam_g;
    AdamState<T> adam_l;
    std::uint64_t iteration = 0;  // completed iterations

    static TrainingState create(const TrainingConfig& cfg, std::size_t condition_dim) {
        TrainingState s;
        s.models = init_models<T>(cfg, condition_dim);
        s.adam_d = AdamState<T>::create(s.models.disc.parameters(), cfg.adam());
        s.adam_g = AdamState<T>::create(s.models.gen.parameters(), cfg.adam());
        s.adam_l = AdamState<T>::create(s.models.lstm.parameters(), cfg.adam());
        return s;
    }
};

// ---------------------------------------------------------------------------
// Batches

template <std::floating_point T>
struct Batch {
    Tensor<T> real;       // [m,C,E,E]
    Tensor<T> mismatch;   // [m,C,E,E], r*
    Tensor<T> condition;  // [m,T], y of the chosen caption
    std::vector<std::vector<std::string>> tokens;
    std::vector<std::size_t> record;
    std::vector<std::size_t> mismatch_record;
    std::vector<std::size_t> caption;

    std::size_t size() const { return record.size(); }
};

template <std::floating_point T>
Tensor<T> stack_images(const std::vector<CaptionedImage>& dataset, const std::vector<std::size_t>& indices) {
    const Image& first = dataset.at(indices.front()).image;
    const std::size_t stride = first.size();
    std::vector<T> data;
    data.reserve(indices.size() * stride);
    for (auto i : indices) {
        const Image& im = dataset.at(i).image;
        if (im.channels != first.channels || im.height != first.height || im.width != first.width)
            throw ShapeError("dataset images have inconsistent shapes");
        for (float v : im.pixels) data.push_back(static_cast<T>(v));
    }
    return Tensor<T>({indices.size(), first.channels, first.height, first.width}, std::move(data));
}

inline void require_two_classes(const std::vector<CaptionedImage>& dataset) {
    if (dataset.empty()) throw Error("empty dataset");
    for (const auto& r : dataset)
        if (r.class_id != dataset.front().class_id) return;
    throw Error("dataset has a single class-id; mismatched pairs cannot be drawn");
}

// Picks one caption per record uniformly and a mismatched image r* uniformly
// among records of a different class.
template <std::floating_point T>
Batch<T> assemble_batch(const std::vector<CaptionedImage>& dataset, std::vector<std::size_t> indices,
                        std::mt19937_64& rng, const ConditionSource& conditions) {
    require_two_classes(dataset);
    if (indices.empty()) throw Error("empty batch");
    Batch<T> b;
    std::uniform_int_distribution<std::size_t> any(0, dataset.size() - 1);
    std::vector<Vector> ys;
    for (auto i : indices) {
        const auto& rec = dataset.at(i);
        if (rec.captions.empty()) throw Error("record " + rec.id + " has no captions");
        std::uniform_int_distribution<std::size_t> pick(0, rec.captions.size() - 1);
        const std::size_t c = pick(rng);
        auto tokens = tokenize(rec.captions[c]);
        if (tokens.empty()) throw Error("caption of record " + rec.id + " has no words");
        std::size_t other;
        do {
            other = any(rng);
        } while (dataset[other].class_id == rec.class_id);
        ys.push_back(conditions(tokens, caption_id(rec, c)));
        b.tokens.push_back(std::move(tokens));
        b.caption.push_back(c);
        b.mismatch_record.push_back(other);
    }
    b.record = std::move(indices);
    b.real = stack_images<T>(dataset, b.record);
    b.mismatch = stack_images<T>(dataset, b.mismatch_record);
    b.condition = vectors_to_rows<T>(ys);
    return b;
}

template <std::floating_point T>
Batch<T> sample_batch(const std::vector<CaptionedImage>& dataset, std::size_t m, std::mt19937_64& rng,
                      const ConditionSource& conditions) {
    require_two_classes(dataset);
    if (m == 0) throw Error("batch size must be positive");
    std::uniform_int_distribution<std::size_t> any(0, dataset.size() - 1);
    std::vector<std::size_t> indices(m);
    for (auto& i : indices) i = any(rng);
    return assemble_batch<T>(dataset, std::move(indices), rng, conditions);
}

// ---------------------------------------------------------------------------
// Updates

// Per-word hidden states of a batch, gathered into word-major rows that
// line up with WordLayout entries.
template <std::floating_point T>
struct WordFeatures {
    WordLayout layout;
    Tensor<T> hidden;     // [K,Z]
    Tensor<T> condition;  // [K,T]
};

template <std::floating_point T>
WordFeatures<T> encode_words(const LstmParams<T>& lstm, const WordEmbeddingTable& table, const Batch<T>& batch) {
    std::vector<std::size_t> lengths;
    for (const auto& t : batch.tokens) lengths.push_back(t.size());
    WordFeatures<T> out;
    out.layout = WordLayout::from_lengths(lengths);
    const std::size_t m = batch.size(), steps = out.layout.longest(), e = table.dimension();
    if (e != lstm.embedding_dim)
        throw ShapeError("embedding table dimension " + std::to_string(e) + " does not match LSTM input " +
                         std::to_string(lstm.embedding_dim));
    std::vector<Tensor<T>> inputs;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<T> x(m * e, T(0));
        for (std::size_t i = 0; i < m; ++i)
            if (t < lengths[i]) {
                auto v = table.lookup(batch.tokens[i][t]);
                for (std::size_t j = 0; j < e; ++j) x[i * e + j] = static_cast<T>(v[j]);
            }
        inputs.emplace_back(Shape{m, e}, std::move(x));
    }
    auto hs = concat(lstm_unroll(lstm, inputs), 0);  // row t·m + i
    if (out.layout.entries() == steps * m) {
        out.hidden = hs;
        out.condition = concat(std::vector<Tensor<T>>(steps, batch.condition), 0);
    } else {
        std::vector<std::size_t> rows;
        for (std::size_t k = 0; k < out.layout.entries(); ++k) rows.push_back(out.layout.word[k] * m + out.layout.owner[k]);
        out.hidden = select_rows(hs, rows);
        out.condition = select_rows(batch.condition, out.layout.owner);
    }
    return out;
}

// Scopes tracking of a parameter set off for one forward/backward pass.
template <std::floating_point T>
class FrozenParams {
public:
    explicit FrozenParams(NamedTensors<T> params) : params_(std::move(params)) {
        for (auto& p : params_) p.tensor.set_requires_grad(false);
    }
    ~FrozenParams() {
        for (auto& p : params_) p.tensor.set_requires_grad(true);
    }
    FrozenParams(const FrozenParams&) = delete;
    FrozenParams& operator=(const FrozenParams&) = delete;

private:
    NamedTensors<T> params_;
};

// Fake images for every (word, sentence) entry from the current LSTM and
// generator, as constants; generator running statistics stay untouched.
template <std::floating_point T>
Tensor<T> generate_fakes(Models<T>& models, const WordEmbeddingTable& table, const Batch<T>& batch,
                         WordFeatures<T>& words) {
    NoGradGuard no_grad;
    words = encode_words(models.lstm, table, batch);
    return generator_forward(models.gen, words.hidden, ForwardMode::frozen_stats());
}

// Evaluates the discriminator objective on a batch. With `training` the
// discriminator runs in train mode and records a graph.
template <std::floating_point T>
Tensor<T> evaluate_discriminator_objective(Models<T>& models, const WordEmbeddingTable& table, const Batch<T>& batch,
                                           ForwardMode mode) {
    WordFeatures<T> words;
    auto fakes = generate_fakes(models, table, batch, words);
    auto d_real = discriminator_forward(models.disc, batch.real, batch.condition, mode);
    auto d_fake = discriminator_forward(models.disc, fakes, words.condition, mode);
    auto d_mismatch = discriminator_forward(models.disc, batch.mismatch, batch.condition, mode);
    return discriminator_objective(d_real, d_fake, words.layout, d_mismatch);
}

// One ascent step on θ_d; θ_l and θ_g (including generator running stats)
// are not modified. Returns the objective before the step.
template <std::floating_point T>
double discriminator_update(Models<T>& models, const WordEmbeddingTable& table, const Batch<T>& batch,
                            AdamState<T>& adam_d) {
    auto params = models.disc.parameters();
    zero_grads(params);
    auto objective = evaluate_discriminator_objective(models, table, batch, ForwardMode::training());
    backward(objective);
    adam_step(params, gradients_of(params), adam_d, Direction::ascend);
    zero_grads(params);
    return objective.item();
}

template <std::floating_point T>
Tensor<T> evaluate_generator_objective(Models<T>& models, const WordEmbeddingTable& table, const Batch<T>& batch,
                                       ForwardMode gen_mode) {
    auto words = encode_words(models.lstm, table, batch);
    auto fakes = generator_forward(models.gen, words.hidden, gen_mode);
    auto d_fake = discriminator_forward(models.disc, fakes, words.condition, ForwardMode::frozen_stats());
    return generator_objective(d_fake, words.layout);
}

// One descent step each on θ_g and θ_l; θ_d is not modified. Returns the
// objective before the step.
template <std::floating_point T>
double generator_lstm_update(Models<T>& models, const WordEmbeddingTable& table, const Batch<T>& batch,
                             AdamState<T>& adam_g, AdamState<T>& adam_l) {
    auto gen_params = models.gen.parameters();
    auto lstm_params = models.lstm.parameters();
    zero_grads(gen_params);
    zero_grads(lstm_params);
    FrozenParams<T> frozen(models.disc.parameters());
    auto objective = evaluate_generator_objective(models, table, batch, ForwardMode::training());
    backward(objective);
    adam_step(gen_params, gradients_of(gen_params), adam_g, Direction::descend);
    adam_step(lstm_params, gradients_of(lstm_params), adam_l, Direction::descend);
    zero_grads(gen_params);
    zero_grads(lstm_params);
    return objective.item();
}

// ---------------------------------------------------------------------------
// Training loop

struct LossRecord {
    std::uint64_t iteration = 0;  // 1-based
    std::uint64_t epoch = 0;      // 1-based
    std::vector<double> d_objectives;
    double g_objective = 0;
    double seconds = 0;
};

inline std::string loss_log_header() { return "iter,epoch,d_obj,g_obj,seconds"; }

// d_obj reports the last discriminator step of the iteration.
inline std::string loss_log_row(const LossRecord& r) {
    std::ostringstream os;
    os.precision(10);
    os << r.iteration << ',' << r.epoch << ',' << (r.d_objectives.empty() ? 0.0 : r.d_objectives.back()) << ','
       << r.g_objective << ',' << r.seconds;
    return os.str();
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream * 0xBF58476D1CE4E5B9ull + index * 0x94D049BB133111EBull;
    z ^= z >> 31;
    z *= 0xD6E8FEB86CA3A5B5ull;
    return z ^ (z >> 29);
}

inline std::size_t iterations_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
    return (dataset_size + batch_size - 1) / batch_size;
}

// Record indices of one iteration: a slice of the epoch's shuffled order.
// A trailing slice of one record borrows the epoch's first record so batch
// statistics stay defined.
inline std::vector<std::size_t> epoch_slice(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                            std::uint64_t epoch, std::size_t position) {
    std::vector<std::size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, 1, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t begin = position * batch_size;
    const std::size_t end = std::min(dataset_size, begin + batch_size);
    std::vector<std::size_t> slice(order.begin() + begin, order.begin() + end);
    if (slice.size() == 1 && dataset_size > 1) slice.push_back(order[0] == slice[0] ? order[1] : order[0]);
    return slice;
}

template <std::floating_point T>
Batch<T> batch_for_iteration(const std::vector<CaptionedImage>& dataset, const TrainingConfig& cfg,
                             std::uint64_t iteration, const ConditionSource& conditions) {
    const std::size_t per_epoch = iterations_per_epoch(dataset.size(), cfg.batch_size);
    auto indices = epoch_slice(dataset.size(), cfg.batch_size, cfg.seed, iteration / per_epoch, iteration % per_epoch);
    std::mt19937_64 rng(mix_seed(cfg.seed, 2, iteration));
    return assemble_batch<T>(dataset, std::move(indices), rng, conditions);
}

namespace detail {

// Bounded single-producer queue of batches for iterations [first, last).
template <std::floating_point T>
class BatchProducer {
public:
    BatchProducer(const std::vector<CaptionedImage>& dataset, const TrainingConfig& cfg,
                  const ConditionSource& conditions, std::uint64_t first, std::uint64_t last, std::size_t capacity = 2)
        : capacity_(capacity) {
        worker_ = std::jthread([this, &dataset, &cfg, conditions, first, last](std::stop_token stop) {
            for (std::uint64_t it = first; it < last && !stop.stop_requested(); ++it) {
                Item item;
                try {
                    item.batch = batch_for_iteration<T>(dataset, cfg, it, conditions);
                } catch (...) {
                    item.error = std::current_exception();
                }
                std::unique_lock lock(mutex_);
                space_.wait(lock, stop, [this] { return queue_.size() < capacity_; });
                if (stop.stop_requested()) return;
                queue_.push_back(std::move(item));
                ready_.notify_one();
            }
        });
    }

    Batch<T> next() {
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [this] { return !queue_.empty(); });
        Item item = std::move(queue_.front());
        queue_.pop_front();
        space_.notify_one();
        if (item.error) std::rethrow_exception(item.error);
        return std::move(item.batch);
    }

private:
    struct Item {
        Batch<T> batch;
        std::exception_ptr error;
    };
    std::size_t capacity_;
    std::mutex mutex_;
    std::condition_variable_any space_;
    std::condition_variable ready_;
    std::deque<Item> queue_;
    std::jthread worker_;
};

}  // namespace detail

struct TrainCallbacks {
    std::function<void(const LossRecord&)> on_iteration;
    // Called with the number of completed epochs at each checkpoint boundary
    // and when training stops.
    std::function<void(std::uint64_t epochs_done, bool final)> on_checkpoint;
    std::function<void(std::uint64_t epoch, const LossRecord&)> on_epoch;
};

// Runs iterations state.iteration … until `epochs` epochs (or the iteration
// cap) are complete. Returns the loss records of this call.
template <std::floating_point T>
std::vector<LossRecord> train(TrainingState<T>& state, const std::vector<CaptionedImage>& dataset,
                              const TrainingConfig& cfg, const WordEmbeddingTable& table,
                              const ConditionSource& conditions, const TrainCallbacks& callbacks = {}) {
    cfg.validate();
    require_two_classes(dataset);
    const std::size_t per_epoch = iterations_per_epoch(dataset.size(), cfg.batch_size);
    std::uint64_t total = static_cast<std::uint64_t>(per_epoch) * cfg.epochs;
    if (cfg.max_iterations > 0) total = std::min<std::uint64_t>(total, cfg.max_iterations);

    std::optional<detail::BatchProducer<T>> producer;
    if (cfg.threads > 1 && state.iteration < total)
        producer.emplace(dataset, cfg, conditions, state.iteration, total);

    std::vector<LossRecord> log;
    const auto start = std::chrono::steady_clock::now();
    while (state.iteration < total) {
        const std::uint64_t it = state.iteration;
        Batch<T> batch = producer ? producer->next() : batch_for_iteration<T>(dataset, cfg, it, conditions);
        LossRecord rec;
        rec.iteration = it + 1;
        rec.epoch = it / per_epoch + 1;
        for (std::size_t s = 0; s < cfg.disc_steps; ++s)
            rec.d_objectives.push_back(discriminator_update(state.models, table, batch, state.adam_d));
        rec.g_objective = generator_lstm_update(state.models, table, batch, state.adam_g, state.adam_l);
        for (double v : rec.d_objectives)
            if (!std::isfinite(v)) throw NumericError("non-finite discriminator objective at iteration " + std::to_string(rec.iteration));
        if (!std::isfinite(rec.g_objective))
            throw NumericError("non-finite generator objective at iteration " + std::to_string(rec.iteration));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        state.iteration = it + 1;
        log.push_back(rec);
        if (callbacks.on_iteration) callbacks.on_iteration(rec);

        const bool epoch_end = state.iteration % per_epoch == 0;
        const std::uint64_t epochs_done = state.iteration / per_epoch;
        if (epoch_end && callbacks.on_epoch) callbacks.on_epoch(epochs_done, rec);
        const bool last = state.iteration == total;
        if (callbacks.on_checkpoint && (last || (epoch_end && epochs_done % cfg.checkpoint_interval == 0)))
            callbacks.on_checkpoint(epochs_done, last);
    }
    return log;
}

}  // namespace wordgan
