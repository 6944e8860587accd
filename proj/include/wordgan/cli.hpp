#pragma once

// Command-line driver:
//   wordgan dataset|train|generate|eval|inspect [--config PATH] [--seed N] [--resume] [key=value …]
// Exit codes: 0 ok, 1 other failure, 2 config/validation, 3 I/O, 4 numeric.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "wordgan/checkpoint.hpp"
#include "wordgan/config.hpp"
#include "wordgan/dataset.hpp"
#include "wordgan/evaluation.hpp"
#include "wordgan/gan.hpp"
#include "wordgan/image.hpp"
#include "wordgan/text.hpp"
#include "wordgan/training.hpp"

namespace wordgan {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3, kExitNumeric = 4 };

namespace fs = std::filesystem;

inline std::string checkpoint_file_name(std::uint64_t iteration) {
    std::ostringstream os;
    os << "ckpt_" << std::setw(8) << std::setfill('0') << iteration << ".lcg";
    return os.str();
}

// Highest-iteration checkpoint in a directory.
inline std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
    if (!fs::is_directory(dir)) return std::nullopt;
    static const std::regex pattern(R"(ckpt_(\d+)\.lcg)");
    std::optional<fs::path> best;
    std::uint64_t best_iter = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (!std::regex_match(name, m, pattern)) continue;
        const std::uint64_t it = std::stoull(m[1].str());
        if (!best || it > best_iter) {
            best = entry.path();
            best_iter = it;
        }
    }
    return best;
}

inline fs::path resolve_checkpoint(const RunConfig& cfg) {
    if (!cfg.checkpoint.empty()) return cfg.checkpoint;
    if (auto latest = latest_checkpoint(cfg.checkpoints)) return *latest;
    throw IoError("no checkpoint found in " + cfg.checkpoints);
}

inline WordEmbeddingTable make_embedding_table(const RunConfig& cfg) {
    if (cfg.embeddings.empty()) return WordEmbeddingTable(cfg.training.embedding_dim, cfg.oov_seed);
    auto table = load_word_vectors(fs::path(cfg.embeddings), cfg.oov_seed);
    if (table.dimension() != cfg.training.embedding_dim)
        throw ConfigError("embedding file dimension " + std::to_string(table.dimension()) +
                          " does not match embedding_dim " + std::to_string(cfg.training.embedding_dim));
    return table;
}

inline std::optional<ConditionFile> make_condition_file(const RunConfig& cfg) {
    if (cfg.condition_file.empty()) return std::nullopt;
    return ConditionFile::load(fs::path(cfg.condition_file));
}

// Configuration stored in a checkpoint, on top of defaults.
inline RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
    RunConfig cfg;
    for (const auto& [k, v] : ckpt.config) set_config_value(cfg, k, v);
    cfg.precision = ckpt.precision;
    return cfg;
}

inline std::size_t checkpoint_condition_dim(const Checkpoint& ckpt) {
    const auto& t = ckpt.tensor("disc.condition_projection");
    if (t.shape.size() != 2) throw FormatError("manifest entry 'disc.condition_projection' is not a matrix");
    return t.shape[1];
}

template <std::floating_point T>
TrainingState<T> state_from_checkpoint(const Checkpoint& ckpt, const RunConfig& model_cfg) {
    auto state = TrainingState<T>::create(model_cfg.training, checkpoint_condition_dim(ckpt));
    restore_checkpoint(ckpt, state);
    return state;
}

// ---------------------------------------------------------------------------
// dataset

inline int cmd_dataset(const RunConfig& cfg, std::ostream& out) {
    const auto records = generate_synthetic_dataset(cfg.synthetic());
    write_dataset_dir(cfg.dataset, records, cfg.training.seed);
    out << "wrote " << records.size() << " records to " << cfg.dataset << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

template <std::floating_point T>
int train_with(const RunConfig& cfg, bool resume, std::ostream& out) {
    const auto dataset = load_image_caption_dir(cfg.dataset, cfg.training.image_extent);
    if (dataset.empty()) throw IoError("dataset " + cfg.dataset + " has no records");
    require_two_classes(dataset);
    const auto table = make_embedding_table(cfg);
    const auto cond_file = make_condition_file(cfg);
    const ConditionSource conditions{&table, cond_file ? &*cond_file : nullptr};

    auto state = TrainingState<T>::create(cfg.training, conditions.dimension());
    const fs::path log_path = fs::path(cfg.output) / "loss.csv";
    std::vector<std::string> log_rows;
    if (resume) {
        if (auto latest = latest_checkpoint(cfg.checkpoints)) {
            restore_checkpoint(load_checkpoint(*latest), state);
            if (std::ifstream in(log_path); in) {
                std::string line;
                std::getline(in, line);
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    if (std::stoull(line.substr(0, line.find(','))) > state.iteration) break;
                    log_rows.push_back(line);
                }
            }
            out << "resumed from " << latest->string() << " at iteration " << state.iteration << "\n";
        } else {
            out << "no checkpoint in " << cfg.checkpoints << ", starting fresh\n";
        }
    }

    std::error_code ec;
    fs::create_directories(cfg.checkpoints, ec);
    if (!ec) fs::create_directories(cfg.output, ec);
    if (ec) throw IoError("cannot create output directories: " + ec.message());

    const auto echo = config_echo(cfg);
    auto flush_log = [&] {
        std::string text = loss_log_header() + "\n";
        for (const auto& r : log_rows) text += r + "\n";
        write_file_atomic(log_path, text);
    };
    TrainCallbacks callbacks;
    callbacks.on_iteration = [&](const LossRecord& r) { log_rows.push_back(loss_log_row(r)); };
    callbacks.on_epoch = [&](std::uint64_t epoch, const LossRecord& r) {
        out << "epoch " << epoch << " iter " << r.iteration << " d_obj " << r.d_objectives.back() << " g_obj "
            << r.g_objective << " (" << std::fixed << std::setprecision(1) << r.seconds << "s)"
            << std::defaultfloat << std::setprecision(6) << std::endl;
    };
    callbacks.on_checkpoint = [&](std::uint64_t, bool) {
        save_checkpoint(fs::path(cfg.checkpoints) / checkpoint_file_name(state.iteration),
                        capture_checkpoint(state, echo));
        flush_log();
    };
    train(state, dataset, cfg.training, table, conditions, callbacks);
    out << "finished at iteration " << state.iteration << "\n";
    return kExitOk;
}

inline int cmd_train(const RunConfig& cfg, bool resume, std::ostream& out) {
    return cfg.precision == "f32" ? train_with<float>(cfg, resume, out) : train_with<double>(cfg, resume, out);
}

// ---------------------------------------------------------------------------
// generate

template <std::floating_point T>
int generate_with(const Checkpoint& ckpt, const RunConfig& cfg, std::ostream& out) {
    const auto model_cfg = config_from_checkpoint(ckpt);
    auto state = state_from_checkpoint<T>(ckpt, model_cfg);
    const auto tokens = tokenize(cfg.text);
    if (tokens.empty()) throw ConfigError("text is empty; pass text=\"a sentence\"");
    const auto table = make_embedding_table(model_cfg);
    auto batch = generate_sequence_tensor(state.models.lstm, state.models.gen, table, tokens);

    const fs::path dir = cfg.output;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<Image> images;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        images.push_back(tensor_to_image(batch, t));
        write_png(dir / ("word_" + std::to_string(t + 1) + "_" + tokens[t] + ".png"), images.back());
    }
    write_png(dir / "strip.png", hstack(images));
    write_file_atomic(dir / "strip.txt", cfg.text + "\n");
    out << "wrote " << images.size() << " images and strip.png to " << dir.string() << "\n";
    return kExitOk;
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    if (tokenize(cfg.text).empty()) throw ConfigError("text is empty; pass text=\"a sentence\"");
    const auto ckpt = load_checkpoint(resolve_checkpoint(cfg));
    return ckpt.precision == "f32" ? generate_with<float>(ckpt, cfg, out) : generate_with<double>(ckpt, cfg, out);
}

// ---------------------------------------------------------------------------
// eval

template <std::floating_point T>
int eval_with(const Checkpoint& ckpt, const RunConfig& cfg, std::ostream& out) {
    const auto model_cfg = config_from_checkpoint(ckpt);
    auto state = state_from_checkpoint<T>(ckpt, model_cfg);
    const auto table = make_embedding_table(model_cfg);
    const auto dataset = load_image_caption_dir(cfg.dataset, model_cfg.training.image_extent);
    if (dataset.empty()) throw Error("cannot evaluate on an empty dataset");
    const auto extractor = cfg.extractor == "random"
                               ? FeatureExtractor<T>::random(model_cfg.training.image_extent, model_cfg.training.channels,
                                                             model_cfg.training.d_base_channels, cfg.training.seed)
                               : FeatureExtractor<T>(state.models.disc);
    const auto report = per_word_report(state.models.lstm, state.models.gen, table, extractor, dataset,
                                        cfg.n_sentences, cfg.training.seed);
    const fs::path path = cfg.report;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, report.to_csv());
    out << "mean ssim by word:";
    for (const auto& a : report.aggregates) out << " " << a.word_index << ":" << a.ssim;
    out << "\n";
    return kExitOk;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const auto ckpt = load_checkpoint(resolve_checkpoint(cfg));
    return ckpt.precision == "f32" ? eval_with<float>(ckpt, cfg, out) : eval_with<double>(ckpt, cfg, out);
}

// ---------------------------------------------------------------------------
// inspect

inline int cmd_inspect(const RunConfig& cfg, std::ostream& out) {
    const fs::path path = resolve_checkpoint(cfg);
    const auto ckpt = load_checkpoint(path);
    out << path.string() << "\nprecision " << ckpt.precision << "\n";
    for (const auto& [k, v] : ckpt.counters) out << "counter " << k << " " << v << "\n";
    for (const auto& [k, v] : ckpt.config) out << "config " << k << " = " << v << "\n";
    std::size_t elements = 0;
    for (const auto& t : ckpt.tensors) {
        out << "tensor " << t.name << " " << to_string(t.shape) << "\n";
        elements += element_count(t.shape);
    }
    out << ckpt.tensors.size() << " tensors, " << elements << " elements\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

inline void apply_thread_cap(RunConfig& cfg) {
    const char* env = std::getenv("WORDGAN_THREADS");
    if (!env || !*env) return;
    const auto cap = detail::parse_number<std::size_t>("WORDGAN_THREADS", env);
    if (cap == 0) throw ConfigError("WORDGAN_THREADS must be positive");
    cfg.training.threads = std::min(cfg.training.threads, cap);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Word-by-word text-to-image GAN"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool resume = false;
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("overrides", overrides, "key=value overrides");
    };
    auto* dataset = app.add_subcommand("dataset", "render the synthetic shapes dataset");
    auto* train_cmd = app.add_subcommand("train", "train LSTM, generator and discriminator");
    auto* generate = app.add_subcommand("generate", "write one image per word of `text`");
    auto* eval = app.add_subcommand("eval", "per-word similarity report");
    auto* inspect = app.add_subcommand("inspect", "print a checkpoint manifest");
    for (auto* sub : {dataset, train_cmd, generate, eval, inspect}) add_common(sub);
    train_cmd->add_flag("--resume", resume, "continue from the latest checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (const auto& o : overrides) {
            auto [key, value] = split_assignment(o, "command line");
            set_config_value(cfg, key, value);
        }
        if (seed) cfg.training.seed = *seed;
        apply_thread_cap(cfg);
        cfg.validate();

        if (dataset->parsed()) return cmd_dataset(cfg, out);
        if (train_cmd->parsed()) return cmd_train(cfg, resume, out);
        if (generate->parsed()) return cmd_generate(cfg, out);
        if (eval->parsed()) return cmd_eval(cfg, out);
        return cmd_inspect(cfg, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace wordgan
