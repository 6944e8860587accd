#pragma once

// Run configuration: `key = value` lines, '#' comments, command-line
// overrides on top. Every key maps onto one field; unknown keys are errors.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wordgan/dataset.hpp"
#include "wordgan/error.hpp"
#include "wordgan/training.hpp"

namespace wordgan {

struct RunConfig {
    TrainingConfig training;
    std::string precision = "f64";
    // paths
    std::string dataset = "data";
    std::string embeddings;  // empty: seeded vectors for every word
    std::string condition_file;
    std::string checkpoints = "checkpoints";
    std::string output = "out";
    std::string checkpoint;  // generate/eval input; empty: latest in `checkpoints`
    // text
    std::uint64_t oov_seed = 0;
    std::string text;
    // evaluation
    std::size_t n_sentences = 20;
    std::string report = "report.csv";
    std::string extractor = "discriminator";  // or "random"
    // synthetic dataset
    std::vector<std::string> shapes{"circle", "square", "triangle"};
    std::vector<std::string> colors{"red", "green", "blue", "yellow"};
    std::vector<std::string> sizes{"small", "large"};
    std::size_t samples_per_combination = 5;

    SyntheticDatasetConfig synthetic() const {
        SyntheticDatasetConfig c;
        c.shapes.clear();
        for (const auto& s : shapes) c.shapes.push_back(parse_shape(s));
        c.colors.clear();
        for (const auto& s : colors) c.colors.push_back(palette_color(s));
        c.sizes = sizes;
        c.image_extent = training.image_extent;
        c.samples_per_combination = samples_per_combination;
        c.seed = training.seed;
        return c;
    }

    // Reports every invalid field at once.
    void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class U>
U parse_number(const std::string& key, const std::string& text) {
    U value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if constexpr (std::is_floating_point_v<U>) {
        try {
            std::size_t used = 0;
            value = static_cast<U>(std::stod(text, &used));
            if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
        }
    } else {
        if (!text.empty() && text.front() == '-') throw ConfigError("config key '" + key + "' must not be negative");
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last)
            throw ConfigError("config key '" + key + "': '" + text + "' is not a non-negative integer");
    }
    return value;
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join_list(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct ConfigField {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class U>
ConfigField number_field(const std::string& key, U RunConfig::*member) {
    return {[key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<U>(key, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<U>) return format_double(c.*member);
                else return std::to_string(c.*member);
            }};
}

template <class U>
ConfigField training_field(const std::string& key, U TrainingConfig::*member) {
    return {[key, member](RunConfig& c, const std::string& v) { c.training.*member = parse_number<U>(key, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<U>) return format_double(c.training.*member);
                else return std::to_string(c.training.*member);
            }};
}

inline ConfigField string_field(std::string RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& v) { c.*member = v; },
            [member](const RunConfig& c) { return c.*member; }};
}

inline ConfigField list_field(std::vector<std::string> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& v) { c.*member = split_list(v); },
            [member](const RunConfig& c) { return join_list(c.*member); }};
}

}  // namespace detail

// Ordered key registry.
inline const std::vector<std::pair<std::string, detail::ConfigField>>& config_fields() {
    using namespace detail;
    static const std::vector<std::pair<std::string, ConfigField>> fields{
        {"learning_rate", training_field("learning_rate", &TrainingConfig::learning_rate)},
        {"beta1", training_field("beta1", &TrainingConfig::beta1)},
        {"beta2", training_field("beta2", &TrainingConfig::beta2)},
        {"adam_epsilon", training_field("adam_epsilon", &TrainingConfig::adam_epsilon)},
        {"batch_size", training_field("batch_size", &TrainingConfig::batch_size)},
        {"epochs", training_field("epochs", &TrainingConfig::epochs)},
        {"disc_steps", training_field("disc_steps", &TrainingConfig::disc_steps)},
        {"image_extent", training_field("image_extent", &TrainingConfig::image_extent)},
        {"channels", training_field("channels", &TrainingConfig::channels)},
        {"z_dim", training_field("z_dim", &TrainingConfig::z_dim)},
        {"embedding_dim", training_field("embedding_dim", &TrainingConfig::embedding_dim)},
        {"g_base_channels", training_field("g_base_channels", &TrainingConfig::g_base_channels)},
        {"d_base_channels", training_field("d_base_channels", &TrainingConfig::d_base_channels)},
        {"condition_channels", training_field("condition_channels", &TrainingConfig::condition_channels)},
        {"lstm_init_scale", training_field("lstm_init_scale", &TrainingConfig::lstm_init_scale)},
        {"seed", training_field("seed", &TrainingConfig::seed)},
        {"checkpoint_interval", training_field("checkpoint_interval", &TrainingConfig::checkpoint_interval)},
        {"max_iterations", training_field("max_iterations", &TrainingConfig::max_iterations)},
        {"threads", training_field("threads", &TrainingConfig::threads)},
        {"precision", string_field(&RunConfig::precision)},
        {"dataset", string_field(&RunConfig::dataset)},
        {"embeddings", string_field(&RunConfig::embeddings)},
        {"condition_file", string_field(&RunConfig::condition_file)},
        {"checkpoints", string_field(&RunConfig::checkpoints)},
        {"output", string_field(&RunConfig::output)},
        {"checkpoint", string_field(&RunConfig::checkpoint)},
        {"oov_seed", number_field("oov_seed", &RunConfig::oov_seed)},
        {"text", string_field(&RunConfig::text)},
        {"n_sentences", number_field("n_sentences", &RunConfig::n_sentences)},
        {"report", string_field(&RunConfig::report)},
        {"extractor", string_field(&RunConfig::extractor)},
        {"shapes", list_field(&RunConfig::shapes)},
        {"colors", list_field(&RunConfig::colors)},
        {"sizes", list_field(&RunConfig::sizes)},
        {"samples_per_combination", number_field("samples_per_combination", &RunConfig::samples_per_combination)},
    };
    return fields;
}

inline const detail::ConfigField& config_field(const std::string& key) {
    for (const auto& [k, f] : config_fields())
        if (k == key) return f;
    throw ConfigError("unknown config key '" + key + "'");
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    config_field(key).set(cfg, value);
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
    return config_field(key).get(cfg);
}

// All keys with their current values, registry order.
inline std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, f] : config_fields()) out.emplace_back(k, f.get(cfg));
    return out;
}

// "key = value" or "key=value".
inline std::pair<std::string, std::string> split_assignment(const std::string& text, const std::string& where) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + text + "'");
    auto key = detail::trim(std::string_view(text).substr(0, eq));
    auto value = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    return {key, value};
}

inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        auto [key, value] = split_assignment(line, where);
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    apply_config_text(cfg, in, path.string());
}

inline void RunConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&problems](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    };
    for (auto& p : training.problems()) problems.push_back(std::move(p));
    check([&] {
        if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
    });
    check([&] {
        if (training.channels != 3) throw ConfigError("channels must be 3 (images are decoded as RGB)");
    });
    check([&] {
        if (extractor != "discriminator" && extractor != "random")
            throw ConfigError("extractor must be 'discriminator' or 'random'");
    });
    check([&] {
        if (n_sentences == 0) throw ConfigError("n_sentences must be positive");
    });
    check([&] { synthetic().validate(); });
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

}  // namespace wordgan
