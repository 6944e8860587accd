#pragma once

// Checkpoint file layout:
//
//   bytes 0..7   magic "LCGAN001"
//   bytes 8..15  manifest length L, unsigned 64-bit little-endian
//   L bytes      manifest text, one record per line:
//                  precision f32|f64
//                  counter <name> <value>
//                  config <key> <value…>
//                  tensor <name> <f32|f64> <rank> <d0> … <payload offset> <payload bytes>
//                  end
//   payload      raw little-endian elements of every tensor, manifest order
//
// Save-then-load reproduces every element bit for bit.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wordgan/error.hpp"
#include "wordgan/image.hpp"
#include "wordgan/params.hpp"
#include "wordgan/training.hpp"

namespace wordgan {

inline constexpr char kCheckpointMagic[] = "LCGAN001";

template <std::floating_point T>
constexpr const char* precision_tag() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

struct CheckpointTensor {
    std::string name;
    std::string precision;
    Shape shape;
    std::vector<std::uint8_t> bytes;  // little-endian elements
};

struct Checkpoint {
    std::string precision = "f64";
    std::map<std::string, std::uint64_t> counters;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<CheckpointTensor> tensors;

    const CheckpointTensor& tensor(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw FormatError("checkpoint has no manifest entry '" + name + "'");
    }

    std::uint64_t counter(const std::string& name) const {
        auto it = counters.find(name);
        if (it == counters.end()) throw FormatError("checkpoint has no counter '" + name + "'");
        return it->second;
    }

    std::map<std::string, std::string> config_map() const { return {config.begin(), config.end()}; }
};

namespace detail {

template <class U>
U byteswap_if_big(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(U)];
        std::memcpy(b, &v, sizeof(U));
        for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
        std::memcpy(&v, b, sizeof(U));
    }
    return v;
}

}  // namespace detail

template <std::floating_point T>
CheckpointTensor encode_tensor(const std::string& name, const Tensor<T>& t) {
    CheckpointTensor out;
    out.name = name;
    out.precision = precision_tag<T>();
    out.shape = t.shape();
    out.bytes.resize(t.size() * sizeof(T));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const T v = detail::byteswap_if_big(t.data()[i]);
        std::memcpy(out.bytes.data() + i * sizeof(T), &v, sizeof(T));
    }
    return out;
}

// Copies a stored tensor into `target`, which must have the same shape and precision.
template <std::floating_point T>
void decode_into(const CheckpointTensor& entry, Tensor<T>& target) {
    if (entry.precision != precision_tag<T>())
        throw FormatError("manifest entry '" + entry.name + "' has precision " + entry.precision + ", expected " +
                          precision_tag<T>());
    if (entry.shape != target.shape())
        throw FormatError("manifest entry '" + entry.name + "' has shape " + to_string(entry.shape) +
                          " but the model expects " + to_string(target.shape()));
    auto dst = target.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        T v;
        std::memcpy(&v, entry.bytes.data() + i * sizeof(T), sizeof(T));
        dst[i] = detail::byteswap_if_big(v);
    }
}

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::ostringstream manifest;
    manifest << "precision " << ckpt.precision << "\n";
    for (const auto& [k, v] : ckpt.counters) manifest << "counter " << k << " " << v << "\n";
    for (const auto& [k, v] : ckpt.config) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
            throw FormatError("config entry '" + k + "' cannot be stored in a checkpoint manifest");
        manifest << "config " << k << " " << v << "\n";
    }
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        manifest << "tensor " << t.name << " " << t.precision << " " << t.shape.size();
        for (auto d : t.shape) manifest << " " << d;
        manifest << " " << offset << " " << t.bytes.size() << "\n";
        offset += t.bytes.size();
    }
    manifest << "end\n";
    const std::string text = manifest.str();

    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
    std::uint64_t len = detail::byteswap_if_big(static_cast<std::uint64_t>(text.size()));
    const auto* lp = reinterpret_cast<const std::uint8_t*>(&len);
    out.insert(out.end(), lp, lp + 8);
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& t : ckpt.tensors) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
    return out;
}

inline Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw FormatError("not a checkpoint: missing LCGAN001 magic");
    if (bytes.size() < 16) throw FormatError("truncated checkpoint: header ends at byte " + std::to_string(bytes.size()));
    std::uint64_t len;
    std::memcpy(&len, bytes.data() + 8, 8);
    len = detail::byteswap_if_big(len);
    if (len > bytes.size() - 16)
        throw FormatError("truncated checkpoint: manifest needs bytes [16, " + std::to_string(16 + len) +
                          ") but file has " + std::to_string(bytes.size()));
    const std::string text(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    const std::size_t payload_start = 16 + len;
    const std::size_t payload_size = bytes.size() - payload_start;

    Checkpoint ckpt;
    std::istringstream in(text);
    std::string line;
    bool ended = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        auto bad = [&](const std::string& why) {
            return FormatError("manifest line " + std::to_string(lineno) + " ('" + line + "'): " + why);
        };
        if (kind == "end") {
            ended = true;
            break;
        } else if (kind == "precision") {
            if (!(fields >> ckpt.precision) || (ckpt.precision != "f32" && ckpt.precision != "f64"))
                throw bad("unknown precision");
        } else if (kind == "counter") {
            std::string name;
            std::uint64_t v;
            if (!(fields >> name >> v)) throw bad("malformed counter");
            ckpt.counters[name] = v;
        } else if (kind == "config") {
            std::string key;
            if (!(fields >> key)) throw bad("malformed config entry");
            std::string value;
            std::getline(fields, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ckpt.config.emplace_back(key, value);
        } else if (kind == "tensor") {
            CheckpointTensor t;
            std::size_t rank = 0;
            if (!(fields >> t.name >> t.precision >> rank) || rank == 0 || rank > 8) throw bad("malformed tensor entry");
            if (t.precision != "f32" && t.precision != "f64") throw bad("unknown tensor precision");
            t.shape.resize(rank);
            for (auto& d : t.shape)
                if (!(fields >> d) || d == 0) throw bad("malformed tensor shape");
            std::uint64_t offset = 0, size = 0;
            if (!(fields >> offset >> size)) throw bad("missing payload range");
            const std::size_t elem = t.precision == "f32" ? 4 : 8;
            if (size != element_count(t.shape) * elem)
                throw FormatError("manifest entry '" + t.name + "' declares shape " + to_string(t.shape) + " but " +
                                  std::to_string(size) + " payload bytes");
            if (offset > payload_size || size > payload_size - offset)
                throw FormatError("truncated checkpoint: manifest entry '" + t.name + "' needs payload bytes [" +
                                  std::to_string(offset) + ", " + std::to_string(offset + size) +
                                  ") (file bytes [" + std::to_string(payload_start + offset) + ", " +
                                  std::to_string(payload_start + offset + size) + ")) but the payload has only " +
                                  std::to_string(payload_size) + " bytes");
            const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(payload_start + offset);
            t.bytes.assign(begin, begin + static_cast<std::ptrdiff_t>(size));
            ckpt.tensors.push_back(std::move(t));
        } else if (!kind.empty()) {
            throw bad("unknown record kind");
        }
    }
    if (!ended) throw FormatError("checkpoint manifest has no end marker");
    return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    auto bytes = serialize_checkpoint(ckpt);
    write_file_atomic(path, bytes.data(), bytes.size());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    return parse_checkpoint(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Training state <-> checkpoint

template <std::floating_point T>
NamedTensors<T> state_tensors(const TrainingState<T>& s) {
    NamedTensors<T> all;
    auto append = [&all](const NamedTensors<T>& xs) { all.insert(all.end(), xs.begin(), xs.end()); };
    const auto lstm = s.models.lstm.parameters();
    const auto gen = s.models.gen.parameters();
    const auto disc = s.models.disc.parameters();
    append(lstm);
    append(gen);
    append(s.models.gen.buffers());
    append(disc);
    append(s.models.disc.buffers());
    auto adam = [&all](const char* group, const NamedTensors<T>& params, const AdamState<T>& st) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            all.push_back({std::string("adam.") + group + ".m." + params[k].name, st.m[k]});
            all.push_back({std::string("adam.") + group + ".v." + params[k].name, st.v[k]});
        }
    };
    adam("lstm", lstm, s.adam_l);
    adam("gen", gen, s.adam_g);
    adam("disc", disc, s.adam_d);
    return all;
}

template <std::floating_point T>
Checkpoint capture_checkpoint(const TrainingState<T>& s, std::vector<std::pair<std::string, std::string>> config) {
    Checkpoint ckpt;
    ckpt.precision = precision_tag<T>();
    ckpt.counters["iteration"] = s.iteration;
    ckpt.counters["adam.lstm.step"] = s.adam_l.step;
    ckpt.counters["adam.gen.step"] = s.adam_g.step;
    ckpt.counters["adam.disc.step"] = s.adam_d.step;
    ckpt.config = std::move(config);
    for (const auto& t : state_tensors(s)) ckpt.tensors.push_back(encode_tensor(t.name, t.tensor));
    return ckpt;
}

// Overwrites a state of matching architecture with the checkpoint contents.
template <std::floating_point T>
void restore_checkpoint(const Checkpoint& ckpt, TrainingState<T>& s) {
    if (ckpt.precision != precision_tag<T>())
        throw FormatError("checkpoint precision " + ckpt.precision + " does not match " + precision_tag<T>());
    for (auto t : state_tensors(s)) decode_into(ckpt.tensor(t.name), t.tensor);
    s.iteration = ckpt.counter("iteration");
    s.adam_l.step = ckpt.counter("adam.lstm.step");
    s.adam_g.step = ckpt.counter("adam.gen.step");
    s.adam_d.step = ckpt.counter("adam.disc.step");
}

}  // namespace wordgan
