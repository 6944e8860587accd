#pragma once

// Per-word input vectors x(t) and sentence condition vectors y.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wordgan/error.hpp"

namespace wordgan {

using Vector = std::vector<double>;

// Lowercase, drop punctuation, split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// FNV-1a; stable across platforms, used to seed OOV vectors.
inline std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0) {
    std::uint64_t h = 1469598103934665603ull ^ (seed * 0x9E3779B97F4A7C15ull);
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

class WordEmbeddingTable {
public:
    explicit WordEmbeddingTable(std::size_t dimension, std::uint64_t oov_seed = 0)
        : dimension_(dimension), oov_seed_(oov_seed) {
        if (dimension == 0) throw ConfigError("embedding dimension must be positive");
    }

    std::size_t dimension() const { return dimension_; }
    std::uint64_t oov_seed() const { return oov_seed_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& word) const { return entries_.count(word) != 0; }

    void insert(const std::string& word, Vector v) {
        if (v.size() != dimension_)
            throw ShapeError("vector for '" + word + "' has dimension " + std::to_string(v.size()) + ", expected " +
                             std::to_string(dimension_));
        if (!entries_.emplace(word, std::move(v)).second) throw IoError("duplicate word '" + word + "'");
    }

    // Stored vector, or the deterministic unit vector seeded by (oov_seed, word).
    Vector lookup(const std::string& word) const {
        if (auto it = entries_.find(word); it != entries_.end()) return it->second;
        return oov_vector(word);
    }

    Vector oov_vector(const std::string& word) const {
        std::mt19937_64 rng(stable_hash(word, oov_seed_));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector v(dimension_);
        double norm = 0;
        do {
            norm = 0;
            for (auto& x : v) {
                x = normal(rng);
                norm += x * x;
            }
        } while (norm == 0);
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        return v;
    }

private:
    std::size_t dimension_;
    std::uint64_t oov_seed_;
    std::unordered_map<std::string, Vector> entries_;
};

// word2vec text format: "vocab_count dimension" header then "word v1 ... vd" rows.
inline WordEmbeddingTable load_word_vectors(std::istream& in, std::uint64_t oov_seed = 0) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("word vectors: missing header");
    std::istringstream header(line);
    long long count = -1, dim = -1;
    std::string extra;
    if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0)
        throw IoError("word vectors: malformed header '" + line + "'");
    WordEmbeddingTable table(static_cast<std::size_t>(dim), oov_seed);
    for (long long row = 0; row < count; ++row) {
        if (!std::getline(in, line))
            throw IoError("word vectors: expected " + std::to_string(count) + " rows, found " + std::to_string(row));
        std::istringstream fields(line);
        std::string word;
        if (!(fields >> word)) throw IoError("word vectors: empty row " + std::to_string(row + 2));
        Vector v;
        std::string tok;
        while (fields >> tok) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw IoError("word vectors: non-numeric value '" + tok + "' on row " + std::to_string(row + 2));
            }
        }
        if (v.size() != static_cast<std::size_t>(dim))
            throw IoError("word vectors: row " + std::to_string(row + 2) + " ('" + word + "') has " +
                          std::to_string(v.size()) + " values, expected " + std::to_string(dim));
        if (table.contains(word)) throw IoError("word vectors: duplicate word '" + word + "'");
        table.insert(word, std::move(v));
    }
    return table;
}

inline WordEmbeddingTable load_word_vectors(const std::filesystem::path& path, std::uint64_t oov_seed = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open word vectors " + path.string());
    return load_word_vectors(in, oov_seed);
}

inline std::vector<Vector> embed_words(const WordEmbeddingTable& table, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error("cannot embed an empty token list");
    std::vector<Vector> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(table.lookup(t));
    return out;
}

// Sentence condition vectors read from "caption_id v1 ... vT" lines.
class ConditionFile {
public:
    static ConditionFile load(std::istream& in) {
        ConditionFile file;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::istringstream fields(line);
            std::string id;
            if (!(fields >> id)) continue;
            Vector v;
            std::string tok;
            while (fields >> tok) {
                try {
                    v.push_back(std::stod(tok));
                } catch (const std::exception&) {
                    throw IoError("condition file: non-numeric value on line " + std::to_string(lineno));
                }
            }
            if (v.empty()) throw IoError("condition file: line " + std::to_string(lineno) + " has no values");
            if (file.dimension_ == 0) file.dimension_ = v.size();
            if (v.size() != file.dimension_)
                throw IoError("condition file: line " + std::to_string(lineno) + " has dimension " +
                              std::to_string(v.size()) + ", expected " + std::to_string(file.dimension_));
            if (!file.vectors_.emplace(id, std::move(v)).second)
                throw IoError("condition file: duplicate caption id '" + id + "'");
        }
        return file;
    }

    static ConditionFile load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open condition file " + path.string());
        return load(in);
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return vectors_.size(); }

    const Vector& at(const std::string& caption_id) const {
        auto it = vectors_.find(caption_id);
        if (it == vectors_.end()) throw Error("caption id '" + caption_id + "' not present in condition file");
        return it->second;
    }

private:
    std::size_t dimension_ = 0;
    std::unordered_map<std::string, Vector> vectors_;
};

// Mean of the word vectors; stands in for a learned sentence encoder.
inline Vector sentence_condition(const WordEmbeddingTable& table, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error("cannot condition on an empty sentence");
    Vector y(table.dimension(), 0.0);
    for (const auto& v : embed_words(table, tokens))
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
    for (auto& x : y) x /= static_cast<double>(tokens.size());
    return y;
}

inline Vector sentence_condition(const ConditionFile& file, const std::string& caption_id) {
    return file.at(caption_id);
}

// Source of y for a caption: mean pooling unless a precomputed file is set.
struct ConditionSource {
    const WordEmbeddingTable* table = nullptr;
    const ConditionFile* file = nullptr;

    std::size_t dimension() const { return file ? file->dimension() : table->dimension(); }
    Vector operator()(const std::vector<std::string>& tokens, const std::string& caption_id) const {
        if (file) return sentence_condition(*file, caption_id);
        return sentence_condition(*table, tokens);
    }
};

}  // namespace wordgan
