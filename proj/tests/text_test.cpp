#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "wordgan/text.hpp"

using namespace wordgan;
using Tokens = std::vector<std::string>;

TEST(Tokenize, LowercasesAndStripsPunctuation) {
    EXPECT_EQ(tokenize("This flower has petals."), (Tokens{"this", "flower", "has", "petals"}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, CollapsesWhitespace) {
    EXPECT_EQ(tokenize("one  red   circle"), (Tokens{"one", "red", "circle"}));
    EXPECT_EQ(tokenize("\tA, b;\n c!"), (Tokens{"a", "b", "c"}));
}

TEST(WordVectors, LoadsHeaderAndRows) {
    std::istringstream in("2 3\nred 1 2 3\nblue 0.5 -1 4e-1\n");
    auto table = load_word_vectors(in);
    EXPECT_EQ(table.size(), 2u);
    EXPECT_EQ(table.dimension(), 3u);
    EXPECT_EQ(table.lookup("red"), (Vector{1, 2, 3}));
    EXPECT_EQ(table.lookup("blue"), (Vector{0.5, -1, 0.4}));
}

TEST(WordVectors, ShortRowIsAnError) {
    std::istringstream in("1 3\nred 1 2\n");
    EXPECT_THROW(load_word_vectors(in), IoError);
}

TEST(WordVectors, MalformedHeaderIsAnError) {
    std::istringstream a("three 3\nred 1 2 3\n");
    EXPECT_THROW(load_word_vectors(a), IoError);
    std::istringstream b("");
    EXPECT_THROW(load_word_vectors(b), IoError);
}

TEST(WordVectors, DuplicateWordIsAnError) {
    std::istringstream in("2 1\nred 1\nred 2\n");
    EXPECT_THROW(load_word_vectors(in), IoError);
}

TEST(WordVectors, CountMismatchIsAnError) {
    std::istringstream in("3 1\nred 1\nblue 2\n");
    EXPECT_THROW(load_word_vectors(in), IoError);
}

TEST(WordVectors, MissingFileIsAnError) {
    EXPECT_THROW(load_word_vectors(std::filesystem::path("/nonexistent/vectors.txt")), IoError);
}

TEST(EmbedWords, InVocabularyInOrder) {
    WordEmbeddingTable table(2);
    table.insert("a", {1, 0});
    table.insert("b", {0, 1});
    auto xs = embed_words(table, {"b", "a"});
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[0], (Vector{0, 1}));
    EXPECT_EQ(xs[1], (Vector{1, 0}));
}

TEST(EmbedWords, OovIsDeterministicUnitVector) {
    WordEmbeddingTable table(16, 7);
    auto xs = embed_words(table, {"zebra", "zebra", "okapi"});
    EXPECT_EQ(xs[0], xs[1]);
    EXPECT_NE(xs[0], xs[2]);
    double norm = 0;
    for (double v : xs[0]) norm += v * v;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
    EXPECT_EQ(WordEmbeddingTable(16, 7).lookup("zebra"), xs[0]);
    EXPECT_NE(WordEmbeddingTable(16, 8).lookup("zebra"), xs[0]);
}

TEST(EmbedWords, EmptyIsAnError) {
    WordEmbeddingTable table(4);
    EXPECT_THROW(embed_words(table, {}), Error);
}

TEST(SentenceCondition, MeanOfTwoWords) {
    WordEmbeddingTable table(2);
    table.insert("a", {1, 4});
    table.insert("b", {3, -2});
    EXPECT_EQ(sentence_condition(table, {"a", "b"}), (Vector{2, 1}));
    EXPECT_EQ(sentence_condition(table, {"a"}), (Vector{1, 4}));
}

TEST(SentenceCondition, OrderInvariant) {
    WordEmbeddingTable table(8, 3);
    Tokens words{"one", "large", "red", "circle"};
    auto base = sentence_condition(table, words);
    std::sort(words.begin(), words.end());
    do {
        auto y = sentence_condition(table, words);
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], base[i], 1e-15);
    } while (std::next_permutation(words.begin(), words.end()));
}

TEST(SentenceCondition, EmptySentenceIsAnError) {
    WordEmbeddingTable table(2);
    EXPECT_THROW(sentence_condition(table, {}), Error);
}

TEST(SentenceCondition, FileModeExactVector) {
    std::istringstream in("000001_0 0.1 -2.5 3.141592653589793\n000001_1 1 2 3\n");
    auto file = ConditionFile::load(in);
    EXPECT_EQ(file.dimension(), 3u);
    EXPECT_EQ(sentence_condition(file, "000001_0"), (Vector{0.1, -2.5, 3.141592653589793}));
    EXPECT_THROW(sentence_condition(file, "missing"), Error);
}

TEST(SentenceCondition, FileDimensionMismatchIsAnError) {
    std::istringstream in("a 1 2\nb 1\n");
    EXPECT_THROW(ConditionFile::load(in), IoError);
}

TEST(ConditionSource, PrefersFile) {
    WordEmbeddingTable table(2);
    table.insert("x", {5, 5});
    std::istringstream in("r_0 9 8 7\n");
    auto file = ConditionFile::load(in);
    ConditionSource mean_mode{&table, nullptr};
    ConditionSource file_mode{&table, &file};
    EXPECT_EQ(mean_mode.dimension(), 2u);
    EXPECT_EQ(file_mode.dimension(), 3u);
    EXPECT_EQ(mean_mode({"x"}, "r_0"), (Vector{5, 5}));
    EXPECT_EQ(file_mode({"x"}, "r_0"), (Vector{9, 8, 7}));
}
