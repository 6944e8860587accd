#include <gtest/gtest.h>

#include "support.hpp"
#include "wordgan/conv.hpp"
#include "wordgan/gradcheck.hpp"

using namespace wordgan;
using T = Tensor<double>;

namespace {

double inner(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Conv2d, WindowSum) {
    auto out = conv2d(T::full({1, 1, 3, 3}, 1.0), T::full({1, 1, 2, 2}, 1.0), 1, 0);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
    for (double v : out.data()) EXPECT_EQ(v, 4.0);
}

TEST(Conv2d, StrideTwoShape) {
    auto out = conv2d(T::full({1, 1, 4, 4}, 1.0), T::full({1, 1, 2, 2}, 1.0), 2, 0);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    struct Case {
        std::size_t n, c, h, w, o, k, stride, pad;
    };
    for (const auto& cs : {Case{2, 3, 8, 8, 4, 4, 2, 1}, Case{1, 2, 5, 5, 3, 3, 1, 1}, Case{3, 1, 6, 6, 2, 2, 2, 0},
                           Case{2, 5, 4, 4, 3, 1, 1, 0}}) {
        auto x = oracle::random_tensor({cs.n, cs.c, cs.h, cs.w}, 1);
        auto k = oracle::random_tensor({cs.o, cs.c, cs.k, cs.k}, 2);
        std::size_t ho = 0, wo = 0;
        auto expected = oracle::conv2d({x.data().begin(), x.data().end()}, cs.n, cs.c, cs.h, cs.w,
                                       {k.data().begin(), k.data().end()}, cs.o, cs.k, cs.k, cs.stride, cs.pad, ho, wo);
        auto out = conv2d(x, k, cs.stride, cs.pad);
        ASSERT_EQ(out.shape(), (Shape{cs.n, cs.o, ho, wo}));
        for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(out.data()[i], expected[i], 1e-10);
    }
}

TEST(Conv2d, NonExactExtentThrows) {
    EXPECT_THROW(conv2d(T::full({1, 1, 5, 5}, 1.0), T::full({1, 1, 2, 2}, 1.0), 2, 0), ShapeError);
}

TEST(Conv2d, ChannelMismatchThrows) {
    EXPECT_THROW(conv2d(T::full({1, 2, 4, 4}, 1.0), T::full({1, 3, 2, 2}, 1.0), 1, 0), ShapeError);
}

TEST(Conv2d, KernelLargerThanInputThrows) {
    EXPECT_THROW(conv2d(T::full({1, 1, 2, 2}, 1.0), T::full({1, 1, 4, 4}, 1.0), 1, 0), ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
    auto x = oracle::random_tensor({2, 2, 6, 6}, 3, true);
    auto k = oracle::random_tensor({3, 2, 4, 4}, 4, true);
    auto w = oracle::random_tensor({2, 3, 3, 3}, 5);
    auto r = finite_diff_check<double>([&] { return sum(conv2d(x, k, 2, 1) * w); }, {x, k}, 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(ConvTranspose2d, SingleTap) {
    T x({1, 1, 1, 1}, {3.0});
    T k({1, 1, 2, 2}, {1, 2, 3, 4});
    auto out = conv_transpose2d(x, k, 2, 0);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), (std::vector<double>{3, 6, 9, 12}));
}

TEST(ConvTranspose2d, DoublingShape) {
    auto out = conv_transpose2d(oracle::random_tensor({1, 3, 4, 4}, 6), oracle::random_tensor({3, 2, 4, 4}, 7), 2, 1);
    EXPECT_EQ(out.shape(), (Shape{1, 2, 8, 8}));
}

TEST(ConvTranspose2d, MatchesScatterOracle) {
    auto x = oracle::random_tensor({2, 3, 4, 4}, 8);
    auto k = oracle::random_tensor({3, 2, 4, 4}, 9);
    std::size_t ho = 0, wo = 0;
    auto expected = oracle::conv_transpose2d({x.data().begin(), x.data().end()}, 2, 3, 4, 4,
                                             {k.data().begin(), k.data().end()}, 2, 4, 4, 2, 1, ho, wo);
    auto out = conv_transpose2d(x, k, 2, 1);
    ASSERT_EQ(out.shape(), (Shape{2, 2, ho, wo}));
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(out.data()[i], expected[i], 1e-10);
}

TEST(ConvTranspose2d, AdjointIdentity) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = oracle::random_tensor({2, 3, 8, 8}, 100 + seed);
        auto k = oracle::random_tensor({4, 3, 4, 4}, 200 + seed);  // conv2d layout [O,C,kh,kw]
        auto y = oracle::random_tensor({2, 4, 4, 4}, 300 + seed);
        const double lhs = inner(conv2d(x, k, 2, 1).data(), y.data());
        const double rhs = inner(x.data(), conv_transpose2d(y, k, 2, 1).data());
        EXPECT_NEAR(lhs, rhs, 1e-10);
    }
}

TEST(ConvTranspose2d, InvalidExtentThrows) {
    EXPECT_THROW(conv_transpose2d(oracle::random_tensor({1, 1, 1, 1}, 1), oracle::random_tensor({1, 1, 2, 2}, 2), 1, 1),
                 ShapeError);
    EXPECT_THROW(conv_transpose2d(oracle::random_tensor({1, 2, 2, 2}, 1), oracle::random_tensor({3, 1, 2, 2}, 2), 2, 0),
                 ShapeError);
}

TEST(ConvTranspose2d, GradientsMatchFiniteDifferences) {
    auto x = oracle::random_tensor({2, 3, 3, 3}, 10, true);
    auto k = oracle::random_tensor({3, 2, 4, 4}, 11, true);
    auto w = oracle::random_tensor({2, 2, 6, 6}, 12);
    auto r = finite_diff_check<double>([&] { return sum(conv_transpose2d(x, k, 2, 1) * w); }, {x, k}, 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-4);
}
