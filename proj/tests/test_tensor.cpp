#include <gtest/gtest.h>

#include <cmath>

#include "dpci/core/ops.hpp"

using namespace dpci;

TEST(Tensor, ShapeMustMatchValueCount) {
    EXPECT_THROW(Tensor<double>({2, 3}, std::vector<double>(5)), DimensionError);
    Tensor<double> t({2, 3}, std::vector<double>(6, 1.0));
    EXPECT_EQ(t.size(), shape_size(t.shape()));
    EXPECT_EQ(shape_str(t.shape()), "[2x3]");
}

TEST(Tensor, CopiesShareStorage) {
    Tensor<double> a({2}, std::vector<double>{1, 2});
    Tensor<double> b = a;
    b.mutable_values()[0] = 7;
    EXPECT_EQ(a.values()[0], 7);
    Tensor<double> c = a.detach();
    c.mutable_values()[0] = 9;
    EXPECT_EQ(a.values()[0], 7);
}

TEST(Backward, SumOfMatmulGivesOuterPattern) {
    // loss = sum(x W) with x fixed: dW[i][j] = sum_r x[r][i].
    Tensor<double> x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    auto w = Tensor<double>::parameter({3, 2}, std::vector<double>(6, 0.5));
    backward(sum(matmul(x, w)));
    const double col[3] = {5, 7, 9};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(w.grad()[i * 2 + j], col[i]);
    EXPECT_FALSE(x.has_grad());
}

TEST(Backward, SquaredTanhAtZeroHasZeroGradient) {
    auto w = Tensor<double>::parameter({1}, std::vector<double>{0.0});
    auto t = tanh(w);
    backward(sum(mul(t, t)));
    EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Backward, SharedParentAccumulates) {
    auto w = Tensor<double>::parameter({1}, std::vector<double>{3.0});
    backward(sum(add(mul(w, w), w)));  // d/dw (w^2 + w) = 2w + 1
    EXPECT_DOUBLE_EQ(w.grad()[0], 7.0);
}

TEST(Backward, GradientsHaveParameterShape) {
    auto a = Tensor<double>::parameter({3, 4}, std::vector<double>(12, 0.1));
    auto b = Tensor<double>::parameter({4, 2}, std::vector<double>(8, 0.2));
    backward(sum(tanh(matmul(a, b))));
    EXPECT_EQ(a.grad().size(), a.size());
    EXPECT_EQ(b.grad().size(), b.size());
}

TEST(Backward, NonScalarLossIsRejected) {
    auto w = Tensor<double>::parameter({2}, std::vector<double>{1, 2});
    EXPECT_THROW(backward(scale(w, 2.0)), TapeError);
}

TEST(Backward, SecondCallIsStale) {
    auto w = Tensor<double>::parameter({2}, std::vector<double>{1, 2});
    auto loss = sum(mul(w, w));
    backward(loss);
    EXPECT_THROW(backward(loss), TapeError);
}

TEST(Backward, UnrecordedLossIsRejected) {
    Tensor<double> x({1}, std::vector<double>{1});
    EXPECT_THROW(backward(sum(x)), TapeError);
}

TEST(Backward, NoGradGuardStopsRecording) {
    auto w = Tensor<double>::parameter({2}, std::vector<double>{1, 2});
    Tensor<double> y;
    {
        NoGradGuard ng;
        y = sum(mul(w, w));
    }
    EXPECT_FALSE(y.is_recorded());
    EXPECT_TRUE(sum(w).is_recorded());
}

TEST(Backward, RecordedTensorsAreImmutable) {
    auto w = Tensor<double>::parameter({2}, std::vector<double>{1, 2});
    auto y = scale(w, 2.0);
    EXPECT_THROW(y.mutable_values(), TapeError);
}

TEST(Backward, SameSeedSameGradients) {
    auto run = [] {
        auto a = Tensor<double>::parameter({3, 3}, std::vector<double>{0.1, -0.4, 0.3, 0.9, 0.2, -0.7, 0.5, 0.5, 0.1});
        backward(sum(row_softmax(matmul(a, transpose(a)))));
        return std::vector<double>(a.grad().begin(), a.grad().end());
    };
    EXPECT_EQ(run(), run());
}
