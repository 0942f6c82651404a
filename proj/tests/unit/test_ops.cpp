#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "oracles/conv_reference.hpp"
#include "oracles/finite_difference.hpp"
#include "revprop/error.hpp"
#include "revprop/ops.hpp"
#include "support/random.hpp"

namespace revprop {
namespace {

using testing::random_kernel;
using testing::random_tensor;

constexpr double kFdTolerance = 1e-6;

struct ConvCase {
  std::size_t ci, co, k, pad, x, y, z;
};

const std::vector<ConvCase>& conv_cases() {
  static const std::vector<ConvCase> cases{
      {1, 1, 1, 0, 3, 3, 3}, {2, 3, 3, 0, 5, 4, 6}, {3, 2, 3, 1, 4, 5, 3},
      {4, 5, 1, 0, 4, 4, 4}, {2, 2, 5, 2, 6, 5, 5}, {5, 3, 3, 0, 7, 7, 7},
  };
  return cases;
}

TEST(Conv3d, MatchesDirectSummation) {
  std::mt19937_64 rng(1);
  for (const auto& c : conv_cases()) {
    for (int rep = 0; rep < 3; ++rep) {
      auto x = random_tensor<double>(Shape{c.ci, c.x, c.y, c.z}, rng);
      auto k = random_kernel<double>(c.co, c.ci, c.k, c.pad, rng);
      auto got = conv3d_forward(x, k);
      ASSERT_LE(got.size(), 10000u);
      auto want = oracle::conv3d_direct(x, k);
      ASSERT_EQ(got.shape(), want.shape());
      EXPECT_LE(relative_error(got, want), 1e-14) << c.ci << "->" << c.co << " k" << c.k;
    }
  }
}

TEST(Conv3d, SinglePrecisionAgreesWithDouble) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>(Shape{3, 6, 6, 6}, rng);
  auto k = random_kernel<double>(4, 3, 3, 1, rng);
  ConvKernel<float> kf;
  kf.weights = cast<float>(k.weights, MemoryKind::parameter);
  kf.bias = cast<float>(k.bias, MemoryKind::parameter);
  kf.padding = k.padding;
  auto got = cast<double>(conv3d_forward(cast<float>(x), kf));
  EXPECT_LE(relative_error(got, conv3d_forward(x, k)), 1e-5);
}

TEST(Conv3d, ShapeRules) {
  Tensor<double> x(Shape{2, 7, 8, 9});
  ConvKernel<double> same(3, 2, 3, 1);
  ConvKernel<double> valid(3, 2, 3, 0);
  ConvKernel<double> big(3, 2, 5, 0);
  EXPECT_EQ(conv3d_forward(x, same).shape(), (Shape{3, 7, 8, 9}));
  EXPECT_EQ(conv3d_forward(x, valid).shape(), (Shape{3, 5, 6, 7}));
  EXPECT_EQ(conv3d_forward(x, big).shape(), (Shape{3, 3, 4, 5}));
  ConvKernel<double> wrong(3, 4, 3, 0);
  EXPECT_THROW(conv3d_forward(x, wrong), ShapeError);
  Tensor<double> tiny(Shape{2, 2, 8, 9});
  EXPECT_THROW(conv3d_forward(tiny, valid), ShapeError);
}

TEST(Conv3d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (const auto& c : conv_cases()) {
    if (c.x * c.y * c.z * c.ci > 200) continue;
    auto x = random_tensor<double>(Shape{c.ci, c.x, c.y, c.z}, rng);
    auto k = random_kernel<double>(c.co, c.ci, c.k, c.pad, rng);
    const auto out_shape = conv3d_output_shape(x.shape(), k);
    auto w = random_tensor<double>(out_shape, rng);
    auto g = conv3d_backward(x, k, w);
    auto objective = [&] { return oracle::project(conv3d_forward(x, k).data(), w.data()); };
    auto fx = oracle::central_differences(x.data(), objective);
    auto fw = oracle::central_differences(k.weights.data(), objective);
    auto fb = oracle::central_differences(k.bias.data(), objective);
    EXPECT_LE(oracle::max_relative(g.input.data(), fx), kFdTolerance);
    EXPECT_LE(oracle::max_relative(g.weights.data(), fw), kFdTolerance);
    EXPECT_LE(oracle::max_relative(g.bias.data(), fb), kFdTolerance);
  }
}

TEST(Conv3d, GradientKindsSeparateParameterFromActivation) {
  std::mt19937_64 rng(6);
  auto x = random_tensor<double>(Shape{2, 4, 4, 4}, rng);
  auto k = random_kernel<double>(3, 2, 3, 1, rng);
  auto w = random_tensor<double>(Shape{3, 4, 4, 4}, rng);
  auto g = conv3d_backward(x, k, w);
  EXPECT_EQ(g.input.kind(), MemoryKind::activation);
  EXPECT_EQ(g.weights.kind(), MemoryKind::parameter);
  EXPECT_EQ(g.bias.kind(), MemoryKind::parameter);
}

TEST(Conv3d, CountsOneForwardOpPerCall) {
  std::mt19937_64 rng(7);
  auto x = random_tensor<double>(Shape{2, 4, 4, 4}, rng);
  auto k = random_kernel<double>(2, 2, 1, 0, rng);
  LedgerScope scope;
  auto y = conv3d_forward(x, k);
  auto y2 = conv3d_forward(y, k);
  auto g = conv3d_backward(x, k, y);
  EXPECT_EQ(scope.snapshot().fwd_op_count, 2);
  EXPECT_EQ(scope.snapshot().bwd_op_count, 1);
}

TEST(Relu, ForwardAndSubgradientAtZero) {
  Tensor<double> x(Shape{4}, std::vector<double>{-1.0, 0.0, 2.0, -0.0});
  Tensor<double> g(Shape{4}, std::vector<double>{5.0, 6.0, 7.0, 8.0});
  auto y = relu_forward(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[2], 2.0);
  auto b = relu_backward(x, g);
  EXPECT_EQ(b[0], 0.0);
  EXPECT_EQ(b[1], 0.0);
  EXPECT_EQ(b[2], 7.0);
  EXPECT_EQ(b[3], 0.0);
}

TEST(Relu, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  auto x = random_tensor<double>(Shape{3, 4, 4, 4}, rng);
  // Keep every entry away from the kink so the central difference is exact.
  for (auto& v : x.data())
    if (std::abs(v) < 1e-3) v = 0.5;
  auto w = random_tensor<double>(x.shape(), rng);
  auto g = relu_backward(x, w);
  auto fd = oracle::central_differences(x.data(), [&] { return oracle::project(relu_forward(x).data(), w.data()); });
  EXPECT_LE(oracle::max_relative(g.data(), fd), kFdTolerance);
}

TEST(Shuffle, IndexFormula) {
  const std::size_t r = 2, c = 2;
  Tensor<double> x(Shape{c * 8, 2, 3, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  auto y = shuffle(x, r);
  ASSERT_EQ(y.shape(), (Shape{c, 4, 6, 4}));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t X = 0; X < 4; ++X)
      for (std::size_t Y = 0; Y < 6; ++Y)
        for (std::size_t Z = 0; Z < 4; ++Z) {
          const std::size_t src = ch * 8 + (X % r) * 4 + (Y % r) * 2 + Z % r;
          ASSERT_EQ(y.at(ch, X, Y, Z), x.at(src, X / r, Y / r, Z / r));
        }
}

TEST(Shuffle, RoundtripBothOrdersAndPermutation) {
  std::mt19937_64 rng(10);
  for (std::size_t r : {1u, 2u, 3u}) {
    auto x = random_tensor<double>(Shape{2 * r * r * r, 3, 2, 4}, rng);
    auto y = shuffle(x, r);
    EXPECT_TRUE(identical(inverse_shuffle(y, r), x));
    auto z = random_tensor<float>(Shape{3, 2 * r, 3 * r, r}, rng);
    EXPECT_TRUE(identical(shuffle(inverse_shuffle(z, r), r), z));
    std::vector<double> a(x.data().begin(), x.data().end()), b(y.data().begin(), y.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(Shuffle, AdjointMatchesFiniteDifferences) {
  // The backward of shuffle is inverse_shuffle of the upstream gradient.
  std::mt19937_64 rng(12);
  auto x = random_tensor<double>(Shape{8, 2, 2, 3}, rng);
  auto w = random_tensor<double>(Shape{1, 4, 4, 6}, rng);
  auto fd = oracle::central_differences(x.data(), [&] { return oracle::project(shuffle(x, 2).data(), w.data()); });
  auto g = inverse_shuffle(w, 2);
  EXPECT_LE(oracle::max_relative(g.data(), fd), kFdTolerance);
}

TEST(Shuffle, RejectsIndivisibleShapes) {
  Tensor<double> x(Shape{7, 2, 2, 2});
  EXPECT_THROW(shuffle(x, 2), ShapeError);
  Tensor<double> y(Shape{1, 3, 4, 4});
  EXPECT_THROW(inverse_shuffle(y, 2), ShapeError);
}

}  // namespace
}  // namespace revprop
