#include <gtest/gtest.h>

#include <random>

#include "oracles/finite_difference.hpp"
#include "revprop/error.hpp"
#include "revprop/graph.hpp"
#include "support/random.hpp"

namespace revprop {
namespace {

using testing::random_kernel;
using testing::random_tensor;

// Exercises every tape op: y = concat(relu(conv(a)), b - conv(a)) + leaf c.
struct Composite {
  ConvKernel<double> k;
  Tensor<double> x;
  Tensor<double> c;

  Tensor<double> evaluate() const {
    auto [a, b] = split_channels(x);
    auto h = conv3d_forward(a, k);
    return add(concat_channels(relu_forward(h), sub(b, h)), c);
  }
};

TEST(Graph, CompositeGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  Composite m{random_kernel<double>(2, 2, 3, 1, rng), random_tensor<double>(Shape{4, 3, 3, 3}, rng),
              random_tensor<double>(Shape{4, 3, 3, 3}, rng)};
  auto w = random_tensor<double>(Shape{4, 3, 3, 3}, rng);

  Graph<double> g;
  const auto nx = g.leaf(m.x);
  const auto nc = g.leaf(m.c);
  auto [na, nb] = g.split(nx);
  const auto nh = g.conv(na, m.k);
  const auto ny = g.add(g.concat(g.relu(nh), g.sub(nb, nh)), nc);
  ASSERT_TRUE(identical(g.value(ny), m.evaluate()));
  ConvKernel<double> acc = zeros_like(m.k);
  g.backward(ny, w, [&](const ConvKernel<double>& k) { return &k == &m.k ? &acc : nullptr; });

  auto objective = [&] { return oracle::project(m.evaluate().data(), w.data()); };
  EXPECT_LE(oracle::max_relative(g.take_grad(nx).data(), oracle::central_differences(m.x.data(), objective)), 1e-6);
  EXPECT_LE(oracle::max_relative(g.take_grad(nc).data(), oracle::central_differences(m.c.data(), objective)), 1e-6);
  EXPECT_LE(oracle::max_relative(acc.weights.data(), oracle::central_differences(m.k.weights.data(), objective)),
            1e-6);
  EXPECT_LE(oracle::max_relative(acc.bias.data(), oracle::central_differences(m.k.bias.data(), objective)), 1e-6);
}

TEST(Graph, FanOutAccumulatesGradient) {
  Graph<double> g;
  const auto x = g.leaf(Tensor<double>(Shape{3}, std::vector<double>{1.0, 2.0, 3.0}));
  const auto y = g.add(x, x);
  g.backward(y, Tensor<double>(Shape{3}, std::vector<double>{1.0, 1.0, 1.0}), nullptr);
  auto gx = g.take_grad(x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(gx[i], 2.0);
}

TEST(Graph, BackwardReleasesInteriorValuesAndKeepsLeaves) {
  std::mt19937_64 rng(22);
  auto k = random_kernel<double>(2, 2, 1, 0, rng);
  Graph<double> g;
  const auto x = g.leaf(random_tensor<double>(Shape{2, 2, 2, 2}, rng));
  const auto y = g.relu(g.conv(x, k));
  g.backward(y, Tensor<double>(Shape{2, 2, 2, 2}), nullptr);
  EXPECT_NO_THROW((void)g.value(x));
  EXPECT_THROW((void)g.value(y), std::logic_error);
}

TEST(Graph, SeedShapeMustMatch) {
  Graph<double> g;
  const auto x = g.leaf(Tensor<double>(Shape{2, 2, 2, 2}));
  EXPECT_THROW(g.backward(x, Tensor<double>(Shape{1, 2, 2, 2}), nullptr), ShapeError);
}

TEST(Graph, UnknownNodeThrows) {
  Graph<double> g;
  EXPECT_THROW((void)g.value(3), std::out_of_range);
}

TEST(Graph, LeafWithoutGradientYieldsZeros) {
  Graph<double> g;
  const auto x = g.leaf(Tensor<double>::full(Shape{2}, 1.0));
  const auto unused = g.leaf(Tensor<double>::full(Shape{4}, 1.0));
  g.backward(x, Tensor<double>::full(Shape{2}, 1.0), nullptr);
  auto gu = g.take_grad(unused);
  EXPECT_EQ(gu.shape(), Shape{4});
  EXPECT_EQ(max_abs(gu), 0.0);
}

// Hand-traced ledger schedule for leaf x (2,5,5,5) -> conv 3^3 valid 2->4
// -> relu -> conv 1^3 4->2, all activations allocated inside the scope:
//   forward:  x 250, conv 108, relu 108, conv 54           live 520
//   seed 54                                                 live 574
//   conv2 bwd: +108 grad in -> 682; -54 seed; -54 value      live 574
//   relu bwd:  +108 -> 682; -108 g; -108 value               live 466
//   conv1 bwd: +250 grad in -> 716; -108 g; -108 value       live 500
// Parameter gradients are parameter memory and never reach the peak.
TEST(Graph, LedgerScheduleMatchesHandTrace) {
  std::mt19937_64 rng(23);
  auto k1 = random_kernel<double>(4, 2, 3, 0, rng);
  auto k2 = random_kernel<double>(2, 4, 1, 0, rng);
  ConvKernel<double> a1 = zeros_like(k1), a2 = zeros_like(k2);
  LedgerScope scope;
  {
    Graph<double> g;
    const auto x = g.leaf(random_tensor<double>(Shape{2, 5, 5, 5}, rng));
    const auto y = g.conv(g.relu(g.conv(x, k1)), k2);
    EXPECT_EQ(scope.snapshot().live_elements, 520);
    Tensor<double> seed(Shape{2, 3, 3, 3});
    EXPECT_EQ(scope.snapshot().live_elements, 574);
    g.backward(y, std::move(seed), [&](const ConvKernel<double>& k) { return &k == &k1 ? &a1 : &a2; });
    const auto s = scope.snapshot();
    EXPECT_EQ(s.live_elements, 500);
    EXPECT_EQ(s.peak_elements, 716);
    EXPECT_EQ(s.fwd_op_count, 2);
    EXPECT_EQ(s.bwd_op_count, 2);
  }
  EXPECT_EQ(scope.snapshot().live_elements, 0);
}

}  // namespace
}  // namespace revprop
