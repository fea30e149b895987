#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "icn/errors.hpp"
#include "icn/rng.hpp"
#include "icn/tensor.hpp"

using namespace icn;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (double& v : t.values()) v = rng.uniform(-2.0, 2.0);
  return t;
}

// Textbook triple loop.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace

TEST(Tensor, ShapeAndIndexing) {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(shape_str(t.shape()), "[2x3]");
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(t.reshaped({4}), DimensionError);
  EXPECT_EQ(t.reshaped({3, 2})(2, 1), 6.0);
}

TEST(Tensor, RowsAndGather) {
  Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(t.rows(1, 3), Tensor::matrix({{3, 4}, {5, 6}}));
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(gather(t, idx), Tensor::matrix({{5, 6}, {1, 2}}));
}

TEST(Tensor, MatmulMatchesNaive) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.below(7), k = 1 + rng.below(9), m = 1 + rng.below(6);
    const Tensor a = random_matrix(n, k, rng), b = random_matrix(k, m, rng);
    const Tensor ref = naive_matmul(a, b);
    const Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), ref.shape());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);
    const Tensor tn = matmul_tn(transpose(a), b);
    const Tensor nt = matmul_nt(a, transpose(b));
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_NEAR(tn[i], ref[i], 1e-12);
      EXPECT_NEAR(nt[i], ref[i], 1e-12);
    }
  }
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Tensor, IdentityAndSums) {
  Rng rng(2);
  const Tensor a = random_matrix(3, 4, rng);
  EXPECT_EQ(matmul(a, identity(4)), a);
  const std::vector<double> s = row_sums(Tensor::matrix({{1, 2}, {3, -4}}));
  EXPECT_EQ(s, (std::vector<double>{3, -1}));
  Tensor b = Tensor::vector({1, 2});
  add_inplace(b, Tensor::vector({0.5, 0.5}));
  EXPECT_EQ(b, Tensor::vector({1.5, 2.5}));
}

TEST(Activation, KnownValues) {
  EXPECT_EQ(activate(-1.0, Activation::relu()), 0.0);
  EXPECT_EQ(activate(2.5, Activation::relu()), 2.5);
  EXPECT_NEAR(activate(1.0, Activation::tanh()), 0.7615941559557649, 1e-15);
  EXPECT_NEAR(activate(-1.0, Activation::elu()), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(activate(-1.0, Activation::elu(0.5)), 0.5 * (std::exp(-1.0) - 1.0), 1e-15);
  EXPECT_EQ(activate(3.0, Activation::elu()), 3.0);
  EXPECT_NEAR(activate(0.0, Activation::sigmoid()), 0.5, 1e-15);
  EXPECT_EQ(activate(-7.0, Activation::identity()), -7.0);
}

TEST(Activation, ReluDerivativeAtZeroIsZero) {
  EXPECT_EQ(activate_grad(0.0, Activation::relu()), 0.0);
  EXPECT_EQ(activate_grad(1e-300, Activation::relu()), 1.0);
}

TEST(Activation, GradMatchesFiniteDifference) {
  const double h = 1e-6;
  for (Activation act : {Activation::relu(), Activation::tanh(), Activation::elu(),
                         Activation::elu(0.3), Activation::sigmoid(), Activation::identity()}) {
    for (double x : {-2.3, -0.7, -0.01, 0.02, 0.4, 1.9}) {
      const double fd = (activate(x + h, act) - activate(x - h, act)) / (2 * h);
      EXPECT_NEAR(activate_grad(x, act), fd, 1e-7) << to_string(act.kind) << " at " << x;
    }
  }
}

TEST(Activation, NameRoundTrip) {
  for (ActivationKind k : {ActivationKind::relu, ActivationKind::tanh, ActivationKind::elu,
                           ActivationKind::sigmoid, ActivationKind::identity})
    EXPECT_EQ(activation_from_string(to_string(k)), k);
  EXPECT_ANY_THROW(activation_from_string("swish"));
}

TEST(Loss, CrossEntropyValue) {
  const Tensor logits = Tensor::matrix({{0, 0}, {std::log(3.0), 0}});
  const std::vector<int> labels{0, 0};
  // -(log 1/2 + log 3/4) / 2
  const double expected = -(std::log(0.5) + std::log(0.75)) / 2.0;
  EXPECT_NEAR(softmax_cross_entropy(logits, labels).loss, expected, 1e-15);
}

TEST(Loss, CrossEntropyGradMatchesFiniteDifference) {
  Rng rng(9);
  Tensor logits = random_matrix(4, 5, rng);
  const std::vector<int> labels{0, 3, 4, 1};
  const Tensor g = softmax_cross_entropy(logits, labels).grad_logits;
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double keep = logits[i];
    logits[i] = keep + h;
    const double up = softmax_cross_entropy(logits, labels).loss;
    logits[i] = keep - h;
    const double down = softmax_cross_entropy(logits, labels).loss;
    logits[i] = keep;
    EXPECT_NEAR(g[i], (up - down) / (2 * h), 1e-8);
  }
}

TEST(Loss, StableForLargeLogits) {
  const Tensor logits = Tensor::matrix({{1000.0, -1000.0}});
  const std::vector<int> labels{0};
  const LossAndGrad lg = softmax_cross_entropy(logits, labels);
  EXPECT_TRUE(std::isfinite(lg.loss));
  EXPECT_NEAR(lg.loss, 0.0, 1e-12);
  const Tensor p = softmax(logits);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Loss, RejectsBadLabels) {
  const Tensor logits({2, 3});
  EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{0, 3}), LabelError);
  EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{0}), DimensionError);
}

TEST(Rng, DeriveSeedIsPureAndSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, "init", 2), derive_seed(1, "init", 2));
  EXPECT_NE(derive_seed(1, "init", 2), derive_seed(1, "init", 3));
  EXPECT_NE(derive_seed(1, "init"), derive_seed(1, "shuffle"));
  EXPECT_NE(derive_seed(1, "shuffle", 0, 1), derive_seed(1, "shuffle", 1, 0));
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    EXPECT_GE(u, -1.0);
    EXPECT_LT(u, 1.0);
  }
}
