#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "tsnmt/errors.hpp"
#include "tsnmt/random.hpp"
#include "tsnmt/tensor.hpp"

using namespace tsnmt;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace

TEST(Matmul, IdentityAndAnnihilator) {
  Tape t(false);
  Var id = t.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var m = t.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(id, m).value(), m.value());
  Var a = t.constant(Tensor::from_rows({{1, 0}, {0, 0}}));
  Var b = t.constant(Tensor::from_rows({{0}, {5}}));
  EXPECT_EQ(matmul(a, b).value(), Tensor::from_rows({{0}, {0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(6), k = 1 + rng.below(6), n = 1 + rng.below(6);
    Tensor a = random_tensor(rng, m, k), b = random_tensor(rng, k, n);
    Tape t(false);
    const Tensor got = matmul(t.constant(a), t.constant(b)).value();
    const Tensor want = naive_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
  Tape t(false);
  Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 4, 2);
  const Tensor got = matmul(t.constant(a), t.constant(b)).value();
  EXPECT_EQ(got.rows(), 3u);
  EXPECT_EQ(got.cols(), 2u);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Tape t;
  try {
    matmul(t.constant(Tensor(2, 3)), t.constant(Tensor(2, 3)));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Elementwise, BasicValues) {
  Tape t(false);
  EXPECT_EQ(tanh(t.constant(0.0)).item(), 0.0);
  EXPECT_EQ(sigmoid(t.constant(0.0)).item(), 0.5);
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    EXPECT_NEAR(log(exp(t.constant(x))).item(), x, 1e-12);
  }
  const std::array<Var, 2> args = {t.constant(Tensor::row({1, 2})), t.constant(3.0)};
  EXPECT_EQ(elementwise(ElementwiseOp::Mul, args).value(), Tensor::row({3, 6}));
  EXPECT_EQ(elementwise(ElementwiseOp::Sub, args).value(), Tensor::row({-2, -1}));
}

TEST(Elementwise, LogOfNonPositiveIsDomainError) {
  Tape t;
  EXPECT_THROW(log(t.constant(0.0)), DomainError);
  EXPECT_THROW(log(t.constant(Tensor::row({1.0, -2.0}))), DomainError);
}

TEST(Elementwise, OnlyScalarOrEqualShapesBroadcast) {
  Tape t;
  EXPECT_THROW(add(t.constant(Tensor(2, 3)), t.constant(Tensor(1, 3))), DimensionError);
  EXPECT_NO_THROW(add(t.constant(Tensor(2, 3)), t.constant(1.0)));
  EXPECT_NO_THROW(mul(t.constant(2.0), t.constant(Tensor(2, 3))));
}

TEST(Elementwise, OverflowIsAnError) {
  Tape t;
  EXPECT_THROW(exp(t.constant(1000.0)), NumericError);
}

TEST(Softmax, KnownCases) {
  Tape t(false);
  const Tensor u = softmax(t.constant(Tensor::row({0, 0, 0}))).value();
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  for (double x : {-3.0, 0.0, 2.5}) {
    for (double c : {-4.0, 0.5, 7.0}) {
      const Tensor s = softmax(t.constant(Tensor::row({x, x + c}))).value();
      EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(c)), 1e-14);
      EXPECT_NEAR(s[1], 1.0 / (1.0 + std::exp(-c)), 1e-14);
    }
  }
  const Tensor big = softmax(t.constant(Tensor::row({1000, 0}))).value();
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(big[1], 0.0);
}

TEST(Softmax, RowsAreDistributions) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t(false);
    const Tensor x = random_tensor(rng, 1 + rng.below(8), 1 + rng.below(8), -30, 30);
    const Tensor s = softmax(t.constant(x)).value();
    const Tensor ls = log_softmax(t.constant(x)).value();
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) {
        EXPECT_GE(s(r, c), 0.0);
        EXPECT_LE(s(r, c), 1.0);
        EXPECT_NEAR(std::exp(ls(r, c)), s(r, c), 1e-12);
        sum += s(r, c);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(GatherRows, SelectsRows) {
  Tape t(false);
  Var table = t.constant(Tensor::from_rows({{0, 1}, {10, 11}, {20, 21}}));
  const std::array<std::int32_t, 2> ids = {2, 0};
  EXPECT_EQ(gather_rows(table, ids).value(), Tensor::from_rows({{20, 21}, {0, 1}}));
  const Tensor empty = gather_rows(table, std::span<const std::int32_t>()).value();
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_EQ(empty.cols(), 2u);
}

TEST(GatherRows, OutOfRangeNamesTheId) {
  Tape t;
  Var table = t.constant(Tensor(3, 2));
  const std::array<std::int32_t, 2> ids = {1, 7};
  try {
    gather_rows(table, ids);
    FAIL() << "expected IndexError";
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST(GatherRows, RepeatedIdsAccumulate) {
  Rng rng(5);
  std::vector<Tensor> params = {random_tensor(rng, 4, 3), random_tensor(rng, 3, 1)};
  const std::array<std::int32_t, 5> ids = {1, 3, 1, 1, 0};
  auto f = [&](Tape&, std::span<const Var> p) { return sum(tanh(matmul(gather_rows(p[0], ids), p[1]))); };
  EXPECT_LT(finite_difference_check(f, params).max_rel_error, 1e-4);

  Tape t;
  Var table = t.leaf(params[0]);
  t.backward(sum(gather_rows(table, ids)));
  const Tensor g = t.grad(table);
  EXPECT_EQ(g(1, 0), 3.0);
  EXPECT_EQ(g(3, 2), 1.0);
  EXPECT_EQ(g(2, 1), 0.0);
}

TEST(Backward, AnalyticCases) {
  Tensor x = Tensor::scalar(3.0);
  Tape t;
  Var v = t.leaf(x);
  t.backward(mul(v, v));
  EXPECT_EQ(t.grad(v)[0], 6.0);

  Rng rng(9);
  Tensor w = random_tensor(rng, 1, 6, -3, 3);
  Tape t2;
  Var lw = t2.leaf(w);
  t2.backward(sum(softmax(lw)));
  const Tensor gw = t2.grad(lw);
  for (double g : gw.values()) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x(2, 2, 1.0);
  Tape t;
  Var v = t.leaf(x);
  EXPECT_THROW(t.backward(tanh(v)), ContractError);
}

TEST(Backward, SecondPassRejected) {
  Tensor x = Tensor::scalar(2.0);
  Tape t;
  Var v = t.leaf(x);
  Var loss = mul(v, v);
  t.backward(loss);
  EXPECT_TRUE(t.backward_done());
  EXPECT_THROW(t.backward(loss), ContractError);
  EXPECT_EQ(t.grad(v)[0], 4.0);
}

TEST(Backward, GradientFreeTapeRecordsNoGradient) {
  Tensor x = Tensor::scalar(2.0);
  Tape t(false);
  Var v = t.leaf(x);
  t.backward(mul(v, v));
  EXPECT_FALSE(t.has_grad(v));
  EXPECT_EQ(t.grad(v)[0], 0.0);
}

TEST(FiniteDifference, QuadraticFormAndConstant) {
  Rng rng(21);
  Tensor a = random_tensor(rng, 4, 4);
  std::vector<Tensor> params = {random_tensor(rng, 1, 4)};
  auto quad = [&](Tape& t, std::span<const Var> p) {
    return sum(mul(matmul(p[0], t.constant(a)), p[0]));
  };
  EXPECT_LT(finite_difference_check(quad, params).max_rel_error, 1e-7);

  auto constant = [](Tape& t, std::span<const Var>) { return t.constant(4.2); };
  const GradCheckResult r = finite_difference_check(constant, params);
  EXPECT_EQ(r.max_rel_error, 0.0);
  EXPECT_EQ(r.analytic, 0.0);
  EXPECT_EQ(r.numeric, 0.0);
}

// Randomized compositions of every differentiable op, shapes up to 8x8.
TEST(FiniteDifference, RandomCompositions) {
  Rng rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
    std::vector<Tensor> params = {random_tensor(rng, m, k), random_tensor(rng, k, n), random_tensor(rng, 1, n),
                                  random_tensor(rng, m, n, 0.5, 2.0)};
    const int variant = trial % 6;
    auto f = [&](Tape& t, std::span<const Var> p) -> Var {
      Var h = add(matmul(p[0], p[1]), broadcast_rows(p[2], m));
      switch (variant) {
        case 0: return sum(mul(tanh(h), p[3]));
        case 1: return sum(log_softmax(h));
        case 2: return sum(mul(softmax(h), p[3]));
        case 3: return sum(log(add(mul(p[3], p[3]), sigmoid(h))));
        case 4: {
          const std::array<Var, 2> cols = {slice_cols(h, 0, 1), exp(scale(slice_cols(p[3], 0, 1), 0.5))};
          Var c = concat_cols(cols);
          return sum(mul(sum_rows(c), t.constant(Tensor(1, 2, 0.7))));
        }
        default: {
          const std::array<Var, 2> rows = {slice_rows(transpose(h), 0, 1), sub(1.0, slice_rows(transpose(p[3]), 0, 1))};
          return weighted_sum(concat_rows(rows), Tensor(2, m, 0.3));
        }
      }
    };
    const GradCheckResult r = finite_difference_check(f, params);
    EXPECT_LT(r.max_rel_error, 1e-4) << "variant " << variant << " param " << r.worst_param << " index "
                                     << r.worst_index << " analytic " << r.analytic << " numeric " << r.numeric;
  }
}

TEST(Tape, TopologicalByConstruction) {
  Tensor a = Tensor::scalar(1.5);
  Tape t;
  Var x = t.leaf(a);
  Var y = tanh(x);
  Var z = mul(y, x);
  EXPECT_LT(x.id(), y.id());
  EXPECT_LT(y.id(), z.id());
  EXPECT_EQ(t.size(), 3u);
}
