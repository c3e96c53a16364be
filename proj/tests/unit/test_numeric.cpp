#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/numeric/adam.hpp"
#include "themescreen/numeric/checkpoint.hpp"
#include "themescreen/numeric/gradcheck.hpp"
#include "themescreen/numeric/ops.hpp"

using namespace themescreen;
using namespace themescreen::numeric;
using themescreen::testkit::random_matrix;

namespace {

// sum(Y ⊙ R) for a fixed random R, so dL/dY = R.
double weighted_sum(const Matrix& y, const Matrix& r) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * r.values()[i];
  return s;
}

}  // namespace

TEST(NumericMatrix, ConstructionChecks) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Matrix(1, 1, std::vector<double>{NAN}), ShapeError);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), ShapeError);
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.shape_string(), "2x3");
}

TEST(NumericMatmul, IdentityAndHandExample) {
  Rng rng(1);
  const auto m = random_matrix(3, 4, rng);
  EXPECT_EQ(matmul(Matrix::identity(3), m), m);
  EXPECT_EQ(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{5}, {6}}), (Matrix{{17}, {39}}));
}

TEST(NumericMatmul, ShapeErrorNamesShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(NumericMatmul, TransposedVariantsMatchExplicitTranspose) {
  Rng rng(2);
  const auto a = random_matrix(3, 4, rng);
  const auto b = random_matrix(5, 4, rng);
  const auto c = random_matrix(3, 2, rng);
  EXPECT_LT(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))), 1e-14);
  EXPECT_LT(max_abs_diff(matmul_tn(a, c), matmul(transpose(a), c)), 1e-14);
}

TEST(NumericMatmul, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  Param a(random_matrix(3, 4, rng));
  Param b(random_matrix(4, 2, rng));
  const auto r = random_matrix(3, 2, rng);
  auto loss = [&](bool grads) {
    const auto c = matmul(a.value, b.value);
    if (grads) {
      const auto g = matmul_backward(a.value, b.value, r);
      add_inplace(a.grad, g.da);
      add_inplace(b.grad, g.db);
    }
    return weighted_sum(c, r);
  };
  Param* params[] = {&a, &b};
  EXPECT_LT(finite_difference_check(loss, params), 1e-6);
}

TEST(NumericSoftmax, HandExamples) {
  const auto y = softmax_rows(Matrix{{0, 0}, {3.0, 3.0 + std::log(3.0)}});
  EXPECT_EQ(y(0, 0), 0.5);
  EXPECT_EQ(y(0, 1), 0.5);
  EXPECT_NEAR(y(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(y(1, 1), 0.75, 1e-15);
  const auto big = softmax_rows(Matrix{{1000, 1000 + std::log(3.0)}});
  EXPECT_NEAR(big(0, 1), 0.75, 1e-12);
}

TEST(NumericSoftmax, RowsSumToOneAndBackwardMatches) {
  Rng rng(4);
  Param x(random_matrix(4, 5, rng, 3.0));
  const auto y = softmax_rows(x.value);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double s = 0;
    for (double v : y.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const auto r = random_matrix(4, 5, rng);
  auto loss = [&](bool grads) {
    const auto out = softmax_rows(x.value);
    if (grads) add_inplace(x.grad, softmax_rows_backward(out, r));
    return weighted_sum(out, r);
  };
  Param* params[] = {&x};
  EXPECT_LT(finite_difference_check(loss, params), 1e-6);
}

TEST(NumericMeanPool, Examples) {
  EXPECT_EQ(mean_pool_rows(Matrix{{1, 2, 3}}), (Matrix{{1, 2, 3}}));
  EXPECT_EQ(mean_pool_rows(Matrix{{0, 2}, {2, 0}}), (Matrix{{1, 1}}));
  EXPECT_THROW(mean_pool_rows_backward(Matrix(2, 2), 3), ShapeError);
}

TEST(NumericMeanPool, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  Param x(random_matrix(3, 4, rng));
  const auto r = random_matrix(1, 4, rng);
  auto loss = [&](bool grads) {
    if (grads) add_inplace(x.grad, mean_pool_rows_backward(r, x.value.rows()));
    return weighted_sum(mean_pool_rows(x.value), r);
  };
  Param* params[] = {&x};
  EXPECT_LT(finite_difference_check(loss, params), 1e-6);
}

TEST(NumericConcat, SingleAndTwoParts) {
  Rng rng(6);
  const auto a = random_matrix(2, 3, rng);
  const auto b = random_matrix(3, 3, rng);
  const Matrix one[] = {a};
  const auto c1 = concat_rows(one);
  EXPECT_EQ(c1.values, a);
  EXPECT_EQ(c1.boundaries, (std::vector<std::size_t>{0, 2}));

  const Matrix two[] = {a, b};
  const auto c2 = concat_rows(two);
  EXPECT_EQ(c2.values.rows(), 5u);
  EXPECT_EQ(c2.boundaries, (std::vector<std::size_t>{0, 2, 5}));
  const auto parts = split_rows(c2.values, c2.boundaries);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0], a);
  EXPECT_EQ(parts[1], b);
}

TEST(NumericConcat, Errors) {
  const Matrix mixed[] = {Matrix(2, 3), Matrix(1, 4)};
  EXPECT_THROW(concat_rows(mixed), ShapeError);
  const std::vector<std::size_t> short_bounds{0, 2, 4};
  EXPECT_THROW(split_rows(Matrix(5, 2), short_bounds), ShapeError);
  const std::vector<std::size_t> unordered{0, 3, 2, 5};
  EXPECT_THROW(split_rows(Matrix(5, 2), unordered), ShapeError);
}

TEST(NumericAdam, ZeroGradientIsFixedPoint) {
  Param w(Matrix{{1.5, -2.0}});
  Adam adam({.learning_rate = 0.1});
  Param* params[] = {&w};
  for (int i = 0; i < 5; ++i) adam.step(params);
  EXPECT_EQ(w.value, (Matrix{{1.5, -2.0}}));
}

TEST(NumericAdam, DescendsOnSquare) {
  Param w(Matrix{{1.0}});
  Adam adam({.learning_rate = 0.1});
  Param* params[] = {&w};
  w.grad(0, 0) = 2.0 * w.value(0, 0);
  adam.step(params);
  EXPECT_LT(w.value(0, 0), 1.0);
  EXPECT_EQ(w.grad(0, 0), 0.0);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(NumericAdam, ConvergesOnQuadratic) {
  // f(w) = Σ c_i (w_i − t_i)²
  const std::vector<double> c{1.0, 3.0, 0.5};
  const std::vector<double> t{2.0, -1.0, 0.25};
  Param w(Matrix(1, 3));
  Adam adam({.learning_rate = 0.05});
  Param* params[] = {&w};
  double grad_norm = 0;
  for (int step = 0; step < 2000; ++step) {
    grad_norm = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      w.grad(0, i) = 2.0 * c[i] * (w.value(0, i) - t[i]);
      grad_norm += w.grad(0, i) * w.grad(0, i);
    }
    adam.step(params);
  }
  EXPECT_LT(std::sqrt(grad_norm), 1e-3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w.value(0, i), t[i], 1e-3);
}

TEST(NumericGradcheck, LinearIsExact) {
  Rng rng(7);
  Param w(random_matrix(1, 6, rng));
  const auto c = random_matrix(1, 6, rng);
  auto loss = [&](bool grads) {
    if (grads) add_inplace(w.grad, c);
    return weighted_sum(w.value, c);
  };
  Param* params[] = {&w};
  EXPECT_LT(finite_difference_check(loss, params), 1e-9);
  EXPECT_EQ(w.grad, c);
}

TEST(NumericGradcheck, CorruptedBackwardIsCaught) {
  Rng rng(8);
  Param x(random_matrix(3, 3, rng));
  const auto r = random_matrix(3, 3, rng);
  auto loss = [&](bool grads) {
    const auto y = softmax_rows(x.value);
    if (grads) add_inplace(x.grad, scaled(softmax_rows_backward(y, r), 1.1));
    return weighted_sum(y, r);
  };
  Param* params[] = {&x};
  EXPECT_GT(finite_difference_check(loss, params), 1e-2);
}

TEST(NumericGradcheck, NonFiniteLossThrows) {
  Param w(Matrix{{1.0}});
  Param* params[] = {&w};
  EXPECT_THROW(finite_difference_check([](bool) { return std::nan(""); }, params), Error);
}

TEST(NumericGradcheck, RestoresValues) {
  Rng rng(9);
  Param w(random_matrix(2, 2, rng));
  const auto before = w.value;
  Param* params[] = {&w};
  finite_difference_check([&](bool) { return std::exp(w.value(0, 0)) * w.value(1, 1); }, params);
  EXPECT_EQ(w.value, before);
}

TEST(NumericCheckpoint, RoundTripIsBitExact) {
  Rng rng(10);
  Checkpoint ck;
  ck.params["a"] = random_matrix(3, 2, rng);
  ck.params["b"] = Matrix{{1.0 / 3.0, -0.0, 1e-300}};
  ck.config = {{"d", 8}};
  ck.seed = 99;
  testkit::TempDir dir("ckpt");
  save_checkpoint(dir.path() / "c.json", ck);
  const auto back = load_checkpoint(dir.path() / "c.json");
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(std::signbit(back.params.at("b")(0, 1)), true);
}
