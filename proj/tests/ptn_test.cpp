#include <gtest/gtest.h>

#include <cmath>

#include "pdc/gradcheck.hpp"
#include "pdc/ptn.hpp"
#include "pdc/rng.hpp"
#include "test_util.hpp"

using pdc::AffineParams;
using pdc::Tensor;

TEST(AffineGrid, IdentityEqualsNormalizedLattice) {
  const Tensor grid = pdc::affine_grid(AffineParams::identity(), 4, 6);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      EXPECT_DOUBLE_EQ(grid(y, x, 0), pdc::norm_coord(x, 6));
      EXPECT_DOUBLE_EQ(grid(y, x, 1), pdc::norm_coord(y, 4));
    }
}

TEST(AffineGrid, PureTranslationShiftsX) {
  AffineParams a;
  a.theta = {1.0, 0.0, 0.5, 0.0, 1.0, 0.0};
  const Tensor grid = pdc::affine_grid(a, 3, 3);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_DOUBLE_EQ(grid(y, x, 0), pdc::norm_coord(x, 3) + 0.5);
      EXPECT_DOUBLE_EQ(grid(y, x, 1), pdc::norm_coord(y, 3));
    }
}

TEST(AffineGrid, QuarterTurnMatchesHandComputedLattice) {
  AffineParams a;
  a.theta = {0.0, -1.0, 0.0, 1.0, 0.0, 0.0};
  const Tensor grid = pdc::affine_grid(a, 3, 3);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) {
      const double xt = pdc::norm_coord(x, 3), yt = pdc::norm_coord(y, 3);
      EXPECT_DOUBLE_EQ(grid(y, x, 0), -yt);
      EXPECT_DOUBLE_EQ(grid(y, x, 1), xt);
    }
}

TEST(AffineGrid, TinyExtentRejected) {
  EXPECT_THROW(pdc::affine_grid(AffineParams::identity(), 1, 4), std::invalid_argument);
}

TEST(BilinearSample, IdentityGridIsBitExact) {
  pdc::Rng rng(5);
  const Tensor img = testutil::random_tensor({2, 4, 5}, rng);
  const Tensor grid = pdc::affine_grid(AffineParams::identity(), 4, 5);
  const Tensor out = pdc::bilinear_sample(img, grid);
  ASSERT_EQ(out.shape(), img.shape());
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_EQ(out[i], img[i]);
}

TEST(BilinearSample, ConstantImageStaysConstant) {
  const Tensor img = Tensor::full({1, 5, 5}, 2.25);
  AffineParams a;
  a.theta = {0.4, 0.1, 0.05, -0.1, 0.4, -0.05};  // contraction: stays in bounds
  const Tensor out = pdc::bilinear_sample(img, pdc::affine_grid(a, 5, 5));
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], 2.25, 1e-12);
}

TEST(BilinearSample, QuarterTurnIsExactPermutation) {
  Tensor img({1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) img[i] = static_cast<double>(i + 1);
  AffineParams a;
  a.theta = {0.0, -1.0, 0.0, 1.0, 0.0, 0.0};
  const Tensor out = pdc::bilinear_sample(img, pdc::affine_grid(a, 3, 3));
  // x_s = -y_t, y_s = x_t: out(y,x) = img(x, 2 - y) in lattice indices
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_EQ(out(0, y, x), img(0, x, 2 - y));
    }
}

TEST(BilinearSample, OutOfBoundsIsZeroWithZeroGradient) {
  pdc::Rng rng(6);
  const Tensor img = testutil::random_tensor({2, 4, 4}, rng);
  AffineParams a;
  a.theta = {1.0, 0.0, 5.0, 0.0, 1.0, 5.0};  // everything far outside
  const Tensor grid = pdc::affine_grid(a, 4, 4);
  const Tensor out = pdc::bilinear_sample(img, grid);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_EQ(out[i], 0.0);

  const Tensor gout = Tensor::full(out.shape(), 1.0);
  const pdc::SampleGrads g = pdc::bilinear_sample_backward(img, grid, gout);
  for (std::size_t i = 0; i < g.d_input.numel(); ++i) EXPECT_EQ(g.d_input[i], 0.0);
  for (std::size_t i = 0; i < g.d_grid.numel(); ++i) EXPECT_EQ(g.d_grid[i], 0.0);
}

TEST(BilinearSample, NonFiniteGridRejected) {
  Tensor grid({2, 2, 2});
  grid[0] = std::nan("");
  EXPECT_THROW(pdc::bilinear_sample(Tensor({1, 3, 3}), grid), pdc::numeric_error);
}

// Composition on an affine-linear image: sampling by A then B equals one
// sampling by the composed transform (bilinear interpolation is exact on
// linear images while samples stay interior).
TEST(BilinearSample, CompositionMatchesSingleTransform) {
  const std::size_t n = 7;
  Tensor img({1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      img(0, y, x) = 0.3 + 0.11 * static_cast<double>(x) - 0.07 * static_cast<double>(y);
    }
  AffineParams a, b;
  a.theta = {0.5, 0.1, 0.05, -0.08, 0.45, -0.03};
  b.theta = {0.6, -0.05, 0.02, 0.12, 0.5, 0.04};

  const Tensor once = pdc::bilinear_sample(img, pdc::affine_grid(a, n, n));
  const Tensor twice = pdc::bilinear_sample(once, pdc::affine_grid(b, n, n));

  // composed: t -> a(b(t)) since the second sampling feeds b's source coords
  // into the first transform's output space
  AffineParams c;
  c.theta[0] = a.theta[0] * b.theta[0] + a.theta[1] * b.theta[3];
  c.theta[1] = a.theta[0] * b.theta[1] + a.theta[1] * b.theta[4];
  c.theta[2] = a.theta[0] * b.theta[2] + a.theta[1] * b.theta[5] + a.theta[2];
  c.theta[3] = a.theta[3] * b.theta[0] + a.theta[4] * b.theta[3];
  c.theta[4] = a.theta[3] * b.theta[1] + a.theta[4] * b.theta[4];
  c.theta[5] = a.theta[3] * b.theta[2] + a.theta[4] * b.theta[5] + a.theta[5];
  const Tensor direct = pdc::bilinear_sample(img, pdc::affine_grid(c, n, n));

  for (std::size_t i = 0; i < direct.numel(); ++i) EXPECT_NEAR(twice[i], direct[i], 1e-9);
}

TEST(PtnBank, IdentityInitializationPassesThrough) {
  pdc::Rng rng(9);
  pdc::PtnBank bank("ptn", 3, rng);
  std::array<Tensor, 5> parts;
  for (std::size_t i = 0; i < 5; ++i) {
    parts[i] = testutil::random_tensor({2, 3, 8, 4}, rng);
  }
  const auto st = bank.forward(parts, false);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < parts[i].numel(); ++j) {
      EXPECT_NEAR(st.outputs[i][j], parts[i][j], 1e-9);
    }
    // theta rows are the identity transform
    for (std::size_t s = 0; s < 2; ++s) {
      EXPECT_DOUBLE_EQ(st.thetas[i](s, 0), 1.0);
      EXPECT_DOUBLE_EQ(st.thetas[i](s, 2), 0.0);
      EXPECT_DOUBLE_EQ(st.thetas[i](s, 4), 1.0);
    }
  }
}

TEST(PtnBank, ZeroInputsGiveZeroOutputs) {
  pdc::Rng rng(10);
  pdc::PtnBank bank("ptn", 3, rng);
  std::array<Tensor, 5> parts;
  for (std::size_t i = 0; i < 5; ++i) parts[i] = Tensor({1, 3, 6, 4});
  const auto st = bank.forward(parts, false);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < st.outputs[i].numel(); ++j) EXPECT_EQ(st.outputs[i][j], 0.0);
  }
}

TEST(PtnBank, HeadHasNoTransformer) {
  // five nets, indexed over the non-head parts
  EXPECT_EQ(pdc::PtnBank::kPtnParts.size(), 5u);
  for (int p : pdc::PtnBank::kPtnParts) EXPECT_NE(p, pdc::kPartHead);
}

TEST(GradCheck, PtnSamplerGradientsPass) {
  for (const auto& row : pdc::gradcheck_ptn(23)) {
    EXPECT_TRUE(row.pass) << row.component << " max err " << row.max_err;
  }
}

// Finite-difference check of a scalar loss through the full per-part PTN,
// independent of the library's gradcheck harness.
TEST(PtnBank, ThetaGradientsMatchFiniteDifferences) {
  pdc::Rng rng(31);
  const Tensor input = testutil::random_tensor({2, 5, 4}, rng);
  AffineParams a;
  for (auto& t : a.theta) t += rng.normal(0.0, 0.05);
  a.theta[2] += 0.011;
  a.theta[5] += 0.007;
  const Tensor probe = testutil::random_tensor({2, 5, 4}, rng);

  const auto loss = [&] {
    const Tensor out = pdc::bilinear_sample(input, pdc::affine_grid(a, 5, 4));
    double acc = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) acc += probe[i] * out[i];
    return acc;
  };
  const Tensor grid = pdc::affine_grid(a, 5, 4);
  const auto grads = pdc::bilinear_sample_backward(input, grid, probe);
  const auto d_theta = pdc::affine_grid_backward(grads.d_grid);
  for (std::size_t t = 0; t < 6; ++t) {
    const double numeric = testutil::fd_slot(a.theta[t], loss);
    EXPECT_LT(testutil::rel_err(d_theta[t], numeric), 1e-4) << "theta " << t;
  }
}
