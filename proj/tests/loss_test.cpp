#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tdh/error.hpp"
#include "tdh/loss.hpp"
#include "test_support.hpp"

namespace tdh {
namespace {

using testing::finite_difference;
using testing::max_relative_error;
using testing::naive_j_re;
using testing::naive_nll;
using testing::naive_total;
using testing::random_codes;
using testing::random_matrix;
using testing::random_triplets;

const double kLog2 = std::log(2.0);

TEST(Sigmoid, KnownValues) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(100.0), 1.0, 1e-12);
  for (double x : {-700.0, -30.0, -1.5, 0.3, 2.0, 30.0, 700.0}) {
    EXPECT_NEAR(sigmoid(x), 1.0 - sigmoid(-x), 1e-15) << x;
    EXPECT_GE(sigmoid(x), 0.0);
    EXPECT_LE(sigmoid(x), 1.0);
    EXPECT_TRUE(std::isfinite(sigmoid(x)));
  }
  EXPECT_GT(sigmoid(-30.0), 0.0);
  EXPECT_LT(sigmoid(30.0), 1.0);
}

TEST(Softplus, StableAtExtremes) {
  EXPECT_NEAR(softplus(0.0), kLog2, 1e-15);
  EXPECT_DOUBLE_EQ(softplus(1e4), 1e4);
  EXPECT_EQ(softplus(-1e4), 0.0);
  EXPECT_NEAR(softplus(3.0), std::log(1.0 + std::exp(3.0)), 1e-14);
}

TEST(Theta, HalfDotProduct) {
  const std::vector<double> ones(4, 1.0);
  EXPECT_EQ(theta(ones, ones), 2.0);
  EXPECT_EQ(theta(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_EQ(theta(std::vector<double>{1, -1}, std::vector<double>{1, 1}), 0.0);
  EXPECT_THROW(theta(std::vector<double>{1, 2}, std::vector<double>{1}), ShapeError);
}

TEST(TripletNll, BalancedTripletCostsLog2) {
  // Columns 1 and 2 are equal, so theta_ap == theta_an.
  const Matrix a = Matrix::from_rows({{1, 0.5, 0.5}, {-2, 1, 1}});
  const std::vector<TripletLabel> t{{0, 1, 2}};
  EXPECT_NEAR(triplet_nll(a, a, a, t, 0.0), kLog2, 1e-15);
}

TEST(TripletNll, SaturatesToZero) {
  // theta_ap - theta_an - alpha = 0.5 * 100 - 0 - 0 = 50
  const Matrix a = Matrix::from_rows({{10, 10, 0}});
  const Matrix p = Matrix::from_rows({{0, 10, 0}});
  const std::vector<TripletLabel> t{{0, 1, 2}};
  EXPECT_NEAR(triplet_nll(a, p, p, t, 0.0), 0.0, 1e-12);
}

TEST(TripletNll, MatchesScalarLoop) {
  std::mt19937_64 rng(11);
  const Matrix a = random_matrix(4, 6, rng);
  const Matrix p = random_matrix(4, 6, rng);
  const Matrix n = random_matrix(4, 6, rng);
  const auto t = random_triplets(10, 6, rng);
  const double got = triplet_nll(a, p, n, t, 2.0);
  EXPECT_NEAR(got, naive_nll(a, p, n, t, 2.0), 1e-12 * std::max(1.0, std::abs(got)));
}

TEST(TripletNll, ErrorsNameTheTriplet) {
  const Matrix a(2, 3, 1.0);
  const std::vector<TripletLabel> bad{{0, 1, 2}, {0, 1, 7}};
  try {
    triplet_nll(a, a, a, bad, 0.0);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("triplet 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(triplet_nll(a, a, a, std::vector<TripletLabel>{{0, 1, 1}}, 0.0), InvalidArgument);
  EXPECT_THROW(triplet_nll(a, Matrix(3, 3), a, {}, 0.0), ShapeError);
}

TEST(TripletNll, FiniteForLargeGaps) {
  for (double gap : {-1e4, -700.0, -1.0, 0.0, 1.0, 700.0, 1e4}) {
    // theta_ap - theta_an = gap with a = [2], p = [gap], n = [0]
    const Matrix a = Matrix::from_rows({{2.0, 0.0, 0.0}});
    const Matrix p = Matrix::from_rows({{0.0, gap, 0.0}});
    const double v = triplet_nll(a, p, p, std::vector<TripletLabel>{{0, 1, 2}}, 0.0);
    EXPECT_TRUE(std::isfinite(v)) << gap;
    EXPECT_GE(v, 0.0);
  }
}

TEST(TripletNll, MonotoneInAgreement) {
  std::mt19937_64 rng(5);
  Matrix a = random_matrix(3, 3, rng);
  a(0, 0) = 1.0;
  const std::vector<TripletLabel> t{{0, 1, 2}};
  const double base = triplet_nll(a, a, a, t, 1.0);
  Matrix weaker_pos = a;
  weaker_pos(0, 1) -= 0.5;  // lowers theta_ap
  Matrix stronger_neg = a;
  stronger_neg(0, 2) += 0.5;  // raises theta_an
  EXPECT_GT(triplet_nll(a, weaker_pos, a, t, 1.0), base);
  EXPECT_GT(triplet_nll(a, a, stronger_neg, t, 1.0), base);
}

TEST(JInter, IdenticalModalitiesAndEmptyTriplets) {
  const Matrix f = Matrix::from_rows({{1, 2, 2}, {0, -1, -1}});
  const std::vector<TripletLabel> t{{0, 1, 2}, {1, 1, 2}, {2, 2, 1}};
  EXPECT_NEAR(j_inter(f, f, t, 0.0), 2.0 * 3.0 * kLog2, 1e-14);
  EXPECT_EQ(j_inter(f, f, {}, 4.0), 0.0);
  EXPECT_THROW(j_inter(f, Matrix(2, 4), t, 0.0), ShapeError);
}

TEST(JInter, EqualsSumOfDirectionalTerms) {
  std::mt19937_64 rng(21);
  const Matrix f = random_matrix(4, 7, rng);
  const Matrix g = random_matrix(4, 7, rng);
  const auto t = random_triplets(9, 7, rng);
  EXPECT_NEAR(j_inter(f, g, t, 1.5), naive_nll(f, g, g, t, 1.5) + naive_nll(g, f, f, t, 1.5), 1e-12);
}

TEST(JIntra, IdenticalColumnsAndNaiveOracle) {
  const Matrix f = Matrix::from_rows({{1, 1, 1}, {2, 2, 2}});
  EXPECT_NEAR(j_intra(f, f, std::vector<TripletLabel>{{0, 1, 2}}, 0.0), 2.0 * kLog2, 1e-15);
  EXPECT_EQ(j_intra(f, f, {}, 0.0), 0.0);

  std::mt19937_64 rng(22);
  const Matrix a = random_matrix(4, 7, rng);
  const Matrix b = random_matrix(4, 7, rng);
  const auto t = random_triplets(9, 7, rng);
  EXPECT_NEAR(j_intra(a, b, t, 0.5), naive_nll(a, a, a, t, 0.5) + naive_nll(b, b, b, t, 0.5), 1e-12);
}

TEST(JRe, ZeroWhenCodesMatchAndBalanced) {
  // Rows sum to zero and F == G == B.
  const Matrix f = Matrix::from_rows({{1, -1, 1, -1}, {-1, -1, 1, 1}});
  const CodeMatrix b(f);
  EXPECT_EQ(j_re(f, f, b, Matrix(4, 4), 100.0, 50.0, 0.0), 0.0);
}

TEST(JRe, QuantizationOnlyCase) {
  const std::size_t k = 3;
  const std::size_t n = 5;
  const CodeMatrix b(Matrix(k, n, 1.0));
  EXPECT_EQ(j_re(Matrix(k, n), Matrix(k, n), b, Matrix(n, n), 100.0, 50.0, 1.0), 100.0 * 2.0 * k * n);
}

TEST(JRe, MatchesTermByTerm) {
  std::mt19937_64 rng(23);
  const Matrix f = random_matrix(4, 6, rng);
  const Matrix g = random_matrix(4, 6, rng);
  const CodeMatrix b = random_codes(4, 6, rng);
  const auto labels = testing::random_labels(6, 3, rng);
  const auto graph = build_graph(labels);
  const double got = j_re(f, g, b, graph.laplacian, 3.0, 2.0, 1.5);
  const double want = naive_j_re(f, g, b.matrix(), graph.laplacian, 3.0, 2.0, 1.5);
  EXPECT_NEAR(got, want, 1e-10 * std::abs(want));
  EXPECT_THROW(j_re(f, g, b, Matrix(5, 5), 1, 1, 1), ShapeError);
}

TEST(TotalLoss, BreakdownSums) {
  const LossBreakdown zero = total_loss(Matrix(2, 3), Matrix(2, 3), CodeMatrix(Matrix(2, 3, 1.0)),
                                        Matrix(3, 3), {}, HyperParams{0, 0, 0, 0, 2});
  EXPECT_EQ(zero.total, 0.0);

  std::mt19937_64 rng(24);
  const Matrix f = random_matrix(4, 6, rng);
  const Matrix g = random_matrix(4, 6, rng);
  const CodeMatrix b = random_codes(4, 6, rng);
  const auto graph = build_graph(testing::random_labels(6, 3, rng));
  const auto t = random_triplets(8, 6, rng);
  const HyperParams hp = HyperParams::defaults_for(4);
  const LossBreakdown l = total_loss(f, g, b, graph.laplacian, t, hp);
  EXPECT_NEAR(l.total, l.j_inter + l.j_intra + l.j_re, 1e-12 * std::abs(l.total));
  const double want = naive_total(f, g, b.matrix(), graph.laplacian, t, hp);
  EXPECT_NEAR(l.total, want, 1e-10 * std::abs(want));
}

TEST(HyperParams, Defaults) {
  const HyperParams hp = HyperParams::defaults_for(16);
  EXPECT_EQ(hp.alpha, 8.0);
  EXPECT_EQ(hp.gamma, 100.0);
  EXPECT_EQ(hp.eta, 50.0);
  EXPECT_EQ(hp.beta, 1.0);
}

TEST(Gradient, RegularizerOnlyCases) {
  std::mt19937_64 rng(30);
  const Matrix f = random_matrix(3, 5, rng);
  const Matrix g = random_matrix(3, 5, rng);
  const CodeMatrix b = random_codes(3, 5, rng);
  HyperParams hp{1.0, 7.0, 0.0, 1.0, 3};
  EXPECT_LT(max_abs(grad_g(f, g, b, {}, hp) - 14.0 * (g - b.matrix())), 1e-13);
  EXPECT_LT(max_abs(grad_f(f, g, b, {}, hp) - 14.0 * (f - b.matrix())), 1e-13);

  // gamma = 0 and zero row sums leave nothing.
  const Matrix balanced = Matrix::from_rows({{1, -1, 2, -2, 0}, {3, -3, 0, 0, 0}, {0, 0, 0, 0, 0}});
  hp = HyperParams{1.0, 0.0, 5.0, 1.0, 3};
  EXPECT_EQ(max_abs(grad_g(f, balanced, b, {}, hp)), 0.0);
}

TEST(Gradient, MirroredSetupIsSymmetric) {
  std::mt19937_64 rng(31);
  const Matrix f = random_matrix(4, 6, rng);
  const Matrix g = random_matrix(4, 6, rng);
  const CodeMatrix b = random_codes(4, 6, rng);
  const auto t = random_triplets(7, 6, rng);
  const HyperParams hp = HyperParams::defaults_for(4);
  // Swapping the modalities swaps the roles of the two gradients.
  EXPECT_EQ(grad_f(f, g, b, t, hp), grad_g(g, f, b, t, hp));
  EXPECT_EQ(grad_g(f, g, b, t, hp), grad_f(g, f, b, t, hp));
}

struct GradCase {
  std::size_t k;
  std::size_t n;
};

class GradientFiniteDifference : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientFiniteDifference, MatchesCentralDifferences) {
  const auto [k, n] = GetParam();
  std::mt19937_64 rng(100 + k * 10 + n);
  const Matrix f = random_matrix(k, n, rng);
  const Matrix g = random_matrix(k, n, rng);
  const CodeMatrix b = random_codes(k, n, rng);
  const auto graph = build_graph(testing::random_labels(n, 3, rng));
  const auto t = random_triplets(12, n, rng);
  const HyperParams hp = HyperParams::defaults_for(k);

  const Matrix num_g = finite_difference(
      g, [&](const Matrix& gg) { return total_loss(f, gg, b, graph.laplacian, t, hp).total; });
  const Matrix num_f = finite_difference(
      f, [&](const Matrix& ff) { return total_loss(ff, g, b, graph.laplacian, t, hp).total; });
  EXPECT_LT(max_relative_error(grad_g(f, g, b, t, hp), num_g), 1e-5);
  EXPECT_LT(max_relative_error(grad_f(f, g, b, t, hp), num_f), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Shapes, GradientFiniteDifference,
                         ::testing::Values(GradCase{2, 5}, GradCase{2, 10}, GradCase{4, 5},
                                           GradCase{4, 10}, GradCase{8, 5}, GradCase{8, 10}));

TEST(Gradient, AnchorOnlyModeDropsNonAnchorRoles) {
  // One triplet (0, 1, 2): only column 0 is an anchor, so with no
  // regularization the anchor-only gradient vanishes on columns 1 and 2.
  std::mt19937_64 rng(40);
  const Matrix f = random_matrix(3, 3, rng);
  const Matrix g = random_matrix(3, 3, rng);
  const CodeMatrix b = random_codes(3, 3, rng);
  const std::vector<TripletLabel> t{{0, 1, 2}};
  const HyperParams hp{1.0, 0.0, 0.0, 0.0, 3};
  const Matrix literal = grad_g(f, g, b, t, hp, GradientMode::anchor_only);
  const Matrix full = grad_g(f, g, b, t, hp, GradientMode::full);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(literal(r, 1), 0.0);
    EXPECT_EQ(literal(r, 2), 0.0);
    EXPECT_NE(full(r, 1), 0.0);
    // Anchor column: -1/2 (1 - s1)(F_p - F_n) - 1/2 (1 - s2)(G_p - G_n)
    const double s1 = sigmoid(0.5 * (dot(g.col(0), f.col(1)) - dot(g.col(0), f.col(2))) - 1.0);
    const double s2 = sigmoid(0.5 * (dot(g.col(0), g.col(1)) - dot(g.col(0), g.col(2))) - 1.0);
    const double want = -0.5 * (1 - s1) * (f(r, 1) - f(r, 2)) - 0.5 * (1 - s2) * (g(r, 1) - g(r, 2));
    EXPECT_NEAR(literal(r, 0), want, 1e-14);
  }
}

}  // namespace
}  // namespace tdh
