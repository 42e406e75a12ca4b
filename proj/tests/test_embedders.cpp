#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "coordfit/embedders.hpp"
#include "coordfit/kvconfig.hpp"
#include "coordfit/signals.hpp"
#include "test_util.hpp"

namespace coordfit {
namespace {

using testing::relative_error;

// Central differences of the embedding with respect to each coordinate axis.
Eigen::MatrixXd numeric_jacobian(const Eigen::VectorXd& x, double sigma, const SuperGaussianConfig& cfg,
                                 double h = 1e-5) {
  Eigen::MatrixXd jac(cfg.d_embed, x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Eigen::VectorXd plus = x, minus = x;
    plus(a) += h;
    minus(a) -= h;
    jac.col(a) = (super_gaussian_embed(plus, sigma, cfg) - super_gaussian_embed(minus, sigma, cfg)) / (2 * h);
  }
  return jac;
}

TEST(SuperGaussianEmbed, PeakAtCenter) {
  const SuperGaussianConfig cfg = make_super_gaussian(1, 16, 2.0, 1e-3, SuperGaussianMode::projected);
  Eigen::VectorXd x(1);
  x << cfg.centers(5);
  const Eigen::VectorXd phi = super_gaussian_embed(x, 0.05, cfg);
  EXPECT_DOUBLE_EQ(phi(5), 1.0);
  for (Eigen::Index i = 0; i < phi.size(); ++i)
    if (i != 5) EXPECT_LT(phi(i), 1.0);
}

TEST(SuperGaussianEmbed, AnalyticOffsets) {
  const double sigma = 0.07;
  SuperGaussianConfig b1 = make_super_gaussian(1, 8, 1.0, 1e-3, SuperGaussianMode::projected);
  Eigen::VectorXd x(1);
  x << b1.centers(3) + sigma * std::sqrt(2.0);
  EXPECT_NEAR(super_gaussian_embed(x, sigma, b1)(3), std::exp(-1.0), 1e-12);

  SuperGaussianConfig b2 = make_super_gaussian(1, 8, 2.0, 1e-3, SuperGaussianMode::projected);
  x << b2.centers(3) + sigma;
  EXPECT_NEAR(super_gaussian_embed(x, sigma, b2)(3), std::exp(-1.0), 1e-12);
}

TEST(SuperGaussianEmbed, RejectsSigmaBelowFloor) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 16);
  EXPECT_THROW(super_gaussian_embed(Eigen::VectorXd::Constant(1, 0.5), 5e-4, cfg), std::invalid_argument);
  EXPECT_THROW(super_gaussian_jacobian(Eigen::VectorXd::Constant(1, 0.5), 0.0, cfg), std::invalid_argument);
}

TEST(SuperGaussianEmbed, ComponentsInUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SuperGaussianConfig cfg = default_super_gaussian(2, 64);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const Eigen::VectorXd phi = super_gaussian_embed(x, 0.002 + 0.2 * u(rng), cfg);
    EXPECT_GE(phi.minCoeff(), 0.0);
    EXPECT_LE(phi.maxCoeff(), 1.0);
  }
}

TEST(SuperGaussianEmbed, PerAxisConcatenatesOneDimensionalEmbeddings) {
  const SuperGaussianConfig two = default_super_gaussian(2, 32);
  const SuperGaussianConfig one = make_super_gaussian(1, 16, two.b, two.sigma_min, SuperGaussianMode::projected);
  const Eigen::Vector2d x(0.3, 0.71);
  const Eigen::VectorXd phi = super_gaussian_embed(x, 0.05, two);
  EXPECT_LT(relative_error(phi.head(16), super_gaussian_embed(Eigen::VectorXd::Constant(1, 0.3), 0.05, one)), 1e-15);
  EXPECT_LT(relative_error(phi.tail(16), super_gaussian_embed(Eigen::VectorXd::Constant(1, 0.71), 0.05, one)), 1e-15);
}

TEST(SuperGaussianEmbed, BatchMatchesPointwise) {
  const SuperGaussianConfig cfg = make_super_gaussian(2, 24, 2.0, 1e-3, SuperGaussianMode::projected,
                                                      Eigen::Vector2d(0.8, 0.3));
  const Eigen::MatrixXd x = lattice_coords({4, 5});
  const Eigen::VectorXd sigma = Eigen::VectorXd::LinSpaced(x.rows(), 0.01, 0.2);
  const Eigen::MatrixXd batch = super_gaussian_embed_batch(x, sigma, cfg);
  const Eigen::MatrixXd dsig = super_gaussian_sigma_derivative_batch(x, sigma, cfg);
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    EXPECT_LT(relative_error(batch.row(p).transpose(), super_gaussian_embed(x.row(p).transpose(), sigma(p), cfg)), 1e-14);
    EXPECT_LT(relative_error(dsig.row(p).transpose(),
                             super_gaussian_sigma_derivative(x.row(p).transpose(), sigma(p), cfg)), 1e-14);
  }
}

TEST(SuperGaussianJacobian, ZeroRowAtCenter) {
  const SuperGaussianConfig cfg = make_super_gaussian(2, 16, 2.0, 1e-3, SuperGaussianMode::projected,
                                                      Eigen::Vector2d(0.5, 0.5));
  const Eigen::Vector2d x(0.2, cfg.centers(7) * 2.0 - 0.2);  // x.alpha == t_7
  const Eigen::MatrixXd jac = super_gaussian_jacobian(x, 0.04, cfg);
  EXPECT_EQ(jac.row(7).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SuperGaussianJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SuperGaussianConfig one = default_super_gaussian(1, 32);
  const SuperGaussianConfig two = default_super_gaussian(2, 32);
  const SuperGaussianConfig proj =
      make_super_gaussian(2, 32, 1.5, 1e-3, SuperGaussianMode::projected, Eigen::Vector2d(0.6, 0.4));
  for (int trial = 0; trial < 100; ++trial) {
    const double sigma = 0.01 + 0.2 * u(rng);
    const Eigen::VectorXd x1 = Eigen::VectorXd::Constant(1, u(rng));
    const Eigen::Vector2d x2(u(rng), u(rng));
    EXPECT_LT(relative_error(super_gaussian_jacobian(x1, sigma, one), numeric_jacobian(x1, sigma, one)), 1e-4);
    EXPECT_LT(relative_error(super_gaussian_jacobian(x2, sigma, two), numeric_jacobian(x2, sigma, two)), 1e-4);
    EXPECT_LT(relative_error(super_gaussian_jacobian(x2, sigma, proj), numeric_jacobian(x2, sigma, proj)), 1e-4);
  }
}

TEST(SuperGaussianJacobian, DoublingSigmaHalvesPartialsAtFixedOffsetRatio) {
  const SuperGaussianConfig cfg = make_super_gaussian(1, 8, 2.0, 1e-3, SuperGaussianMode::projected);
  const double ratio = 0.8;
  for (double sigma : {0.02, 0.05, 0.1}) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, cfg.centers(4) + ratio * sigma);
    const Eigen::VectorXd x2 = Eigen::VectorXd::Constant(1, cfg.centers(4) + ratio * 2 * sigma);
    // d phi / dx = -b r / sigma * exp(-b r^2 / 2) at offset r sigma.
    const double expected = -cfg.b * ratio / sigma * std::exp(-cfg.b * ratio * ratio / 2);
    const double at_sigma = super_gaussian_jacobian(x, sigma, cfg)(4, 0);
    const double at_double = super_gaussian_jacobian(x2, 2 * sigma, cfg)(4, 0);
    EXPECT_NEAR(at_sigma, expected, 1e-12 * std::abs(expected));
    EXPECT_NEAR(at_double, 0.5 * at_sigma, 1e-12 * std::abs(at_sigma));
  }
}

TEST(SuperGaussianSigmaDerivative, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SuperGaussianConfig cfg = default_super_gaussian(2, 40);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const double sigma = 0.01 + 0.1 * u(rng);
    const double h = 1e-6;
    const Eigen::VectorXd numeric =
        (super_gaussian_embed(x, sigma + h, cfg) - super_gaussian_embed(x, sigma - h, cfg)) / (2 * h);
    EXPECT_LT(relative_error(super_gaussian_sigma_derivative(x, sigma, cfg), numeric), 1e-6);
  }
}

TEST(SuperGaussianPullback, MatchesExplicitJacobianProduct) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& cfg : {default_super_gaussian(2, 20), make_super_gaussian(2, 20, 2.0, 1e-3, SuperGaussianMode::projected,
                                                                             Eigen::Vector2d(0.3, 0.9))}) {
    Eigen::MatrixXd x(6, 2), g(6, 20);
    Eigen::VectorXd sigma(6);
    for (int p = 0; p < 6; ++p) {
      x.row(p) << u(rng), u(rng);
      sigma(p) = 0.02 + 0.1 * u(rng);
      for (int k = 0; k < 20; ++k) g(p, k) = u(rng) - 0.5;
    }
    const Eigen::MatrixXd pulled = super_gaussian_pullback_batch(x, sigma, g, cfg);
    for (int p = 0; p < 6; ++p) {
      const Eigen::RowVectorXd expected = g.row(p) * super_gaussian_jacobian(x.row(p).transpose(), sigma(p), cfg);
      EXPECT_LT(relative_error(pulled.row(p), expected), 1e-13);
    }
  }
}

TEST(MetricTensor, OneDimensionalIsSquaredDerivativeNorm) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 32);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.37);
  const Eigen::MatrixXd g = metric_tensor(x, 0.03, cfg);
  const double norm2 = super_gaussian_jacobian(x, 0.03, cfg).squaredNorm();
  ASSERT_EQ(g.rows(), 1);
  EXPECT_NEAR(g(0, 0), norm2, 1e-12 * norm2);
  EXPECT_NEAR(volume_element(x, 0.03, cfg), std::sqrt(norm2), 1e-12 * std::sqrt(norm2));
}

TEST(MetricTensor, SymmetricPsdAndEqualToJacobianProduct) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SuperGaussianConfig cfg = default_super_gaussian(2, 32);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const double sigma = 0.01 + 0.2 * u(rng);
    const Eigen::MatrixXd g = metric_tensor(x, sigma, cfg);
    const Eigen::MatrixXd jac = super_gaussian_jacobian(x, sigma, cfg);
    const Eigen::MatrixXd product = jac.transpose() * jac;
    EXPECT_LE((g - product).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, product.cwiseAbs().maxCoeff()));
    EXPECT_EQ(g(0, 1), g(1, 0));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(VolumeElement, MatchesLuDeterminant) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SuperGaussianConfig cfg = default_super_gaussian(2, 48);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const double sigma = 0.01 + 0.1 * u(rng);
    const Eigen::MatrixXd g = metric_tensor(x, sigma, cfg);
    const double det = Eigen::FullPivLU<Eigen::MatrixXd>(g).determinant();
    const double expected = std::sqrt(std::max(det, 0.0));
    EXPECT_NEAR(volume_element(x, sigma, cfg), expected, 1e-8 * expected);
  }
}

TEST(VolumeElement, FlatEmbeddingIsNearZero) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 32);
  EXPECT_LT(volume_element(Eigen::VectorXd::Constant(1, 0.4), 1e4, cfg), 1e-6);
}

TEST(VolumeElement, SharperBumpsStretchMoreInOneDimension) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  const double spacing = cfg.center_spacing();
  for (double frac : {0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.9}) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, cfg.centers(20) + frac * spacing);
    double previous = 0.0;
    for (double sigma : {8.0 * spacing, 4.0 * spacing, 2.0 * spacing, 1.0 * spacing}) {
      const double v = volume_element(x, sigma, cfg);
      EXPECT_GE(v, previous) << "frac " << frac << " sigma " << sigma;
      previous = v;
    }
  }
}

TEST(Rff, OriginGivesUnitCosinesAndZeroSines) {
  const RffConfig cfg = make_rff(2, 16, 10.0, 4);
  const Eigen::VectorXd phi = rff_embed(Eigen::Vector2d::Zero(), cfg);
  EXPECT_EQ(phi.head(8), Eigen::VectorXd::Ones(8));
  EXPECT_EQ(phi.tail(8), Eigen::VectorXd::Zero(8));
}

TEST(Rff, BoundedDeterministicAndNormPreserving) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RffConfig a = make_rff(2, 64, 6.0, 99);
  const RffConfig b = make_rff(2, 64, 6.0, 99);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const Eigen::VectorXd pa = rff_embed(x, a);
    const Eigen::VectorXd pb = rff_embed(x, b);
    EXPECT_TRUE((pa.array() == pb.array()).all());
    EXPECT_LE(pa.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_NEAR(pa.squaredNorm(), 32.0, 1e-12);
  }
  EXPECT_THROW(make_rff(2, 7, 1.0, 0), std::invalid_argument);
}

TEST(Rff, JacobianAndBatchAgreeWithPointwise) {
  const RffConfig cfg = make_rff(2, 32, 3.0, 2);
  const Eigen::MatrixXd x = lattice_coords({3, 4});
  const Eigen::MatrixXd batch = rff_embed_batch(x, cfg);
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    const Eigen::VectorXd xp = x.row(p).transpose();
    EXPECT_LT(relative_error(batch.row(p).transpose(), rff_embed(xp, cfg)), 1e-14);
    Eigen::MatrixXd numeric(32, 2);
    for (int a = 0; a < 2; ++a) {
      Eigen::VectorXd plus = xp, minus = xp;
      plus(a) += 1e-6;
      minus(a) -= 1e-6;
      numeric.col(a) = (rff_embed(plus, cfg) - rff_embed(minus, cfg)) / 2e-6;
    }
    EXPECT_LT(relative_error(rff_jacobian(xp, cfg), numeric), 1e-6);
  }
}

TEST(Injectivity, FineOneDimensionalLatticeIsInjective) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  const Eigen::MatrixXd x = lattice_coords({64});
  const InjectivityReport r = check_injectivity(cfg, x, {Eigen::VectorXd::Constant(64, 0.05), cfg.sigma_min});
  EXPECT_FALSE(r.offending_pair.has_value());
  EXPECT_GT(r.min_distance, kInjectivityTolerance);
}

TEST(Injectivity, DuplicateCoordinatesAreFlagged) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 32);
  Eigen::MatrixXd x(3, 1);
  x << 0.1, 0.5, 0.5;
  const InjectivityReport r = check_injectivity(cfg, x, {Eigen::VectorXd::Constant(3, 0.05), cfg.sigma_min});
  ASSERT_TRUE(r.offending_pair.has_value());
  EXPECT_EQ(*r.offending_pair, std::make_pair(Eigen::Index{1}, Eigen::Index{2}));
  EXPECT_EQ(r.min_distance, 0.0);
}

TEST(Injectivity, AxisAlignedProjectionCollapsesSecondAxis) {
  const SuperGaussianConfig cfg =
      make_super_gaussian(2, 32, 2.0, 1e-3, SuperGaussianMode::projected, Eigen::Vector2d(1.0, 0.0));
  Eigen::MatrixXd x(2, 2);
  x << 0.4, 0.1, 0.4, 0.9;
  EXPECT_TRUE(check_injectivity(cfg, x, {Eigen::VectorXd::Constant(2, 0.05), cfg.sigma_min}).offending_pair);
  // The per-axis layout separates the same pair.
  const SuperGaussianConfig per_axis = default_super_gaussian(2, 32);
  EXPECT_FALSE(check_injectivity(per_axis, x, {Eigen::VectorXd::Constant(2, 0.05), cfg.sigma_min}).offending_pair);
}

TEST(EmbedderSettings, KeyValueRoundTrip) {
  EmbedderSettings s;
  s.d_embed = 128;
  s.b = 1.5;
  s.mode = SuperGaussianMode::projected;
  s.sigma_min = 2e-3;
  s.alpha = Eigen::Vector2d(0.25, 0.75);
  s.rff_sigma_r = 12.5;
  s.seed = 42;
  const EmbedderSettings back = EmbedderSettings::from_map(parse_kv([&] {
    std::string text;
    for (const auto& [k, v] : s.to_map()) text += k + " = " + v + "\n";
    return text;
  }()));
  EXPECT_EQ(back.d_embed, 128);
  EXPECT_EQ(back.b, 1.5);
  EXPECT_EQ(back.mode, SuperGaussianMode::projected);
  EXPECT_EQ(back.sigma_min, 2e-3);
  EXPECT_EQ(back.alpha, s.alpha);
  EXPECT_EQ(back.rff_sigma_r, 12.5);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.super_gaussian(2).mode, SuperGaussianMode::projected);
  EXPECT_EQ(EmbedderSettings{}.super_gaussian(2).mode, SuperGaussianMode::per_axis);
  EXPECT_THROW(EmbedderSettings::from_map({{"b", "two"}}), std::invalid_argument);
}

}  // namespace
}  // namespace coordfit
