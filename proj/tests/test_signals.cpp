#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "coordfit/metrics.hpp"
#include "coordfit/netpbm.hpp"
#include "coordfit/signals.hpp"
#include "coordfit/synthetic.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace coordfit {
namespace {

using testing::TempDir;

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

TEST(LoadSignal, TwoPointCsvNormalizesEndpoints) {
  TempDir dir;
  write_text(dir.path() / "s.csv", "0\n255\n");
  const SampledSignal s = load_signal(dir.path() / "s.csv", SignalKind::csv_1d);
  ASSERT_EQ(s.grid_shape, std::vector<int>{2});
  EXPECT_DOUBLE_EQ(s.coords(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.coords(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.values(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.values(1, 0), 1.0);
}

TEST(LoadSignal, ImageRowOf512Pixels) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 512; ++i) text += std::to_string((i * 37) % 256) + "\n";
  write_text(dir.path() / "row.csv", text);
  const SampledSignal s = load_signal(dir.path() / "row.csv", SignalKind::csv_1d);
  EXPECT_EQ(s.grid_shape, std::vector<int>{512});
  EXPECT_EQ(s.size(), 512);
  EXPECT_DOUBLE_EQ(s.coords(511, 0), 1.0);
}

TEST(LoadSignal, HandWrittenPgmAllMidGray) {
  TempDir dir;
  std::string bytes = "P5\n# hand written\n3 3\n255\n";
  bytes += std::string(9, static_cast<char>(128));
  write_text(dir.path() / "g.pgm", bytes);
  const SampledSignal s = load_signal(dir.path() / "g.pgm", SignalKind::image_2d);
  ASSERT_EQ(s.grid_shape, (std::vector<int>{3, 3}));
  EXPECT_EQ(s.n_dims_out(), 1);
  for (Eigen::Index p = 0; p < 9; ++p) EXPECT_DOUBLE_EQ(s.values(p, 0), 128.0 / 255.0);
  // Row-major: pixel 5 is row 1, column 2.
  EXPECT_DOUBLE_EQ(s.coords(5, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.coords(5, 1), 1.0);
}

TEST(LoadSignal, Errors) {
  TempDir dir;
  EXPECT_THROW(load_signal(dir.path() / "missing.csv", SignalKind::csv_1d), std::runtime_error);
  write_text(dir.path() / "empty.csv", "\n\n");
  EXPECT_THROW(load_signal(dir.path() / "empty.csv", SignalKind::csv_1d), std::runtime_error);
  write_text(dir.path() / "one.csv", "4\n");
  EXPECT_THROW(load_signal(dir.path() / "one.csv", SignalKind::csv_1d), std::runtime_error);
  write_text(dir.path() / "thin.pgm", std::string("P5 4 1 255\n") + std::string(4, 'a'));
  EXPECT_THROW(load_signal(dir.path() / "thin.pgm", SignalKind::image_2d), std::runtime_error);
  write_text(dir.path() / "short.pgm", std::string("P5 4 4 255\n") + std::string(5, 'a'));
  EXPECT_THROW(load_signal(dir.path() / "short.pgm", SignalKind::image_2d), std::runtime_error);
}

TEST(Netpbm, WriteReadDiffersOnlyByQuantization) {
  TempDir dir;
  const SampledSignal img = synthetic_image(17, 23, ImageCategory::natural, 3);
  write_netpbm(dir.path() / "x.ppm", 17, 23, img.values);
  const NetpbmImage back = read_netpbm(dir.path() / "x.ppm");
  ASSERT_EQ(back.rows, 17);
  ASSERT_EQ(back.cols, 23);
  EXPECT_LE((back.values - img.values).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
}

TEST(MakeSplit, RegularHalfTakesEvenIndices) {
  const SampledSignal s = synthetic_signal_1d(512, 1);
  const SplitPlan plan = make_split(s, SplitScheme::regular, 0.5, 0);
  ASSERT_EQ(plan.train_idx.size(), 256u);
  ASSERT_EQ(plan.test_idx.size(), 256u);
  for (std::size_t i = 0; i < 256; ++i) {
    EXPECT_EQ(plan.train_idx[i], static_cast<Eigen::Index>(2 * i));
    EXPECT_EQ(plan.test_idx[i], static_cast<Eigen::Index>(2 * i + 1));
  }
}

TEST(MakeSplit, FullFractionLeavesNoTest) {
  const SampledSignal s = synthetic_signal_1d(64, 1);
  const SplitPlan plan = make_split(s, SplitScheme::regular, 1.0, 0);
  EXPECT_EQ(plan.train_idx.size(), 64u);
  EXPECT_TRUE(plan.test_idx.empty());
}

TEST(MakeSplit, RandomQuarterIsReproducible) {
  const SampledSignal s = constant_signal({120, 120}, 0.3);
  const SplitPlan a = make_split(s, SplitScheme::random, 0.25, 7);
  const SplitPlan b = make_split(s, SplitScheme::random, 0.25, 7);
  EXPECT_EQ(a.train_idx.size(), 3600u);
  EXPECT_EQ(a.train_idx, b.train_idx);
  const SplitPlan c = make_split(s, SplitScheme::random, 0.25, 8);
  EXPECT_NE(a.train_idx, c.train_idx);
}

TEST(MakeSplit, RegularTwoDimensionalUsesPerAxisStride) {
  const SampledSignal s = constant_signal({120, 120}, 0.3);
  const SplitPlan quarter = make_split(s, SplitScheme::regular, 0.25, 0);
  EXPECT_EQ(quarter.stride, (std::vector<int>{2, 2}));
  EXPECT_EQ(quarter.train_idx.size(), 3600u);
  const SplitPlan tenth = make_split(s, SplitScheme::regular, 0.10, 0);
  EXPECT_EQ(tenth.stride, (std::vector<int>{3, 3}));
  EXPECT_EQ(tenth.train_idx.size(), 1600u);
}

TEST(RegularStrides, ProductTracksInverseFraction) {
  EXPECT_EQ(regular_strides(1, 0.5), (std::vector<int>{2}));
  EXPECT_EQ(regular_strides(1, 0.1), (std::vector<int>{10}));
  EXPECT_EQ(regular_strides(2, 0.25), (std::vector<int>{2, 2}));
  EXPECT_EQ(regular_strides(2, 0.5), (std::vector<int>{2, 1}));
  EXPECT_EQ(regular_strides(2, 0.1), (std::vector<int>{3, 3}));
  EXPECT_EQ(regular_strides(2, 1.0), (std::vector<int>{1, 1}));
  for (double f : {0.6, 0.8, 0.95}) {
    const auto s = regular_strides(2, f);
    EXPECT_GE(s[0] * s[1], 2) << f;
  }
}

TEST(MakeSplit, Errors) {
  const SampledSignal s = synthetic_signal_1d(64, 1);
  EXPECT_THROW(make_split(s, SplitScheme::regular, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(make_split(s, SplitScheme::regular, 1.5, 0), std::invalid_argument);
  EXPECT_THROW(make_split(s, SplitScheme::random, 0.001, 0), std::invalid_argument);
  // 0.999 * 64 rounds to every point
  EXPECT_THROW(make_split(s, SplitScheme::random, 0.999, 0), std::invalid_argument);
  EXPECT_FALSE(make_split(s, SplitScheme::regular, 0.9, 0).test_idx.empty());
}

TEST(MakeSplit, IsAlwaysAPartition) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> frac(0.05, 0.6);
  for (int trial = 0; trial < 40; ++trial) {
    const bool two_d = trial % 2 == 0;
    const SampledSignal s = two_d ? constant_signal({20 + trial, 31}, 0.1) : synthetic_signal_1d(50 + 7 * trial, trial);
    const auto scheme = trial % 3 == 0 ? SplitScheme::regular : SplitScheme::random;
    const SplitPlan plan = make_split(s, scheme, frac(rng), rng());
    std::vector<int> seen(static_cast<std::size_t>(s.size()), 0);
    for (auto i : plan.train_idx) ++seen[static_cast<std::size_t>(i)];
    for (auto i : plan.test_idx) ++seen[static_cast<std::size_t>(i)];
    for (int c : seen) ASSERT_EQ(c, 1);
  }
}

TEST(JacobianFrobenius, ConstantSignalHasZeroGradient) {
  const GradientField g = jacobian_frobenius(constant_signal({13, 9}, 0.4, 3));
  EXPECT_EQ(g.size(), 13 * 9);
  EXPECT_EQ(g.maxCoeff(), 0.0);
}

TEST(JacobianFrobenius, RampHasUnitSlope) {
  const GradientField g = jacobian_frobenius(make_signal({11}, lattice_coords({11})));
  for (Eigen::Index i = 1; i < 10; ++i) EXPECT_NEAR(g(i), 1.0, 1e-12);
}

TEST(JacobianFrobenius, QuadraticMatchesAnalyticDerivative) {
  const Eigen::MatrixXd x = lattice_coords({101});
  const GradientField g = jacobian_frobenius(make_signal({101}, x.array().square().matrix()));
  EXPECT_NEAR(g(50), 1.0, 1e-3);  // d/dx x^2 at 0.5
}

TEST(JacobianFrobenius, AffineSignalIsConstantInside) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-0.3, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<int> shape{7 + trial, 5 + 2 * trial};
    const Eigen::MatrixXd x = lattice_coords(shape);
    Eigen::MatrixXd v(x.rows(), 3);
    double expected_sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double a = coef(rng), b = coef(rng);
      v.col(c) = (0.4 + a * x.col(0).array() + b * x.col(1).array()).matrix();
      expected_sq += a * a + b * b;
    }
    const GradientField g = jacobian_frobenius(make_signal(shape, v));
    for (int r = 1; r < shape[0] - 1; ++r)
      for (int c = 1; c < shape[1] - 1; ++c)
        EXPECT_NEAR(g(r * shape[1] + c), std::sqrt(expected_sq), 1e-12);
  }
}

TEST(TrainGradientNorms, RegularSplitUsesSublatticeSpacing) {
  const Eigen::MatrixXd x = lattice_coords({101});
  const SampledSignal s = make_signal({101}, (0.5 * x).eval());
  const SplitPlan plan = make_split(s, SplitScheme::regular, 0.25, 0);
  const Eigen::VectorXd g = train_gradient_norms(s, plan);
  ASSERT_EQ(g.size(), static_cast<Eigen::Index>(plan.train_idx.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(g(i), 0.5, 1e-12);
}

TEST(Psnr, AnalyticValues) {
  const Eigen::MatrixXd truth = Eigen::MatrixXd::Constant(100, 1, 0.5);
  EXPECT_DOUBLE_EQ(psnr(truth, truth), kPsnrCapDb);
  EXPECT_NEAR(psnr((truth.array() + 0.1).matrix(), truth), 20.0, 1e-9);
  EXPECT_NEAR(psnr((truth.array() + std::sqrt(1e-3)).matrix(), truth), 30.0, 1e-9);
  EXPECT_THROW(psnr(truth, Eigen::MatrixXd::Zero(99, 1)), std::invalid_argument);
}

TEST(Psnr, SymmetricAndDecreasingInError) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd a(64, 3), b(64, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a(i) = u(rng);
    b(i) = u(rng);
  }
  EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
  double previous = kPsnrCapDb + 1.0;
  for (double scale : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0}) {
    const double p = psnr((a + scale * (b - a)).eval(), a);
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const SampledSignal img = synthetic_image(32, 40, ImageCategory::natural, 9);
  EXPECT_NEAR(ssim(img.values, img.values, 32, 40), 1.0, 1e-12);
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(16 * 16, 1, 0.5);
  EXPECT_NEAR(ssim(flat, flat, 16, 16), 1.0, 1e-12);
}

TEST(Ssim, InvertedCheckerboardIsAnticorrelated) {
  Eigen::MatrixXd board(24 * 24, 1);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c) board(r * 24 + c, 0) = (r + c) % 2;
  const Eigen::MatrixXd inverted = (1.0 - board.array()).matrix();
  const double s = ssim(inverted, board, 24, 24);
  EXPECT_LE(s, 0.0);
  // Each window: equal means near 0.5, cov = -var, so the structure term is close to -1.
  EXPECT_LT(s, -0.9);
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
  const Eigen::MatrixXd small = Eigen::MatrixXd::Zero(10 * 30, 1);
  EXPECT_THROW(ssim(small, small, 10, 30), std::invalid_argument);
}

}  // namespace
}  // namespace coordfit
