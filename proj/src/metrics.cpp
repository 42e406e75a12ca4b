#include "coordfit/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace coordfit {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowStd = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

Eigen::VectorXd luma(const Eigen::MatrixXd& v) {
  if (v.cols() == 1) return v.col(0);
  if (v.cols() == 3) return 0.299 * v.col(0) + 0.587 * v.col(1) + 0.114 * v.col(2);
  return v.rowwise().mean();
}

}  // namespace

double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("psnr inputs differ in shape");
  if (pred.size() == 0) throw std::invalid_argument("psnr of empty arrays");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double psnr(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  const double e = mse(pred, truth);
  if (e == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -10.0 * std::log10(e));
}

double ssim(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, int rows, int cols) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("ssim inputs differ in shape");
  if (pred.rows() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("ssim pixel count does not match extent");
  if (rows < kWindow || cols < kWindow) throw std::invalid_argument("image smaller than SSIM window");

  const Eigen::VectorXd x = luma(pred);
  const Eigen::VectorXd y = luma(truth);

  std::vector<double> w(kWindow * kWindow);
  double wsum = 0.0;
  const int half = kWindow / 2;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) {
      const double r2 = (i - half) * (i - half) + (j - half) * (j - half);
      w[i * kWindow + j] = std::exp(-r2 / (2.0 * kWindowStd * kWindowStd));
      wsum += w[i * kWindow + j];
    }
  for (double& v : w) v /= wsum;

  double total = 0.0;
  long windows = 0;
  for (int r = 0; r + kWindow <= rows; ++r)
    for (int c = 0; c + kWindow <= cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
          const double wk = w[i * kWindow + j];
          const Eigen::Index p = static_cast<Eigen::Index>(r + i) * cols + (c + j);
          mx += wk * x(p);
          my += wk * y(p);
          sxx += wk * x(p) * x(p);
          syy += wk * y(p) * y(p);
          sxy += wk * x(p) * y(p);
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

}  // namespace coordfit
