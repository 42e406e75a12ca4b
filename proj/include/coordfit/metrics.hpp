#pragma once

#include <Eigen/Dense>

namespace coordfit {

/// Reported instead of infinity when the error is exactly zero.
inline constexpr double kPsnrCapDb = 100.0;

/// Peak signal-to-noise ratio for values in [0,1], over all entries.
double psnr(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Mean SSIM with an 11x11 Gaussian window (std 1.5), dynamic range 1.
///
/// Images are given as rows*cols x channels in row-major order; multi-channel
/// inputs are reduced to luma before comparison.
double ssim(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, int rows, int cols);

}  // namespace coordfit
