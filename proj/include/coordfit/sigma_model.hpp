#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace coordfit {

/// Polynomial map from gradient norm g to width:
/// sigma(g) = sum_k beta_k (g / g_scale)^k for k = 0..terms-1, clamped to
/// [sigma_min, sigma_max].
struct SigmaPolynomial {
  Eigen::VectorXd beta;
  int terms = 10;
  double ridge = 1e-8;
  double g_scale = 1.0;
  double sigma_min = 1e-3;
  double sigma_max = 1.0;
};

/// Ridge-damped least squares on the Vandermonde system of g / g_scale, where
/// g_scale is the largest observed g.
SigmaPolynomial fit_polynomial(const Eigen::VectorXd& g, const Eigen::VectorXd& sigma, int terms = 10,
                               double ridge = 1e-8, double sigma_min = 1e-3, double sigma_max = 1.0);

/// Unclamped polynomial value.
double evaluate_polynomial(const SigmaPolynomial& model, double g);

/// Coefficients of the same polynomial in powers of the raw g.
Eigen::VectorXd raw_coefficients(const SigmaPolynomial& model);

double predict_sigma(const SigmaPolynomial& model, double g);
Eigen::VectorXd predict_sigma(const SigmaPolynomial& model, const Eigen::VectorXd& g);

void write_sigma_polynomial(const std::filesystem::path& path, const SigmaPolynomial& model);
SigmaPolynomial read_sigma_polynomial(const std::filesystem::path& path);

/// Interpolates train widths onto test coordinates.
///
/// 1D: piecewise linear between neighbouring train coordinates, constant
/// beyond the ends. 2D: bilinear on the train sublattice, nearest-lattice-cell
/// clamping outside its hull; train sets that are not a product lattice fall
/// back to the nearest train coordinate.
Eigen::VectorXd interpolate_sigma(const Eigen::MatrixXd& train_coords, const Eigen::VectorXd& train_sigma,
                                  const Eigen::MatrixXd& test_coords);

/// Spearman rank correlation (average ranks for ties).
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace coordfit
