#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coordfit {

/// A signal discretized on a regular lattice over [0,1]^N.
///
/// Row p of `coords` is the normalized position of lattice point p and row p of
/// `values` the target there. Lattice points are enumerated in row-major order
/// (last axis fastest), so for images axis 0 is the row and axis 1 the column.
struct SampledSignal {
  std::vector<int> grid_shape;
  Eigen::MatrixXd coords;  // P x N
  Eigen::MatrixXd values;  // P x M

  int n_dims_in() const { return static_cast<int>(grid_shape.size()); }
  int n_dims_out() const { return static_cast<int>(values.cols()); }
  Eigen::Index size() const { return coords.rows(); }
};

enum class SignalKind { csv_1d, image_2d };

enum class SplitScheme { regular, random };

std::string to_string(SplitScheme scheme);
SplitScheme parse_split_scheme(const std::string& text);

struct SplitPlan {
  std::vector<Eigen::Index> train_idx;
  std::vector<Eigen::Index> test_idx;
  SplitScheme scheme = SplitScheme::regular;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  /// Per-axis stride of the train sublattice (regular scheme only).
  std::vector<int> stride;
};

/// Per-lattice-point Frobenius norm of the target Jacobian.
using GradientField = Eigen::VectorXd;

/// Builds the lattice coordinates for `grid_shape`, each axis spanning [0,1].
Eigen::MatrixXd lattice_coords(const std::vector<int>& grid_shape);

/// Wraps raw values (already in [0,1]) laid out in row-major lattice order.
SampledSignal make_signal(std::vector<int> grid_shape, Eigen::MatrixXd values);

SampledSignal load_signal(const std::filesystem::path& path, SignalKind kind);

/// Bilinear resampling of a 2D signal onto a new grid; 1D signals are
/// resampled linearly.
SampledSignal resample(const SampledSignal& signal, const std::vector<int>& grid_shape);

/// Channel mean of the targets, as a single-output signal.
SampledSignal channel_mean(const SampledSignal& signal);

/// Per-axis lattice strides whose product best matches 1/fraction. Strides
/// differ by at most one between axes; any fraction below 1 skips points.
std::vector<int> regular_strides(int n_axes, double fraction);

SplitPlan make_split(const SampledSignal& signal, SplitScheme scheme, double fraction,
                     std::uint64_t seed);

GradientField jacobian_frobenius(const SampledSignal& signal);

/// Gradient norms at the train indices, estimated from train samples only.
///
/// Regular splits differentiate on the train sublattice itself. Random splits
/// first fill the lattice by nearest train sample.
Eigen::VectorXd train_gradient_norms(const SampledSignal& signal, const SplitPlan& split);

/// Rows of `m` selected by `idx`.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx);

}  // namespace coordfit
