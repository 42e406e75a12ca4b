#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coordfit/embedders.hpp"
#include "coordfit/optim.hpp"

namespace coordfit {

/// ReLU coordinate-MLP with a linear head.
///
/// All weights and biases live in one flat parameter vector; layer l maps
/// widths[l] -> widths[l+1] as  h_{l+1} = h_l W_l + b_l  over row batches.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<int> widths);

  /// He-uniform weights, zero biases. depth counts affine layers, so depth 1
  /// is a linear model.
  static MlpModel make(int d_in, int hidden, int depth, int d_out, std::uint64_t seed);

  const std::vector<int>& widths() const { return widths_; }
  int depth() const { return static_cast<int>(widths_.size()) - 1; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  Eigen::Index weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  Eigen::Index bias_offset(int layer) const;

 private:
  std::vector<int> widths_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd params_;
};

Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& inputs);

struct MlpGradients {
  double loss = 0.0;               // mean squared error over all entries
  Eigen::VectorXd params;          // same layout as MlpModel::params()
  Eigen::MatrixXd inputs;          // d loss / d inputs (B x d_in)
  Eigen::MatrixXd predictions;
};

/// Exact reverse-mode gradients of the mean squared error.
MlpGradients backward(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      bool with_input_grad = false);

enum class TrainMode { fixed_embedding, end_to_end_sigma, coordinate_recovery };

std::string to_string(TrainMode mode);

struct TrainConfig {
  int depth = 4;
  int hidden = 256;
  int epochs = 2000;
  std::uint64_t seed = 0;
  AdamOptions adam;
  /// Adam step size for the log widths in end-to-end training.
  double sigma_lr = 1e-2;
  /// Run the training loop in float32; results are exported back to float64.
  bool single_precision = true;
};

struct TrainRun {
  TrainMode mode = TrainMode::fixed_embedding;
  int epochs = 0;
  std::vector<double> loss_trace;  // training MSE before each update
  double train_psnr = 0.0;
  double test_psnr = 0.0;
  MlpModel model;
  Eigen::MatrixXd train_predictions;
  Eigen::MatrixXd test_predictions;
  Eigen::VectorXd train_sigma;  // end_to_end_sigma only
  Eigen::VectorXd test_sigma;   // end_to_end_sigma only
};

/// Trains the MLP on precomputed features; only weights are learned.
/// An empty test set yields test_psnr = train_psnr.
TrainRun train_fixed(const Eigen::MatrixXd& train_features, const Eigen::MatrixXd& train_targets,
                     const Eigen::MatrixXd& test_features, const Eigen::MatrixXd& test_targets,
                     const TrainConfig& cfg);

/// Trains weights and per-train-coordinate log widths jointly through the
/// super-Gaussian embedding. Test widths are interpolated from the learned
/// train widths.
TrainRun train_end_to_end(const Eigen::MatrixXd& train_coords, const Eigen::MatrixXd& train_targets,
                          const Eigen::MatrixXd& test_coords, const Eigen::MatrixXd& test_targets,
                          const SuperGaussianConfig& embed, const Eigen::VectorXd& sigma_init,
                          const TrainConfig& cfg);

/// Differentiable coordinate encoder: a batch embedding and the pullback of a
/// feature-space gradient to coordinate space.
struct CoordinateEncoder {
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> embed;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& grad_features)> pullback;
};

/// Identity encoder (raw coordinates as features).
CoordinateEncoder raw_encoder();
CoordinateEncoder rff_encoder(RffConfig cfg);

/// Super-Gaussian encoder whose width at each coordinate comes from
/// `sigma_at`. Widths are held fixed within a pullback.
CoordinateEncoder super_gaussian_encoder(SuperGaussianConfig cfg,
                                         std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> sigma_at);

struct RecoveryConfig {
  int steps = 1000;
  double lr = 1e-2;
  /// Float32 rounding alone gives Adam a nonzero direction at an exact fit.
  bool single_precision = false;
};

struct RecoveryResult {
  Eigen::MatrixXd coords;
  double initial_psnr = 0.0;
  double psnr = 0.0;
  std::vector<double> loss_trace;
};

/// Gradient descent on input coordinates of a frozen model, minimising the
/// squared error to `truth`; coordinates stay in [0,1]^N.
RecoveryResult recover_coordinates(const MlpModel& model, const CoordinateEncoder& encoder,
                                   const Eigen::MatrixXd& start_coords, const Eigen::MatrixXd& truth,
                                   const RecoveryConfig& cfg);

/// Flat little-endian checkpoint: magic, version, layer widths, float64 params.
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace coordfit
