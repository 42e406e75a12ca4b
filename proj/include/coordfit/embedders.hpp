#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace coordfit {

enum class SuperGaussianMode { projected, per_axis };

std::string to_string(SuperGaussianMode mode);
SuperGaussianMode parse_super_gaussian_mode(const std::string& text);

/// Shifted super-Gaussian bumps over the (projected) coordinate.
///
/// projected: component i is exp(-b (x.alpha - t_i)^2 / (2 sigma^2)), with the
/// centers t spanning the range of x.alpha over [0,1]^N.
/// per_axis: each coordinate axis gets d_embed/N centers over [0,1] and the
/// per-axis embeddings are concatenated; alpha is ignored.
struct SuperGaussianConfig {
  int n_dims_in = 1;
  int d_embed = 256;
  double b = 2.0;
  double sigma_min = 1e-3;
  SuperGaussianMode mode = SuperGaussianMode::projected;
  Eigen::VectorXd alpha;    // N
  Eigen::VectorXd centers;  // per_axis: d_embed/N centers shared by every axis

  int centers_per_axis() const { return static_cast<int>(centers.size()); }
  double center_spacing() const;
};

/// Builds a config with evenly spaced centers. An empty alpha means all ones.
SuperGaussianConfig make_super_gaussian(int n_dims_in, int d_embed, double b, double sigma_min,
                                        SuperGaussianMode mode, Eigen::VectorXd alpha = {});

/// Default mode: projected for 1D inputs, per_axis otherwise.
SuperGaussianConfig default_super_gaussian(int n_dims_in, int d_embed = 256);

/// Per-coordinate widths for a set of coordinates.
struct SigmaField {
  Eigen::VectorXd sigma;
  double sigma_min = 1e-3;
};

/// Widths parameterized as sigma = sigma_min + exp(s), so any real s is valid.
inline Eigen::VectorXd sigma_from_log(const Eigen::VectorXd& s, double sigma_min) {
  return (s.array().exp() + sigma_min).matrix();
}

Eigen::VectorXd super_gaussian_embed(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                                     const SuperGaussianConfig& cfg);

/// D x N analytic Jacobian of the embedding with respect to the coordinate.
Eigen::MatrixXd super_gaussian_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                                        const SuperGaussianConfig& cfg);

/// Partial derivative of every component with respect to sigma.
Eigen::VectorXd super_gaussian_sigma_derivative(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                double sigma, const SuperGaussianConfig& cfg);

/// Embeds every row of `coords` with its own width; returns P x D.
Eigen::MatrixXd super_gaussian_embed_batch(const Eigen::MatrixXd& coords,
                                           const Eigen::VectorXd& sigma,
                                           const SuperGaussianConfig& cfg);

/// Batched d(component)/d(sigma), P x D.
Eigen::MatrixXd super_gaussian_sigma_derivative_batch(const Eigen::MatrixXd& coords,
                                                      const Eigen::VectorXd& sigma,
                                                      const SuperGaussianConfig& cfg);

/// Batched coordinate pullback: row p is grad_features.row(p) * J(x_p).
Eigen::MatrixXd super_gaussian_pullback_batch(const Eigen::MatrixXd& coords, const Eigen::VectorXd& sigma,
                                              const Eigen::MatrixXd& grad_features,
                                              const SuperGaussianConfig& cfg);

/// Pullback metric J J^T of the embedding (N x N), written as the explicit sum
/// of per-component outer products.
Eigen::MatrixXd metric_tensor(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                              const SuperGaussianConfig& cfg);

/// sqrt(det(metric_tensor)), clamped at zero.
double volume_element(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                      const SuperGaussianConfig& cfg);

/// Random Fourier features [cos(2 pi B x); sin(2 pi B x)] with fixed B.
struct RffConfig {
  Eigen::MatrixXd frequencies;  // (D/2) x N
  double sigma_r = 1.0;
  std::uint64_t seed = 0;

  int d_embed() const { return static_cast<int>(2 * frequencies.rows()); }
};

RffConfig make_rff(int n_dims_in, int d_embed, double sigma_r, std::uint64_t seed);

Eigen::VectorXd rff_embed(const Eigen::Ref<const Eigen::VectorXd>& x, const RffConfig& cfg);
Eigen::MatrixXd rff_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, const RffConfig& cfg);
Eigen::MatrixXd rff_embed_batch(const Eigen::MatrixXd& coords, const RffConfig& cfg);

struct InjectivityReport {
  double min_distance = 0.0;
  std::optional<std::pair<Eigen::Index, Eigen::Index>> offending_pair;
};

inline constexpr double kInjectivityTolerance = 1e-9;

/// Exhaustive pair scan of embedding distances over a coordinate list.
InjectivityReport check_injectivity(const SuperGaussianConfig& cfg, const Eigen::MatrixXd& coords,
                                    const SigmaField& sigma);

/// Plain key=value embedder settings (d_embed, b, mode, sigma_min, alpha,
/// rff_sigma_r, seed).
struct EmbedderSettings {
  int d_embed = 256;
  double b = 2.0;
  std::optional<SuperGaussianMode> mode;  // unset: default for the dimensionality
  double sigma_min = 1e-3;
  Eigen::VectorXd alpha;
  double rff_sigma_r = 8.0;
  std::uint64_t seed = 0;

  SuperGaussianConfig super_gaussian(int n_dims_in) const;
  RffConfig rff(int n_dims_in) const;

  std::map<std::string, std::string> to_map() const;
  static EmbedderSettings from_map(const std::map<std::string, std::string>& kv);
};

}  // namespace coordfit
