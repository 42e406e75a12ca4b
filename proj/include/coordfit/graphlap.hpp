#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "coordfit/embedders.hpp"

namespace coordfit {

/// Dense similarity graph over embedded vertices.
///
/// theta_ij = exp(-d_ij^2 / (2 eps^2)), rho_i = sum_j theta_ij (self term
/// included), A_ij = (rho_i rho_j)^-lambda_deg theta_ij off the diagonal and
/// Lap = Deg - A.
struct SimilarityGraph {
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd degrees;
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd rho;
  double eps = 1.0;
  double lambda_deg = 1.0;

  Eigen::Index size() const { return adjacency.rows(); }
  double adjacency_frobenius() const { return adjacency.norm(); }
  double mean_adjacency() const;
};

SimilarityGraph build_graph(const Eigen::MatrixXd& embeddings, double eps, double lambda_deg);

/// u^T (Deg - A) u.
double quadratic_form(const SimilarityGraph& graph, const Eigen::VectorXd& u);

/// quadratic_form - lambda_adj * ||A||_F.
double regularized_objective(const SimilarityGraph& graph, const Eigen::VectorXd& u,
                             double lambda_adj);

/// Median of the off-diagonal pairwise Euclidean distances between rows.
double median_pairwise_distance(const Eigen::MatrixXd& embeddings);

struct GraphObjectiveConfig {
  double lambda_adj = 0.1;
  double lambda_deg = 1.0;
  int iterations = 15;  // early stop; long runs over-widen smooth regions
  double step_size = 0.05;
  /// Kernel width; non-positive means eps_scale times the median pairwise
  /// embedding distance at initialization.
  double eps = 0.0;
  double eps_scale = 0.15;
  /// Initial width as a multiple of the center spacing.
  double sigma_init_spacings = 1.5;
  /// Divide u by its largest magnitude before optimizing.
  bool normalize_u = true;
  Eigen::Index max_graph_size = 1024;
};

/// Value of the objective and its gradient with respect to the log-width
/// parameters s, where sigma = sigma_min + exp(s).
struct ObjectiveEvaluation {
  double tau = 0.0;
  double adj_norm = 0.0;
  double tau_bar = 0.0;
  double mean_adjacency = 0.0;
  Eigen::VectorXd grad_log_sigma;
};

ObjectiveEvaluation evaluate_objective(const Eigen::MatrixXd& coords, const Eigen::VectorXd& log_sigma,
                                       const Eigen::VectorXd& u, const SuperGaussianConfig& embed,
                                       double eps, double lambda_deg, double lambda_adj,
                                       bool with_gradient = true);

struct LossRecord {
  int iteration = 0;
  double tau = 0.0;
  double adj_norm = 0.0;
  double tau_bar = 0.0;
};

struct SigmaOptimization {
  SigmaField sigma;
  std::vector<LossRecord> trace;  // one row per evaluated iterate, including the start
  double eps = 0.0;
  double mean_adjacency_initial = 0.0;
  double mean_adjacency_final = 0.0;
};

/// Learns one width per coordinate by Adam descent on the regularized
/// Laplacian objective against the target field u (typically gradient norms).
SigmaOptimization optimize_sigma(const Eigen::MatrixXd& coords, const Eigen::VectorXd& u,
                                 const SuperGaussianConfig& embed, const GraphObjectiveConfig& cfg);

/// Largest relative discrepancy between the analytic log-width gradient and
/// central finite differences (step `h`) over all coordinates.
double analytic_vs_numeric_grad(const Eigen::MatrixXd& coords, const Eigen::VectorXd& log_sigma,
                                const Eigen::VectorXd& u, const SuperGaussianConfig& embed,
                                double eps, double lambda_deg, double lambda_adj, double h = 1e-5);

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<LossRecord>& trace);
void write_sigma_field_csv(const std::filesystem::path& path, const Eigen::MatrixXd& coords,
                           const SigmaField& sigma);

}  // namespace coordfit
