#include "coordfit/graphlap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "coordfit/kvconfig.hpp"
#include "coordfit/optim.hpp"

namespace coordfit {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& e) {
  const Eigen::VectorXd sq = e.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (e * e.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  return d2;
}

struct GraphParts {
  Eigen::MatrixXd theta;
  Eigen::VectorXd rho;
  Eigen::VectorXd scale;  // rho^-lambda_deg
  Eigen::MatrixXd adjacency;
};

GraphParts graph_parts(const Eigen::MatrixXd& d2, double eps, double lambda_deg) {
  GraphParts g;
  g.theta = (-d2.array() / (2.0 * eps * eps)).exp().matrix();
  g.theta.diagonal().setOnes();
  g.rho = g.theta.rowwise().sum();
  g.scale = g.rho.array().pow(-lambda_deg).matrix();
  g.adjacency = g.scale.asDiagonal() * g.theta * g.scale.asDiagonal();
  g.adjacency.diagonal().setZero();
  return g;
}

void require_finite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw std::invalid_argument("non-finite embeddings");
}

}  // namespace

double SimilarityGraph::mean_adjacency() const {
  const Eigen::Index n = size();
  if (n < 2) return 0.0;
  return adjacency.sum() / static_cast<double>(n * (n - 1));
}

SimilarityGraph build_graph(const Eigen::MatrixXd& embeddings, double eps, double lambda_deg) {
  if (embeddings.rows() < 2) throw std::invalid_argument("a graph needs at least two vertices");
  if (!(eps > 0.0)) throw std::invalid_argument("kernel width must be positive");
  if (lambda_deg < 0.0) throw std::invalid_argument("degree exponent must be non-negative");
  require_finite(embeddings);

  GraphParts parts = graph_parts(squared_distances(embeddings), eps, lambda_deg);
  SimilarityGraph g;
  g.adjacency = std::move(parts.adjacency);
  g.degrees = g.adjacency.rowwise().sum();
  g.laplacian = -g.adjacency;
  g.laplacian.diagonal() = g.degrees;
  g.rho = std::move(parts.rho);
  g.eps = eps;
  g.lambda_deg = lambda_deg;
  return g;
}

double quadratic_form(const SimilarityGraph& graph, const Eigen::VectorXd& u) {
  if (u.size() != graph.size()) throw std::invalid_argument("u must have one entry per vertex");
  return u.dot(graph.laplacian * u);
}

double regularized_objective(const SimilarityGraph& graph, const Eigen::VectorXd& u,
                             double lambda_adj) {
  return quadratic_form(graph, u) - lambda_adj * graph.adjacency_frobenius();
}

double median_pairwise_distance(const Eigen::MatrixXd& embeddings) {
  const Eigen::MatrixXd d2 = squared_distances(embeddings);
  std::vector<double> d;
  for (Eigen::Index i = 0; i < d2.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d2.cols(); ++j) d.push_back(std::sqrt(d2(i, j)));
  if (d.empty()) throw std::invalid_argument("need at least two vertices");
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

ObjectiveEvaluation evaluate_objective(const Eigen::MatrixXd& coords, const Eigen::VectorXd& log_sigma,
                                       const Eigen::VectorXd& u, const SuperGaussianConfig& embed,
                                       double eps, double lambda_deg, double lambda_adj,
                                       bool with_gradient) {
  const Eigen::Index n = coords.rows();
  if (log_sigma.size() != n || u.size() != n)
    throw std::invalid_argument("one width and one target per coordinate");
  const Eigen::VectorXd sigma = sigma_from_log(log_sigma, embed.sigma_min);
  const Eigen::MatrixXd emb = super_gaussian_embed_batch(coords, sigma, embed);
  require_finite(emb);
  const GraphParts g = graph_parts(squared_distances(emb), eps, lambda_deg);

  // diff2(i,j) = (u_i - u_j)^2
  Eigen::MatrixXd diff2 = Eigen::MatrixXd::Zero(n, n);
  diff2.colwise() += u;
  diff2.rowwise() -= u.transpose();
  diff2 = diff2.cwiseAbs2();

  ObjectiveEvaluation out;
  out.tau = 0.5 * g.adjacency.cwiseProduct(diff2).sum();
  out.adj_norm = g.adjacency.norm();
  out.tau_bar = out.tau - lambda_adj * out.adj_norm;
  out.mean_adjacency = g.adjacency.sum() / static_cast<double>(n * (n - 1));
  if (!with_gradient) return out;

  // dF/dA_ij for every ordered off-diagonal pair.
  Eigen::MatrixXd dA = 0.5 * diff2;
  if (out.adj_norm > 0.0) dA -= (lambda_adj / out.adj_norm) * g.adjacency;
  dA.diagonal().setZero();

  // Through rho: A_kj and A_jk both scale as rho_k^-lambda.
  const Eigen::VectorXd drho =
      (-2.0 * lambda_deg) * (dA.cwiseProduct(g.adjacency).rowwise().sum().array() / g.rho.array()).matrix();

  // Total derivative with respect to the shared theta_ij = theta_ji.
  Eigen::MatrixXd dtheta = 2.0 * (g.scale.asDiagonal() * dA * g.scale.asDiagonal());
  dtheta.colwise() += drho;
  dtheta.rowwise() += drho.transpose();

  // Through d_ij^2, then the embedding rows.
  Eigen::MatrixXd w = dtheta.cwiseProduct(g.theta) * (-1.0 / (2.0 * eps * eps));
  w.diagonal().setZero();
  const Eigen::VectorXd wsum = w.rowwise().sum();
  const Eigen::MatrixXd demb = 2.0 * (wsum.asDiagonal() * emb - w * emb);

  const Eigen::MatrixXd dsig = super_gaussian_sigma_derivative_batch(coords, sigma, embed);
  out.grad_log_sigma =
      (demb.cwiseProduct(dsig).rowwise().sum().array() * log_sigma.array().exp()).matrix();
  return out;
}

SigmaOptimization optimize_sigma(const Eigen::MatrixXd& coords, const Eigen::VectorXd& u,
                                 const SuperGaussianConfig& embed, const GraphObjectiveConfig& cfg) {
  const Eigen::Index n = coords.rows();
  if (n < 2) throw std::invalid_argument("sigma optimization needs at least two coordinates");
  if (n > cfg.max_graph_size)
    throw std::invalid_argument("graph of " + std::to_string(n) + " vertices exceeds the cap of " +
                                std::to_string(cfg.max_graph_size));
  if (u.size() != n) throw std::invalid_argument("u must have one entry per coordinate");
  if (!u.allFinite()) throw std::invalid_argument("u must be finite");
  if (cfg.iterations < 1) throw std::invalid_argument("need at least one iteration");

  Eigen::VectorXd target = u;
  if (cfg.normalize_u) {
    const double peak = u.cwiseAbs().maxCoeff();
    if (peak > 0.0) target /= peak;
  }

  const double sigma0 = cfg.sigma_init_spacings * embed.center_spacing();
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, std::log(std::max(sigma0 - embed.sigma_min, 1e-12)));

  SigmaOptimization result;
  result.eps = cfg.eps > 0.0
                   ? cfg.eps
                   : cfg.eps_scale * median_pairwise_distance(
                         super_gaussian_embed_batch(coords, sigma_from_log(s, embed.sigma_min), embed));
  if (!(result.eps > 0.0)) throw std::invalid_argument("degenerate embedding: zero median distance");

  AdamOptions opts;
  opts.lr = cfg.step_size;
  opts.weight_decay = 0.0;
  AdamState adam(n, opts);

  for (int it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    const ObjectiveEvaluation ev =
        evaluate_objective(coords, s, target, embed, result.eps, cfg.lambda_deg, cfg.lambda_adj, !last);
    if (!std::isfinite(ev.tau_bar) || (!last && !ev.grad_log_sigma.allFinite()))
      throw std::runtime_error("non-finite sigma objective at iteration " + std::to_string(it));
    result.trace.push_back({it, ev.tau, ev.adj_norm, ev.tau_bar});
    if (it == 0) result.mean_adjacency_initial = ev.mean_adjacency;
    if (last) {
      result.mean_adjacency_final = ev.mean_adjacency;
      break;
    }
    adam_step(adam, s, ev.grad_log_sigma);
  }
  result.sigma.sigma = sigma_from_log(s, embed.sigma_min);
  result.sigma.sigma_min = embed.sigma_min;
  return result;
}

double analytic_vs_numeric_grad(const Eigen::MatrixXd& coords, const Eigen::VectorXd& log_sigma,
                                const Eigen::VectorXd& u, const SuperGaussianConfig& embed,
                                double eps, double lambda_deg, double lambda_adj, double h) {
  const ObjectiveEvaluation ev =
      evaluate_objective(coords, log_sigma, u, embed, eps, lambda_deg, lambda_adj, true);
  const double scale = std::max(ev.grad_log_sigma.cwiseAbs().maxCoeff(), 1e-12);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < log_sigma.size(); ++i) {
    Eigen::VectorXd plus = log_sigma, minus = log_sigma;
    plus(i) += h;
    minus(i) -= h;
    const double fp =
        evaluate_objective(coords, plus, u, embed, eps, lambda_deg, lambda_adj, false).tau_bar;
    const double fm =
        evaluate_objective(coords, minus, u, embed, eps, lambda_deg, lambda_adj, false).tau_bar;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max(std::abs(numeric), scale);
    worst = std::max(worst, std::abs(numeric - ev.grad_log_sigma(i)) / denom);
  }
  return worst;
}

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<LossRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,tau,adj_norm,tau_bar\n";
  for (const auto& r : trace)
    out << r.iteration << ',' << format_double(r.tau) << ',' << format_double(r.adj_norm) << ','
        << format_double(r.tau_bar) << '\n';
}

void write_sigma_field_csv(const std::filesystem::path& path, const Eigen::MatrixXd& coords,
                           const SigmaField& sigma) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index a = 0; a < coords.cols(); ++a) out << 'x' << a << ',';
  out << "sigma\n";
  for (Eigen::Index p = 0; p < coords.rows(); ++p) {
    for (Eigen::Index a = 0; a < coords.cols(); ++a) out << format_double(coords(p, a)) << ',';
    out << format_double(sigma.sigma(p)) << '\n';
  }
}

}  // namespace coordfit
