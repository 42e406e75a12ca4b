#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "coordfit/graphlap.hpp"
#include "coordfit/signals.hpp"
#include "coordfit/synthetic.hpp"
#include "test_util.hpp"

namespace coordfit {
namespace {

Eigen::MatrixXd random_embeddings(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd e(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) e(i, k) = normal(rng);
  return e;
}

// Loop-by-loop adjacency straight from the edge-weight definition.
Eigen::MatrixXd brute_adjacency(const Eigen::MatrixXd& e, double eps, double lambda_deg) {
  const Eigen::Index n = e.rows();
  Eigen::MatrixXd theta(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < e.cols(); ++k) d2 += (e(i, k) - e(j, k)) * (e(i, k) - e(j, k));
      theta(i, j) = std::exp(-d2 / (2 * eps * eps));
    }
  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) rho[static_cast<std::size_t>(i)] += theta(i, j);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j)
        a(i, j) = std::pow(rho[static_cast<std::size_t>(i)] * rho[static_cast<std::size_t>(j)], -lambda_deg) *
                  theta(i, j);
  return a;
}

double edge_sum(const Eigen::MatrixXd& a, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) s += a(i, j) * (u(i) - u(j)) * (u(i) - u(j));
  return s;
}

TEST(BuildGraph, MatchesLoopOracle) {
  std::mt19937_64 rng(1);
  for (double lambda : {0.0, 0.5, 1.0, 1.7}) {
    const Eigen::MatrixXd e = random_embeddings(rng, 5, 3);
    const SimilarityGraph g = build_graph(e, 1.3, lambda);
    const Eigen::MatrixXd oracle = brute_adjacency(e, 1.3, lambda);
    EXPECT_LE((g.adjacency - oracle).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
    EXPECT_EQ(g.adjacency.diagonal().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((g.adjacency - g.adjacency.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((g.laplacian.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BuildGraph, ZeroDegreeExponentLeavesKernel) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd e = random_embeddings(rng, 6, 2);
  const SimilarityGraph g = build_graph(e, 0.8, 0.0);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j)
      if (i != j)
        EXPECT_NEAR(g.adjacency(i, j), std::exp(-(e.row(i) - e.row(j)).squaredNorm() / (2 * 0.64)), 1e-14);
}

TEST(BuildGraph, CoincidentVerticesHaveUnitWeight) {
  const Eigen::MatrixXd e = Eigen::MatrixXd::Constant(3, 4, 0.2);
  const SimilarityGraph g = build_graph(e, 0.5, 0.0);
  EXPECT_EQ(g.adjacency(0, 1), 1.0);
  EXPECT_EQ(g.rho(2), 3.0);
  // Degree normalization by rho_i rho_j = 9.
  EXPECT_NEAR(build_graph(e, 0.5, 1.0).adjacency(0, 2), 1.0 / 9.0, 1e-15);
}

TEST(BuildGraph, RejectsBadInputs) {
  EXPECT_THROW(build_graph(Eigen::MatrixXd::Zero(1, 3), 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_graph(Eigen::MatrixXd::Zero(3, 3), 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_graph(Eigen::MatrixXd::Zero(3, 3), 1.0, -1.0), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 3);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(build_graph(bad, 1.0, 1.0), std::invalid_argument);
}

TEST(QuadraticForm, TwoCoincidentNodes) {
  const SimilarityGraph g = build_graph(Eigen::MatrixXd::Zero(2, 2), 1.0, 0.0);
  Eigen::VectorXd u(2);
  u << 0.0, std::sqrt(2.0);
  EXPECT_NEAR(quadratic_form(g, u), 2.0, 1e-15);
  EXPECT_THROW(quadratic_form(g, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(QuadraticForm, EqualsEdgeSumOnRandomGraphs) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 12);
  std::uniform_real_distribution<double> eps(0.2, 3.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double lambdas[] = {0.0, 0.5, 1.0};
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng);
    const SimilarityGraph g = build_graph(random_embeddings(rng, n, 4), eps(rng), lambdas[trial % 3]);
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u(i) = normal(rng);
    const double expected = edge_sum(g.adjacency, u);
    EXPECT_LE(std::abs(quadratic_form(g, u) - expected), 1e-10 * std::max(std::abs(expected), 1e-300));
  }
}

TEST(QuadraticForm, IsNonNegativeAndVanishesOnConstants) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityGraph g = build_graph(random_embeddings(rng, 9, 3), 1.0, 1.0);
    Eigen::VectorXd u(9);
    for (int i = 0; i < 9; ++i) u(i) = normal(rng);
    EXPECT_GE(quadratic_form(g, u), 0.0);
    EXPECT_NEAR(quadratic_form(g, Eigen::VectorXd::Constant(9, 3.5)), 0.0, 1e-12);
  }
}

TEST(QuadraticForm, PermutationEquivariant) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd e = random_embeddings(rng, 8, 3);
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(8, -1.0, 2.0);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd ep(8, 3);
  Eigen::VectorXd up(8);
  for (int i = 0; i < 8; ++i) {
    ep.row(i) = e.row(perm[static_cast<std::size_t>(i)]);
    up(i) = u(perm[static_cast<std::size_t>(i)]);
  }
  const SimilarityGraph g = build_graph(e, 1.1, 1.0);
  const SimilarityGraph gp = build_graph(ep, 1.1, 1.0);
  EXPECT_NEAR(quadratic_form(g, u), quadratic_form(gp, up), 1e-12);
  EXPECT_NEAR(g.adjacency_frobenius(), gp.adjacency_frobenius(), 1e-12);
}

TEST(RegularizedObjective, HandComputedThreeVertexGraph) {
  // Embeddings on a line at 0, 1, 2 with eps 1 and no degree normalization.
  Eigen::MatrixXd e(3, 1);
  e << 0.0, 1.0, 2.0;
  const SimilarityGraph g = build_graph(e, 1.0, 0.0);
  const double a01 = std::exp(-0.5), a02 = std::exp(-2.0);
  Eigen::VectorXd u(3);
  u << 1.0, 0.0, 2.0;
  const double tau = a01 * 1.0 + a02 * 1.0 + a01 * 4.0;
  const double frob = std::sqrt(2 * (2 * a01 * a01 + a02 * a02));
  EXPECT_NEAR(quadratic_form(g, u), tau, 1e-14);
  EXPECT_NEAR(regularized_objective(g, u, 0.3), tau - 0.3 * frob, 1e-14);
  EXPECT_NEAR(g.mean_adjacency(), (2 * a01 + a02) / 3.0, 1e-15);
}

TEST(MedianPairwiseDistance, SmallExample) {
  Eigen::MatrixXd e(3, 1);
  e << 0.0, 1.0, 3.0;  // distances 1, 2, 3
  EXPECT_DOUBLE_EQ(median_pairwise_distance(e), 2.0);
}

struct Instance {
  Eigen::MatrixXd coords;
  Eigen::VectorXd log_sigma;
  Eigen::VectorXd u;
};

Instance random_instance(std::mt19937_64& rng, int n, int dims) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance in{Eigen::MatrixXd(n, dims), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < dims; ++a) in.coords(i, a) = unit(rng);
    in.log_sigma(i) = std::log(0.03 + 0.15 * unit(rng));
    in.u(i) = unit(rng);
  }
  return in;
}

TEST(EvaluateObjective, ValueMatchesGraphFunctions) {
  std::mt19937_64 rng(6);
  const SuperGaussianConfig cfg = default_super_gaussian(1, 16);
  const Instance in = random_instance(rng, 7, 1);
  const ObjectiveEvaluation ev = evaluate_objective(in.coords, in.log_sigma, in.u, cfg, 0.9, 1.0, 0.2, false);
  const SimilarityGraph g =
      build_graph(super_gaussian_embed_batch(in.coords, sigma_from_log(in.log_sigma, cfg.sigma_min), cfg), 0.9, 1.0);
  EXPECT_NEAR(ev.tau, quadratic_form(g, in.u), 1e-12);
  EXPECT_NEAR(ev.tau_bar, regularized_objective(g, in.u, 0.2), 1e-12);
  EXPECT_NEAR(ev.mean_adjacency, g.mean_adjacency(), 1e-14);
}

TEST(EvaluateObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const int dims = 1 + trial % 2;
    const SuperGaussianConfig cfg = default_super_gaussian(dims, 16);
    const Instance in = random_instance(rng, 8, dims);
    const double eps = 0.5 + unit(rng);
    const double lambda_deg = trial % 3 == 0 ? 0.0 : 1.0;
    const double lambda_adj = 0.2 * unit(rng);
    const ObjectiveEvaluation ev =
        evaluate_objective(in.coords, in.log_sigma, in.u, cfg, eps, lambda_deg, lambda_adj, true);
    const double scale = ev.grad_log_sigma.cwiseAbs().maxCoeff();
    const double h = 1e-5;
    for (int i = 0; i < 8; ++i) {
      Eigen::VectorXd plus = in.log_sigma, minus = in.log_sigma;
      plus(i) += h;
      minus(i) -= h;
      const double numeric =
          (evaluate_objective(in.coords, plus, in.u, cfg, eps, lambda_deg, lambda_adj, false).tau_bar -
           evaluate_objective(in.coords, minus, in.u, cfg, eps, lambda_deg, lambda_adj, false).tau_bar) /
          (2 * h);
      EXPECT_LE(std::abs(numeric - ev.grad_log_sigma(i)), 1e-4 * std::max(std::abs(numeric), scale))
          << "trial " << trial << " vertex " << i;
    }
    EXPECT_LT(analytic_vs_numeric_grad(in.coords, in.log_sigma, in.u, cfg, eps, lambda_deg, lambda_adj), 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(EvaluateObjective, ConstantTargetWithoutPenaltyHasZeroGradient) {
  std::mt19937_64 rng(8);
  const SuperGaussianConfig cfg = default_super_gaussian(1, 16);
  Instance in = random_instance(rng, 6, 1);
  in.u.setConstant(0.4);
  const ObjectiveEvaluation ev = evaluate_objective(in.coords, in.log_sigma, in.u, cfg, 1.0, 1.0, 0.0, true);
  EXPECT_EQ(ev.tau, 0.0);
  EXPECT_EQ(ev.grad_log_sigma.cwiseAbs().maxCoeff(), 0.0);
}

GraphObjectiveConfig short_config(double lambda_adj) {
  GraphObjectiveConfig cfg;
  cfg.lambda_adj = lambda_adj;
  cfg.iterations = 200;
  return cfg;
}

TEST(OptimizeSigma, ConstantTargetWithoutPenaltyKeepsInitialWidths) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  const Eigen::MatrixXd x = lattice_coords({40});
  const SigmaOptimization r = optimize_sigma(x, Eigen::VectorXd::Constant(40, 2.0), cfg, short_config(0.0));
  const double sigma0 = 1.5 * cfg.center_spacing();
  EXPECT_LE((r.sigma.sigma.array() - sigma0).abs().maxCoeff(), 0.01 * sigma0);
}

TEST(OptimizeSigma, TraceDecreasesAndWidthsStayAboveFloor) {
  const SampledSignal s = synthetic_signal_1d(128, 3);
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  const SigmaOptimization r = optimize_sigma(s.coords, jacobian_frobenius(s), cfg, short_config(0.1));
  ASSERT_EQ(r.trace.size(), 201u);
  EXPECT_EQ(r.trace.front().iteration, 0);
  EXPECT_EQ(r.trace.back().iteration, 200);
  EXPECT_LT(r.trace.back().tau_bar, r.trace.front().tau_bar);
  EXPECT_GE(r.sigma.sigma.minCoeff(), cfg.sigma_min);
  EXPECT_TRUE(r.sigma.sigma.allFinite());
  EXPECT_GT(r.eps, 0.0);
}

TEST(OptimizeSigma, StepTargetSharpensWidthsNearTheStep) {
  const int n = 96;
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  Eigen::MatrixXd v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = i < n / 2 ? 0.0 : 1.0;
  const SampledSignal s = make_signal({n}, v);
  const Eigen::VectorXd u = jacobian_frobenius(s);
  const SigmaOptimization r = optimize_sigma(s.coords, u, cfg, short_config(0.1));
  Eigen::VectorXd sorted = r.sigma.sigma;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted(n / 2);
  EXPECT_LT(r.sigma.sigma(n / 2 - 1), median);
  EXPECT_LT(r.sigma.sigma(n / 2), median);
}

TEST(OptimizeSigma, UnpenalizedObjectiveShrinksAdjacency) {
  const SampledSignal s = synthetic_signal_1d(128, 5);
  const SuperGaussianConfig cfg = default_super_gaussian(1, 64);
  const Eigen::VectorXd u = jacobian_frobenius(s);
  const SigmaOptimization free_run = optimize_sigma(s.coords, u, cfg, short_config(0.0));
  const SigmaOptimization penalized = optimize_sigma(s.coords, u, cfg, short_config(0.1));
  EXPECT_LT(free_run.mean_adjacency_final, free_run.mean_adjacency_initial);
  const double free_drop = 1.0 - free_run.mean_adjacency_final / free_run.mean_adjacency_initial;
  const double penalized_drop = 1.0 - penalized.mean_adjacency_final / penalized.mean_adjacency_initial;
  EXPECT_LT(penalized_drop, free_drop);
}

TEST(OptimizeSigma, RejectsOversizedAndInvalidInputs) {
  const SuperGaussianConfig cfg = default_super_gaussian(1, 16);
  GraphObjectiveConfig gc;
  gc.max_graph_size = 10;
  const Eigen::MatrixXd x = lattice_coords({11});
  EXPECT_THROW(optimize_sigma(x, Eigen::VectorXd::Zero(11), cfg, gc), std::invalid_argument);
  gc.max_graph_size = 100;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(11);
  u(3) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(optimize_sigma(x, u, cfg, gc), std::invalid_argument);
  EXPECT_THROW(optimize_sigma(x, Eigen::VectorXd::Zero(5), cfg, gc), std::invalid_argument);
}

TEST(GraphCsv, WritesTraceAndField) {
  testing::TempDir dir;
  write_loss_trace_csv(dir.path() / "trace.csv", {{0, 1.0, 2.0, 0.8}, {1, 0.5, 2.0, 0.3}});
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  write_sigma_field_csv(dir.path() / "sigma.csv", x, {Eigen::Vector2d(0.1, 0.25), 1e-3});
  std::ifstream a(dir.path() / "trace.csv"), b(dir.path() / "sigma.csv");
  std::string line;
  std::getline(a, line);
  EXPECT_EQ(line, "iteration,tau,adj_norm,tau_bar");
  std::getline(a, line);
  EXPECT_EQ(line, "0,1,2,0.8");
  std::getline(b, line);
  EXPECT_EQ(line, "x0,sigma");
  std::getline(b, line);
  std::getline(b, line);
  EXPECT_EQ(line, "1,0.25");
}

}  // namespace
}  // namespace coordfit
