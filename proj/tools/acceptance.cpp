#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "coordfit/embedders.hpp"
#include "coordfit/experiments.hpp"
#include "coordfit/graphlap.hpp"
#include "coordfit/net.hpp"
#include "coordfit/sigma_model.hpp"
#include "coordfit/signals.hpp"
#include "coordfit/synthetic.hpp"

namespace fs = std::filesystem;
using namespace coordfit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;  // non-positive: no runtime limit
  std::function<Outcome(const fs::path&)> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.2e", v); }
std::string db(double v) { return fmt("%.2f", v); }

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-8);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double mean_of(const Report& r, const std::string& variant, bool train, std::optional<int> depth = {},
               std::optional<double> fraction = {}) {
  const auto rows = r.select(variant, depth, fraction);
  if (rows.empty()) return std::nan("");
  double acc = 0.0;
  for (const auto* row : rows) acc += train ? row->train_psnr : row->test_psnr;
  return acc / static_cast<double>(rows.size());
}

int failed_rows(const Report& r) {
  return static_cast<int>(std::count_if(r.rows.begin(), r.rows.end(), [](const ReportRow& x) { return x.note != "ok"; }));
}

// 1. Laplacian quadratic form against an independently assembled edge sum.
Outcome laplacian_identity(const fs::path&) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 12), dim(1, 6), pick(0, 2);
  const double lambdas[] = {0.0, 0.5, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int L = size(rng);
    const int D = dim(rng);
    const double eps = std::exp(std::log(0.05) + unit(rng) * std::log(100.0));
    const double lambda_deg = lambdas[pick(rng)];
    Eigen::MatrixXd emb(L, D);
    Eigen::VectorXd u(L);
    for (int i = 0; i < L; ++i) {
      for (int d = 0; d < D; ++d) emb(i, d) = unit(rng);
      u(i) = 2.0 * unit(rng) - 1.0;
    }
    Eigen::MatrixXd theta(L, L);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) theta(i, j) = std::exp(-(emb.row(i) - emb.row(j)).squaredNorm() / (2 * eps * eps));
    const Eigen::VectorXd rho = theta.rowwise().sum();
    double edge_sum = 0.0;
    for (int i = 0; i < L; ++i)
      for (int j = i + 1; j < L; ++j) {
        const double w = std::pow(rho(i) * rho(j), -lambda_deg) * theta(i, j);
        edge_sum += w * (u(i) - u(j)) * (u(i) - u(j));
      }
    const double q = quadratic_form(build_graph(emb, eps, lambda_deg), u);
    worst = std::max(worst, std::abs(q - edge_sum) / std::max(std::abs(edge_sum), 1e-300));
  }
  return {worst <= 1e-10, "max relative error " + sci(worst) + " over 200 graphs (limit 1e-10)"};
}

// 2. Analytic gradients against central finite differences.
Outcome gradient_integrity(const fs::path&) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  constexpr int kInstances = 100;
  double w_worst = 0.0, x_worst = 0.0, j_worst = 0.0, s_worst = 0.0;

  for (int t = 0; t < kInstances; ++t) {
    const int d_in = uni(1, 4), d_out = uni(1, 3), depth = uni(1, 3), batch = uni(1, 5);
    MlpModel model = MlpModel::make(d_in, uni(2, 6), depth, d_out, static_cast<std::uint64_t>(t));
    for (Eigen::Index k = 0; k < model.params().size(); ++k) model.params()(k) = 0.5 * normal(rng);
    Eigen::MatrixXd x(batch, d_in), y(batch, d_out);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = unit(rng);
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = unit(rng);
    const MlpGradients g = backward(model, x, y, true);
    auto loss = [&](const MlpModel& m, const Eigen::MatrixXd& in) { return (forward(m, in) - y).squaredNorm() / static_cast<double>(y.size()); };
    const double h = 1e-6;
    Eigen::VectorXd num_w(model.params().size());
    for (Eigen::Index k = 0; k < num_w.size(); ++k) {
      MlpModel p = model, m = model;
      p.params()(k) += h;
      m.params()(k) -= h;
      num_w(k) = (loss(p, x) - loss(m, x)) / (2 * h);
    }
    Eigen::MatrixXd num_x(batch, d_in);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Eigen::MatrixXd xp = x, xm = x;
      xp.data()[k] += h;
      xm.data()[k] -= h;
      num_x.data()[k] = (loss(model, xp) - loss(model, xm)) / (2 * h);
    }
    w_worst = std::max(w_worst, rel_err(g.params, num_w));
    x_worst = std::max(x_worst, rel_err(g.inputs, num_x));
  }

  for (int t = 0; t < kInstances; ++t) {
    const int n = uni(1, 3);
    const auto mode = (n == 1 || t % 2 == 0) ? SuperGaussianMode::projected : SuperGaussianMode::per_axis;
    Eigen::VectorXd alpha(n);
    for (int d = 0; d < n; ++d) alpha(d) = 0.5 + unit(rng);
    const auto cfg = make_super_gaussian(n, 6 * n, 1.0 + 2.0 * unit(rng), 1e-3, mode, alpha);
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; ++d) x(d) = unit(rng);
    const double sigma = 0.05 + 0.4 * unit(rng);
    const Eigen::MatrixXd J = super_gaussian_jacobian(x, sigma, cfg);
    Eigen::MatrixXd num(J.rows(), n);
    for (int d = 0; d < n; ++d) {
      Eigen::VectorXd xp = x, xm = x;
      xp(d) += 1e-6;
      xm(d) -= 1e-6;
      num.col(d) = (super_gaussian_embed(xp, sigma, cfg) - super_gaussian_embed(xm, sigma, cfg)) / 2e-6;
    }
    j_worst = std::max(j_worst, rel_err(J, num));
  }

  const double lambdas[] = {0.0, 0.5, 1.0};
  for (int t = 0; t < kInstances; ++t) {
    const int n = uni(1, 2), L = uni(3, 10);
    const auto cfg = make_super_gaussian(n, 8 * n, 2.0, 1e-3, n == 1 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis);
    Eigen::MatrixXd coords(L, n);
    Eigen::VectorXd s(L), u(L);
    for (Eigen::Index k = 0; k < coords.size(); ++k) coords.data()[k] = unit(rng);
    for (int i = 0; i < L; ++i) {
      s(i) = std::log(0.05 + 0.3 * unit(rng));
      u(i) = unit(rng);
    }
    const double eps = 0.3 + unit(rng), lambda_deg = lambdas[t % 3], lambda_adj = 0.5 * unit(rng);
    const auto ev = evaluate_objective(coords, s, u, cfg, eps, lambda_deg, lambda_adj, true);
    Eigen::VectorXd num(L);
    for (int i = 0; i < L; ++i) {
      Eigen::VectorXd sp = s, sm = s;
      sp(i) += 1e-6;
      sm(i) -= 1e-6;
      num(i) = (evaluate_objective(coords, sp, u, cfg, eps, lambda_deg, lambda_adj, false).tau_bar -
                evaluate_objective(coords, sm, u, cfg, eps, lambda_deg, lambda_adj, false).tau_bar) / 2e-6;
    }
    s_worst = std::max(s_worst, rel_err(ev.grad_log_sigma, num));
  }

  const double worst = std::max({w_worst, x_worst, j_worst, s_worst});
  return {worst <= 1e-4, "max relative error: weights " + sci(w_worst) + ", inputs " + sci(x_worst) +
                             ", embedding Jacobian " + sci(j_worst) + ", log-width " + sci(s_worst) + " (" +
                             std::to_string(kInstances) + " instances each, limit 1e-4)"};
}

// Closed-form embedding Jacobian (D x N) written out component by component.
Eigen::MatrixXd reference_jacobian(const Eigen::VectorXd& x, double sigma, const SuperGaussianConfig& cfg) {
  const int n = cfg.n_dims_in;
  const Eigen::Index c = cfg.centers.size();
  auto bump = [&](double p, double t) { return std::exp(-cfg.b * (p - t) * (p - t) / (2 * sigma * sigma)); };
  if (cfg.mode == SuperGaussianMode::projected) {
    Eigen::MatrixXd J(c, n);
    const double p = x.dot(cfg.alpha);
    for (Eigen::Index i = 0; i < c; ++i)
      for (int d = 0; d < n; ++d) J(i, d) = bump(p, cfg.centers(i)) * (-cfg.b * (p - cfg.centers(i)) / (sigma * sigma)) * cfg.alpha(d);
    return J;
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(c * n, n);
  for (int d = 0; d < n; ++d)
    for (Eigen::Index i = 0; i < c; ++i)
      J(d * c + i, d) = bump(x(d), cfg.centers(i)) * (-cfg.b * (x(d) - cfg.centers(i)) / (sigma * sigma));
  return J;
}

// 3. Metric tensor against J^T J from two Jacobians; PSD; 1D volume element.
Outcome metric_tensor_check(const fs::path&) {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double lib_worst = 0.0, ref_worst = 0.0, sym_worst = 0.0, min_eig = 0.0, vol_worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + t % 3;
    const auto mode = (t / 3) % 2 == 0 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis;
    Eigen::VectorXd alpha(n);
    for (int d = 0; d < n; ++d) alpha(d) = 0.5 + unit(rng);
    const auto cfg = make_super_gaussian(n, 8 * n, 2.0, 1e-3, mode, alpha);
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; ++d) x(d) = unit(rng);
    const double sigma = 0.05 + 0.45 * unit(rng);
    const Eigen::MatrixXd M = metric_tensor(x, sigma, cfg);
    const Eigen::MatrixXd Jl = super_gaussian_jacobian(x, sigma, cfg);
    const Eigen::MatrixXd Jr = reference_jacobian(x, sigma, cfg);
    const double scale = std::max(M.norm(), 1e-300);
    lib_worst = std::max(lib_worst, (M - Jl.transpose() * Jl).norm() / scale);
    ref_worst = std::max(ref_worst, (M - Jr.transpose() * Jr).norm() / scale);
    sym_worst = std::max(sym_worst, (M - M.transpose()).norm() / scale);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff() / scale);
    if (n == 1) vol_worst = std::max(vol_worst, std::abs(volume_element(x, sigma, cfg) - Jr.norm()) / std::max(Jr.norm(), 1e-300));
  }
  const bool ok = lib_worst <= 1e-12 && ref_worst <= 1e-12 && sym_worst <= 1e-12 && min_eig >= -1e-12 && vol_worst <= 1e-12;
  return {ok, "relative error vs J^T J: analytic " + sci(lib_worst) + ", closed form " + sci(ref_worst) +
                  "; asymmetry " + sci(sym_worst) + "; min eigenvalue/norm " + sci(min_eig) +
                  "; 1D volume element " + sci(vol_worst) + " (1000 probes, limit 1e-12)"};
}

// 4. Without the adjacency term the widths collapse the graph.
Outcome trivial_solution(const fs::path&) {
  const SampledSignal sig = synthetic_signal_1d(512, 1000);
  const GradientField g = jacobian_frobenius(sig);
  const auto embed = default_super_gaussian(1);
  double reduction[2];
  const double lambdas[] = {0.0, 0.1};
  for (int k = 0; k < 2; ++k) {
    GraphObjectiveConfig cfg;
    cfg.lambda_adj = lambdas[k];
    cfg.iterations = 200;
    const SigmaOptimization r = optimize_sigma(sig.coords, g, embed, cfg);
    reduction[k] = 1.0 - r.mean_adjacency_final / r.mean_adjacency_initial;
  }
  return {reduction[0] >= 0.5 && reduction[1] < reduction[0],
          "mean adjacency reduction " + fmt("%.1f%%", 100 * reduction[0]) + " at lambda_adj 0 (need >= 50%), " +
              fmt("%.1f%%", 100 * reduction[1]) + " at lambda_adj 0.1 (need smaller); 200 iterations"};
}

ExperimentSpec base_spec(const fs::path& out) {
  ExperimentSpec s;
  s.out = out;
  s.write_loss = false;
  return s;
}

// 5. Width/gradient relation on the 1D dev set.
Outcome sigma_relation(const fs::path& root) {
  ExperimentSpec s = base_spec(root / "dev_fit");
  s.dev_dims = {1};
  const SigmaDevFit fit = run_sigma_dev_fit(s).front();
  const double ratio = fit.residual_rms / fit.sigma_std;
  return {fit.spearman < 0.0 && ratio < 0.25,
          "Spearman " + fmt("%.3f", fit.spearman) + " (need < 0), residual RMS / sigma std " + fmt("%.3f", ratio) +
              " (need < 0.25); " + std::to_string(fit.g.size()) + " pairs from " + std::to_string(s.dev_count) + " signals"};
}

// 6. 1D orderings.
Outcome encode1d_orderings(const fs::path& root) {
  ExperimentSpec dev = base_spec(root / "encode1d");
  dev.dev_dims = {1};
  run_sigma_dev_fit(dev);
  ExperimentSpec s = base_spec(root / "encode1d");
  s.experiment = Experiment::encode1d;
  s.repeats = 3;
  s.variants = {"no_pe", "sg_uniform", "sg_beta", "sg_endtoend"};
  const Report r = run_experiment(s);
  std::map<std::string, std::pair<double, double>> m;
  for (const auto& v : s.variants) m[v] = {mean_of(r, v, true), mean_of(r, v, false)};
  const double beta = m["sg_beta"].second, uni = m["sg_uniform"].second, nope = m["no_pe"].second;
  double best_other_train = 0.0;
  for (const auto& v : {"no_pe", "sg_uniform", "sg_beta"}) best_other_train = std::max(best_other_train, m[v].first);
  const auto& e2e = m["sg_endtoend"];
  const double gap = std::abs(m["no_pe"].first - nope);
  const bool ok = failed_rows(r) == 0 && beta > uni && uni > nope && e2e.first >= best_other_train && e2e.second < beta && gap < 1.0;
  std::string detail = "mean train/test:";
  for (const auto& v : s.variants) detail += " " + v + " " + db(m[v].first) + "/" + db(m[v].second) + ";";
  detail += " no_pe gap " + db(gap) + " dB; end-to-end train >= best other (" + db(best_other_train) + ")";
  return {ok, detail};
}

// 7. Depth and sampling trends on one natural image.
Outcome expressiveness_trends(const fs::path& root) {
  ExperimentSpec dev = base_spec(root / "expressiveness");
  dev.dev_dims = {2};
  dev.categories = {ImageCategory::natural};
  run_sigma_dev_fit(dev);
  ExperimentSpec s = base_spec(root / "expressiveness");
  s.experiment = Experiment::expressiveness;
  s.count = 1;
  s.categories = {ImageCategory::natural};
  s.schemes = {SplitScheme::regular};
  s.search_epochs = 500;
  const Report r = run_experiment(s);
  constexpr double tol = 0.3;
  const std::vector<std::string> variants = {"rff_matched", "sg_uniform", "sg_beta"};
  const std::vector<double> fractions = {0.25, 0.10};
  std::vector<std::string> violations;
  auto test = [&](const std::string& v, int d, double f) { return mean_of(r, v, false, d, f); };
  for (double f : fractions) {
    const double beta = test("sg_beta", 1, f);
    for (const auto& other : {"sg_uniform", "rff_matched"})
      if (beta < test(other, 1, f) - tol)
        violations.push_back("depth 1 f" + db(f) + ": sg_beta " + db(beta) + " < " + other + " " + db(test(other, 1, f)));
  }
  for (const auto& v : variants)
    for (double f : fractions)
      for (int d = 1; d < 3; ++d)
        if (test(v, d + 1, f) < test(v, d, f) - tol)
          violations.push_back(v + " f" + db(f) + ": depth " + std::to_string(d + 1) + " " + db(test(v, d + 1, f)) + " < depth " +
                               std::to_string(d) + " " + db(test(v, d, f)));
  for (const auto& v : variants)
    for (int d = 1; d <= 3; ++d)
      if (test(v, d, 0.25) < test(v, d, 0.10) - tol)
        violations.push_back(v + " depth " + std::to_string(d) + ": 25% " + db(test(v, d, 0.25)) + " < 10% " + db(test(v, d, 0.10)));
  std::string detail = "test PSNR (d1..3 @25% | @10%):";
  for (const auto& v : variants) {
    detail += " " + v;
    for (double f : fractions) {
      for (int d = 1; d <= 3; ++d) detail += " " + db(test(v, d, f));
      if (f == fractions.front()) detail += " |";
    }
    detail += ";";
  }
  if (failed_rows(r) > 0) violations.push_back(std::to_string(failed_rows(r)) + " failed rows");
  detail += violations.empty() ? " all comparisons within 0.3 dB" : " violations: ";
  for (std::size_t i = 0; i < violations.size(); ++i) detail += (i ? "; " : "") + violations[i];
  return {violations.empty(), detail};
}

// 8. Polynomial fit and width interpolation oracles.
Outcome polynomial_oracle(const fs::path&) {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double planted[] = {0.4, -0.15, 0.03, -0.002};
  Eigen::VectorXd g(20), s(20);
  for (int i = 0; i < 20; ++i) {
    g(i) = 5.0 * unit(rng);
    s(i) = planted[0] + g(i) * (planted[1] + g(i) * (planted[2] + g(i) * planted[3]));
  }
  const Eigen::VectorXd raw = raw_coefficients(fit_polynomial(g, s, 4, 0.0));
  double coef_err = 0.0;
  for (int k = 0; k < 4; ++k) coef_err = std::max(coef_err, std::abs(raw(k) - planted[k]));

  const int n = 9;
  Eigen::MatrixXd nodes(n, 1), mids(n - 1, 1);
  Eigen::VectorXd vals(n), mid_expect(n - 1);
  for (int i = 0; i < n; ++i) {
    nodes(i, 0) = static_cast<double>(i) / (n - 1);
    vals(i) = 0.01 + 0.2 * unit(rng);
  }
  for (int i = 0; i + 1 < n; ++i) {
    mids(i, 0) = 0.5 * (nodes(i, 0) + nodes(i + 1, 0));
    mid_expect(i) = 0.5 * (vals(i) + vals(i + 1));
  }
  double node_err = (interpolate_sigma(nodes, vals, nodes) - vals).cwiseAbs().maxCoeff();
  double mid_err = (interpolate_sigma(nodes, vals, mids) - mid_expect).cwiseAbs().maxCoeff();

  // 2D: bilinear on a 5x5 train sublattice; cell centres are corner means.
  const Eigen::MatrixXd lat = lattice_coords({5, 5});
  Eigen::VectorXd v2(25);
  for (int i = 0; i < 25; ++i) v2(i) = 0.01 + 0.2 * unit(rng);
  Eigen::MatrixXd centres(16, 2);
  Eigen::VectorXd centre_expect(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      centres.row(r * 4 + c) << (r + 0.5) / 4.0, (c + 0.5) / 4.0;
      centre_expect(r * 4 + c) = 0.25 * (v2(r * 5 + c) + v2(r * 5 + c + 1) + v2((r + 1) * 5 + c) + v2((r + 1) * 5 + c + 1));
    }
  node_err = std::max(node_err, (interpolate_sigma(lat, v2, lat) - v2).cwiseAbs().maxCoeff());
  mid_err = std::max(mid_err, (interpolate_sigma(lat, v2, centres) - centre_expect).cwiseAbs().maxCoeff());

  const bool ok = coef_err <= 1e-8 && node_err == 0.0 && mid_err <= 1e-14;
  return {ok, "cubic coefficient error " + sci(coef_err) + " (limit 1e-8); node error " + sci(node_err) +
                  " (need 0); midpoint error " + sci(mid_err) + " (limit 1e-14)"};
}

// 9. Coordinate recovery on the most complex dev image.
Outcome recovery_ordering(const fs::path& root) {
  constexpr int kSize = 32;
  const fs::path dir = root / "recover";
  const auto files = write_dev_set_2d(dir / "dev2d", 20, kSize, ImageCategory::natural, 1000);
  fs::path hardest;
  double best = -1.0;
  for (const auto& f : files) {
    const double c = signal_complexity(load_signal(f, SignalKind::image_2d));
    if (c > best) best = c, hardest = f;
  }
  ExperimentSpec dev = base_spec(dir);
  dev.dev_dims = {2};
  dev.categories = {ImageCategory::natural};
  dev.image_size = kSize;
  run_sigma_dev_fit(dev);
  ExperimentSpec s = base_spec(dir);
  s.experiment = Experiment::recover;
  s.signals = {hardest};
  s.image_size = kSize;
  s.search_epochs = 500;
  s.variants = {"sg_beta", "rff_matched"};
  const Report r = run_experiment(s);
  const double sg = mean_of(r, "sg_beta", false), rff = mean_of(r, "rff_matched", false);
  return {failed_rows(r) == 0 && sg >= rff,
          hardest.filename().string() + " (" + std::to_string(kSize) + "x" + std::to_string(kSize) + ", complexity " +
              fmt("%.2f", best) + "): recovery PSNR super-Gaussian " + db(sg) + " dB vs RFF " + db(rff) + " dB; fits " +
              db(mean_of(r, "sg_beta", true)) + "/" + db(mean_of(r, "rff_matched", true)) + " dB, " +
              std::to_string(s.recover_steps) + " Adam steps each"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Byte-identical reports across reruns of every experiment.
Outcome determinism(const fs::path& root) {
  std::vector<std::string> mismatched;
  int checked = 0;
  for (const Experiment e : {Experiment::encode1d, Experiment::encode2d, Experiment::expressiveness,
                             Experiment::sweep_rff, Experiment::recover}) {
    std::string reports[2];
    for (int k = 0; k < 2; ++k) {
      ExperimentSpec s = base_spec(root / "determinism" / (to_string(e) + "_" + std::to_string(k)));
      s.count = 1;
      s.length = 128;
      s.image_size = 16;
      s.epochs = 100;
      s.lr = 1e-3;
      s.search_epochs = 50;
      s.hidden = 32;
      s.d_embed = 32;
      s.dev_count = 2;
      s.recover_steps = 50;
      s.categories = {ImageCategory::natural};
      s.write_recon = false;
      run_sigma_dev_fit(s);
      s.experiment = e;
      if (e == Experiment::expressiveness) s.depths = {1, 2};
      run_experiment(s);
      reports[k] = slurp(s.out / "report.csv");
    }
    ++checked;
    if (reports[0].empty() || reports[0] != reports[1]) mismatched.push_back(to_string(e));
  }
  std::string detail = std::to_string(checked) + " experiments rerun";
  if (!mismatched.empty()) {
    detail += "; differing reports:";
    for (const auto& m : mismatched) detail += " " + m;
  } else {
    detail += "; all report.csv files byte-identical";
  }
  return {mismatched.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks: one PASS/FAIL line per criterion"};
  std::vector<int> only;
  std::string out = "acceptance_out";
  app.add_option("--only", only, "criterion numbers to run (repeatable)");
  app.add_option("--out", out, "scratch directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "Laplacian identity", 5, laplacian_identity},
      {2, "gradient integrity", 60, gradient_integrity},
      {3, "metric tensor", 10, metric_tensor_check},
      {4, "trivial solution", 120, trivial_solution},
      {5, "width/gradient relation", 600, sigma_relation},
      {6, "1D orderings", 1200, encode1d_orderings},
      {7, "depth and sampling trends", 2700, expressiveness_trends},
      {8, "polynomial oracle", 1, polynomial_oracle},
      {9, "coordinate recovery", 600, recovery_ordering},
      {10, "determinism", 0, determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  const fs::path root(out);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(root);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::string timing = fmt("%.1f s", secs);
    if (c.limit_s > 0) timing += fmt(" < %.0f s", c.limit_s) + (in_time ? "" : " EXCEEDED");
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << timing << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
