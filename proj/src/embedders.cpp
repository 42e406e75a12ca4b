#include "coordfit/embedders.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "coordfit/kvconfig.hpp"

namespace coordfit {

namespace {

void require_sigma(double sigma, const SuperGaussianConfig& cfg) {
  if (!(sigma >= cfg.sigma_min) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma below the embedder floor");
}

void require_dims(const Eigen::Ref<const Eigen::VectorXd>& x, const SuperGaussianConfig& cfg) {
  if (x.size() != cfg.n_dims_in) throw std::invalid_argument("coordinate dimension mismatch");
}

// Calls fn(component, axis, offset) for every component. In projected mode the
// axis is -1 and the offset is x.alpha - t_i.
template <typename Fn>
void for_each_offset(const Eigen::Ref<const Eigen::VectorXd>& x, const SuperGaussianConfig& cfg,
                     Fn&& fn) {
  const int per_axis = cfg.centers_per_axis();
  if (cfg.mode == SuperGaussianMode::projected) {
    const double p = x.dot(cfg.alpha);
    for (int i = 0; i < per_axis; ++i) fn(i, -1, p - cfg.centers(i));
    return;
  }
  for (int a = 0; a < cfg.n_dims_in; ++a)
    for (int i = 0; i < per_axis; ++i) fn(a * per_axis + i, a, x(a) - cfg.centers(i));
}

int block_count(const SuperGaussianConfig& cfg) {
  return cfg.mode == SuperGaussianMode::projected ? 1 : cfg.n_dims_in;
}

// P x C offsets of the projected coordinate (or axis `block`) from the centers.
Eigen::ArrayXXd offsets(const Eigen::MatrixXd& coords, const SuperGaussianConfig& cfg, int block) {
  const Eigen::VectorXd p =
      cfg.mode == SuperGaussianMode::projected ? Eigen::VectorXd(coords * cfg.alpha) : Eigen::VectorXd(coords.col(block));
  Eigen::ArrayXXd off(coords.rows(), cfg.centers_per_axis());
  off.colwise() = p.array();
  off.rowwise() -= cfg.centers.transpose().array();
  return off;
}

void check_batch(const Eigen::MatrixXd& coords, const Eigen::VectorXd& sigma, const SuperGaussianConfig& cfg) {
  if (sigma.size() != coords.rows()) throw std::invalid_argument("one sigma per coordinate");
  if (coords.cols() != cfg.n_dims_in) throw std::invalid_argument("coordinate dimension mismatch");
  if (sigma.size() > 0 && !(sigma.minCoeff() >= cfg.sigma_min))
    throw std::invalid_argument("sigma below the embedder floor");
}

}  // namespace

std::string to_string(SuperGaussianMode mode) {
  return mode == SuperGaussianMode::projected ? "projected" : "per_axis";
}

SuperGaussianMode parse_super_gaussian_mode(const std::string& text) {
  if (text == "projected") return SuperGaussianMode::projected;
  if (text == "per_axis") return SuperGaussianMode::per_axis;
  throw std::invalid_argument("unknown super-Gaussian mode: " + text);
}

double SuperGaussianConfig::center_spacing() const {
  return centers.size() > 1 ? centers(1) - centers(0) : 1.0;
}

SuperGaussianConfig make_super_gaussian(int n_dims_in, int d_embed, double b, double sigma_min,
                                        SuperGaussianMode mode, Eigen::VectorXd alpha) {
  if (n_dims_in < 1) throw std::invalid_argument("need at least one input dimension");
  if (!(b > 0.0)) throw std::invalid_argument("super-Gaussian exponent must be positive");
  if (!(sigma_min > 0.0)) throw std::invalid_argument("sigma floor must be positive");
  if (alpha.size() == 0) alpha = Eigen::VectorXd::Ones(n_dims_in);
  if (alpha.size() != n_dims_in) throw std::invalid_argument("alpha must have one entry per axis");

  SuperGaussianConfig cfg;
  cfg.n_dims_in = n_dims_in;
  cfg.d_embed = d_embed;
  cfg.b = b;
  cfg.sigma_min = sigma_min;
  cfg.mode = mode;
  cfg.alpha = std::move(alpha);

  double lo = 0.0, hi = 1.0;
  int count = d_embed;
  if (mode == SuperGaussianMode::projected) {
    lo = cfg.alpha.cwiseMin(0.0).sum();
    hi = cfg.alpha.cwiseMax(0.0).sum();
    if (!(hi > lo)) throw std::invalid_argument("alpha projects the domain to a point");
  } else {
    if (d_embed % n_dims_in != 0)
      throw std::invalid_argument("per_axis embedding size must divide evenly across axes");
    count = d_embed / n_dims_in;
  }
  if (count < 2) throw std::invalid_argument("need at least two centers");
  cfg.centers = Eigen::VectorXd::LinSpaced(count, lo, hi);
  return cfg;
}

SuperGaussianConfig default_super_gaussian(int n_dims_in, int d_embed) {
  const auto mode = n_dims_in == 1 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis;
  return make_super_gaussian(n_dims_in, d_embed, 2.0, 1e-3, mode);
}

Eigen::VectorXd super_gaussian_embed(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                                     const SuperGaussianConfig& cfg) {
  require_dims(x, cfg);
  require_sigma(sigma, cfg);
  Eigen::VectorXd out(cfg.d_embed);
  const double scale = cfg.b / (2.0 * sigma * sigma);
  for_each_offset(x, cfg, [&](int k, int, double d) { out(k) = std::exp(-scale * d * d); });
  return out;
}

Eigen::MatrixXd super_gaussian_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                                        const SuperGaussianConfig& cfg) {
  require_dims(x, cfg);
  require_sigma(sigma, cfg);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(cfg.d_embed, cfg.n_dims_in);
  const double s2 = sigma * sigma;
  const double scale = cfg.b / (2.0 * s2);
  for_each_offset(x, cfg, [&](int k, int axis, double d) {
    const double dphi = std::exp(-scale * d * d) * (-cfg.b * d / s2);
    if (axis < 0)
      jac.row(k) = dphi * cfg.alpha.transpose();
    else
      jac(k, axis) = dphi;
  });
  return jac;
}

Eigen::VectorXd super_gaussian_sigma_derivative(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                double sigma, const SuperGaussianConfig& cfg) {
  require_dims(x, cfg);
  require_sigma(sigma, cfg);
  Eigen::VectorXd out(cfg.d_embed);
  const double scale = cfg.b / (2.0 * sigma * sigma);
  const double s3 = sigma * sigma * sigma;
  for_each_offset(x, cfg, [&](int k, int, double d) {
    out(k) = std::exp(-scale * d * d) * cfg.b * d * d / s3;
  });
  return out;
}

Eigen::MatrixXd super_gaussian_embed_batch(const Eigen::MatrixXd& coords,
                                           const Eigen::VectorXd& sigma,
                                           const SuperGaussianConfig& cfg) {
  check_batch(coords, sigma, cfg);
  const Eigen::ArrayXd scale = cfg.b / (2.0 * sigma.array().square());
  Eigen::MatrixXd out(coords.rows(), cfg.d_embed);
  for (int blk = 0; blk < block_count(cfg); ++blk) {
    const Eigen::ArrayXXd off = offsets(coords, cfg, blk);
    out.middleCols(blk * cfg.centers_per_axis(), cfg.centers_per_axis()) =
        (-(off.square().colwise() * scale)).exp().matrix();
  }
  return out;
}

Eigen::MatrixXd super_gaussian_sigma_derivative_batch(const Eigen::MatrixXd& coords,
                                                      const Eigen::VectorXd& sigma,
                                                      const SuperGaussianConfig& cfg) {
  check_batch(coords, sigma, cfg);
  const Eigen::ArrayXd scale = cfg.b / (2.0 * sigma.array().square());
  const Eigen::ArrayXd inv_s3 = cfg.b / sigma.array().cube();
  Eigen::MatrixXd out(coords.rows(), cfg.d_embed);
  for (int blk = 0; blk < block_count(cfg); ++blk) {
    const Eigen::ArrayXXd off2 = offsets(coords, cfg, blk).square();
    out.middleCols(blk * cfg.centers_per_axis(), cfg.centers_per_axis()) =
        ((-(off2.colwise() * scale)).exp() * (off2.colwise() * inv_s3)).matrix();
  }
  return out;
}

Eigen::MatrixXd super_gaussian_pullback_batch(const Eigen::MatrixXd& coords, const Eigen::VectorXd& sigma,
                                              const Eigen::MatrixXd& grad_features,
                                              const SuperGaussianConfig& cfg) {
  check_batch(coords, sigma, cfg);
  if (grad_features.rows() != coords.rows() || grad_features.cols() != cfg.d_embed)
    throw std::invalid_argument("feature gradient shape mismatch");
  const Eigen::ArrayXd scale = cfg.b / (2.0 * sigma.array().square());
  const Eigen::ArrayXd slope = -cfg.b / sigma.array().square();
  const int per_axis = cfg.centers_per_axis();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(coords.rows(), cfg.n_dims_in);
  for (int blk = 0; blk < block_count(cfg); ++blk) {
    const Eigen::ArrayXXd off = offsets(coords, cfg, blk);
    const Eigen::ArrayXXd dphi = (-(off.square().colwise() * scale)).exp() * (off.colwise() * slope);
    const Eigen::VectorXd dproj =
        (dphi * grad_features.middleCols(blk * per_axis, per_axis).array()).rowwise().sum().matrix();
    if (cfg.mode == SuperGaussianMode::projected)
      out = dproj * cfg.alpha.transpose();
    else
      out.col(blk) = dproj;
  }
  return out;
}

Eigen::MatrixXd metric_tensor(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                              const SuperGaussianConfig& cfg) {
  const Eigen::MatrixXd jac = super_gaussian_jacobian(x, sigma, cfg);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cfg.n_dims_in, cfg.n_dims_in);
  for (Eigen::Index i = 0; i < jac.rows(); ++i) {
    const Eigen::VectorXd row = jac.row(i).transpose();
    g.noalias() += row * row.transpose();
  }
  return g;
}

double volume_element(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                      const SuperGaussianConfig& cfg) {
  const Eigen::MatrixXd g = metric_tensor(x, sigma, cfg);
  double det = 0.0;
  if (g.rows() == 1)
    det = g(0, 0);
  else if (g.rows() == 2)
    det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  else
    det = g.determinant();
  return det > 0.0 ? std::sqrt(det) : 0.0;
}

RffConfig make_rff(int n_dims_in, int d_embed, double sigma_r, std::uint64_t seed) {
  if (d_embed < 2 || d_embed % 2 != 0) throw std::invalid_argument("RFF size must be even");
  if (!(sigma_r > 0.0)) throw std::invalid_argument("RFF bandwidth must be positive");
  RffConfig cfg;
  cfg.sigma_r = sigma_r;
  cfg.seed = seed;
  cfg.frequencies.resize(d_embed / 2, n_dims_in);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma_r);
  for (Eigen::Index i = 0; i < cfg.frequencies.rows(); ++i)
    for (Eigen::Index j = 0; j < cfg.frequencies.cols(); ++j) cfg.frequencies(i, j) = normal(rng);
  return cfg;
}

Eigen::VectorXd rff_embed(const Eigen::Ref<const Eigen::VectorXd>& x, const RffConfig& cfg) {
  if (x.size() != cfg.frequencies.cols()) throw std::invalid_argument("coordinate dimension mismatch");
  const Eigen::Index half = cfg.frequencies.rows();
  const Eigen::VectorXd phase = 2.0 * std::numbers::pi * (cfg.frequencies * x);
  Eigen::VectorXd out(2 * half);
  out.head(half) = phase.array().cos();
  out.tail(half) = phase.array().sin();
  return out;
}

Eigen::MatrixXd rff_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, const RffConfig& cfg) {
  if (x.size() != cfg.frequencies.cols()) throw std::invalid_argument("coordinate dimension mismatch");
  const Eigen::Index half = cfg.frequencies.rows();
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::VectorXd phase = two_pi * (cfg.frequencies * x);
  Eigen::MatrixXd jac(2 * half, x.size());
  for (Eigen::Index i = 0; i < half; ++i) {
    jac.row(i) = -std::sin(phase(i)) * two_pi * cfg.frequencies.row(i);
    jac.row(half + i) = std::cos(phase(i)) * two_pi * cfg.frequencies.row(i);
  }
  return jac;
}

Eigen::MatrixXd rff_embed_batch(const Eigen::MatrixXd& coords, const RffConfig& cfg) {
  const Eigen::Index half = cfg.frequencies.rows();
  const Eigen::MatrixXd phase = 2.0 * std::numbers::pi * (coords * cfg.frequencies.transpose());
  Eigen::MatrixXd out(coords.rows(), 2 * half);
  out.leftCols(half) = phase.array().cos();
  out.rightCols(half) = phase.array().sin();
  return out;
}

InjectivityReport check_injectivity(const SuperGaussianConfig& cfg, const Eigen::MatrixXd& coords,
                                    const SigmaField& sigma) {
  const Eigen::MatrixXd emb = super_gaussian_embed_batch(coords, sigma.sigma, cfg);
  InjectivityReport report;
  report.min_distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < emb.rows(); ++i)
    for (Eigen::Index j = i + 1; j < emb.rows(); ++j) {
      const double d = (emb.row(i) - emb.row(j)).norm();
      if (d < report.min_distance) {
        report.min_distance = d;
        if (d < kInjectivityTolerance) report.offending_pair = std::make_pair(i, j);
      }
    }
  return report;
}

SuperGaussianConfig EmbedderSettings::super_gaussian(int n_dims_in) const {
  const SuperGaussianMode m =
      mode.value_or(n_dims_in == 1 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis);
  return make_super_gaussian(n_dims_in, d_embed, b, sigma_min, m, alpha);
}

RffConfig EmbedderSettings::rff(int n_dims_in) const {
  return make_rff(n_dims_in, d_embed, rff_sigma_r, seed);
}

std::map<std::string, std::string> EmbedderSettings::to_map() const {
  std::map<std::string, std::string> kv;
  kv["d_embed"] = std::to_string(d_embed);
  kv["b"] = format_double(b);
  if (mode) kv["mode"] = to_string(*mode);
  kv["sigma_min"] = format_double(sigma_min);
  if (alpha.size() > 0) {
    std::vector<double> a(alpha.data(), alpha.data() + alpha.size());
    kv["alpha"] = format_list(a);
  }
  kv["rff_sigma_r"] = format_double(rff_sigma_r);
  kv["seed"] = std::to_string(seed);
  return kv;
}

EmbedderSettings EmbedderSettings::from_map(const std::map<std::string, std::string>& kv) {
  EmbedderSettings s;
  KvReader r(kv);
  s.d_embed = r.get_int("d_embed", s.d_embed);
  s.b = r.get_double("b", s.b);
  if (auto m = r.get_string_opt("mode")) s.mode = parse_super_gaussian_mode(*m);
  s.sigma_min = r.get_double("sigma_min", s.sigma_min);
  if (auto a = r.get_string_opt("alpha")) {
    const std::vector<double> v = parse_double_list(*a);
    s.alpha = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  s.rff_sigma_r = r.get_double("rff_sigma_r", s.rff_sigma_r);
  s.seed = r.get_uint64("seed", s.seed);
  return s;
}

}  // namespace coordfit
