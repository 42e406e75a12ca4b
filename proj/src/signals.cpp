#include "coordfit/signals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "coordfit/netpbm.hpp"

namespace coordfit {

namespace {

Eigen::Index lattice_size(const std::vector<int>& shape) {
  Eigen::Index n = 1;
  for (int e : shape) n *= e;
  return n;
}

// Central differences inside, one-sided at the ends, explicit spacing per axis.
GradientField jacobian_norm_on_grid(const std::vector<int>& shape, const Eigen::MatrixXd& values,
                                    const std::vector<double>& spacing) {
  const Eigen::Index count = lattice_size(shape);
  const int n_axes = static_cast<int>(shape.size());
  const Eigen::Index channels = values.cols();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(count);

  std::vector<Eigen::Index> strides(n_axes, 1);
  for (int a = n_axes - 2; a >= 0; --a) strides[a] = strides[a + 1] * shape[a + 1];

  for (Eigen::Index p = 0; p < count; ++p) {
    for (int a = 0; a < n_axes; ++a) {
      const Eigen::Index i = (p / strides[a]) % shape[a];
      const int extent = shape[a];
      if (extent < 2) continue;
      Eigen::Index lo = p, hi = p;
      double h = spacing[a];
      if (i == 0) {
        hi = p + strides[a];
      } else if (i == extent - 1) {
        lo = p - strides[a];
      } else {
        lo = p - strides[a];
        hi = p + strides[a];
        h *= 2.0;
      }
      for (Eigen::Index c = 0; c < channels; ++c) {
        const double d = (values(hi, c) - values(lo, c)) / h;
        sq(p) += d * d;
      }
    }
  }
  return sq.cwiseSqrt();
}

std::vector<double> unit_spacing(const std::vector<int>& shape) {
  std::vector<double> h;
  for (int e : shape) h.push_back(e > 1 ? 1.0 / (e - 1) : 1.0);
  return h;
}

double sample_linear(const Eigen::MatrixXd& values, const std::vector<int>& shape, double pos,
                     Eigen::Index c) {
  const int n = shape[0];
  const double f = pos * (n - 1);
  const int i0 = std::clamp(static_cast<int>(std::floor(f)), 0, n - 1);
  const int i1 = std::min(i0 + 1, n - 1);
  const double t = f - i0;
  return (1.0 - t) * values(i0, c) + t * values(i1, c);
}

}  // namespace

std::string to_string(SplitScheme scheme) {
  return scheme == SplitScheme::regular ? "regular" : "random";
}

SplitScheme parse_split_scheme(const std::string& text) {
  if (text == "regular") return SplitScheme::regular;
  if (text == "random") return SplitScheme::random;
  throw std::invalid_argument("unknown split scheme: " + text);
}

Eigen::MatrixXd lattice_coords(const std::vector<int>& grid_shape) {
  const int n_axes = static_cast<int>(grid_shape.size());
  const Eigen::Index count = lattice_size(grid_shape);
  Eigen::MatrixXd coords(count, n_axes);
  for (Eigen::Index p = 0; p < count; ++p) {
    Eigen::Index rem = p;
    for (int a = n_axes - 1; a >= 0; --a) {
      const int extent = grid_shape[a];
      const Eigen::Index i = rem % extent;
      rem /= extent;
      coords(p, a) = extent > 1 ? static_cast<double>(i) / (extent - 1) : 0.0;
    }
  }
  return coords;
}

SampledSignal make_signal(std::vector<int> grid_shape, Eigen::MatrixXd values) {
  if (grid_shape.empty() || grid_shape.size() > 2)
    throw std::invalid_argument("signals must be 1D or 2D");
  for (int e : grid_shape)
    if (e < 2) throw std::invalid_argument("every lattice axis needs at least 2 samples");
  if (values.rows() != lattice_size(grid_shape))
    throw std::invalid_argument("value count does not match the lattice size");
  if (values.cols() != 1 && values.cols() != 3)
    throw std::invalid_argument("signals carry 1 or 3 output channels");
  SampledSignal s;
  s.coords = lattice_coords(grid_shape);
  s.grid_shape = std::move(grid_shape);
  s.values = std::move(values);
  return s;
}

SampledSignal load_signal(const std::filesystem::path& path, SignalKind kind) {
  if (kind == SignalKind::image_2d) {
    NetpbmImage img = read_netpbm(path);
    if (img.rows < 2 || img.cols < 2)
      throw std::runtime_error("image extent below 2: " + path.string());
    return make_signal({img.rows, img.cols}, std::move(img.values));
  }

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<double> raw;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::istringstream ls(line);
    double v = 0.0;
    if (!(ls >> v)) throw std::runtime_error("malformed CSV value in " + path.string());
    raw.push_back(v);
  }
  if (raw.empty()) throw std::runtime_error("empty signal: " + path.string());
  if (raw.size() < 2) throw std::runtime_error("signal extent below 2: " + path.string());
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo;
  const double range = *hi - *lo;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(raw.size()), 1);
  for (std::size_t i = 0; i < raw.size(); ++i)
    values(static_cast<Eigen::Index>(i), 0) = range > 0.0 ? (raw[i] - min) / range : 0.0;
  return make_signal({static_cast<int>(raw.size())}, std::move(values));
}

SampledSignal resample(const SampledSignal& signal, const std::vector<int>& grid_shape) {
  if (grid_shape.size() != signal.grid_shape.size())
    throw std::invalid_argument("resample cannot change dimensionality");
  if (grid_shape == signal.grid_shape) return signal;
  const Eigen::MatrixXd coords = lattice_coords(grid_shape);
  const Eigen::Index channels = signal.values.cols();
  Eigen::MatrixXd out(coords.rows(), channels);

  if (grid_shape.size() == 1) {
    for (Eigen::Index p = 0; p < coords.rows(); ++p)
      for (Eigen::Index c = 0; c < channels; ++c)
        out(p, c) = sample_linear(signal.values, signal.grid_shape, coords(p, 0), c);
    return make_signal(grid_shape, std::move(out));
  }

  const int rows = signal.grid_shape[0];
  const int cols = signal.grid_shape[1];
  for (Eigen::Index p = 0; p < coords.rows(); ++p) {
    const double fr = coords(p, 0) * (rows - 1);
    const double fc = coords(p, 1) * (cols - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor(fr)), 0, rows - 1);
    const int c0 = std::clamp(static_cast<int>(std::floor(fc)), 0, cols - 1);
    const int r1 = std::min(r0 + 1, rows - 1);
    const int c1 = std::min(c0 + 1, cols - 1);
    const double tr = fr - r0;
    const double tc = fc - c0;
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double top = (1 - tc) * signal.values(r0 * cols + c0, c) + tc * signal.values(r0 * cols + c1, c);
      const double bot = (1 - tc) * signal.values(r1 * cols + c0, c) + tc * signal.values(r1 * cols + c1, c);
      out(p, c) = (1 - tr) * top + tr * bot;
    }
  }
  return make_signal(grid_shape, std::move(out));
}

SampledSignal channel_mean(const SampledSignal& signal) {
  if (signal.values.cols() == 1) return signal;
  SampledSignal s = signal;
  s.values = signal.values.rowwise().mean();
  return s;
}

std::vector<int> regular_strides(int n_axes, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("split fraction must lie in (0,1]");
  if (fraction == 1.0) return std::vector<int>(static_cast<std::size_t>(n_axes), 1);
  // Strides differ by at most one across axes; the leading `k` axes take base + 1.
  const double target = std::log(1.0 / fraction);
  const int top = std::max(2, static_cast<int>(std::ceil(std::pow(1.0 / fraction, 1.0 / n_axes))) + 1);
  std::vector<int> best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int base = 1; base <= top; ++base) {
    for (int k = 0; k < n_axes; ++k) {
      const double log_prod = (n_axes - k) * std::log(base) + k * std::log(base + 1.0);
      if (log_prod <= 0.0) continue;
      const double err = std::abs(log_prod - target);
      if (err < best_err - 1e-12) {
        best_err = err;
        best.assign(static_cast<std::size_t>(n_axes), base);
        for (int a = 0; a < k; ++a) best[static_cast<std::size_t>(a)] = base + 1;
      }
    }
  }
  return best;
}

SplitPlan make_split(const SampledSignal& signal, SplitScheme scheme, double fraction,
                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("split fraction must lie in (0,1]");
  const Eigen::Index count = signal.size();
  SplitPlan plan;
  plan.scheme = scheme;
  plan.fraction = fraction;
  plan.seed = seed;

  std::vector<char> is_train(static_cast<std::size_t>(count), 0);
  if (scheme == SplitScheme::regular) {
    const int n_axes = signal.n_dims_in();
    plan.stride = regular_strides(n_axes, fraction);
    const Eigen::MatrixXd& x = signal.coords;
    for (Eigen::Index p = 0; p < count; ++p) {
      bool on = true;
      for (int a = 0; a < n_axes; ++a) {
        const long i = std::lround(x(p, a) * (signal.grid_shape[a] - 1));
        on = on && (i % plan.stride[static_cast<std::size_t>(a)] == 0);
      }
      is_train[static_cast<std::size_t>(p)] = on;
    }
  } else {
    const auto k = static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(count)));
    if (k == 0) throw std::invalid_argument("split fraction leaves no train points");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i = 0; i < k; ++i) is_train[static_cast<std::size_t>(order[i])] = 1;
  }

  for (Eigen::Index p = 0; p < count; ++p)
    (is_train[static_cast<std::size_t>(p)] ? plan.train_idx : plan.test_idx).push_back(p);
  if (plan.train_idx.empty()) throw std::invalid_argument("split fraction leaves no train points");
  if (fraction < 1.0 && plan.test_idx.empty())
    throw std::invalid_argument("split fraction leaves no test points");
  return plan;
}

GradientField jacobian_frobenius(const SampledSignal& signal) {
  return jacobian_norm_on_grid(signal.grid_shape, signal.values, unit_spacing(signal.grid_shape));
}

Eigen::VectorXd train_gradient_norms(const SampledSignal& signal, const SplitPlan& split) {
  const auto n_train = static_cast<Eigen::Index>(split.train_idx.size());
  if (split.scheme == SplitScheme::regular && !split.stride.empty()) {
    std::vector<int> sub_shape;
    std::vector<double> spacing;
    for (std::size_t a = 0; a < signal.grid_shape.size(); ++a) {
      const int extent = signal.grid_shape[a];
      const int s = split.stride[a];
      sub_shape.push_back((extent - 1) / s + 1);
      spacing.push_back(static_cast<double>(s) / (extent - 1));
    }
    const Eigen::MatrixXd sub_values = gather_rows(signal.values, split.train_idx);
    for (int e : sub_shape)
      if (e < 2) throw std::invalid_argument("train sublattice too coarse to differentiate");
    return jacobian_norm_on_grid(sub_shape, sub_values, spacing);
  }

  // Nearest-train fill of the full lattice, then differentiate.
  const Eigen::MatrixXd train_x = gather_rows(signal.coords, split.train_idx);
  Eigen::MatrixXd filled(signal.size(), signal.values.cols());
  for (Eigen::Index p = 0; p < signal.size(); ++p) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n_train; ++j) {
      const double d = (train_x.row(j) - signal.coords.row(p)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    filled.row(p) = signal.values.row(split.train_idx[static_cast<std::size_t>(best)]);
  }
  const GradientField g =
      jacobian_norm_on_grid(signal.grid_shape, filled, unit_spacing(signal.grid_shape));
  Eigen::VectorXd out(n_train);
  for (Eigen::Index j = 0; j < n_train; ++j) out(j) = g(split.train_idx[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace coordfit
