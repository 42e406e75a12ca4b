#include "coordfit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "coordfit/kvconfig.hpp"
#include "coordfit/netpbm.hpp"

namespace coordfit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void rescale_unit(Eigen::MatrixXd& v) {
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (hi > lo)
    v = (v.array() - lo) / (hi - lo);
  else
    v.setConstant(0.5);
}

std::string padded(int i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

}  // namespace

std::string to_string(ImageCategory category) {
  switch (category) {
    case ImageCategory::natural: return "natural";
    case ImageCategory::text: return "text";
    case ImageCategory::noise: return "noise";
  }
  return "unknown";
}

ImageCategory parse_image_category(const std::string& text) {
  if (text == "natural") return ImageCategory::natural;
  if (text == "text") return ImageCategory::text;
  if (text == "noise") return ImageCategory::noise;
  throw std::invalid_argument("unknown image category: " + text);
}

SampledSignal synthetic_signal_1d(int length, std::uint64_t seed) {
  if (length < 2) throw std::invalid_argument("signal length below 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(length, 0.0, 1.0);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(length, 1);

  const int waves = 4 + static_cast<int>(unit(rng) * 4);
  for (int k = 0; k < waves; ++k) {
    const double f = 1.0 + 11.0 * unit(rng);
    const double phase = kTwoPi * unit(rng);
    const double amp = (0.5 + unit(rng)) / f;
    v.col(0).array() += amp * (kTwoPi * f * t.array() + phase).sin();
  }

  const int steps = 2 + static_cast<int>(unit(rng) * 3);
  for (int k = 0; k < steps; ++k) {
    const double at = 0.1 + 0.8 * unit(rng);
    const double height = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 0.5 * unit(rng));
    for (int i = 0; i < length; ++i)
      if (t(i) >= at) v(i, 0) += height;
  }

  const double centre = 0.15 + 0.7 * unit(rng);
  const double width = 0.03 + 0.04 * unit(rng);
  const double f = 30.0 + 30.0 * unit(rng);
  for (int i = 0; i < length; ++i) {
    const double z = (t(i) - centre) / width;
    v(i, 0) += 0.3 * std::exp(-0.5 * z * z) * std::sin(kTwoPi * f * t(i));
  }

  rescale_unit(v);
  return make_signal({length}, std::move(v));
}

SampledSignal synthetic_image(int rows, int cols, ImageCategory category, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::MatrixXd coords = lattice_coords({rows, cols});
  const Eigen::Index n = coords.rows();

  if (category == ImageCategory::noise) {
    Eigen::MatrixXd v(n, 1);
    for (Eigen::Index p = 0; p < n; ++p) v(p, 0) = unit(rng);
    return make_signal({rows, cols}, std::move(v));
  }

  if (category == ImageCategory::text) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(n, 1, 0.92);
    const int line_height = std::max(8, rows / 8);
    for (int top = line_height / 2; top + line_height <= rows; top += line_height + line_height / 3) {
      int x = 2 + static_cast<int>(unit(rng) * 6);
      while (x + 6 < cols - 2) {
        const int glyph_w = 3 + static_cast<int>(unit(rng) * 5);
        const int strokes = 2 + static_cast<int>(unit(rng) * 3);
        const double ink = 0.05 + 0.15 * unit(rng);
        for (int s = 0; s < strokes; ++s) {
          const bool vertical = unit(rng) < 0.5;
          const int r0 = top + static_cast<int>(unit(rng) * (line_height - 2));
          const int c0 = x + static_cast<int>(unit(rng) * glyph_w);
          const int len = vertical ? line_height / 2 + static_cast<int>(unit(rng) * line_height / 2)
                                   : glyph_w / 2 + static_cast<int>(unit(rng) * glyph_w / 2) + 1;
          for (int k = 0; k < len; ++k) {
            const int r = vertical ? r0 - k / 2 : r0;
            const int c = vertical ? c0 : c0 + k - glyph_w / 2;
            if (r >= 0 && r < rows && c >= 0 && c < cols) v(static_cast<Eigen::Index>(r) * cols + c, 0) = ink;
          }
        }
        x += glyph_w + 2 + (unit(rng) < 0.2 ? 4 : 0);
      }
    }
    return make_signal({rows, cols}, std::move(v));
  }

  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, 3);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 6; ++k) {
      const double fx = 6.0 * (unit(rng) - 0.5) * 2.0;
      const double fy = 6.0 * (unit(rng) - 0.5) * 2.0;
      const double phase = kTwoPi * unit(rng);
      const double amp = 0.5 / (1.0 + std::hypot(fx, fy));
      v.col(c).array() += amp * (kTwoPi * (fx * coords.col(0).array() + fy * coords.col(1).array()) + phase).cos();
    }
  }
  const int shapes = 3 + static_cast<int>(unit(rng) * 3);
  for (int s = 0; s < shapes; ++s) {
    const bool disk = unit(rng) < 0.5;
    const double cy = unit(rng), cx = unit(rng);
    const double ry = 0.06 + 0.15 * unit(rng), rx = 0.06 + 0.15 * unit(rng);
    const Eigen::Vector3d colour(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
    for (Eigen::Index p = 0; p < n; ++p) {
      const double dy = (coords(p, 0) - cy) / ry;
      const double dx = (coords(p, 1) - cx) / rx;
      const bool inside = disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
      if (inside) v.row(p) += colour.transpose();
    }
  }
  {
    const double y0 = 0.1 + 0.5 * unit(rng), x0 = 0.1 + 0.5 * unit(rng);
    const double f = 12.0 + 10.0 * unit(rng);
    const double angle = std::numbers::pi * unit(rng);
    for (Eigen::Index p = 0; p < n; ++p) {
      const double y = coords(p, 0), x = coords(p, 1);
      if (y < y0 || y > y0 + 0.3 || x < x0 || x > x0 + 0.3) continue;
      const double g = 0.25 * std::sin(kTwoPi * f * (std::cos(angle) * x + std::sin(angle) * y));
      v.row(p).array() += g;
    }
  }
  rescale_unit(v);
  return make_signal({rows, cols}, std::move(v));
}

SampledSignal constant_signal(const std::vector<int>& grid_shape, double value, int channels) {
  Eigen::Index n = 1;
  for (int e : grid_shape) n *= e;
  return make_signal(grid_shape, Eigen::MatrixXd::Constant(n, channels, value));
}

double signal_complexity(const SampledSignal& signal) { return jacobian_frobenius(signal).mean(); }

std::vector<std::filesystem::path> write_dev_set_1d(const std::filesystem::path& dir, int count, int length,
                                                    std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    const SampledSignal s = synthetic_signal_1d(length, seed + static_cast<std::uint64_t>(i));
    const auto path = dir / ("signal_" + padded(i) + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (Eigen::Index p = 0; p < s.size(); ++p) out << format_double(s.values(p, 0)) << '\n';
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::filesystem::path> write_dev_set_2d(const std::filesystem::path& dir, int count, int size,
                                                    ImageCategory category, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    const SampledSignal s = synthetic_image(size, size, category, seed + static_cast<std::uint64_t>(i));
    const auto path =
        dir / (to_string(category) + "_" + padded(i) + (s.n_dims_out() == 1 ? ".pgm" : ".ppm"));
    write_netpbm(path, size, size, s.values);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace coordfit
