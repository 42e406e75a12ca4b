#include "coordfit/sigma_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "coordfit/kvconfig.hpp"

namespace coordfit {

namespace {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = r;
    i = j + 1;
  }
  return ranks;
}

// Bracketing index and weight of x inside sorted nodes, clamped to the ends.
std::pair<std::size_t, double> locate(const std::vector<double>& nodes, double x) {
  if (nodes.size() == 1 || x <= nodes.front()) return {0, 0.0};
  if (x >= nodes.back()) return {nodes.size() - 2, 1.0};
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
  const std::size_t lo = hi - 1;
  return {lo, (x - nodes[lo]) / (nodes[hi] - nodes[lo])};
}

Eigen::VectorXd interpolate_1d(const Eigen::MatrixXd& train, const Eigen::VectorXd& sigma,
                               const Eigen::MatrixXd& test) {
  std::vector<std::pair<double, double>> pts;
  for (Eigen::Index i = 0; i < train.rows(); ++i) pts.emplace_back(train(i, 0), sigma(i));
  std::sort(pts.begin(), pts.end());
  std::vector<double> xs, ys;
  for (const auto& [x, y] : pts) {
    xs.push_back(x);
    ys.push_back(y);
  }
  Eigen::VectorXd out(test.rows());
  for (Eigen::Index p = 0; p < test.rows(); ++p) {
    if (xs.size() == 1) {
      out(p) = ys[0];
      continue;
    }
    const auto [lo, t] = locate(xs, test(p, 0));
    out(p) = (1.0 - t) * ys[lo] + t * ys[lo + 1];
  }
  return out;
}

Eigen::VectorXd nearest(const Eigen::MatrixXd& train, const Eigen::VectorXd& sigma,
                        const Eigen::MatrixXd& test) {
  Eigen::VectorXd out(test.rows());
  for (Eigen::Index p = 0; p < test.rows(); ++p) {
    Eigen::Index best = 0;
    (train.rowwise() - test.row(p)).rowwise().squaredNorm().minCoeff(&best);
    out(p) = sigma(best);
  }
  return out;
}

}  // namespace

SigmaPolynomial fit_polynomial(const Eigen::VectorXd& g, const Eigen::VectorXd& sigma, int terms,
                               double ridge, double sigma_min, double sigma_max) {
  if (g.size() != sigma.size()) throw std::invalid_argument("one sigma per gradient norm");
  if (terms < 1) throw std::invalid_argument("polynomial needs at least one term");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be non-negative");
  const std::set<double> distinct(g.data(), g.data() + g.size());
  if (distinct.size() < 2) throw std::invalid_argument("need at least two distinct gradient norms");

  SigmaPolynomial model;
  model.terms = terms;
  model.ridge = ridge;
  model.sigma_min = sigma_min;
  model.sigma_max = sigma_max;
  model.g_scale = g.cwiseAbs().maxCoeff();

  const Eigen::Index n = g.size();
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + terms, terms);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + terms);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = g(i) / model.g_scale;
    double power = 1.0;
    for (int k = 0; k < terms; ++k) {
      system(i, k) = power;
      power *= z;
    }
    rhs(i) = sigma(i);
  }
  // Tikhonov rows: minimizing |V beta - sigma|^2 + ridge |beta|^2.
  system.bottomRows(terms).diagonal().setConstant(std::sqrt(ridge));
  model.beta = system.colPivHouseholderQr().solve(rhs);
  return model;
}

double evaluate_polynomial(const SigmaPolynomial& model, double g) {
  const double z = g / model.g_scale;
  double acc = 0.0;
  for (Eigen::Index k = model.beta.size() - 1; k >= 0; --k) acc = acc * z + model.beta(k);
  return acc;
}

Eigen::VectorXd raw_coefficients(const SigmaPolynomial& model) {
  Eigen::VectorXd raw = model.beta;
  double scale = 1.0;
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    raw(k) /= scale;
    scale *= model.g_scale;
  }
  return raw;
}

double predict_sigma(const SigmaPolynomial& model, double g) {
  return std::clamp(evaluate_polynomial(model, g), model.sigma_min, model.sigma_max);
}

Eigen::VectorXd predict_sigma(const SigmaPolynomial& model, const Eigen::VectorXd& g) {
  Eigen::VectorXd out(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) out(i) = predict_sigma(model, g(i));
  return out;
}

void write_sigma_polynomial(const std::filesystem::path& path, const SigmaPolynomial& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "L,ridge,g_scale,sigma_min,sigma_max\n"
      << model.terms << ',' << format_double(model.ridge) << ',' << format_double(model.g_scale) << ','
      << format_double(model.sigma_min) << ',' << format_double(model.sigma_max) << '\n'
      << "k,beta\n";
  for (Eigen::Index k = 0; k < model.beta.size(); ++k)
    out << k << ',' << format_double(model.beta(k)) << '\n';
}

SigmaPolynomial read_sigma_polynomial(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("L,ridge", 0) != 0)
    throw std::runtime_error("not a sigma polynomial file: " + path.string());
  SigmaPolynomial model;
  std::getline(in, line);
  const auto header = split_list(line);
  if (header.size() != 5) throw std::runtime_error("malformed sigma polynomial header");
  model.terms = std::stoi(header[0]);
  model.ridge = std::stod(header[1]);
  model.g_scale = std::stod(header[2]);
  model.sigma_min = std::stod(header[3]);
  model.sigma_max = std::stod(header[4]);
  std::getline(in, line);  // k,beta
  std::vector<double> beta;
  while (std::getline(in, line)) {
    const auto cells = split_list(line);
    if (cells.size() != 2) continue;
    beta.push_back(std::stod(cells[1]));
  }
  if (static_cast<int>(beta.size()) != model.terms)
    throw std::runtime_error("coefficient count does not match L in " + path.string());
  model.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return model;
}

Eigen::VectorXd interpolate_sigma(const Eigen::MatrixXd& train_coords, const Eigen::VectorXd& train_sigma,
                                  const Eigen::MatrixXd& test_coords) {
  if (train_coords.rows() == 0) throw std::invalid_argument("empty train set");
  if (train_sigma.size() != train_coords.rows()) throw std::invalid_argument("one sigma per train coordinate");
  if (test_coords.cols() != train_coords.cols()) throw std::invalid_argument("coordinate dimension mismatch");
  if (train_coords.cols() == 1) return interpolate_1d(train_coords, train_sigma, test_coords);
  if (train_coords.cols() != 2) return nearest(train_coords, train_sigma, test_coords);

  std::set<double> ax0, ax1;
  std::map<std::pair<double, double>, double> cell;
  for (Eigen::Index i = 0; i < train_coords.rows(); ++i) {
    ax0.insert(train_coords(i, 0));
    ax1.insert(train_coords(i, 1));
    cell[{train_coords(i, 0), train_coords(i, 1)}] = train_sigma(i);
  }
  if (ax0.size() * ax1.size() != cell.size() || cell.size() != static_cast<std::size_t>(train_coords.rows()))
    return nearest(train_coords, train_sigma, test_coords);

  const std::vector<double> xs(ax0.begin(), ax0.end());
  const std::vector<double> ys(ax1.begin(), ax1.end());
  const std::size_t ny = ys.size();
  std::vector<double> grid(xs.size() * ny);
  {
    std::size_t k = 0;
    for (const auto& [key, v] : cell) grid[k++] = v;  // map order is row-major over (x, y)
  }
  auto at = [&](std::size_t i, std::size_t j) { return grid[i * ny + j]; };

  Eigen::VectorXd out(test_coords.rows());
  for (Eigen::Index p = 0; p < test_coords.rows(); ++p) {
    auto [i, tx] = xs.size() > 1 ? locate(xs, test_coords(p, 0)) : std::pair<std::size_t, double>{0, 0.0};
    auto [j, ty] = ny > 1 ? locate(ys, test_coords(p, 1)) : std::pair<std::size_t, double>{0, 0.0};
    const std::size_t i1 = std::min(i + 1, xs.size() - 1);
    const std::size_t j1 = std::min(j + 1, ny - 1);
    const double top = (1 - ty) * at(i, j) + ty * at(i, j1);
    const double bot = (1 - ty) * at(i1, j) + ty * at(i1, j1);
    out(p) = (1 - tx) * top + tx * bot;
  }
  return out;
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs paired samples");
  const Eigen::VectorXd ra = average_ranks(a);
  const Eigen::VectorXd rb = average_ranks(b);
  const Eigen::ArrayXd da = ra.array() - ra.mean();
  const Eigen::ArrayXd db = rb.array() - rb.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  return denom > 0.0 ? (da * db).sum() / denom : 0.0;
}

}  // namespace coordfit
