#include "coordfit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "coordfit/embedders.hpp"
#include "coordfit/metrics.hpp"
#include "coordfit/net.hpp"
#include "coordfit/netpbm.hpp"

namespace coordfit {

namespace {

const std::map<std::string, Experiment> kExperimentNames = {
    {"encode1d", Experiment::encode1d},           {"encode2d", Experiment::encode2d},
    {"expressiveness", Experiment::expressiveness}, {"sigma_dev_fit", Experiment::sigma_dev_fit},
    {"recover", Experiment::recover},             {"sweep_rff", Experiment::sweep_rff},
    {"dev_set", Experiment::dev_set}};

std::string padded(int i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& text, F parse) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse(item));
  return out;
}

struct NamedSignal {
  std::string id;
  SampledSignal signal;
};

struct Split {
  SplitPlan plan;
  Eigen::MatrixXd xtr, ytr, xte, yte;
  Eigen::VectorXd g;  // gradient norm of the channel-mean signal at train points
};

Split prepare(const SampledSignal& s, SplitScheme scheme, double fraction, std::uint64_t seed) {
  Split sp;
  sp.plan = make_split(s, scheme, fraction, seed);
  sp.xtr = gather_rows(s.coords, sp.plan.train_idx);
  sp.ytr = gather_rows(s.values, sp.plan.train_idx);
  sp.xte = gather_rows(s.coords, sp.plan.test_idx);
  sp.yte = gather_rows(s.values, sp.plan.test_idx);
  sp.g = train_gradient_norms(channel_mean(s), sp.plan);
  return sp;
}

bool is_image_path(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm";
}

NamedSignal load_named(const std::filesystem::path& path, int n_dims, int image_size) {
  NamedSignal ns;
  ns.id = path.stem().string();
  if (n_dims == 1) {
    if (is_image_path(path)) throw std::invalid_argument("expected a 1D CSV signal: " + path.string());
    ns.signal = load_signal(path, SignalKind::csv_1d);
  } else {
    if (!is_image_path(path)) throw std::invalid_argument("expected a PGM/PPM image: " + path.string());
    ns.signal = load_signal(path, SignalKind::image_2d);
    if (ns.signal.grid_shape != std::vector<int>{image_size, image_size})
      ns.signal = resample(ns.signal, {image_size, image_size});
  }
  return ns;
}

std::vector<NamedSignal> eval_signals(const ExperimentSpec& spec, int n_dims) {
  std::vector<NamedSignal> out;
  if (!spec.signals.empty()) {
    for (const auto& p : spec.signals) out.push_back(load_named(p, n_dims, spec.image_size));
    return out;
  }
  if (n_dims == 1) {
    for (int k = 0; k < spec.count; ++k)
      out.push_back({"synth1d_" + padded(k), synthetic_signal_1d(spec.length, spec.signal_seed + k)});
    return out;
  }
  for (ImageCategory cat : spec.categories)
    for (int k = 0; k < spec.count; ++k)
      out.push_back({to_string(cat) + "_" + padded(k),
                     synthetic_image(spec.image_size, spec.image_size, cat, spec.signal_seed + k)});
  return out;
}

std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir, int n_dims) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const bool image = is_image_path(entry.path());
    if ((n_dims == 2 && image) || (n_dims == 1 && entry.path().extension() == ".csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<NamedSignal> dev_signals(const ExperimentSpec& spec, int n_dims) {
  std::vector<NamedSignal> out;
  if (!spec.dev_dir.empty()) {
    for (const auto& p : sorted_files(spec.dev_dir, n_dims)) out.push_back(load_named(p, n_dims, spec.image_size));
    if (out.empty()) throw std::runtime_error("no dev signals in " + spec.dev_dir.string());
    return out;
  }
  for (int k = 0; k < spec.dev_count; ++k) {
    if (n_dims == 1)
      out.push_back({"dev1d_" + padded(k), synthetic_signal_1d(spec.length, spec.dev_seed + k)});
    else
      out.push_back({"dev2d_" + padded(k), synthetic_image(spec.image_size, spec.image_size,
                                                           spec.categories.front(), spec.dev_seed + k)});
  }
  return out;
}

Eigen::MatrixXd scatter_rows(const SplitPlan& plan, const Eigen::MatrixXd& train, const Eigen::MatrixXd& test,
                             Eigen::Index total) {
  Eigen::MatrixXd full(total, train.cols());
  for (std::size_t k = 0; k < plan.train_idx.size(); ++k)
    full.row(plan.train_idx[k]) = train.row(static_cast<Eigen::Index>(k));
  for (std::size_t k = 0; k < plan.test_idx.size(); ++k)
    full.row(plan.test_idx[k]) = test.row(static_cast<Eigen::Index>(k));
  return full;
}

/// Optimizes widths over lattice blocks small enough for the dense graph.
/// 1D signals use one block when the train set fits; 2D blocks hold about
/// patch x patch train points.
Eigen::VectorXd optimize_sigma_blocks(const SampledSignal& s, const Split& sp, const SuperGaussianConfig& emb,
                                      const GraphObjectiveConfig& gc, int patch) {
  const auto n_train = static_cast<Eigen::Index>(sp.plan.train_idx.size());
  const int n = s.n_dims_in();
  const double target = n == 1 ? static_cast<double>(gc.max_graph_size) : static_cast<double>(patch) * patch;
  if (n == 1 && n_train <= gc.max_graph_size) return optimize_sigma(sp.xtr, sp.g, emb, gc).sigma.sigma;

  const double density = static_cast<double>(s.size()) / static_cast<double>(n_train);
  const int block = std::max(1, static_cast<int>(std::lround(std::pow(target * density, 1.0 / n))));
  std::map<std::vector<int>, std::vector<Eigen::Index>> groups;
  for (Eigen::Index k = 0; k < n_train; ++k) {
    Eigen::Index lin = sp.plan.train_idx[static_cast<std::size_t>(k)];
    std::vector<int> key(static_cast<std::size_t>(n));
    for (int a = n - 1; a >= 0; --a) {
      const int extent = s.grid_shape[static_cast<std::size_t>(a)];
      key[static_cast<std::size_t>(a)] = static_cast<int>(lin % extent) / block;
      lin /= extent;
    }
    groups[key].push_back(k);
  }

  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(n_train, gc.sigma_init_spacings * emb.center_spacing());
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    const Eigen::MatrixXd x = gather_rows(sp.xtr, members);
    Eigen::VectorXd u(static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) u(static_cast<Eigen::Index>(i)) = sp.g(members[i]);
    const Eigen::VectorXd part = optimize_sigma(x, u, emb, gc).sigma.sigma;
    for (std::size_t i = 0; i < members.size(); ++i) sigma(members[i]) = part(static_cast<Eigen::Index>(i));
  }
  return sigma;
}

std::filesystem::path sigma_model_path(const ExperimentSpec& spec, int n_dims) {
  const auto& explicit_path = n_dims == 1 ? spec.sigma_model_1d : spec.sigma_model_2d;
  if (!explicit_path.empty()) return explicit_path;
  return spec.out / ("sigma_model_" + std::to_string(n_dims) + "d.csv");
}

struct CellKey {
  std::string signal;
  SplitScheme scheme;
  double fraction;
  int depth;
  auto tie() const { return std::tie(signal, scheme, fraction, depth); }
  bool operator<(const CellKey& o) const { return tie() < o.tie(); }
};

struct CellOutcome {
  double train_psnr = 0.0;
  double test_psnr = 0.0;
  std::vector<double> loss_trace;
  Eigen::MatrixXd full_prediction;
};

/// Trains variants on prepared splits, caching grid searches and width fields
/// that do not depend on the repeat.
class Runner {
 public:
  Runner(const ExperimentSpec& spec, int n_dims) : spec_(spec), n_dims_(n_dims) {
    sg_ = make_super_gaussian(n_dims, spec.d_embed, spec.b, spec.sigma_min,
                              n_dims == 1 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis);
  }

  void set_reference(const NamedSignal* reference) { reference_ = reference; }

  CellOutcome run(const std::string& variant, const NamedSignal& ns, const Split& sp, int depth,
                  SplitScheme scheme, double fraction, std::uint64_t seed) {
    const CellKey key{ns.id, scheme, fraction, depth};
    CellOutcome out;
    TrainRun run;
    if (variant == "no_pe") {
      run = fit(sp.xtr, sp.ytr, sp.xte, sp.yte, depth, seed, spec_.epochs);
    } else if (variant == "rff_matched" || variant == "rff_unmatched") {
      double sigma_r = 0.0;
      if (variant == "rff_matched") {
        sigma_r = rff_search(key, sp, depth);
      } else {
        if (!reference_) throw std::logic_error("no reference signal for rff_unmatched");
        const CellKey ref_key{reference_->id, scheme, fraction, depth};
        auto it = rff_cache_.find(ref_key);
        if (it == rff_cache_.end()) {
          const Split ref = prepare(reference_->signal, scheme, fraction, spec_.seed);
          sigma_r = rff_search(ref_key, ref, depth);
        } else {
          sigma_r = it->second;
        }
      }
      const RffConfig rff = make_rff(n_dims_, spec_.d_embed, sigma_r, spec_.seed);
      run = fit(rff_embed_batch(sp.xtr, rff), sp.ytr, rff_embed_batch(sp.xte, rff), sp.yte, depth, seed, spec_.epochs);
    } else if (variant == "sg_uniform") {
      const double sigma = uniform_search(key, sp, depth);
      run = fit_sigma(sp, Eigen::VectorXd::Constant(sp.xtr.rows(), sigma),
                      Eigen::VectorXd::Constant(sp.xte.rows(), sigma), depth, seed, spec_.epochs);
    } else if (variant == "sg_beta") {
      const Eigen::VectorXd sigma = predict_sigma(polynomial(), sp.g);
      run = fit_sigma(sp, sigma, test_sigma(sp, sigma), depth, seed, spec_.epochs);
    } else if (variant == "sg_analytic") {
      const CellKey akey{ns.id, scheme, fraction, 0};
      auto it = analytic_cache_.find(akey);
      if (it == analytic_cache_.end())
        it = analytic_cache_.emplace(akey, optimize_sigma_blocks(ns.signal, sp, sg_, spec_.graph, spec_.patch)).first;
      run = fit_sigma(sp, it->second, test_sigma(sp, it->second), depth, seed, spec_.epochs);
    } else if (variant == "sg_endtoend") {
      const Eigen::VectorXd init =
          Eigen::VectorXd::Constant(sp.xtr.rows(), spec_.graph.sigma_init_spacings * sg_.center_spacing());
      run = train_end_to_end(sp.xtr, sp.ytr, sp.xte, sp.yte, sg_, init, train_config(depth, seed, spec_.epochs));
    } else {
      throw std::invalid_argument("unknown variant: " + variant);
    }
    out.train_psnr = run.train_psnr;
    out.test_psnr = run.test_psnr;
    out.loss_trace = std::move(run.loss_trace);
    out.full_prediction = scatter_rows(sp.plan, run.train_predictions,
                                       sp.xte.rows() > 0 ? run.test_predictions
                                                         : Eigen::MatrixXd(0, sp.ytr.cols()),
                                       ns.signal.size());
    return out;
  }

  const SuperGaussianConfig& super_gaussian() const { return sg_; }

  const SigmaPolynomial& polynomial() {
    if (!poly_) {
      const auto path = sigma_model_path(spec_, n_dims_);
      if (!std::filesystem::exists(path))
        throw std::runtime_error("missing sigma polynomial model " + path.string() + " (run sigma_dev_fit)");
      poly_ = read_sigma_polynomial(path);
    }
    return *poly_;
  }

  TrainConfig train_config(int depth, std::uint64_t seed, int epochs) const {
    TrainConfig cfg;
    cfg.depth = depth;
    cfg.hidden = spec_.hidden;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.adam.lr = spec_.lr;
    cfg.adam.weight_decay = spec_.weight_decay;
    cfg.sigma_lr = spec_.sigma_lr;
    cfg.single_precision = spec_.single_precision;
    return cfg;
  }

  TrainRun fit(const Eigen::MatrixXd& ftr, const Eigen::MatrixXd& ytr, const Eigen::MatrixXd& fte,
               const Eigen::MatrixXd& yte, int depth, std::uint64_t seed, int epochs) const {
    return train_fixed(ftr, ytr, fte, yte, train_config(depth, seed, epochs));
  }

  /// Width with the lowest final train loss over the uniform grid.
  double uniform_search(const CellKey& key, const Split& sp, int depth) {
    auto it = uniform_cache_.find(key);
    if (it != uniform_cache_.end()) return it->second;
    double best = 0.0, best_loss = std::numeric_limits<double>::infinity();
    for (double m : spec_.uniform_grid) {
      const double sigma = m * sg_.center_spacing();
      const TrainRun r = fit(super_gaussian_embed_batch(sp.xtr, Eigen::VectorXd::Constant(sp.xtr.rows(), sigma), sg_),
                             sp.ytr, Eigen::MatrixXd(0, sg_.d_embed), Eigen::MatrixXd(0, sp.ytr.cols()), depth,
                             spec_.seed, search_epochs());
      const double loss = mse(r.train_predictions, sp.ytr);
      if (loss < best_loss) {
        best_loss = loss;
        best = sigma;
      }
    }
    uniform_cache_[key] = best;
    return best;
  }

  /// RFF bandwidth with the lowest final train loss over the grid.
  double rff_search(const CellKey& key, const Split& sp, int depth) {
    auto it = rff_cache_.find(key);
    if (it != rff_cache_.end()) return it->second;
    double best = 0.0, best_loss = std::numeric_limits<double>::infinity();
    for (double sigma_r : spec_.rff_grid) {
      const RffConfig rff = make_rff(n_dims_, spec_.d_embed, sigma_r, spec_.seed);
      const TrainRun r = fit(rff_embed_batch(sp.xtr, rff), sp.ytr, Eigen::MatrixXd(0, rff.d_embed()),
                             Eigen::MatrixXd(0, sp.ytr.cols()), depth, spec_.seed, search_epochs());
      const double loss = mse(r.train_predictions, sp.ytr);
      if (loss < best_loss) {
        best_loss = loss;
        best = sigma_r;
      }
    }
    rff_cache_[key] = best;
    return best;
  }

 private:
  int search_epochs() const { return spec_.search_epochs > 0 ? spec_.search_epochs : spec_.epochs; }

  Eigen::VectorXd test_sigma(const Split& sp, const Eigen::VectorXd& train_sigma) const {
    if (sp.xte.rows() == 0) return Eigen::VectorXd(0);
    return interpolate_sigma(sp.xtr, train_sigma, sp.xte);
  }

  TrainRun fit_sigma(const Split& sp, const Eigen::VectorXd& sigma_train, const Eigen::VectorXd& sigma_test, int depth,
                     std::uint64_t seed, int epochs) const {
    const Eigen::MatrixXd fte = sp.xte.rows() > 0 ? super_gaussian_embed_batch(sp.xte, sigma_test, sg_)
                                                  : Eigen::MatrixXd(0, sg_.d_embed);
    return fit(super_gaussian_embed_batch(sp.xtr, sigma_train, sg_), sp.ytr, fte, sp.yte, depth, seed, epochs);
  }

  const ExperimentSpec& spec_;
  int n_dims_;
  SuperGaussianConfig sg_;
  const NamedSignal* reference_ = nullptr;
  std::optional<SigmaPolynomial> poly_;
  std::map<CellKey, double> uniform_cache_;
  std::map<CellKey, double> rff_cache_;
  std::map<CellKey, Eigen::VectorXd> analytic_cache_;
};

std::string cell_id(const std::string& signal, const std::string& variant, int depth, double fraction,
                    SplitScheme scheme, int repeat) {
  return signal + "_" + variant + "_d" + std::to_string(depth) + "_f" + format_double(fraction) + "_" +
         to_string(scheme) + "_r" + std::to_string(repeat);
}

class Timing {
 public:
  explicit Timing(const std::filesystem::path& dir) : out_(dir / "timing.csv") { out_ << "id,seconds\n"; }
  void add(const std::string& id, double seconds) { out_ << csv_field(id) << ',' << format_double(seconds) << '\n'; }

 private:
  std::ofstream out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct GridAxes {
  std::vector<std::string> variants;
  std::vector<int> depths;
  std::vector<double> fractions;
  std::vector<SplitScheme> schemes;
};

GridAxes axes_with_defaults(const ExperimentSpec& spec, GridAxes defaults) {
  if (!spec.variants.empty()) defaults.variants = spec.variants;
  if (!spec.depths.empty()) defaults.depths = spec.depths;
  if (!spec.fractions.empty()) defaults.fractions = spec.fractions;
  if (!spec.schemes.empty()) defaults.schemes = spec.schemes;
  for (const auto& v : defaults.variants)
    if (std::find(kVariants.begin(), kVariants.end(), v) == kVariants.end())
      throw std::invalid_argument("unknown variant: " + v);
  return defaults;
}

/// Shared loop for the encoding and expressiveness grids: signals x schemes x
/// fractions x depths x variants x repeats, one report row per run.
Report run_grid(const ExperimentSpec& spec, const std::string& experiment, int n_dims, const GridAxes& axes) {
  std::filesystem::create_directories(spec.out);
  const std::vector<NamedSignal> signals = eval_signals(spec, n_dims);
  if (signals.empty()) throw std::invalid_argument("no signals to run");
  Runner runner(spec, n_dims);
  runner.set_reference(&signals.front());
  Timing timing(spec.out);
  Report report;

  for (const auto& ns : signals) {
    for (SplitScheme scheme : axes.schemes) {
      for (double fraction : axes.fractions) {
        std::optional<Split> split;
        std::string split_error;
        try {
          split = prepare(ns.signal, scheme, fraction, spec.seed);
        } catch (const std::exception& e) {
          split_error = e.what();
        }
        for (int depth : axes.depths) {
          for (const auto& variant : axes.variants) {
            for (int rep = 0; rep < spec.repeats; ++rep) {
              ReportRow row;
              row.experiment = experiment;
              row.signal = ns.id;
              row.variant = variant;
              row.depth = depth;
              row.fraction = fraction;
              row.scheme = to_string(scheme);
              row.seed = spec.seed + static_cast<std::uint64_t>(rep);
              const std::string id = cell_id(ns.id, variant, depth, fraction, scheme, rep);
              const auto t0 = std::chrono::steady_clock::now();
              try {
                if (!split) throw std::runtime_error(split_error);
                const CellOutcome cell = runner.run(variant, ns, *split, depth, scheme, fraction, row.seed);
                row.train_psnr = cell.train_psnr;
                row.test_psnr = cell.test_psnr;
                row.note = "ok";
                if (n_dims == 2) {
                  const int rows = ns.signal.grid_shape[0], cols = ns.signal.grid_shape[1];
                  row.ssim = ssim(cell.full_prediction, ns.signal.values, rows, cols);
                  if (spec.write_recon)
                    write_netpbm(spec.out / ("recon_" + id + (ns.signal.n_dims_out() == 1 ? ".pgm" : ".ppm")), rows,
                                 cols, cell.full_prediction);
                }
                if (spec.write_loss) write_loss_csv(spec.out / ("loss_" + id + ".csv"), cell.loss_trace);
              } catch (const std::exception& e) {
                row.note = std::string("error: ") + e.what();
              }
              const double elapsed = seconds_since(t0);
              timing.add(id, elapsed);
              if (spec.timing) row.wall_time_s = elapsed;
              std::cerr << id << ": " << (row.note == "ok" ? "train " + format_double(std::round(row.train_psnr * 100) / 100) +
                                                                 " test " + format_double(std::round(row.test_psnr * 100) / 100)
                                                           : row.note)
                        << '\n';
              report.add(std::move(row));
            }
          }
        }
      }
    }
  }
  return report;
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<std::string>& ids, const Eigen::VectorXd& g,
                     const Eigen::VectorXd& sigma) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "signal,g,sigma\n";
  for (Eigen::Index i = 0; i < g.size(); ++i)
    out << csv_field(ids[static_cast<std::size_t>(i)]) << ',' << format_double(g(i)) << ','
        << format_double(sigma(i)) << '\n';
}

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& [name, value] : kExperimentNames)
    if (value == e) return name;
  return "unknown";
}

Experiment parse_experiment(const std::string& text) {
  auto it = kExperimentNames.find(text);
  if (it == kExperimentNames.end()) throw std::invalid_argument("unknown experiment: " + text);
  return it->second;
}

ExperimentSpec parse_spec(const KvMap& kv) {
  static const std::vector<std::string> known = {
      "experiment", "signals", "count", "signal_seed", "length", "image_size", "categories", "variants", "depths",
      "fractions", "schemes", "repeats", "seed", "out", "epochs", "hidden", "lr", "weight_decay", "sigma_lr",
      "single_precision", "d_embed", "b", "sigma_min", "uniform_grid", "rff_grid", "search_epochs", "lambda_adj",
      "lambda_deg", "graph_iterations", "graph_step", "graph_eps", "graph_eps_scale", "sigma_init_spacings",
      "max_graph_size", "patch", "poly_terms", "poly_ridge", "sigma_model_1d", "sigma_model_2d", "dev_dims",
      "dev_count", "dev_seed", "dev_dir", "dev_fraction_1d", "dev_fraction_2d", "ndim", "recover_steps",
      "recover_lr", "timing", "write_recon", "write_loss"};
  for (const auto& [key, value] : kv)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown spec key: " + key);

  KvReader r(kv);
  ExperimentSpec s;
  if (auto e = r.get_string_opt("experiment")) s.experiment = parse_experiment(*e);
  if (auto v = r.get_string_opt("signals"))
    for (const auto& p : split_list(*v)) s.signals.emplace_back(p);
  s.count = r.get_int("count", s.count);
  s.signal_seed = r.get_uint64("signal_seed", s.signal_seed);
  s.length = r.get_int("length", s.length);
  s.image_size = r.get_int("image_size", s.image_size);
  if (auto v = r.get_string_opt("categories"))
    s.categories = parse_list<ImageCategory>(*v, [](const std::string& t) { return parse_image_category(t); });
  if (auto v = r.get_string_opt("variants")) s.variants = split_list(*v);
  if (auto v = r.get_string_opt("depths")) s.depths = parse_int_list(*v);
  if (auto v = r.get_string_opt("fractions")) s.fractions = parse_double_list(*v);
  if (auto v = r.get_string_opt("schemes"))
    s.schemes = parse_list<SplitScheme>(*v, [](const std::string& t) { return parse_split_scheme(t); });
  s.repeats = r.get_int("repeats", s.repeats);
  s.seed = r.get_uint64("seed", s.seed);
  s.out = r.get_string("out", s.out.string());
  s.epochs = r.get_int("epochs", s.epochs);
  s.hidden = r.get_int("hidden", s.hidden);
  s.lr = r.get_double("lr", s.lr);
  s.weight_decay = r.get_double("weight_decay", s.weight_decay);
  s.sigma_lr = r.get_double("sigma_lr", s.sigma_lr);
  s.single_precision = r.get_bool("single_precision", s.single_precision);
  s.d_embed = r.get_int("d_embed", s.d_embed);
  s.b = r.get_double("b", s.b);
  s.sigma_min = r.get_double("sigma_min", s.sigma_min);
  if (auto v = r.get_string_opt("uniform_grid")) s.uniform_grid = parse_double_list(*v);
  if (auto v = r.get_string_opt("rff_grid")) s.rff_grid = parse_double_list(*v);
  s.search_epochs = r.get_int("search_epochs", s.search_epochs);
  s.graph.lambda_adj = r.get_double("lambda_adj", s.graph.lambda_adj);
  s.graph.lambda_deg = r.get_double("lambda_deg", s.graph.lambda_deg);
  s.graph.iterations = r.get_int("graph_iterations", s.graph.iterations);
  s.graph.step_size = r.get_double("graph_step", s.graph.step_size);
  s.graph.eps = r.get_double("graph_eps", s.graph.eps);
  s.graph.eps_scale = r.get_double("graph_eps_scale", s.graph.eps_scale);
  s.graph.sigma_init_spacings = r.get_double("sigma_init_spacings", s.graph.sigma_init_spacings);
  s.graph.max_graph_size = r.get_int("max_graph_size", static_cast<int>(s.graph.max_graph_size));
  s.patch = r.get_int("patch", s.patch);
  s.poly_terms = r.get_int("poly_terms", s.poly_terms);
  s.poly_ridge = r.get_double("poly_ridge", s.poly_ridge);
  s.sigma_model_1d = r.get_string("sigma_model_1d", "");
  s.sigma_model_2d = r.get_string("sigma_model_2d", "");
  if (auto v = r.get_string_opt("dev_dims")) s.dev_dims = parse_int_list(*v);
  s.dev_count = r.get_int("dev_count", s.dev_count);
  s.dev_seed = r.get_uint64("dev_seed", s.dev_seed);
  s.dev_dir = r.get_string("dev_dir", "");
  s.dev_fraction_1d = r.get_double("dev_fraction_1d", s.dev_fraction_1d);
  s.dev_fraction_2d = r.get_double("dev_fraction_2d", s.dev_fraction_2d);
  s.ndim = r.get_int("ndim", s.ndim);
  s.recover_steps = r.get_int("recover_steps", s.recover_steps);
  s.recover_lr = r.get_double("recover_lr", s.recover_lr);
  s.timing = r.get_bool("timing", s.timing);
  s.write_recon = r.get_bool("write_recon", s.write_recon);
  s.write_loss = r.get_bool("write_loss", s.write_loss);

  if (s.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
  if (s.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (s.count < 1) throw std::invalid_argument("count must be at least 1");
  if (s.ndim < 0 || s.ndim > 2) throw std::invalid_argument("ndim must be 1 or 2");
  for (int d : s.depths)
    if (d < 1) throw std::invalid_argument("depths must be at least 1");
  for (double f : s.fractions)
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("fractions must lie in (0, 1]");
  for (int d : s.dev_dims)
    if (d != 1 && d != 2) throw std::invalid_argument("dev_dims entries must be 1 or 2");
  if (s.uniform_grid.empty() || s.rff_grid.empty()) throw std::invalid_argument("search grids must be non-empty");
  return s;
}

ExperimentSpec read_spec(const std::filesystem::path& path) { return parse_spec(read_kv_file(path)); }

Report run_encode1d(const ExperimentSpec& spec) {
  return run_grid(spec, "encode1d", 1, axes_with_defaults(spec, {kVariants, {4}, {0.5}, {SplitScheme::regular}}));
}

Report run_encode2d(const ExperimentSpec& spec) {
  return run_grid(spec, "encode2d", 2, axes_with_defaults(spec, {kVariants, {4}, {0.25}, {SplitScheme::regular}}));
}

Report run_expressiveness(const ExperimentSpec& spec) {
  return run_grid(spec, "expressiveness", 2,
                  axes_with_defaults(spec, {{"rff_matched", "sg_uniform", "sg_beta"},
                                            {1, 2, 3},
                                            {0.25, 0.10},
                                            {SplitScheme::regular, SplitScheme::random}}));
}

Report run_sweep_rff(const ExperimentSpec& spec) {
  const int n_dims = spec.ndim > 0 ? spec.ndim : 1;
  const GridAxes axes =
      axes_with_defaults(spec, {{}, {4}, {n_dims == 1 ? 0.5 : 0.25}, {SplitScheme::regular}});
  std::filesystem::create_directories(spec.out);
  const std::vector<NamedSignal> signals = eval_signals(spec, n_dims);
  Runner runner(spec, n_dims);
  Timing timing(spec.out);
  Report report;
  std::ofstream argmax(spec.out / "rff_argmax.csv");
  argmax << "signal,depth,fraction,scheme,best_sigma_r,best_test_psnr_db\n";

  for (const auto& ns : signals) {
    for (SplitScheme scheme : axes.schemes) {
      for (double fraction : axes.fractions) {
        const Split sp = prepare(ns.signal, scheme, fraction, spec.seed);
        for (int depth : axes.depths) {
          double best_sigma = 0.0, best_test = -std::numeric_limits<double>::infinity();
          for (double sigma_r : spec.rff_grid) {
            ReportRow row;
            row.experiment = "sweep_rff";
            row.signal = ns.id;
            row.variant = "rff@" + format_double(sigma_r);
            row.depth = depth;
            row.fraction = fraction;
            row.scheme = to_string(scheme);
            row.seed = spec.seed;
            const std::string id = cell_id(ns.id, "rff" + format_double(sigma_r), depth, fraction, scheme, 0);
            const auto t0 = std::chrono::steady_clock::now();
            try {
              const RffConfig rff = make_rff(n_dims, spec.d_embed, sigma_r, spec.seed);
              const TrainRun r = runner.fit(rff_embed_batch(sp.xtr, rff), sp.ytr, rff_embed_batch(sp.xte, rff), sp.yte,
                                            depth, spec.seed, spec.epochs);
              row.train_psnr = r.train_psnr;
              row.test_psnr = r.test_psnr;
              row.note = "ok";
              if (spec.write_loss) write_loss_csv(spec.out / ("loss_" + id + ".csv"), r.loss_trace);
              if (r.test_psnr > best_test) {
                best_test = r.test_psnr;
                best_sigma = sigma_r;
              }
            } catch (const std::exception& e) {
              row.note = std::string("error: ") + e.what();
            }
            const double elapsed = seconds_since(t0);
            timing.add(id, elapsed);
            if (spec.timing) row.wall_time_s = elapsed;
            std::cerr << id << ": " << row.note << '\n';
            report.add(std::move(row));
          }
          argmax << csv_field(ns.id) << ',' << depth << ',' << format_double(fraction) << ',' << to_string(scheme)
                 << ',' << format_double(best_sigma) << ',' << format_double(best_test) << '\n';
        }
      }
    }
  }
  return report;
}

Report run_recover(const ExperimentSpec& spec) {
  const int n_dims = spec.ndim > 0 ? spec.ndim : 2;
  const GridAxes axes = axes_with_defaults(spec, {{"sg_beta", "rff_matched"}, {4}, {1.0}, {SplitScheme::regular}});
  for (const auto& v : axes.variants)
    if (v != "sg_beta" && v != "sg_uniform" && v != "rff_matched")
      throw std::invalid_argument("recover supports sg_beta, sg_uniform and rff_matched, not " + v);
  std::filesystem::create_directories(spec.out);
  const std::vector<NamedSignal> signals = eval_signals(spec, n_dims);
  Runner runner(spec, n_dims);
  Timing timing(spec.out);
  Report report;
  const int depth = axes.depths.front();

  for (const auto& ns : signals) {
    const Split sp = prepare(ns.signal, SplitScheme::regular, 1.0, spec.seed);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(ns.signal.size()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::MatrixXd start = gather_rows(ns.signal.coords, perm);
    const CellKey key{ns.id, SplitScheme::regular, 1.0, depth};

    for (const auto& variant : axes.variants) {
      ReportRow row;
      row.experiment = "recover";
      row.signal = ns.id;
      row.variant = variant;
      row.depth = depth;
      row.fraction = 1.0;
      row.scheme = to_string(SplitScheme::regular);
      row.seed = spec.seed;
      const std::string id = cell_id(ns.id, variant, depth, 1.0, SplitScheme::regular, 0);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        CoordinateEncoder encoder;
        if (variant == "rff_matched") {
          encoder = rff_encoder(make_rff(n_dims, spec.d_embed, runner.rff_search(key, sp, depth), spec.seed));
        } else {
          const SuperGaussianConfig& sg = runner.super_gaussian();
          const Eigen::VectorXd lattice_sigma =
              variant == "sg_beta" ? predict_sigma(runner.polynomial(), jacobian_frobenius(channel_mean(ns.signal)))
                                   : Eigen::VectorXd::Constant(ns.signal.size(), runner.uniform_search(key, sp, depth));
          const Eigen::MatrixXd lattice = ns.signal.coords;
          encoder = super_gaussian_encoder(sg, [lattice, lattice_sigma](const Eigen::MatrixXd& x) {
            return interpolate_sigma(lattice, lattice_sigma, x);
          });
        }
        const TrainRun fit = runner.fit(encoder.embed(sp.xtr), sp.ytr, Eigen::MatrixXd(0, spec.d_embed),
                                        Eigen::MatrixXd(0, sp.ytr.cols()), depth, spec.seed, spec.epochs);
        RecoveryConfig rc;
        rc.steps = spec.recover_steps;
        rc.lr = spec.recover_lr;
        const RecoveryResult rec = recover_coordinates(fit.model, encoder, start, ns.signal.values, rc);
        row.train_psnr = fit.train_psnr;
        row.test_psnr = rec.psnr;
        row.note = "ok";
        if (spec.write_loss) write_loss_csv(spec.out / ("loss_" + id + ".csv"), rec.loss_trace);
      } catch (const std::exception& e) {
        row.note = std::string("error: ") + e.what();
      }
      const double elapsed = seconds_since(t0);
      timing.add(id, elapsed);
      if (spec.timing) row.wall_time_s = elapsed;
      std::cerr << id << ": " << row.note << " fit " << row.train_psnr << " recovered " << row.test_psnr << '\n';
      report.add(std::move(row));
    }
  }
  return report;
}

std::vector<SigmaDevFit> run_sigma_dev_fit(const ExperimentSpec& spec) {
  std::filesystem::create_directories(spec.out);
  std::vector<SigmaDevFit> fits;
  for (int n_dims : spec.dev_dims) {
    const std::vector<NamedSignal> signals = dev_signals(spec, n_dims);
    const SuperGaussianConfig sg = make_super_gaussian(
        n_dims, spec.d_embed, spec.b, spec.sigma_min, n_dims == 1 ? SuperGaussianMode::projected : SuperGaussianMode::per_axis);
    const double fraction = n_dims == 1 ? spec.dev_fraction_1d : spec.dev_fraction_2d;
    std::vector<double> g, sigma;
    std::vector<std::string> ids;
    for (const auto& ns : signals) {
      const Split sp = prepare(ns.signal, SplitScheme::regular, fraction, spec.seed);
      const Eigen::VectorXd s = optimize_sigma_blocks(ns.signal, sp, sg, spec.graph, spec.patch);
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        g.push_back(sp.g(i));
        sigma.push_back(s(i));
        ids.push_back(ns.id);
      }
      std::cerr << "sigma_dev_fit " << ns.id << ": " << s.size() << " pairs\n";
    }
    SigmaDevFit fit;
    fit.n_dims = n_dims;
    fit.g = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    fit.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
    fit.model = fit_polynomial(fit.g, fit.sigma, spec.poly_terms, spec.poly_ridge, spec.sigma_min, 1.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < fit.g.size(); ++i) acc += std::pow(evaluate_polynomial(fit.model, fit.g(i)) - fit.sigma(i), 2);
    fit.residual_rms = std::sqrt(acc / static_cast<double>(fit.g.size()));
    fit.sigma_std = std::sqrt((fit.sigma.array() - fit.sigma.mean()).square().mean());
    fit.spearman = spearman(fit.g, fit.sigma);

    const std::string tag = std::to_string(n_dims) + "d";
    write_sigma_polynomial(spec.out / ("sigma_model_" + tag + ".csv"), fit.model);
    write_pairs_csv(spec.out / ("sigma_pairs_" + tag + ".csv"), ids, fit.g, fit.sigma);
    write_kv_file(spec.out / ("sigma_fit_" + tag + ".txt"),
                  {{"pairs", std::to_string(fit.g.size())},
                   {"signals", std::to_string(signals.size())},
                   {"spearman", format_double(fit.spearman)},
                   {"residual_rms", format_double(fit.residual_rms)},
                   {"sigma_std", format_double(fit.sigma_std)},
                   {"residual_ratio", format_double(fit.sigma_std > 0 ? fit.residual_rms / fit.sigma_std : 0.0)}});
    fits.push_back(std::move(fit));
  }
  return fits;
}

void write_dev_sets(const ExperimentSpec& spec) {
  for (int n_dims : spec.dev_dims) {
    const auto dir = spec.out / ("dev" + std::to_string(n_dims) + "d");
    std::filesystem::create_directories(dir);
    if (n_dims == 1)
      write_dev_set_1d(dir, spec.dev_count, spec.length, spec.dev_seed);
    else
      write_dev_set_2d(dir, spec.dev_count, spec.image_size, spec.categories.front(), spec.dev_seed);
  }
}

Report run_experiment(const ExperimentSpec& spec) {
  Report report;
  switch (spec.experiment) {
    case Experiment::encode1d: report = run_encode1d(spec); break;
    case Experiment::encode2d: report = run_encode2d(spec); break;
    case Experiment::expressiveness: report = run_expressiveness(spec); break;
    case Experiment::sweep_rff: report = run_sweep_rff(spec); break;
    case Experiment::recover: report = run_recover(spec); break;
    case Experiment::sigma_dev_fit: run_sigma_dev_fit(spec); break;
    case Experiment::dev_set: write_dev_sets(spec); break;
  }
  std::filesystem::create_directories(spec.out);
  write_report_csv(spec.out / "report.csv", report);
  return report;
}

}  // namespace coordfit
