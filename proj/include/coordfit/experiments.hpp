#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coordfit/graphlap.hpp"
#include "coordfit/kvconfig.hpp"
#include "coordfit/report.hpp"
#include "coordfit/sigma_model.hpp"
#include "coordfit/signals.hpp"
#include "coordfit/synthetic.hpp"

namespace coordfit {

enum class Experiment { encode1d, encode2d, expressiveness, sigma_dev_fit, recover, sweep_rff, dev_set };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& text);

/// Ways of obtaining the positional embedding (and its widths) for a run.
inline const std::vector<std::string> kVariants = {"rff_matched", "rff_unmatched", "sg_uniform", "sg_endtoend",
                                                   "sg_beta",     "sg_analytic",   "no_pe"};

/// Everything an experiment run needs. Every field has a key of the same
/// name in the plain-text spec file; list values are comma separated.
struct ExperimentSpec {
  Experiment experiment = Experiment::encode1d;

  // Signals. Without explicit paths, `count` seeded synthetic signals are used.
  std::vector<std::filesystem::path> signals;
  int count = 5;
  std::uint64_t signal_seed = 200;
  int length = 512;       // 1D synthetic length
  int image_size = 120;   // 2D images are resampled to image_size x image_size
  std::vector<ImageCategory> categories = {ImageCategory::natural, ImageCategory::text};

  std::vector<std::string> variants;  // empty: the experiment's default set
  std::vector<int> depths;            // empty: experiment default
  std::vector<double> fractions;      // empty: experiment default
  std::vector<SplitScheme> schemes;   // empty: experiment default
  int repeats = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  // Network and optimizer.
  int epochs = 2000;
  int hidden = 256;
  double lr = 1e-4;
  double weight_decay = 1e-8;
  double sigma_lr = 1e-2;
  bool single_precision = true;

  // Embedders.
  int d_embed = 256;
  double b = 2.0;
  double sigma_min = 1e-3;
  std::vector<double> uniform_grid = {1, 2, 4, 8, 16, 32};  // multiples of the center spacing
  std::vector<double> rff_grid = {1, 2, 4, 8, 16, 32, 64};
  int search_epochs = 0;  // grid-search training budget; 0 means `epochs`

  // Width optimization and the width polynomial.
  GraphObjectiveConfig graph;
  int patch = 16;
  int poly_terms = 10;
  double poly_ridge = 1e-8;
  std::filesystem::path sigma_model_1d;  // empty: <out>/sigma_model_1d.csv
  std::filesystem::path sigma_model_2d;  // empty: <out>/sigma_model_2d.csv
  std::vector<int> dev_dims = {1, 2};
  int dev_count = 20;
  std::uint64_t dev_seed = 1000;
  std::filesystem::path dev_dir;  // empty: seeded synthetic dev signals
  double dev_fraction_1d = 0.5;
  double dev_fraction_2d = 0.25;

  /// Signal dimensionality for sweep_rff and recover; 0 picks 1 and 2.
  int ndim = 0;

  // Coordinate recovery.
  int recover_steps = 1000;
  double recover_lr = 1e-2;

  bool timing = false;
  bool write_recon = true;
  bool write_loss = true;
};

ExperimentSpec parse_spec(const KvMap& kv);
ExperimentSpec read_spec(const std::filesystem::path& path);

/// Runs the experiment, writing report.csv and per-run artifacts to spec.out.
Report run_experiment(const ExperimentSpec& spec);

Report run_encode1d(const ExperimentSpec& spec);
Report run_encode2d(const ExperimentSpec& spec);
Report run_expressiveness(const ExperimentSpec& spec);
Report run_sweep_rff(const ExperimentSpec& spec);
Report run_recover(const ExperimentSpec& spec);

/// Summary of one width-polynomial fit.
struct SigmaDevFit {
  int n_dims = 1;
  Eigen::VectorXd g;
  Eigen::VectorXd sigma;
  SigmaPolynomial model;
  double spearman = 0.0;
  double residual_rms = 0.0;
  double sigma_std = 0.0;
};

/// Optimizes widths on the dev signals of each dimensionality in
/// spec.dev_dims, fits the width polynomial and writes sigma_model_<n>d.csv,
/// sigma_pairs_<n>d.csv and sigma_fit_<n>d.txt.
std::vector<SigmaDevFit> run_sigma_dev_fit(const ExperimentSpec& spec);

/// Writes the seeded synthetic dev signals (CSV for 1D, PPM/PGM for 2D).
void write_dev_sets(const ExperimentSpec& spec);

}  // namespace coordfit
