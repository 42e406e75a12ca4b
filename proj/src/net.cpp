#include "coordfit/net.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#if defined(__SSE3__)
#include <pmmintrin.h>
#endif

#include "coordfit/kvconfig.hpp"
#include "coordfit/metrics.hpp"
#include "coordfit/sigma_model.hpp"

namespace coordfit {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'F', 'I', 'T', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // a_0 .. a_{L-1} (inputs to each layer)
  std::vector<Eigen::MatrixXd> pre;          // z_0 .. z_{L-1}
};

Eigen::MatrixXd forward_cached(const MlpModel& model, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  if (inputs.cols() != model.input_dim()) throw std::invalid_argument("input width mismatch");
  Eigen::MatrixXd a = inputs;
  const int depth = model.depth();
  for (int l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = a * model.weight(l);
    z.rowwise() += model.bias(l).transpose();
    if (cache) {
      cache->activations.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    if (l + 1 < depth)
      a = z.cwiseMax(0.0);
    else
      a = std::move(z);
  }
  return a;
}

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    v = std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return to_little_endian(v);
}

double psnr_or(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, double fallback) {
  return truth.rows() == 0 ? fallback : psnr(pred, truth);
}

// Flushes subnormals to zero while alive; far-field embedding components
// underflow into that range and stall the floating-point units.
class FlushDenormals {
 public:
#if defined(__SSE3__)
  FlushDenormals() : saved_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned int saved_;
#endif
};

// Preallocated forward/backward workspace over a flat parameter vector in
// precision S, mirroring the MlpModel layout.
template <typename S>
class Engine {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  explicit Engine(const MlpModel& model)
      : widths_(model.widths()), params_(model.params().cast<S>()), grads_(Vec::Zero(params_.size())) {
    for (int l = 0; l < model.depth(); ++l) {
      weight_offsets_.push_back(model.weight_offset(l));
      bias_offsets_.push_back(model.bias_offset(l));
    }
  }

  int depth() const { return static_cast<int>(widths_.size()) - 1; }
  Vec& params() { return params_; }
  const Vec& grads() const { return grads_; }
  const Mat& input_grads() const { return input_grads_; }
  const Mat& output() const { return acts_.back(); }

  void export_to(MlpModel& model) const { model.params() = params_.template cast<double>(); }

  const Mat& forward(const Mat& x) {
    const int L = depth();
    acts_.resize(static_cast<std::size_t>(L) + 1);
    pre_.resize(static_cast<std::size_t>(L));
    acts_[0] = x;
    for (int l = 0; l < L; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      Mat& z = pre_[ul];
      z.resize(x.rows(), widths_[ul + 1]);
      z.noalias() = acts_[ul] * weight(l);
      z.rowwise() += bias(l).transpose();
      if (l + 1 < L)
        acts_[ul + 1] = z.cwiseMax(S(0));
      else
        acts_[ul + 1] = z;
    }
    return acts_.back();
  }

  /// Mean squared error of the last forward pass against y, with gradients.
  double backward(const Mat& y, bool with_input_grad) {
    const int L = depth();
    const Mat& out = acts_.back();
    delta_ = out - y;
    const double count = static_cast<double>(delta_.size());
    const double loss = delta_.template cast<double>().squaredNorm() / count;
    delta_ *= static_cast<S>(2.0 / count);
    for (int l = L - 1; l >= 0; --l) {
      const auto ul = static_cast<std::size_t>(l);
      const Eigen::Index in = widths_[ul];
      const Eigen::Index outw = widths_[ul + 1];
      Eigen::Map<Mat>(grads_.data() + weight_offsets_[ul], in, outw).noalias() = acts_[ul].transpose() * delta_;
      Eigen::Map<Vec>(grads_.data() + bias_offsets_[ul], outw) = delta_.colwise().sum().transpose();
      if (l == 0 && !with_input_grad) break;
      back_.resize(delta_.rows(), in);
      back_.noalias() = delta_ * weight(l).transpose();
      if (l > 0)
        delta_ = (pre_[ul - 1].array() > S(0)).select(back_, S(0));
      else
        input_grads_ = back_;
    }
    return loss;
  }

 private:
  Eigen::Map<const Mat> weight(int l) const {
    const auto ul = static_cast<std::size_t>(l);
    return {params_.data() + weight_offsets_[ul], widths_[ul], widths_[ul + 1]};
  }
  Eigen::Map<const Vec> bias(int l) const {
    const auto ul = static_cast<std::size_t>(l);
    return {params_.data() + bias_offsets_[ul], widths_[ul + 1]};
  }

  std::vector<int> widths_;
  std::vector<Eigen::Index> weight_offsets_;
  std::vector<Eigen::Index> bias_offsets_;
  Vec params_;
  Vec grads_;
  std::vector<Mat> acts_;
  std::vector<Mat> pre_;
  Mat delta_;
  Mat back_;
  Mat input_grads_;
};

template <typename S>
void fit_weights(MlpModel& model, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                 const TrainConfig& cfg, std::vector<double>& trace) {
  const FlushDenormals flush;
  Engine<S> engine(model);
  BasicAdamState<S> adam(engine.params().size(), cfg.adam);
  const typename Engine<S>::Mat x = features.cast<S>();
  const typename Engine<S>::Mat y = targets.cast<S>();
  for (int e = 0; e < cfg.epochs; ++e) {
    engine.forward(x);
    const double loss = engine.backward(y, false);
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss at epoch " + std::to_string(e));
    trace.push_back(loss);
    adam_update<S>(adam, engine.params(), engine.grads());
  }
  engine.export_to(model);
}

template <typename S>
Eigen::VectorXd fit_weights_and_widths(MlpModel& model, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets,
                                       const SuperGaussianConfig& embed, const Eigen::VectorXd& sigma_init,
                                       const TrainConfig& cfg, std::vector<double>& trace) {
  const FlushDenormals flush;
  Engine<S> engine(model);
  BasicAdamState<S> adam(engine.params().size(), cfg.adam);
  AdamOptions sigma_opts = cfg.adam;
  sigma_opts.lr = cfg.sigma_lr;
  sigma_opts.weight_decay = 0.0;
  AdamState sigma_adam(coords.rows(), sigma_opts);
  const typename Engine<S>::Mat y = targets.cast<S>();
  Eigen::VectorXd s = ((sigma_init.array() - embed.sigma_min).max(1e-12)).log().matrix();
  for (int e = 0; e < cfg.epochs; ++e) {
    const Eigen::VectorXd sigma = sigma_from_log(s, embed.sigma_min);
    engine.forward(super_gaussian_embed_batch(coords, sigma, embed).cast<S>());
    const double loss = engine.backward(y, true);
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss at epoch " + std::to_string(e));
    trace.push_back(loss);
    const Eigen::MatrixXd dsig = super_gaussian_sigma_derivative_batch(coords, sigma, embed);
    const Eigen::VectorXd grad_s =
        (engine.input_grads().template cast<double>().cwiseProduct(dsig).rowwise().sum().array() * s.array().exp())
            .matrix();
    adam_update<S>(adam, engine.params(), engine.grads());
    adam_step(sigma_adam, s, grad_s);
  }
  engine.export_to(model);
  return sigma_from_log(s, embed.sigma_min);
}

template <typename S>
void descend_coordinates(const MlpModel& model, const CoordinateEncoder& encoder, const Eigen::MatrixXd& truth,
                         const RecoveryConfig& cfg, RecoveryResult& result) {
  const FlushDenormals flush;
  Engine<S> engine(model);
  const typename Engine<S>::Mat y = truth.cast<S>();
  AdamOptions opts;
  opts.lr = cfg.lr;
  opts.weight_decay = 0.0;
  AdamState adam(result.coords.size(), opts);
  for (int step = 0; step < cfg.steps; ++step) {
    engine.forward(encoder.embed(result.coords).template cast<S>());
    result.loss_trace.push_back(engine.backward(y, true));
    const Eigen::MatrixXd grad = encoder.pullback(result.coords, engine.input_grads().template cast<double>());
    Eigen::Map<Eigen::VectorXd> flat(result.coords.data(), result.coords.size());
    adam_step(adam, flat, Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size()));
    result.coords = result.coords.cwiseMax(0.0).cwiseMin(1.0);
  }
}

}  // namespace

MlpModel::MlpModel(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("an MLP needs input and output widths");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] < 1 || widths_[l + 1] < 1) throw std::invalid_argument("layer widths must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(total);
}

MlpModel MlpModel::make(int d_in, int hidden, int depth, int d_out, std::uint64_t seed) {
  if (depth < 1) throw std::invalid_argument("depth must be at least 1");
  std::vector<int> widths{d_in};
  for (int l = 1; l < depth; ++l) widths.push_back(hidden);
  widths.push_back(d_out);
  MlpModel model(std::move(widths));
  std::mt19937_64 rng(seed);
  for (int l = 0; l < model.depth(); ++l) {
    const double bound = std::sqrt(6.0 / model.widths_[static_cast<std::size_t>(l)]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = model.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
  return model;
}

Eigen::Index MlpModel::bias_offset(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return offsets_[l] + static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1];
}

Eigen::Map<Eigen::MatrixXd> MlpModel::weight(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return {params_.data() + offsets_[l], widths_[l], widths_[l + 1]};
}

Eigen::Map<const Eigen::MatrixXd> MlpModel::weight(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return {params_.data() + offsets_[l], widths_[l], widths_[l + 1]};
}

Eigen::Map<Eigen::VectorXd> MlpModel::bias(int layer) {
  return {params_.data() + bias_offset(layer), widths_[static_cast<std::size_t>(layer) + 1]};
}

Eigen::Map<const Eigen::VectorXd> MlpModel::bias(int layer) const {
  return {params_.data() + bias_offset(layer), widths_[static_cast<std::size_t>(layer) + 1]};
}

Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  return forward_cached(model, inputs, nullptr);
}

MlpGradients backward(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      bool with_input_grad) {
  if (targets.rows() != inputs.rows() || targets.cols() != model.output_dim())
    throw std::invalid_argument("target shape mismatch");
  ForwardCache cache;
  MlpGradients g;
  g.predictions = forward_cached(model, inputs, &cache);
  const Eigen::MatrixXd residual = g.predictions - targets;
  const double count = static_cast<double>(residual.size());
  g.loss = residual.squaredNorm() / count;
  g.params = Eigen::VectorXd::Zero(model.params().size());

  Eigen::MatrixXd delta = (2.0 / count) * residual;
  for (int l = model.depth() - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const Eigen::Index in = model.widths()[ul];
    const Eigen::Index out = model.widths()[ul + 1];
    Eigen::Map<Eigen::MatrixXd>(g.params.data() + model.weight_offset(l), in, out).noalias() =
        cache.activations[ul].transpose() * delta;
    Eigen::Map<Eigen::VectorXd>(g.params.data() + model.bias_offset(l), out) = delta.colwise().sum().transpose();
    if (l == 0 && !with_input_grad) break;
    Eigen::MatrixXd back = delta * model.weight(l).transpose();
    if (l > 0)
      delta = back.cwiseProduct((cache.pre[ul - 1].array() > 0.0).cast<double>().matrix());
    else
      g.inputs = std::move(back);
  }
  return g;
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::fixed_embedding: return "fixed_embedding";
    case TrainMode::end_to_end_sigma: return "end_to_end_sigma";
    case TrainMode::coordinate_recovery: return "coordinate_recovery";
  }
  return "unknown";
}

TrainRun train_fixed(const Eigen::MatrixXd& train_features, const Eigen::MatrixXd& train_targets,
                     const Eigen::MatrixXd& test_features, const Eigen::MatrixXd& test_targets,
                     const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("need at least one epoch");
  TrainRun run;
  run.mode = TrainMode::fixed_embedding;
  run.epochs = cfg.epochs;
  run.model = MlpModel::make(static_cast<int>(train_features.cols()), cfg.hidden, cfg.depth,
                             static_cast<int>(train_targets.cols()), cfg.seed);
  run.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  if (cfg.single_precision)
    fit_weights<float>(run.model, train_features, train_targets, cfg, run.loss_trace);
  else
    fit_weights<double>(run.model, train_features, train_targets, cfg, run.loss_trace);
  run.train_predictions = forward(run.model, train_features);
  run.train_psnr = psnr(run.train_predictions, train_targets);
  if (test_features.rows() > 0) run.test_predictions = forward(run.model, test_features);
  run.test_psnr = psnr_or(run.test_predictions, test_targets, run.train_psnr);
  return run;
}

TrainRun train_end_to_end(const Eigen::MatrixXd& train_coords, const Eigen::MatrixXd& train_targets,
                          const Eigen::MatrixXd& test_coords, const Eigen::MatrixXd& test_targets,
                          const SuperGaussianConfig& embed, const Eigen::VectorXd& sigma_init,
                          const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("need at least one epoch");
  if (sigma_init.size() != train_coords.rows()) throw std::invalid_argument("one initial sigma per train coordinate");
  TrainRun run;
  run.mode = TrainMode::end_to_end_sigma;
  run.epochs = cfg.epochs;
  run.model = MlpModel::make(embed.d_embed, cfg.hidden, cfg.depth, static_cast<int>(train_targets.cols()), cfg.seed);
  run.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  run.train_sigma =
      cfg.single_precision
          ? fit_weights_and_widths<float>(run.model, train_coords, train_targets, embed, sigma_init, cfg, run.loss_trace)
          : fit_weights_and_widths<double>(run.model, train_coords, train_targets, embed, sigma_init, cfg, run.loss_trace);
  run.train_predictions = forward(run.model, super_gaussian_embed_batch(train_coords, run.train_sigma, embed));
  run.train_psnr = psnr(run.train_predictions, train_targets);
  if (test_coords.rows() > 0) {
    run.test_sigma = interpolate_sigma(train_coords, run.train_sigma, test_coords);
    run.test_predictions = forward(run.model, super_gaussian_embed_batch(test_coords, run.test_sigma, embed));
  }
  run.test_psnr = psnr_or(run.test_predictions, test_targets, run.train_psnr);
  return run;
}

CoordinateEncoder raw_encoder() {
  CoordinateEncoder enc;
  enc.embed = [](const Eigen::MatrixXd& x) { return x; };
  enc.pullback = [](const Eigen::MatrixXd&, const Eigen::MatrixXd& g) { return g; };
  return enc;
}

CoordinateEncoder rff_encoder(RffConfig cfg) {
  CoordinateEncoder enc;
  enc.embed = [cfg](const Eigen::MatrixXd& x) { return rff_embed_batch(x, cfg); };
  enc.pullback = [cfg](const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) {
    const Eigen::Index half = cfg.frequencies.rows();
    const double two_pi = 2.0 * std::numbers::pi;
    const Eigen::ArrayXXd phase = two_pi * (x * cfg.frequencies.transpose()).array();
    const Eigen::MatrixXd dphase =
        (-phase.sin() * g.leftCols(half).array() + phase.cos() * g.rightCols(half).array()).matrix();
    return Eigen::MatrixXd(two_pi * dphase * cfg.frequencies);
  };
  return enc;
}

CoordinateEncoder super_gaussian_encoder(SuperGaussianConfig cfg,
                                         std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> sigma_at) {
  CoordinateEncoder enc;
  enc.embed = [cfg, sigma_at](const Eigen::MatrixXd& x) {
    return super_gaussian_embed_batch(x, sigma_at(x), cfg);
  };
  enc.pullback = [cfg, sigma_at](const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) {
    return super_gaussian_pullback_batch(x, sigma_at(x), g, cfg);
  };
  return enc;
}

RecoveryResult recover_coordinates(const MlpModel& model, const CoordinateEncoder& encoder,
                                   const Eigen::MatrixXd& start_coords, const Eigen::MatrixXd& truth,
                                   const RecoveryConfig& cfg) {
  if (!encoder.embed || !encoder.pullback) throw std::invalid_argument("encoder is not differentiable");
  if (truth.rows() != start_coords.rows()) throw std::invalid_argument("one truth row per coordinate");
  RecoveryResult result;
  result.coords = start_coords;
  result.initial_psnr = psnr(forward(model, encoder.embed(start_coords)), truth);

  if (cfg.single_precision)
    descend_coordinates<float>(model, encoder, truth, cfg, result);
  else
    descend_coordinates<double>(model, encoder, truth, cfg, result);
  result.psnr = psnr(forward(model, encoder.embed(result.coords)), truth);
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.widths().size()));
  for (int w : model.widths()) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  for (Eigen::Index i = 0; i < model.params().size(); ++i)
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(model.params()(i)));
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a model checkpoint: " + path.string());
  if (read_le<std::uint32_t>(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto n = read_le<std::uint32_t>(in);
  if (n < 2 || n > 1024) throw std::runtime_error("corrupt checkpoint layer count");
  std::vector<int> widths;
  for (std::uint32_t i = 0; i < n; ++i) widths.push_back(static_cast<int>(read_le<std::uint32_t>(in)));
  MlpModel model(std::move(widths));
  for (Eigen::Index i = 0; i < model.params().size(); ++i)
    model.params()(i) = std::bit_cast<double>(read_le<std::uint64_t>(in));
  return model;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_double(trace[i]) << '\n';
}

}  // namespace coordfit
