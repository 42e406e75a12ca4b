#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace coordfit {

struct AdamOptions {
  double lr = 1e-4;
  double weight_decay = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam with decoupled weight decay (param -= lr * wd * param).
template <typename Scalar>
struct BasicAdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector m;
  Vector v;
  long step = 0;
  AdamOptions options;

  BasicAdamState() = default;
  BasicAdamState(Eigen::Index n, AdamOptions opts) : m(Vector::Zero(n)), v(Vector::Zero(n)), options(opts) {}
};

using AdamState = BasicAdamState<double>;

template <typename Scalar>
void adam_update(BasicAdamState<Scalar>& state, Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> params,
                 const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("Adam state, parameter and gradient sizes differ");
  const AdamOptions& o = state.options;
  ++state.step;
  const auto b1 = static_cast<Scalar>(o.beta1);
  const auto b2 = static_cast<Scalar>(o.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  if (o.weight_decay != 0.0) params *= static_cast<Scalar>(1.0 - o.lr * o.weight_decay);
  const auto step_size = static_cast<Scalar>(o.lr / c1);
  const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
  const auto eps = static_cast<Scalar>(o.eps);
  params.array() -= step_size * state.m.array() / ((state.v.array() * inv_c2).sqrt() + eps);
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::Ref<const Eigen::VectorXd>& grads);

}  // namespace coordfit
