#include "coordfit/optim.hpp"

namespace coordfit {

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::Ref<const Eigen::VectorXd>& grads) {
  adam_update<double>(state, params, grads);
}

}  // namespace coordfit
