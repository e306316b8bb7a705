#ifndef TGCMC_OPTIM_HPP_
#define TGCMC_OPTIM_HPP_

#include <cstdint>

#include "tgcmc/diff/tape.hpp"
#include "tgcmc/model.hpp"

namespace tgcmc {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  ModelParameters first_moment;
  ModelParameters second_moment;
};

// Zero moments shaped like `params`.
AdamState make_adam_state(const ModelParameters& params);

// One bias-corrected Adam update. Every parameter must have a gradient;
// a non-finite gradient throws NumericError naming the parameter and leaves
// `params` untouched.
void adam_step(ModelParameters& params, const diff::Gradients& grads, AdamState& state,
               const AdamConfig& config);

// shadow <- decay * shadow + (1 - decay) * params
void ema_update(ModelParameters& shadow, const ModelParameters& params, double decay);

}  // namespace tgcmc

#endif  // TGCMC_OPTIM_HPP_
