#include "tgcmc/optim.hpp"

#include <cmath>

#include "tgcmc/error.hpp"

namespace tgcmc {

AdamState make_adam_state(const ModelParameters& params) {
  AdamState state;
  for (const auto& [name, t] : params) {
    state.first_moment.add(name, Tensor(t.shape(), 0.0));
    state.second_moment.add(name, Tensor(t.shape(), 0.0));
  }
  return state;
}

void adam_step(ModelParameters& params, const diff::Gradients& grads, AdamState& state,
               const AdamConfig& config) {
  for (const auto& [name, t] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw Error("no gradient for parameter '" + name + "'");
    if (it->second.shape() != t.shape()) throw ShapeError("gradient shape mismatch for '" + name + "'");
    if (!it->second.all_finite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, theta] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.first_moment.at(name);
    Tensor& v = state.second_moment.at(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void ema_update(ModelParameters& shadow, const ModelParameters& params, double decay) {
  for (auto& [name, s] : shadow) {
    const Tensor& p = params.at(name);
    if (p.shape() != s.shape()) throw ShapeError("EMA shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = decay * s[i] + (1.0 - decay) * p[i];
  }
}

}  // namespace tgcmc
