#include "flood/optim.hpp"

#include <cmath>

#include "flood/errors.hpp"

namespace flood {

namespace {

void check_congruence(const ModelParams& params, const Gradients& grads,
                      const OptimizerState& state) {
  if (!shape_congruent(params, grads)) {
    throw ShapeError("gradients are not shape-congruent with the parameters");
  }
  if (state.slot1.size() != params.layers.size()) {
    throw ShapeError("optimizer state does not match the parameters");
  }
}

}  // namespace

void validate_optimizer_config(const OptimizerConfig& config) {
  if (!(config.learning_rate > 0.0)) {
    throw InvalidSpecError("learning rate must be positive");
  }
  if (config.kind == OptimizerKind::SgdMomentum &&
      (config.momentum < 0.0 || config.momentum >= 1.0)) {
    throw InvalidSpecError("momentum must lie in [0, 1)");
  }
  if (config.kind == OptimizerKind::Adam &&
      (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
       config.beta2 >= 1.0 || !(config.eps > 0.0))) {
    throw InvalidSpecError("Adam needs beta1, beta2 in [0, 1) and eps > 0");
  }
  if (config.weight_decay < 0.0) {
    throw InvalidSpecError("weight decay must be non-negative");
  }
  if (config.lr_decay && !(config.lr_decay->factor > 0.0)) {
    throw InvalidSpecError("lr decay factor must be positive");
  }
}

OptimizerState init_optimizer_state(const ModelParams& params,
                                    const OptimizerConfig& config) {
  OptimizerState state;
  state.slot1 = zeros_like(params).layers;
  if (config.kind == OptimizerKind::Adam) {
    state.slot2 = zeros_like(params).layers;
  }
  state.step = 0;
  return state;
}

void sgd_momentum_step(ModelParams& params, const Gradients& grads,
                       OptimizerState& state, const OptimizerConfig& config,
                       double lr) {
  check_congruence(params, grads, state);
  state.step += 1;
  for (std::size_t t = 0; t < params.layers.size(); ++t) {
    Matrix gw = grads.layers[t].weight;
    if (config.weight_decay > 0.0) {
      gw.noalias() += config.weight_decay * params.layers[t].weight;
    }
    Matrix& vw = state.slot1[t].weight;
    vw = config.momentum * vw + gw;
    params.layers[t].weight.noalias() -= lr * vw;

    Vector& vb = state.slot1[t].bias;
    vb = config.momentum * vb + grads.layers[t].bias;
    params.layers[t].bias.noalias() -= lr * vb;
  }
}

void adam_step(ModelParams& params, const Gradients& grads,
               OptimizerState& state, const OptimizerConfig& config, double lr) {
  check_congruence(params, grads, state);
  if (state.slot2.size() != params.layers.size()) {
    throw ShapeError("Adam state is missing second-moment slots");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix gw = grads.layers[l].weight;
    if (config.weight_decay > 0.0) {
      gw.noalias() += config.weight_decay * params.layers[l].weight;
    }
    Matrix& mw = state.slot1[l].weight;
    Matrix& vw = state.slot2[l].weight;
    mw = config.beta1 * mw + (1.0 - config.beta1) * gw;
    vw = config.beta2 * vw + (1.0 - config.beta2) * gw.cwiseProduct(gw);
    params.layers[l].weight.array() -=
        lr * (mw.array() / bias1) / ((vw.array() / bias2).sqrt() + config.eps);

    const Vector& gb = grads.layers[l].bias;
    Vector& mb = state.slot1[l].bias;
    Vector& vb = state.slot2[l].bias;
    mb = config.beta1 * mb + (1.0 - config.beta1) * gb;
    vb = config.beta2 * vb + (1.0 - config.beta2) * gb.cwiseProduct(gb);
    params.layers[l].bias.array() -=
        lr * (mb.array() / bias1) / ((vb.array() / bias2).sqrt() + config.eps);
  }
}

void optimizer_step(ModelParams& params, const Gradients& grads,
                    OptimizerState& state, const OptimizerConfig& config,
                    double lr) {
  if (config.kind == OptimizerKind::SgdMomentum) {
    sgd_momentum_step(params, grads, state, config, lr);
  } else {
    adam_step(params, grads, state, config, lr);
  }
}

double lr_at_epoch(double base_lr, int epoch, const std::optional<LrDecay>& decay) {
  if (epoch < 0) {
    throw InvalidSpecError("epoch must be non-negative");
  }
  if (!decay) return base_lr;
  double lr = base_lr;
  for (int boundary : decay->epochs) {
    if (epoch > boundary) lr *= decay->factor;
  }
  return lr;
}

}  // namespace flood
