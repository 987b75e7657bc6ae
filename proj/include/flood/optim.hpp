#pragma once

#include <optional>
#include <vector>

#include "flood/nn.hpp"

namespace flood {

enum class OptimizerKind { SgdMomentum, Adam };

// Multiply the learning rate by `factor` after each listed epoch.
struct LrDecay {
  std::vector<int> epochs;
  double factor = 0.1;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled L2 on weights only, biases excluded
  std::optional<LrDecay> lr_decay;
};

void validate_optimizer_config(const OptimizerConfig& config);

// Slot tensors shape-congruent with the optimized ModelParams.
// slot1 = velocity (SGD) or first moment (Adam); slot2 = second moment.
struct OptimizerState {
  std::vector<DenseLayer> slot1;
  std::vector<DenseLayer> slot2;
  long step = 0;
};

OptimizerState init_optimizer_state(const ModelParams& params,
                                    const OptimizerConfig& config);

// v' = momentum * v + g;  theta' = theta - lr * v'
void sgd_momentum_step(ModelParams& params, const Gradients& grads,
                       OptimizerState& state, const OptimizerConfig& config,
                       double lr);

// Bias-corrected Adam.
void adam_step(ModelParams& params, const Gradients& grads,
               OptimizerState& state, const OptimizerConfig& config, double lr);

void optimizer_step(ModelParams& params, const Gradients& grads,
                    OptimizerState& state, const OptimizerConfig& config,
                    double lr);

// base_lr * factor^(number of decay epochs strictly passed); epochs are
// 1-indexed, so a decay listed at 250 takes effect from epoch 251.
double lr_at_epoch(double base_lr, int epoch, const std::optional<LrDecay>& decay);

}  // namespace flood
