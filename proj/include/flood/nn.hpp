#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flood/types.hpp"

namespace flood {

struct DenseLayer {
  Matrix weight;  // out_units x in_units
  Vector bias;    // out_units
};

// Dense feedforward network: ReLU on hidden layers, identity on the output.
// Adjacent layers chain (in_units of layer t+1 == out_units of layer t).
struct ModelParams {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;
};

// Shape tree mirrors the ModelParams the gradients were computed for.
struct Gradients {
  std::vector<DenseLayer> layers;
};

// Per-layer pre/post activations for one batch; scores() is batch x K
// (batch x 1 for binary heads).
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;  // max(0, pre) on hidden layers, == pre on output

  const Matrix& scores() const { return post.back(); }
};

// He-style init: weights ~ N(0, 2/in_units), biases zero.
ModelParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

ForwardTrace forward(const ModelParams& params, const Matrix& inputs);

// Evaluation path: scores only, computed in row chunks so large splits do
// not materialize full per-layer activations.
Matrix forward_scores(const ModelParams& params, const Matrix& inputs);

// Reverse-mode pass. score_grad is the cotangent of scores(); the result is
// the exact chain-rule gradient for whatever objective produced it (no
// implicit batch scaling). ReLU subgradient at 0 is 0.
Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const Matrix& score_grad);

// Central-difference oracle; test use only.
Gradients finite_diff_grad(const ModelParams& params,
                           const std::function<double(const ModelParams&)>& objective,
                           double epsilon = 1e-5);

Gradients zeros_like(const ModelParams& params);
bool all_finite(const ModelParams& params);
bool shape_congruent(const ModelParams& params, const Gradients& grads);

// Versioned binary checkpoint: layer-size header + row-major f64 payload.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace flood
