#pragma once

#include <utility>
#include <vector>

#include "flood/dataset.hpp"
#include "flood/nn.hpp"
#include "flood/types.hpp"

namespace flood {

enum class LossKind {
  ZeroOne,             // evaluation only, never differentiated
  SoftmaxCrossEntropy,
  Logistic,
};

// Result of the flooding transform |r - b| + b. direction is +1 in the
// gravity zone (r >= b, descent) and -1 in the buoyancy zone (r < b,
// ascent); the tie r == b resolves to +1.
struct FloodedValue {
  double raw_risk;
  double flooded_risk;
  int direction;
};

FloodedValue flooded(double raw_risk, double b);

// label in 1..K; argmax ties break toward the LARGEST index.
int zero_one_loss(const Vector& scores, int label);

// Predicted class in 1..K under the same tie rule.
int argmax_label(const Vector& scores);

// Max-shift stabilized. Returns per-sample losses and per-sample score
// gradients (softmax - onehot); divide by the batch size when using them
// as the cotangent of a mean risk.
std::pair<Vector, Matrix> softmax_cross_entropy(const Matrix& scores,
                                                const std::vector<int>& labels);

// label in {-1, +1}; returns (loss, dloss/dscore), overflow-safe.
std::pair<double, double> logistic_loss(double score, int label);
std::pair<Vector, Vector> logistic_loss_batch(const Vector& scores,
                                              const std::vector<int>& labels);

double empirical_risk(const ModelParams& params, const LabeledDataset& data,
                      LossKind loss);

// Zero-one empirical risk; accuracy = 1 - error.
double classification_error(const ModelParams& params, const LabeledDataset& data);

// Surrogate mean loss and zero-one error from a single forward pass.
struct EvalResult {
  double loss;
  double error;
};
EvalResult evaluate(const ModelParams& params, const LabeledDataset& data,
                    LossKind surrogate);

// Per-sample surrogate losses and score gradients for a scored batch.
// Used by the trainer; scores must match the dataset head convention.
std::pair<Vector, Matrix> surrogate_loss_grad(const Matrix& scores,
                                              const std::vector<int>& labels,
                                              LossKind loss);

}  // namespace flood
