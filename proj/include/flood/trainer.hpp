#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flood/dataset.hpp"
#include "flood/nn.hpp"
#include "flood/objectives.hpp"
#include "flood/optim.hpp"
#include "flood/rng.hpp"

namespace flood {

struct MetricFlags {
  bool grad_norms = false;             // filter-normalized gradient norms
  bool eval_test_every_epoch = true;   // full test-split metrics per epoch
  bool log_jensen = false;             // full-batch vs mini-batch flooded risk
  bool checkpoint_every_epoch = false;
};

struct TrainConfig {
  std::vector<int> layer_sizes;
  LossKind loss = LossKind::Logistic;
  OptimizerConfig optimizer;
  double flood_level = 0.0;
  int epochs = 500;
  int batch_size = 100;
  std::uint64_t seed = 0;
  MetricFlags metrics;
};

// Unset optional metrics are NaN. train_loss is the RAW empirical risk,
// never the flooded value.
struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_error = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double learning_rate = 0.0;
  double grad_norm_train = 0.0;
  double grad_norm_test = 0.0;
  double jensen_full = 0.0;
  double jensen_minibatch_mean = 0.0;
};

struct TrainingLog {
  TrainConfig config;
  std::vector<EpochMetrics> epochs;

  ModelParams final_params;
  double final_test_loss = 0.0;
  double final_test_accuracy = 0.0;

  // Epoch with the best validation accuracy (ties -> earliest).
  int early_stop_epoch = 0;
  ModelParams best_params;
  double best_test_loss = 0.0;
  double best_test_accuracy = 0.0;

  // Model at the moment a mini-batch risk first dropped below b; absent
  // when the run never submerged (or b == 0).
  int first_submersion_epoch = -1;
  std::optional<ModelParams> first_submersion_params;

  std::vector<ModelParams> per_epoch_params;  // only if checkpoint_every_epoch
};

// Fresh uniform shuffle chunked into disjoint batches covering 0..n-1;
// the last chunk may be smaller.
std::vector<std::vector<int>> make_minibatches(int n, int batch_size, Rng& rng);

// Mini-batched training with flooding: per batch, the update direction is
// sign(L_m - b) applied to the raw-gradient update (the gradient of
// |L_m - b| + b away from the kink). b == 0 reduces to plain descent.
TrainingLog train(const TrainConfig& config, const SplitDataset& data);

// (epoch, params) maximizing validation accuracy, ties toward earliest.
std::pair<int, ModelParams> early_stop_select(const TrainingLog& log);

// Both sides of the mini-batch upper bound: full-batch flooded risk and
// the mean per-batch flooded risk over a partition.
std::pair<double, double> jensen_gap(const ModelParams& params,
                                     const LabeledDataset& data, double b,
                                     const std::vector<std::vector<int>>& batches,
                                     LossKind loss);

void write_training_log_csv(const TrainingLog& log, const std::string& path);
void write_training_log_json(const TrainingLog& log, const std::string& path);

}  // namespace flood
