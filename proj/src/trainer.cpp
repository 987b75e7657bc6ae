#include "flood/trainer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "flood/config_json.hpp"
#include "flood/errors.hpp"
#include "flood/experiments.hpp"
#include "flood/io.hpp"

namespace flood {

namespace {

constexpr std::uint64_t kInitTag = 11;
constexpr std::uint64_t kShuffleTag = 12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void gather_batch(const LabeledDataset& data, const std::vector<int>& indices,
                  Matrix& features, std::vector<int>& labels) {
  features.resize(static_cast<Eigen::Index>(indices.size()), data.dim());
  labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) = data.features.row(indices[i]);
    labels[i] = data.labels[indices[i]];
  }
}

void validate_train_inputs(const TrainConfig& config, const SplitDataset& data) {
  if (config.epochs < 1) {
    throw InvalidSpecError("epochs must be >= 1");
  }
  if (config.flood_level < 0.0) {
    throw InvalidSpecError("flood level must be non-negative");
  }
  const int n = static_cast<int>(data.train.size());
  if (config.batch_size < 1 || config.batch_size > n) {
    throw InvalidSpecError("batch size must lie in [1, n_train]");
  }
  validate_optimizer_config(config.optimizer);
  validate_dataset(data.train);
  validate_dataset(data.validation);
  validate_dataset(data.test);
  if (data.validation.dim() != data.train.dim() ||
      data.test.dim() != data.train.dim() ||
      data.validation.num_classes != data.train.num_classes ||
      data.test.num_classes != data.train.num_classes) {
    throw ShapeError("splits disagree on feature width or class count");
  }
  if (config.layer_sizes.size() < 2) {
    throw InvalidSpecError("architecture needs at least input and output sizes");
  }
  if (config.layer_sizes.front() != data.train.dim()) {
    throw ShapeError("first layer width does not match feature dimension");
  }
  const int out = config.layer_sizes.back();
  if (config.loss == LossKind::Logistic && out != 1) {
    throw ShapeError("logistic loss needs a single output unit");
  }
  if (config.loss == LossKind::SoftmaxCrossEntropy) {
    if (data.train.binary()) {
      throw ShapeError("softmax cross-entropy requires a multi-class dataset");
    }
    if (out != data.train.num_classes) {
      throw ShapeError("softmax head width must equal the class count");
    }
  }
  if (config.loss == LossKind::ZeroOne) {
    throw InvalidSpecError("zero-one loss is evaluation-only");
  }
}

}  // namespace

std::vector<std::vector<int>> make_minibatches(int n, int batch_size, Rng& rng) {
  if (n < 1 || batch_size < 1 || batch_size > n) {
    throw InvalidSpecError("mini-batch sizes must satisfy 1 <= batch <= n");
  }
  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;
  rng.shuffle(indices);

  std::vector<std::vector<int>> batches;
  batches.reserve(static_cast<std::size_t>((n + batch_size - 1) / batch_size));
  for (int start = 0; start < n; start += batch_size) {
    const int count = std::min(batch_size, n - start);
    batches.emplace_back(indices.begin() + start, indices.begin() + start + count);
  }
  return batches;
}

TrainingLog train(const TrainConfig& config, const SplitDataset& data) {
  validate_train_inputs(config, data);

  TrainingLog log;
  log.config = config;

  ModelParams params = init_mlp(config.layer_sizes, derive_seed(config.seed, kInitTag));
  OptimizerState state = init_optimizer_state(params, config.optimizer);
  Rng shuffle_rng(derive_seed(config.seed, kShuffleTag));

  const double b = config.flood_level;
  const int n_train = static_cast<int>(data.train.size());
  double best_val_accuracy = -1.0;

  Matrix batch_features;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.optimizer.learning_rate, epoch,
                                  config.optimizer.lr_decay);
    const auto batches = make_minibatches(n_train, config.batch_size, shuffle_rng);

    for (std::size_t m = 0; m < batches.size(); ++m) {
      gather_batch(data.train, batches[m], batch_features, batch_labels);
      const ForwardTrace trace = forward(params, batch_features);
      auto [losses, score_grads] =
          surrogate_loss_grad(trace.scores(), batch_labels, config.loss);
      const double batch_loss = losses.mean();
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite mini-batch loss at epoch " << epoch << " batch " << m + 1;
        throw NumericError(msg.str());
      }

      if (log.first_submersion_epoch < 0 && batch_loss < b) {
        // model right after the mini-batch risk first went under the flood
        // level, i.e. the parameters that produced this loss
        log.first_submersion_epoch = epoch;
        log.first_submersion_params = params;
      }

      // gradient of |L_m - b| + b away from the kink: sign(L_m - b) times
      // the raw gradient; the tie L_m == b descends
      const double direction = batch_loss >= b ? 1.0 : -1.0;
      score_grads *= direction / static_cast<double>(batches[m].size());
      const Gradients grads = backward(params, trace, score_grads);
      optimizer_step(params, grads, state, config.optimizer, lr);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.learning_rate = lr;
    metrics.test_loss = kNaN;
    metrics.test_accuracy = kNaN;
    metrics.grad_norm_train = kNaN;
    metrics.grad_norm_test = kNaN;
    metrics.jensen_full = kNaN;
    metrics.jensen_minibatch_mean = kNaN;

    const EvalResult train_eval = evaluate(params, data.train, config.loss);
    metrics.train_loss = train_eval.loss;  // raw empirical risk, never flooded
    metrics.train_error = train_eval.error;
    const EvalResult val_eval = evaluate(params, data.validation, config.loss);
    metrics.val_loss = val_eval.loss;
    metrics.val_accuracy = 1.0 - val_eval.error;

    if (config.metrics.eval_test_every_epoch) {
      const EvalResult test_eval = evaluate(params, data.test, config.loss);
      metrics.test_loss = test_eval.loss;
      metrics.test_accuracy = 1.0 - test_eval.error;
    }
    if (config.metrics.grad_norms) {
      metrics.grad_norm_train = filter_normalized_grad_norm(
          params, loss_gradient(params, data.train, config.loss));
      metrics.grad_norm_test = filter_normalized_grad_norm(
          params, loss_gradient(params, data.test, config.loss));
    }
    if (config.metrics.log_jensen) {
      const auto [full, minibatch_mean] =
          jensen_gap(params, data.train, b, batches, config.loss);
      metrics.jensen_full = full;
      metrics.jensen_minibatch_mean = minibatch_mean;
    }
    log.epochs.push_back(metrics);

    if (metrics.val_accuracy > best_val_accuracy) {
      best_val_accuracy = metrics.val_accuracy;
      log.early_stop_epoch = epoch;
      log.best_params = params;
    }
    if (config.metrics.checkpoint_every_epoch) {
      log.per_epoch_params.push_back(params);
    }
  }

  log.final_params = std::move(params);
  if (config.metrics.eval_test_every_epoch) {
    log.final_test_loss = log.epochs.back().test_loss;
    log.final_test_accuracy = log.epochs.back().test_accuracy;
  } else {
    const EvalResult final_eval = evaluate(log.final_params, data.test, config.loss);
    log.final_test_loss = final_eval.loss;
    log.final_test_accuracy = 1.0 - final_eval.error;
  }
  const EvalResult best_eval = evaluate(log.best_params, data.test, config.loss);
  log.best_test_loss = best_eval.loss;
  log.best_test_accuracy = 1.0 - best_eval.error;
  return log;
}

std::pair<int, ModelParams> early_stop_select(const TrainingLog& log) {
  if (log.epochs.empty()) {
    throw InvalidSpecError("training log is empty");
  }
  if (!log.per_epoch_params.empty()) {
    int best = 0;
    for (std::size_t e = 1; e < log.epochs.size(); ++e) {
      if (log.epochs[e].val_accuracy > log.epochs[best].val_accuracy) {
        best = static_cast<int>(e);
      }
    }
    return {log.epochs[best].epoch, log.per_epoch_params[best]};
  }
  return {log.early_stop_epoch, log.best_params};
}

std::pair<double, double> jensen_gap(const ModelParams& params,
                                     const LabeledDataset& data, double b,
                                     const std::vector<std::vector<int>>& batches,
                                     LossKind loss) {
  const double full = flooded(empirical_risk(params, data, loss), b).flooded_risk;

  // sample-weighted mean so the bound also holds for a ragged final batch
  // (equal batch sizes reduce it to the plain mean)
  Matrix batch_features;
  std::vector<int> batch_labels;
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& batch : batches) {
    gather_batch(data, batch, batch_features, batch_labels);
    const Matrix scores = forward_scores(params, batch_features);
    const auto [losses, grads] = surrogate_loss_grad(scores, batch_labels, loss);
    weighted += flooded(losses.mean(), b).flooded_risk *
                static_cast<double>(batch.size());
    total += batch.size();
  }
  if (total != static_cast<std::size_t>(data.size())) {
    throw InvalidSpecError("batches do not partition the dataset");
  }
  return {full, weighted / static_cast<double>(total)};
}

void write_training_log_csv(const TrainingLog& log, const std::string& path) {
  std::ostringstream out;
  out << "epoch,train_loss,train_error,val_loss,val_accuracy,test_loss,"
         "test_accuracy,learning_rate,grad_norm_train,grad_norm_test,"
         "jensen_full,jensen_minibatch_mean\n";
  for (const auto& m : log.epochs) {
    out << m.epoch << ',' << format_real(m.train_loss) << ','
        << format_real(m.train_error) << ',' << format_real(m.val_loss) << ','
        << format_real(m.val_accuracy) << ',' << format_real(m.test_loss) << ','
        << format_real(m.test_accuracy) << ',' << format_real(m.learning_rate)
        << ',' << format_real(m.grad_norm_train) << ','
        << format_real(m.grad_norm_test) << ',' << format_real(m.jensen_full)
        << ',' << format_real(m.jensen_minibatch_mean) << '\n';
  }
  write_text_file(path, out.str());
}

void write_training_log_json(const TrainingLog& log, const std::string& path) {
  nlohmann::json j;
  j["config"] = log.config;
  j["early_stop_epoch"] = log.early_stop_epoch;
  j["first_submersion_epoch"] = log.first_submersion_epoch;
  j["final_test_loss"] = log.final_test_loss;
  j["final_test_accuracy"] = log.final_test_accuracy;
  j["best_test_loss"] = log.best_test_loss;
  j["best_test_accuracy"] = log.best_test_accuracy;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& m : log.epochs) {
    epochs.push_back({{"epoch", m.epoch},
                      {"train_loss", m.train_loss},
                      {"train_error", m.train_error},
                      {"val_loss", m.val_loss},
                      {"val_accuracy", m.val_accuracy},
                      {"test_loss", m.test_loss},
                      {"test_accuracy", m.test_accuracy},
                      {"learning_rate", m.learning_rate},
                      {"grad_norm_train", m.grad_norm_train},
                      {"grad_norm_test", m.grad_norm_test},
                      {"jensen_full", m.jensen_full},
                      {"jensen_minibatch_mean", m.jensen_minibatch_mean}});
  }
  j["epochs"] = std::move(epochs);
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace flood
