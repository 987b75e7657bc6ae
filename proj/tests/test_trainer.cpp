#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "flood/datagen.hpp"
#include "flood/errors.hpp"
#include "flood/trainer.hpp"
#include "test_helpers.hpp"

using namespace flood;
using floodtest::flatten;

namespace {

SplitDataset small_gaussian_data(std::uint64_t seed, int n_train = 16,
                                 double noise = 0.0) {
  SyntheticSpec spec = default_spec(SyntheticVariant::TwoGaussians);
  spec.dim = 4;
  spec.n_train = n_train;
  spec.n_val = 16;
  spec.n_test = 64;
  spec.noise_rate = noise;
  spec.seed = seed;
  return generate(spec);
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig config;
  config.layer_sizes = {4, 6, 1};
  config.loss = LossKind::Logistic;
  config.optimizer.kind = OptimizerKind::SgdMomentum;
  config.optimizer.learning_rate = 0.05;
  config.optimizer.momentum = 0.9;
  config.epochs = 3;
  config.batch_size = 8;
  config.seed = seed;
  config.metrics.eval_test_every_epoch = true;
  return config;
}

}  // namespace

TEST_CASE("make_minibatches partitions the index range") {
  Rng rng(1);
  SUBCASE("single full batch") {
    const auto batches = make_minibatches(100, 100, rng);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].size() == 100);
  }
  SUBCASE("ragged chunking") {
    const auto batches = make_minibatches(10, 3, rng);
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].size() == 3);
    CHECK(batches[3].size() == 1);
    std::set<int> seen;
    for (const auto& batch : batches) seen.insert(batch.begin(), batch.end());
    CHECK(seen.size() == 10);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 9);
  }
  SUBCASE("fresh shuffle each call") {
    const auto a = make_minibatches(64, 64, rng);
    const auto b = make_minibatches(64, 64, rng);
    CHECK(a[0] != b[0]);
  }
  SUBCASE("size validation") {
    CHECK_THROWS_AS(make_minibatches(4, 5, rng), InvalidSpecError);
    CHECK_THROWS_AS(make_minibatches(4, 0, rng), InvalidSpecError);
  }
}

TEST_CASE("b = 0 training equals a hand-rolled descent loop") {
  // white-box replica of the training loop, pinning the seed-derivation
  // contract (init stream tag 11, shuffle stream tag 12) and the absence of
  // any flooding effect at b = 0
  const SplitDataset data = small_gaussian_data(5);
  TrainConfig config = small_config(17);
  const TrainingLog log = train(config, data);

  ModelParams params = init_mlp(config.layer_sizes, derive_seed(config.seed, 11));
  OptimizerState state = init_optimizer_state(params, config.optimizer);
  Rng shuffle_rng(derive_seed(config.seed, 12));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches =
        make_minibatches(static_cast<int>(data.train.size()), config.batch_size,
                         shuffle_rng);
    for (const auto& batch : batches) {
      Matrix features(batch.size(), data.train.dim());
      std::vector<int> labels(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) =
            data.train.features.row(batch[i]);
        labels[i] = data.train.labels[static_cast<std::size_t>(batch[i])];
      }
      const ForwardTrace trace = forward(params, features);
      auto [losses, score_grads] =
          surrogate_loss_grad(trace.scores(), labels, config.loss);
      score_grads *= 1.0 / static_cast<double>(batch.size());
      const Gradients grads = backward(params, trace, score_grads);
      sgd_momentum_step(params, grads, state, config.optimizer,
                        config.optimizer.learning_rate);
    }
  }
  CHECK(flatten(log.final_params.layers) == flatten(params.layers));
  CHECK(log.first_submersion_epoch == -1);
  CHECK_FALSE(log.first_submersion_params.has_value());
}

TEST_CASE("training is deterministic") {
  const SplitDataset data = small_gaussian_data(6);
  const TrainConfig config = small_config(23);
  const TrainingLog a = train(config, data);
  const TrainingLog b = train(config, data);
  CHECK(flatten(a.final_params.layers) == flatten(b.final_params.layers));
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);
    CHECK(a.epochs[e].val_accuracy == b.epochs[e].val_accuracy);
    CHECK(a.epochs[e].test_loss == b.epochs[e].test_loss);
  }
}

TEST_CASE("a large flood level turns the first steps into ascent") {
  const SplitDataset data = small_gaussian_data(7);
  TrainConfig config = small_config(29);
  config.flood_level = 10.0;  // far above ln 2, every step is buoyant
  config.epochs = 5;
  const TrainingLog log = train(config, data);
  CHECK(log.first_submersion_epoch == 1);
  CHECK(log.first_submersion_params.has_value());
  CHECK(log.epochs[4].train_loss > log.epochs[0].train_loss * 0.99);
  CHECK(log.epochs.back().train_loss > 0.6931);  // above the init-level loss
}

TEST_CASE("one flooded step is the mirror image of one descent step") {
  const SplitDataset data = small_gaussian_data(8);
  TrainConfig config = small_config(31);
  config.optimizer.momentum = 0.0;
  config.epochs = 1;
  config.batch_size = 16;  // single batch, one step

  TrainConfig ascent = config;
  ascent.flood_level = 10.0;
  const TrainingLog descent_log = train(config, data);
  const TrainingLog ascent_log = train(ascent, data);
  const ModelParams init = init_mlp(config.layer_sizes, derive_seed(config.seed, 11));

  const auto initial = flatten(init.layers);
  const auto down = flatten(descent_log.final_params.layers);
  const auto up = flatten(ascent_log.final_params.layers);
  for (std::size_t i = 0; i < initial.size(); ++i) {
    const double step_down = down[i] - initial[i];
    const double step_up = up[i] - initial[i];
    CHECK(step_up == doctest::Approx(-step_down).epsilon(1e-12));
  }
}

TEST_CASE("training loss floats around the flood level") {
  SyntheticSpec spec = default_spec(SyntheticVariant::TwoGaussians);
  spec.seed = 97;
  const SplitDataset data = generate(spec);

  TrainConfig config;
  config.layer_sizes = {10, 32, 32, 1};
  config.loss = LossKind::Logistic;
  config.optimizer.kind = OptimizerKind::Adam;
  config.optimizer.learning_rate = 1e-3;
  config.epochs = 500;
  config.batch_size = 100;
  config.seed = 3;
  config.flood_level = 0.1;
  config.metrics.eval_test_every_epoch = false;

  const TrainingLog log = train(config, data);
  double tail_mean = 0.0;
  for (std::size_t e = 400; e < 500; ++e) tail_mean += log.epochs[e].train_loss;
  tail_mean /= 100.0;
  CHECK(tail_mean == doctest::Approx(0.1).epsilon(0.5));
  CHECK(std::abs(tail_mean - 0.1) < 0.05);
  CHECK(log.first_submersion_epoch > 0);

  SUBCASE("plain descent drives the loss far below the flood level") {
    TrainConfig plain = config;
    plain.flood_level = 0.0;
    const TrainingLog base = train(plain, data);
    CHECK(base.epochs.back().train_loss < 0.05);
    CHECK(base.first_submersion_epoch == -1);
  }
}

TEST_CASE("logged train loss is the raw risk, never the flooded value") {
  const SplitDataset data = small_gaussian_data(9);
  TrainConfig config = small_config(37);
  config.flood_level = 5.0;
  config.epochs = 2;
  const TrainingLog log = train(config, data);
  const double raw = empirical_risk(log.final_params, data.train, config.loss);
  CHECK(log.epochs.back().train_loss == raw);
  CHECK(raw < config.flood_level);  // the flooded value would sit above b
}

TEST_CASE("early stopping selects the best validation epoch, earliest tie") {
  SUBCASE("constructed logs") {
    TrainingLog log;
    log.config = small_config(0);
    for (int e = 1; e <= 3; ++e) {
      EpochMetrics m;
      m.epoch = e;
      log.epochs.push_back(m);
      log.per_epoch_params.push_back(init_mlp({2, 1}, static_cast<std::uint64_t>(e)));
    }
    log.epochs[0].val_accuracy = 0.90;
    log.epochs[1].val_accuracy = 0.95;
    log.epochs[2].val_accuracy = 0.95;
    auto [epoch, params] = early_stop_select(log);
    CHECK(epoch == 2);
    CHECK(flatten(params.layers) == flatten(log.per_epoch_params[1].layers));

    log.epochs[2].val_accuracy = 0.99;
    CHECK(early_stop_select(log).first == 3);

    for (auto& m : log.epochs) m.val_accuracy = 0.5;
    CHECK(early_stop_select(log).first == 1);
  }
  SUBCASE("consistent with the snapshot kept during training") {
    const SplitDataset data = small_gaussian_data(10, 32, 0.2);
    TrainConfig config = small_config(41);
    config.epochs = 12;
    config.metrics.checkpoint_every_epoch = true;
    const TrainingLog log = train(config, data);
    const auto [epoch, params] = early_stop_select(log);
    CHECK(epoch == log.early_stop_epoch);
    CHECK(flatten(params.layers) == flatten(log.best_params.layers));
    int argmax = 0;
    for (std::size_t e = 1; e < log.epochs.size(); ++e) {
      if (log.epochs[e].val_accuracy > log.epochs[static_cast<std::size_t>(argmax)].val_accuracy) {
        argmax = static_cast<int>(e);
      }
    }
    CHECK(log.early_stop_epoch == argmax + 1);
  }
}

TEST_CASE("jensen bound: full-batch flooded risk vs mini-batch mean") {
  ModelParams linear;
  linear.layers.push_back({Matrix::Zero(1, 2), Vector::Zero(1)});
  linear.layers[0].weight(0, 0) = 1.0;

  LabeledDataset data;
  data.num_classes = 2;
  data.features.resize(4, 2);
  data.features << 3.0, 0.0, 3.0, 0.0, -3.0, 0.0, -3.0, 0.0;
  data.labels = {+1, +1, +1, +1};  // two easy and two hard samples

  SUBCASE("single batch is tight") {
    const std::vector<std::vector<int>> one{{0, 1, 2, 3}};
    const auto [full, mean_mb] = jensen_gap(linear, data, 0.3, one, LossKind::Logistic);
    CHECK(full == doctest::Approx(mean_mb).epsilon(1e-15));
  }
  SUBCASE("b = 0 collapses both sides to the raw risk") {
    const std::vector<std::vector<int>> split{{0, 1}, {2, 3}};
    const auto [full, mean_mb] = jensen_gap(linear, data, 0.0, split, LossKind::Logistic);
    const double risk = empirical_risk(linear, data, LossKind::Logistic);
    CHECK(full == doctest::Approx(risk).epsilon(1e-15));
    CHECK(mean_mb == doctest::Approx(risk).epsilon(1e-15));
  }
  SUBCASE("batch losses straddling b give a strict gap") {
    const std::vector<std::vector<int>> split{{0, 1}, {2, 3}};
    const auto [full, mean_mb] = jensen_gap(linear, data, 1.0, split, LossKind::Logistic);
    CHECK(full < mean_mb - 1e-6);
  }
  SUBCASE("non-partitions are rejected") {
    const std::vector<std::vector<int>> partial{{0, 1}};
    CHECK_THROWS_AS(jensen_gap(linear, data, 0.1, partial, LossKind::Logistic),
                    InvalidSpecError);
  }
}

TEST_CASE("the bound holds at every epoch of a logged run") {
  const SplitDataset data = small_gaussian_data(11, 24);
  TrainConfig config = small_config(43);
  config.epochs = 10;
  config.batch_size = 7;  // ragged batches on purpose
  config.flood_level = 0.4;
  config.metrics.log_jensen = true;
  const TrainingLog log = train(config, data);
  for (const auto& m : log.epochs) {
    CHECK(m.jensen_full <= m.jensen_minibatch_mean + 1e-12);
  }
}

TEST_CASE("diverging runs abort with a diagnostic") {
  const SplitDataset data = small_gaussian_data(12);
  TrainConfig config = small_config(47);
  config.optimizer.learning_rate = 1e200;
  config.epochs = 10;
  CHECK_THROWS_WITH_AS(train(config, data),
                       doctest::Contains("epoch"), NumericError);
}

TEST_CASE("config validation") {
  const SplitDataset data = small_gaussian_data(13);
  TrainConfig config = small_config(53);
  SUBCASE("batch larger than the training split") {
    config.batch_size = 1000;
    CHECK_THROWS_AS(train(config, data), InvalidSpecError);
  }
  SUBCASE("negative flood level") {
    config.flood_level = -0.1;
    CHECK_THROWS_AS(train(config, data), InvalidSpecError);
  }
  SUBCASE("input width mismatch") {
    config.layer_sizes = {5, 6, 1};
    CHECK_THROWS_AS(train(config, data), ShapeError);
  }
  SUBCASE("softmax head on binary data") {
    config.loss = LossKind::SoftmaxCrossEntropy;
    config.layer_sizes = {4, 6, 2};
    CHECK_THROWS_AS(train(config, data), ShapeError);
  }
  SUBCASE("zero-one loss cannot be trained") {
    config.loss = LossKind::ZeroOne;
    CHECK_THROWS_AS(train(config, data), InvalidSpecError);
  }
}

TEST_CASE("log serialization") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "flood_trainer_test";
  fs::create_directories(dir);

  const SplitDataset data = small_gaussian_data(14);
  TrainConfig config = small_config(59);
  config.flood_level = 0.2;
  const TrainingLog log = train(config, data);

  const std::string csv_path = (dir / "log.csv").string();
  write_training_log_csv(log, csv_path);
  std::ifstream csv(csv_path);
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "epoch,train_loss,train_error,val_loss,val_accuracy,test_loss,"
        "test_accuracy,learning_rate,grad_norm_train,grad_norm_test,"
        "jensen_full,jensen_minibatch_mean");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == config.epochs);

  const std::string json_path = (dir / "log.json").string();
  write_training_log_json(log, json_path);
  std::ifstream jin(json_path);
  nlohmann::json j;
  jin >> j;
  CHECK(j.at("early_stop_epoch").get<int>() == log.early_stop_epoch);
  CHECK(j.at("epochs").size() == static_cast<std::size_t>(config.epochs));
  CHECK(j.at("config").at("flood_level").get<double>() == 0.2);
  CHECK(j.at("final_test_accuracy").get<double>() ==
        doctest::Approx(log.final_test_accuracy));
}
