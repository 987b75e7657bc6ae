#include <cmath>

#include "doctest.h"

#include "flood/errors.hpp"
#include "flood/optim.hpp"
#include "test_helpers.hpp"

using namespace flood;

namespace {

ModelParams scalar_model(double w, double b = 0.0) {
  ModelParams params;
  params.layers.push_back({Matrix::Constant(1, 1, w), Vector::Constant(1, b)});
  return params;
}

Gradients scalar_grad(double gw, double gb = 0.0) {
  Gradients grads;
  grads.layers.push_back({Matrix::Constant(1, 1, gw), Vector::Constant(1, gb)});
  return grads;
}

}  // namespace

TEST_CASE("sgd vanilla step") {
  OptimizerConfig config;
  config.kind = OptimizerKind::SgdMomentum;
  config.learning_rate = 0.1;
  config.momentum = 0.0;

  ModelParams params = scalar_model(0.0);
  OptimizerState state = init_optimizer_state(params, config);
  sgd_momentum_step(params, scalar_grad(1.0), state, config, 0.1);
  CHECK(params.layers[0].weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));

  SUBCASE("zero gradient leaves parameters untouched") {
    ModelParams still = scalar_model(0.7, -0.3);
    OptimizerState s = init_optimizer_state(still, config);
    sgd_momentum_step(still, scalar_grad(0.0), s, config, 0.1);
    CHECK(still.layers[0].weight(0, 0) == 0.7);
    CHECK(still.layers[0].bias[0] == -0.3);
  }
}

TEST_CASE("sgd momentum unrolled by hand") {
  OptimizerConfig config;
  config.kind = OptimizerKind::SgdMomentum;
  config.learning_rate = 1.0;
  config.momentum = 0.9;

  ModelParams params = scalar_model(0.0);
  OptimizerState state = init_optimizer_state(params, config);
  sgd_momentum_step(params, scalar_grad(1.0), state, config, 1.0);
  CHECK(params.layers[0].weight(0, 0) == doctest::Approx(-1.0));
  sgd_momentum_step(params, scalar_grad(1.0), state, config, 1.0);
  // v2 = 0.9 * 1 + 1 = 1.9, theta = -1 - 1.9
  CHECK(params.layers[0].weight(0, 0) == doctest::Approx(-2.9).epsilon(1e-15));
}

TEST_CASE("weight decay touches weights but not biases") {
  OptimizerConfig config;
  config.kind = OptimizerKind::SgdMomentum;
  config.learning_rate = 1.0;
  config.momentum = 0.0;
  config.weight_decay = 0.1;

  ModelParams params = scalar_model(2.0, 5.0);
  OptimizerState state = init_optimizer_state(params, config);
  sgd_momentum_step(params, scalar_grad(0.0, 0.0), state, config, 1.0);
  CHECK(params.layers[0].weight(0, 0) == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(params.layers[0].bias[0] == 5.0);
}

TEST_CASE("adam first step and invariances") {
  OptimizerConfig config;
  config.kind = OptimizerKind::Adam;
  config.learning_rate = 0.001;

  SUBCASE("zero gradient with zero moments is a no-op") {
    ModelParams params = scalar_model(0.4);
    OptimizerState state = init_optimizer_state(params, config);
    adam_step(params, scalar_grad(0.0), state, config, config.learning_rate);
    CHECK(params.layers[0].weight(0, 0) == 0.4);
  }
  SUBCASE("first-step magnitude is about lr, direction opposes the gradient") {
    for (double g : {2.0, -0.03, 11.0}) {
      ModelParams params = scalar_model(1.0);
      OptimizerState state = init_optimizer_state(params, config);
      adam_step(params, scalar_grad(g), state, config, config.learning_rate);
      const double update = params.layers[0].weight(0, 0) - 1.0;
      CHECK(std::abs(update) == doctest::Approx(config.learning_rate).epsilon(1e-6));
      CHECK(update * g < 0.0);
    }
  }
  SUBCASE("gradient scale does not change the first step") {
    ModelParams a = scalar_model(1.0);
    ModelParams b = scalar_model(1.0);
    OptimizerState sa = init_optimizer_state(a, config);
    OptimizerState sb = init_optimizer_state(b, config);
    adam_step(a, scalar_grad(0.7), sa, config, config.learning_rate);
    adam_step(b, scalar_grad(1.4), sb, config, config.learning_rate);
    CHECK(a.layers[0].weight(0, 0) ==
          doctest::Approx(b.layers[0].weight(0, 0)).epsilon(1e-6));
  }
}

TEST_CASE("optimizers stay finite over repeated steps") {
  const ModelParams start = init_mlp({4, 6, 1}, 5);
  for (const OptimizerKind kind : {OptimizerKind::SgdMomentum, OptimizerKind::Adam}) {
    OptimizerConfig config;
    config.kind = kind;
    config.learning_rate = kind == OptimizerKind::Adam ? 0.01 : 0.1;
    ModelParams params = start;
    OptimizerState state = init_optimizer_state(params, config);
    Rng rng(77);
    for (int step = 0; step < 200; ++step) {
      Gradients grads = zeros_like(params);
      for (auto& layer : grads.layers) {
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
          layer.weight.data()[i] = rng.normal();
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
          layer.bias[i] = rng.normal();
        }
      }
      optimizer_step(params, grads, state, config, config.learning_rate);
    }
    CHECK(all_finite(params));
  }
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_at_epoch(0.1, 100, std::nullopt) == 0.1);
  const LrDecay decay{{250, 400}, 0.1};
  CHECK(lr_at_epoch(0.1, 1, decay) == doctest::Approx(0.1));
  CHECK(lr_at_epoch(0.1, 250, decay) == doctest::Approx(0.1));  // decays after 250
  CHECK(lr_at_epoch(0.1, 300, decay) == doctest::Approx(0.01));
  CHECK(lr_at_epoch(0.1, 450, decay) == doctest::Approx(0.001));
  CHECK_THROWS_AS(lr_at_epoch(0.1, -1, decay), InvalidSpecError);
}

TEST_CASE("optimizer config validation and shape checks") {
  OptimizerConfig config;
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(validate_optimizer_config(config), InvalidSpecError);
  config.learning_rate = 0.1;
  config.kind = OptimizerKind::SgdMomentum;
  config.momentum = 1.0;
  CHECK_THROWS_AS(validate_optimizer_config(config), InvalidSpecError);
  config.momentum = 0.9;
  config.weight_decay = -0.1;
  CHECK_THROWS_AS(validate_optimizer_config(config), InvalidSpecError);

  ModelParams params = scalar_model(0.0);
  OptimizerConfig ok;
  ok.kind = OptimizerKind::SgdMomentum;
  OptimizerState state = init_optimizer_state(params, ok);
  Gradients wrong;
  wrong.layers.push_back({Matrix::Zero(2, 2), Vector::Zero(2)});
  CHECK_THROWS_AS(sgd_momentum_step(params, wrong, state, ok, 0.1), ShapeError);
}
