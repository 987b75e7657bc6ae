#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "flood/errors.hpp"
#include "flood/nn.hpp"
#include "flood/objectives.hpp"
#include "test_helpers.hpp"

using namespace flood;
using floodtest::flatten;
using floodtest::make_small_case;
using floodtest::max_rel_error;

TEST_CASE("init_mlp shapes and determinism") {
  const std::vector<int> sizes{10, 500, 500, 500, 500, 500, 1};
  const ModelParams params = init_mlp(sizes, 42);
  REQUIRE(params.layers.size() == 6);
  CHECK(params.layers[0].weight.rows() == 500);
  CHECK(params.layers[0].weight.cols() == 10);
  CHECK(params.layers.back().weight.rows() == 1);
  CHECK(params.layer_sizes() == sizes);

  SUBCASE("biases start at exactly zero") {
    const ModelParams tiny = init_mlp({2, 1}, 7);
    CHECK(tiny.layers[0].bias[0] == 0.0);
  }
  SUBCASE("benchmark architecture") {
    const ModelParams mlp = init_mlp({784, 1000, 1000, 10}, 0);
    CHECK(mlp.layers.size() == 3);
    CHECK(mlp.output_dim() == 10);
  }
  SUBCASE("same seed bitwise identical, different seed differs") {
    const ModelParams again = init_mlp(sizes, 42);
    CHECK(flatten(params.layers) == flatten(again.layers));
    const ModelParams other = init_mlp(sizes, 43);
    CHECK(flatten(params.layers) != flatten(other.layers));
  }
  SUBCASE("weight scale follows sqrt(2 / in_units)") {
    const Matrix& w = params.layers[1].weight;  // 500 x 500 draws
    const double stddev = std::sqrt(w.array().square().mean());
    CHECK(stddev == doctest::Approx(std::sqrt(2.0 / 500.0)).epsilon(0.05));
  }
  SUBCASE("invalid architectures") {
    CHECK_THROWS_AS(init_mlp({}, 1), InvalidSpecError);
    CHECK_THROWS_AS(init_mlp({5}, 1), InvalidSpecError);
    CHECK_THROWS_AS(init_mlp({5, 0, 1}, 1), InvalidSpecError);
    CHECK_THROWS_AS(init_mlp({5, -2, 1}, 1), InvalidSpecError);
  }
}

TEST_CASE("forward matches hand-evaluated compositions") {
  SUBCASE("all-zero net maps everything to zero") {
    ModelParams zero;
    zero.layers.push_back({Matrix::Zero(3, 2), Vector::Zero(3)});
    zero.layers.push_back({Matrix::Zero(1, 3), Vector::Zero(1)});
    Matrix x(2, 2);
    x << 1.0, -2.0, 0.5, 3.0;
    CHECK(forward(zero, x).scores().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity single unit") {
    ModelParams id;
    id.layers.push_back({Matrix::Constant(1, 1, 1.0), Vector::Zero(1)});
    Matrix x(1, 1);
    x << 3.5;
    CHECK(forward(id, x).scores()(0, 0) == doctest::Approx(3.5));
  }
  SUBCASE("two layers with a ReLU in between") {
    ModelParams net;
    Matrix w1(2, 2);
    w1 << 1.0, -1.0, 0.5, 2.0;
    Vector b1(2);
    b1 << 0.1, -0.2;
    Matrix w2(1, 2);
    w2 << 1.0, 1.0;
    Vector b2(1);
    b2 << 0.3;
    net.layers.push_back({w1, b1});
    net.layers.push_back({w2, b2});

    Matrix x(2, 2);
    x << 2.0, 1.0, -2.0, 1.0;
    const ForwardTrace trace = forward(net, x);
    // row 0: pre = [1.1, 2.8], both active -> 1.1 + 2.8 + 0.3
    CHECK(trace.scores()(0, 0) == doctest::Approx(4.2).epsilon(1e-12));
    // row 1: pre = [-2.9, 0.8], first unit clamped -> 0.8 + 0.3
    CHECK(trace.scores()(1, 0) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(trace.post[0](1, 0) == 0.0);
    CHECK(trace.post[0] == trace.pre[0].cwiseMax(0.0));
  }
  SUBCASE("shape mismatch") {
    const ModelParams params = init_mlp({3, 2}, 0);
    CHECK_THROWS_AS(forward(params, Matrix::Zero(4, 5)), ShapeError);
  }
}

TEST_CASE("forward_scores agrees with forward across chunk boundaries") {
  const ModelParams params = init_mlp({6, 17, 3}, 99);
  Rng rng(5);
  Matrix x(5000, 6);  // crosses the 4096-row chunk boundary
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Matrix direct = forward(params, x).scores();
  const Matrix chunked = forward_scores(params, x);
  CHECK((direct - chunked).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward basics") {
  SUBCASE("zero cotangent gives zero gradients") {
    const ModelParams params = init_mlp({4, 5, 2}, 3);
    Matrix x = Matrix::Random(6, 4);
    const ForwardTrace trace = forward(params, x);
    const Gradients grads = backward(params, trace, Matrix::Zero(6, 2));
    for (const auto& layer : grads.layers) {
      CHECK(layer.weight.cwiseAbs().maxCoeff() == 0.0);
      CHECK(layer.bias.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(shape_congruent(params, grads));
  }
  SUBCASE("single linear unit with squared-error cotangent") {
    ModelParams unit;
    Matrix w(1, 1);
    w << 0.8;
    Vector b(1);
    b << -0.1;
    unit.layers.push_back({w, b});

    Matrix x(1, 1);
    x << 1.7;
    const double target = 2.0;
    const ForwardTrace trace = forward(unit, x);
    const double residual = trace.scores()(0, 0) - target;
    Matrix cotangent(1, 1);
    cotangent << residual;
    const Gradients grads = backward(unit, trace, cotangent);
    CHECK(grads.layers[0].weight(0, 0) == doctest::Approx(1.7 * residual).epsilon(1e-15));
    CHECK(grads.layers[0].bias[0] == doctest::Approx(residual).epsilon(1e-15));
  }
  SUBCASE("cotangent shape is checked") {
    const ModelParams params = init_mlp({4, 5, 2}, 3);
    const ForwardTrace trace = forward(params, Matrix::Random(6, 4));
    CHECK_THROWS_AS(backward(params, trace, Matrix::Zero(6, 3)), ShapeError);
    CHECK_THROWS_AS(backward(params, trace, Matrix::Zero(5, 2)), ShapeError);
  }
}

TEST_CASE("finite differences validate the backward pass on both losses") {
  for (const LossKind loss : {LossKind::Logistic, LossKind::SoftmaxCrossEntropy}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto made = make_small_case(seed, loss);
      const Gradients analytic = loss_gradient(made.params, made.data, loss);
      const Gradients numeric = finite_diff_grad(
          made.params,
          [&](const ModelParams& p) { return empirical_risk(p, made.data, loss); },
          1e-5);
      CHECK(max_rel_error(analytic, numeric) <= 1e-4);
    }
  }
}

TEST_CASE("finite differences on closed-form objectives") {
  const ModelParams params = init_mlp({3, 4, 2}, 17);
  SUBCASE("constant objective") {
    const Gradients grads =
        finite_diff_grad(params, [](const ModelParams&) { return 3.25; }, 1e-5);
    for (const auto& layer : grads.layers) {
      CHECK(layer.weight.cwiseAbs().maxCoeff() == 0.0);
      CHECK(layer.bias.cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("sum of squared parameters") {
    const auto sum_sq = [](const ModelParams& p) {
      double total = 0.0;
      for (const auto& layer : p.layers) {
        total += layer.weight.squaredNorm() + layer.bias.squaredNorm();
      }
      return total;
    };
    const Gradients grads = finite_diff_grad(params, sum_sq, 1e-5);
    for (std::size_t t = 0; t < params.layers.size(); ++t) {
      const Matrix expected = 2.0 * params.layers[t].weight;
      CHECK((grads.layers[t].weight - expected).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("flooded risk below b flips the gradient sign") {
    const auto made = make_small_case(21, LossKind::Logistic);
    const double risk = empirical_risk(made.params, made.data, LossKind::Logistic);
    const double b = risk + 0.25;  // buoyancy zone, away from the kink
    const auto flooded_objective = [&](const ModelParams& p) {
      return flooded(empirical_risk(p, made.data, LossKind::Logistic), b).flooded_risk;
    };
    const Gradients flipped = finite_diff_grad(made.params, flooded_objective, 1e-5);
    Gradients negated = loss_gradient(made.params, made.data, LossKind::Logistic);
    for (auto& layer : negated.layers) {
      layer.weight *= -1.0;
      layer.bias *= -1.0;
    }
    CHECK(max_rel_error(flipped, negated) <= 1e-4);
  }
  SUBCASE("epsilon and finiteness validation") {
    CHECK_THROWS_AS(finite_diff_grad(params, [](const ModelParams&) { return 1.0; }, 0.0),
                    InvalidSpecError);
    CHECK_THROWS_AS(
        finite_diff_grad(
            params,
            [](const ModelParams&) { return std::numeric_limits<double>::quiet_NaN(); },
            1e-5),
        NumericError);
  }
}

TEST_CASE("forward and backward are deterministic") {
  const auto made = make_small_case(33, LossKind::Logistic);
  const ForwardTrace t1 = forward(made.params, made.data.features);
  const ForwardTrace t2 = forward(made.params, made.data.features);
  CHECK(t1.scores() == t2.scores());
  const Gradients g1 = loss_gradient(made.params, made.data, made.loss);
  const Gradients g2 = loss_gradient(made.params, made.data, made.loss);
  CHECK(flatten(g1.layers) == flatten(g2.layers));
}

TEST_CASE("checkpoint round-trip and corruption handling") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "flood_nn_test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  const ModelParams params = init_mlp({7, 5, 3}, 123);
  save_checkpoint(params, path);
  const ModelParams loaded = load_checkpoint(path);
  CHECK(loaded.layer_sizes() == params.layer_sizes());
  CHECK(flatten(loaded.layers) == flatten(params.layers));

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint((dir / "nope.ckpt").string()), IoError);
  }
  SUBCASE("bad magic") {
    const std::string bad = (dir / "bad.ckpt").string();
    std::ofstream out(bad, std::ios::binary);
    out << "this is not a checkpoint at all";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(bad), IoError);
  }
  SUBCASE("truncated payload") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    const std::string cut = (dir / "cut.ckpt").string();
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(cut), IoError);
  }
}
