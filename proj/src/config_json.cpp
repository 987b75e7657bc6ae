#include "flood/config_json.hpp"

#include "flood/errors.hpp"

namespace flood {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ZeroOne: return "zero_one";
    case LossKind::SoftmaxCrossEntropy: return "softmax_ce";
    case LossKind::Logistic: return "logistic";
  }
  return "unknown";
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::SgdMomentum ? "sgd_momentum" : "adam";
}

std::string to_string(SyntheticVariant variant) {
  switch (variant) {
    case SyntheticVariant::TwoGaussians: return "two_gaussians";
    case SyntheticVariant::Sinusoid: return "sinusoid";
    case SyntheticVariant::Spiral: return "spiral";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "zero_one") return LossKind::ZeroOne;
  if (name == "softmax_ce") return LossKind::SoftmaxCrossEntropy;
  if (name == "logistic") return LossKind::Logistic;
  throw InvalidSpecError("unknown loss kind: " + name);
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw InvalidSpecError("unknown optimizer kind: " + name);
}

SyntheticVariant synthetic_variant_from_string(const std::string& name) {
  if (name == "two_gaussians") return SyntheticVariant::TwoGaussians;
  if (name == "sinusoid") return SyntheticVariant::Sinusoid;
  if (name == "spiral") return SyntheticVariant::Spiral;
  throw InvalidSpecError("unknown synthetic variant: " + name);
}

void to_json(nlohmann::json& j, const LrDecay& decay) {
  j = nlohmann::json{{"epochs", decay.epochs}, {"factor", decay.factor}};
}

void from_json(const nlohmann::json& j, LrDecay& decay) {
  decay.epochs = j.value("epochs", std::vector<int>{});
  decay.factor = j.value("factor", 0.1);
}

void to_json(nlohmann::json& j, const OptimizerConfig& config) {
  j = nlohmann::json{{"kind", to_string(config.kind)},
                     {"learning_rate", config.learning_rate},
                     {"momentum", config.momentum},
                     {"beta1", config.beta1},
                     {"beta2", config.beta2},
                     {"eps", config.eps},
                     {"weight_decay", config.weight_decay}};
  if (config.lr_decay) j["lr_decay"] = *config.lr_decay;
}

void from_json(const nlohmann::json& j, OptimizerConfig& config) {
  config = OptimizerConfig{};
  if (j.contains("kind")) config.kind = optimizer_kind_from_string(j.at("kind"));
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.momentum = j.value("momentum", config.momentum);
  config.beta1 = j.value("beta1", config.beta1);
  config.beta2 = j.value("beta2", config.beta2);
  config.eps = j.value("eps", config.eps);
  config.weight_decay = j.value("weight_decay", config.weight_decay);
  if (j.contains("lr_decay") && !j.at("lr_decay").is_null()) {
    config.lr_decay = j.at("lr_decay").get<LrDecay>();
  }
}

void to_json(nlohmann::json& j, const MetricFlags& flags) {
  j = nlohmann::json{{"grad_norms", flags.grad_norms},
                     {"eval_test_every_epoch", flags.eval_test_every_epoch},
                     {"log_jensen", flags.log_jensen},
                     {"checkpoint_every_epoch", flags.checkpoint_every_epoch}};
}

void from_json(const nlohmann::json& j, MetricFlags& flags) {
  flags = MetricFlags{};
  flags.grad_norms = j.value("grad_norms", flags.grad_norms);
  flags.eval_test_every_epoch =
      j.value("eval_test_every_epoch", flags.eval_test_every_epoch);
  flags.log_jensen = j.value("log_jensen", flags.log_jensen);
  flags.checkpoint_every_epoch =
      j.value("checkpoint_every_epoch", flags.checkpoint_every_epoch);
}

void to_json(nlohmann::json& j, const TrainConfig& config) {
  j = nlohmann::json{{"layer_sizes", config.layer_sizes},
                     {"loss", to_string(config.loss)},
                     {"optimizer", config.optimizer},
                     {"flood_level", config.flood_level},
                     {"epochs", config.epochs},
                     {"batch_size", config.batch_size},
                     {"seed", config.seed},
                     {"metrics", config.metrics}};
}

void from_json(const nlohmann::json& j, TrainConfig& config) {
  config = TrainConfig{};
  config.layer_sizes = j.value("layer_sizes", config.layer_sizes);
  if (j.contains("loss")) config.loss = loss_kind_from_string(j.at("loss"));
  if (j.contains("optimizer")) config.optimizer = j.at("optimizer").get<OptimizerConfig>();
  config.flood_level = j.value("flood_level", config.flood_level);
  config.epochs = j.value("epochs", config.epochs);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.seed = j.value("seed", config.seed);
  if (j.contains("metrics")) config.metrics = j.at("metrics").get<MetricFlags>();
}

void to_json(nlohmann::json& j, const SyntheticSpec& spec) {
  j = nlohmann::json{{"variant", to_string(spec.variant)},
                     {"dim", spec.dim},
                     {"m", spec.m},
                     {"w", std::vector<double>{spec.w[0], spec.w[1]}},
                     {"w_prime", std::vector<double>{spec.w_prime[0], spec.w_prime[1]}},
                     {"tau", spec.tau},
                     {"n_train", spec.n_train},
                     {"n_val", spec.n_val},
                     {"n_test", spec.n_test},
                     {"noise_rate", spec.noise_rate},
                     {"clean_test", spec.clean_test},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& spec) {
  SyntheticVariant variant = SyntheticVariant::TwoGaussians;
  if (j.contains("variant")) {
    variant = synthetic_variant_from_string(j.at("variant"));
  }
  spec = default_spec(variant);
  spec.dim = j.value("dim", spec.dim);
  spec.m = j.value("m", spec.m);
  if (j.contains("w")) {
    const auto w = j.at("w").get<std::vector<double>>();
    if (w.size() != 2) throw InvalidSpecError("sinusoid w must have 2 entries");
    spec.w = Eigen::Vector2d(w[0], w[1]);
  }
  if (j.contains("w_prime")) {
    const auto w = j.at("w_prime").get<std::vector<double>>();
    if (w.size() != 2) throw InvalidSpecError("sinusoid w_prime must have 2 entries");
    spec.w_prime = Eigen::Vector2d(w[0], w[1]);
  }
  spec.tau = j.value("tau", spec.tau);
  spec.n_train = j.value("n_train", spec.n_train);
  spec.n_val = j.value("n_val", spec.n_val);
  spec.n_test = j.value("n_test", spec.n_test);
  spec.noise_rate = j.value("noise_rate", spec.noise_rate);
  spec.clean_test = j.value("clean_test", spec.clean_test);
  spec.seed = j.value("seed", spec.seed);
}

}  // namespace flood
