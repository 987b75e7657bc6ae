#pragma once

#include <string>

#include "json.hpp"

#include "flood/datagen.hpp"
#include "flood/objectives.hpp"
#include "flood/optim.hpp"
#include "flood/trainer.hpp"

namespace flood {

std::string to_string(LossKind kind);
std::string to_string(OptimizerKind kind);
std::string to_string(SyntheticVariant variant);

LossKind loss_kind_from_string(const std::string& name);
OptimizerKind optimizer_kind_from_string(const std::string& name);
SyntheticVariant synthetic_variant_from_string(const std::string& name);

void to_json(nlohmann::json& j, const LrDecay& decay);
void from_json(const nlohmann::json& j, LrDecay& decay);

void to_json(nlohmann::json& j, const OptimizerConfig& config);
void from_json(const nlohmann::json& j, OptimizerConfig& config);

void to_json(nlohmann::json& j, const MetricFlags& flags);
void from_json(const nlohmann::json& j, MetricFlags& flags);

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);

}  // namespace flood
