#pragma once

#include <json.hpp>

#include "tacl/model.hpp"

namespace tacl {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
// Strict: unknown keys are rejected, listing every offending key.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace tacl
