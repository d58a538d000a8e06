#pragma once

#include <json.hpp>

#include "tacl/losses.hpp"
#include "tacl/model.hpp"
#include "tacl/trainer.hpp"

namespace tacl {

// Configuration of one training run, as read from the CLI-facing JSON config
// file: {"model": {...}, "train": {...}, "loss": {...}}. Every section is
// optional in the file; unknown keys anywhere are rejected with the full list.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

LossConfig loss_config_from_json(const nlohmann::json& j);
nlohmann::json loss_config_to_json(const LossConfig& cfg);

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

// Applies one "section.key=value" override (for example "train.steps=500").
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace tacl
