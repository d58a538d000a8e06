#include "tacl/run_config.hpp"

#include <fstream>

#include "tacl/config_json.hpp"

namespace tacl {

namespace {

[[noreturn]] void unknown_keys(const std::string& where, const std::vector<std::string>& keys) {
    std::string msg = where + ": unknown keys:";
    for (const auto& k : keys) msg += " " + k;
    throw ConfigError(msg);
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    std::vector<std::string> unknown;
    for (const auto& [key, value] : j.items()) {
        if (key == "steps")
            cfg.steps = value.get<int64_t>();
        else if (key == "batch_size")
            cfg.batch_size = value.get<int>();
        else if (key == "lr_peak")
            cfg.lr_peak = value.get<double>();
        else if (key == "warmup_ratio")
            cfg.warmup_ratio = value.get<double>();
        else if (key == "adam_beta1")
            cfg.adam_beta1 = value.get<double>();
        else if (key == "adam_beta2")
            cfg.adam_beta2 = value.get<double>();
        else if (key == "adam_eps")
            cfg.adam_eps = value.get<double>();
        else if (key == "weight_decay")
            cfg.weight_decay = value.get<double>();
        else if (key == "grad_clip_norm")
            cfg.grad_clip_norm = value.get<double>();
        else if (key == "seed")
            cfg.seed = value.get<uint64_t>();
        else if (key == "checkpoint_every")
            cfg.checkpoint_every = value.get<int64_t>();
        else if (key == "recipe")
            cfg.recipe = value.get<std::string>();
        else if (key == "max_len")
            cfg.max_len = value.get<int>();
        else if (key == "dynamic_masking")
            cfg.dynamic_masking = value.get<bool>();
        else if (key == "static_pool_size")
            cfg.static_pool_size = value.get<int>();
        else
            unknown.push_back(key);
    }
    if (!unknown.empty()) unknown_keys("train config", unknown);
    return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return nlohmann::json{{"steps", cfg.steps},
                          {"batch_size", cfg.batch_size},
                          {"lr_peak", cfg.lr_peak},
                          {"warmup_ratio", cfg.warmup_ratio},
                          {"adam_beta1", cfg.adam_beta1},
                          {"adam_beta2", cfg.adam_beta2},
                          {"adam_eps", cfg.adam_eps},
                          {"weight_decay", cfg.weight_decay},
                          {"grad_clip_norm", cfg.grad_clip_norm},
                          {"seed", cfg.seed},
                          {"checkpoint_every", cfg.checkpoint_every},
                          {"recipe", cfg.recipe},
                          {"max_len", cfg.max_len},
                          {"dynamic_masking", cfg.dynamic_masking},
                          {"static_pool_size", cfg.static_pool_size}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
    LossConfig cfg;
    std::vector<std::string> unknown;
    for (const auto& [key, value] : j.items()) {
        if (key == "tau")
            cfg.tau = value.get<double>();
        else if (key == "w_mlm")
            cfg.w_mlm = value.get<double>();
        else if (key == "w_nsp")
            cfg.w_nsp = value.get<double>();
        else if (key == "w_tacl")
            cfg.w_tacl = value.get<double>();
        else if (key == "w_sent_cl")
            cfg.w_sent_cl = value.get<double>();
        else if (key == "tacl_token_mean")
            cfg.tacl_token_mean = value.get<bool>();
        else if (key == "tacl_literal_mask_only")
            cfg.tacl_literal_mask_only = value.get<bool>();
        else if (key == "tacl_denom_include_specials")
            cfg.tacl_denom_include_specials = value.get<bool>();
        else
            unknown.push_back(key);  // term enables come from the recipe, not the file
    }
    if (!unknown.empty()) unknown_keys("loss config", unknown);
    return cfg;
}

nlohmann::json loss_config_to_json(const LossConfig& cfg) {
    return nlohmann::json{{"tau", cfg.tau},
                          {"w_mlm", cfg.w_mlm},
                          {"w_nsp", cfg.w_nsp},
                          {"w_tacl", cfg.w_tacl},
                          {"w_sent_cl", cfg.w_sent_cl},
                          {"tacl_token_mean", cfg.tacl_token_mean},
                          {"tacl_literal_mask_only", cfg.tacl_literal_mask_only},
                          {"tacl_denom_include_specials", cfg.tacl_denom_include_specials}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    std::vector<std::string> unknown;
    for (const auto& [key, value] : j.items()) {
        if (key == "model")
            cfg.model = model_config_from_json(value);
        else if (key == "train")
            cfg.train = train_config_from_json(value);
        else if (key == "loss")
            cfg.loss = loss_config_from_json(value);
        else
            unknown.push_back(key);
    }
    if (!unknown.empty()) unknown_keys("run config", unknown);
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return nlohmann::json{{"model", model_config_to_json(cfg.model)},
                          {"train", train_config_to_json(cfg.train)},
                          {"loss", loss_config_to_json(cfg.loss)}};
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    auto dot = path.find('.');
    if (dot == std::string::npos)
        throw ConfigError("override key '" + path + "' must be section.key");
    std::string section = path.substr(0, dot);
    std::string key = path.substr(dot + 1);

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // unquoted strings (e.g. recipe names)
    }
    nlohmann::json patch{{key, parsed}};
    if (section == "model") {
        nlohmann::json merged = model_config_to_json(cfg.model);
        merged.merge_patch(patch);
        cfg.model = model_config_from_json(merged);
    } else if (section == "train") {
        nlohmann::json merged = train_config_to_json(cfg.train);
        merged.merge_patch(patch);
        cfg.train = train_config_from_json(merged);
    } else if (section == "loss") {
        nlohmann::json merged = loss_config_to_json(cfg.loss);
        merged.merge_patch(patch);
        cfg.loss = loss_config_from_json(merged);
    } else {
        throw ConfigError("override section '" + section + "' must be model, train or loss");
    }
}

}  // namespace tacl
