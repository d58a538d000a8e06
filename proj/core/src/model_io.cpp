#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "tacl/config_json.hpp"
#include "tacl/model.hpp"

namespace tacl {

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    cfg.validate();
    size_t v = static_cast<size_t>(cfg.vocab_size);
    size_t d = static_cast<size_t>(cfg.d_model);
    size_t ff = static_cast<size_t>(cfg.d_ff);
    size_t ml = static_cast<size_t>(cfg.max_len);

    std::vector<ParamSpec> specs;
    auto w = [&](std::string name, std::vector<size_t> shape) {
        specs.push_back({std::move(name), std::move(shape), ParamKind::weight});
    };
    auto b = [&](std::string name, std::vector<size_t> shape) {
        specs.push_back({std::move(name), std::move(shape), ParamKind::bias});
    };
    auto ln = [&](const std::string& base) {
        specs.push_back({base + ".gain", {d}, ParamKind::gain});
        specs.push_back({base + ".bias", {d}, ParamKind::bias});
    };

    w("embed.token", {v, d});
    w("embed.position", {ml, d});
    w("embed.segment", {2, d});
    ln("embed.ln");
    char buf[48];
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto name = [&](const char* suffix) {
            std::snprintf(buf, sizeof(buf), "layer.%02d.%s", l, suffix);
            return std::string(buf);
        };
        w(name("attn.wq"), {d, d});
        b(name("attn.bq"), {d});
        w(name("attn.wk"), {d, d});
        b(name("attn.bk"), {d});
        w(name("attn.wv"), {d, d});
        b(name("attn.bv"), {d});
        w(name("attn.wo"), {d, d});
        b(name("attn.bo"), {d});
        ln(name("attn.ln"));
        w(name("ffn.w1"), {d, ff});
        b(name("ffn.b1"), {ff});
        w(name("ffn.w2"), {ff, d});
        b(name("ffn.b2"), {d});
        ln(name("ffn.ln"));
    }
    w("pooler.w", {d, d});
    b("pooler.b", {d});
    w("mlm.transform.w", {d, d});
    b("mlm.transform.b", {d});
    ln("mlm.ln");
    b("mlm.output_bias", {v});
    w("nsp.w", {d, 2});
    b("nsp.b", {2});

    std::sort(specs.begin(), specs.end(),
              [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
    return specs;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},
                          {"n_layers", cfg.n_layers},     {"n_heads", cfg.n_heads},
                          {"d_ff", cfg.d_ff},             {"max_len", cfg.max_len},
                          {"dropout_p", cfg.dropout_p},   {"ln_eps", cfg.ln_eps}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    std::vector<std::string> unknown;
    for (const auto& [key, value] : j.items()) {
        if (key == "vocab_size")
            cfg.vocab_size = value.get<int>();
        else if (key == "d_model")
            cfg.d_model = value.get<int>();
        else if (key == "n_layers")
            cfg.n_layers = value.get<int>();
        else if (key == "n_heads")
            cfg.n_heads = value.get<int>();
        else if (key == "d_ff")
            cfg.d_ff = value.get<int>();
        else if (key == "max_len")
            cfg.max_len = value.get<int>();
        else if (key == "dropout_p")
            cfg.dropout_p = value.get<double>();
        else if (key == "ln_eps")
            cfg.ln_eps = value.get<double>();
        else
            unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = "model config: unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    return cfg;
}

void save_checkpoint_meta(const std::string& path, const CheckpointMeta& meta) {
    nlohmann::json j{{"format_version", meta.format_version},
                     {"step", meta.step},
                     {"recipe", meta.recipe},
                     {"config", model_config_to_json(meta.config)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

CheckpointMeta load_checkpoint_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad checkpoint sidecar " + path + ": " + e.what());
    }
    CheckpointMeta meta;
    meta.format_version = j.at("format_version").get<uint32_t>();
    if (meta.format_version != 1)
        throw IoError("unsupported checkpoint format_version in " + path);
    meta.step = j.at("step").get<int64_t>();
    meta.recipe = j.value("recipe", "");
    meta.config = model_config_from_json(j.at("config"));
    return meta;
}

}  // namespace tacl
