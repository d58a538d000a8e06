#include "tacl/trainer.hpp"

#include <json.hpp>

namespace tacl {

const std::vector<Recipe>& known_recipes() {
    static const std::vector<Recipe> recipes = {
        // name           mlm    nsp    tacl   sent_cl
        {"pretrain-base", true, true, false, false},
        {"baseline-mt", true, true, false, false},
        {"model-1", true, true, false, true},
        {"model-2", false, false, true, false},
        {"tacl", true, true, true, false},
    };
    return recipes;
}

Recipe recipe_by_name(const std::string& name) {
    for (const auto& r : known_recipes())
        if (r.name == name) return r;
    std::string msg = "unknown recipe '" + name + "', expected one of:";
    for (const auto& r : known_recipes()) msg += " " + r.name;
    throw ConfigError(msg);
}

void append_metrics_line(std::ofstream& out, int64_t step, const LossBreakdown& bd, double lr,
                         double seconds) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j{{"step", step},          {"total", bd.total},
                     {"mlm", opt(bd.mlm)},    {"nsp", opt(bd.nsp)},
                     {"tacl", opt(bd.tacl)},  {"sent_cl", opt(bd.sent_cl)},
                     {"lr", lr},              {"seconds", seconds}};
    out << j.dump() << "\n";
    out.flush();
}

}  // namespace tacl
