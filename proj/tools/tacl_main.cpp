// tacl: vocabulary building, base pre-training, token-aware contrastive
// continual training and its ablation recipes, representation diagnostics,
// heatmaps, and the built-in verification suites.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tacl/analysis.hpp"
#include "tacl/config_json.hpp"
#include "tacl/opcheck.hpp"
#include "tacl/run_config.hpp"
#include "tacl/selfcheck.hpp"
#include "tacl/trainer.hpp"

namespace {

using nlohmann::json;

void print_error(const std::string& kind, const std::string& message) {
    json j{{"error", message}, {"kind", kind}};
    std::cerr << j.dump() << std::endl;
}

std::string basename_of(const std::string& path) {
    return std::filesystem::path(path).filename().string();
}

struct TrainArgs {
    std::string corpus_path, vocab_path, out_dir, config_path, resume_prefix;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
};

void add_train_options(CLI::App* cmd, TrainArgs& args, bool needs_vocab) {
    cmd->add_option("--corpus", args.corpus_path, "corpus file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* vocab = cmd->add_option("--vocab", args.vocab_path, "vocabulary file")
                      ->check(CLI::ExistingFile);
    if (needs_vocab) vocab->required();
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--config", args.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", args.overrides, "override, e.g. train.steps=500")
        ->take_all();
    cmd->add_option("--seed", args.seed, "training seed (echoed in all outputs)");
    cmd->add_option("--resume", args.resume_prefix, "checkpoint prefix to resume from");
}

tacl::RunConfig resolve_run_config(const TrainArgs& args, bool allow_model_section) {
    tacl::RunConfig rc;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        json raw;
        try {
            in >> raw;
        } catch (const json::exception& e) {
            throw tacl::ConfigError("config " + args.config_path + " is not valid JSON: " +
                                    e.what());
        }
        if (!allow_model_section && raw.contains("model"))
            throw tacl::ConfigError(
                "train-tacl: the model section comes from the base checkpoint; remove it from "
                "the config file");
        rc = tacl::run_config_from_json(raw);
    }
    for (const auto& o : args.overrides) tacl::apply_override(rc, o);
    if (args.seed) rc.train.seed = *args.seed;
    return rc;
}

void write_resolved_config(const std::string& out_dir, const std::string& command,
                           const tacl::RunConfig& rc) {
    std::filesystem::create_directories(out_dir);
    json j{{"command", command},
           {"seed", rc.train.seed},
           {"recipe", rc.train.recipe},
           {"config", tacl::run_config_to_json(rc)}};
    std::ofstream out(out_dir + "/resolved_config.json", std::ios::trunc);
    if (!out) throw tacl::IoError("cannot write resolved config in " + out_dir);
    out << j.dump(2) << "\n";
}

int run_training(const std::string& command, const TrainArgs& args, tacl::RunConfig rc,
                 tacl::ModelParams<float> student, std::optional<tacl::ModelParams<float>> teacher,
                 const tacl::Vocab& vocab) {
    auto docs = tacl::load_corpus(args.corpus_path);
    auto corpus = tacl::EncodedCorpus::from(docs, vocab);
    tacl::Recipe recipe = tacl::recipe_by_name(rc.train.recipe);
    tacl::LossConfig lcfg = tacl::apply_recipe(rc.loss, recipe);

    write_resolved_config(args.out_dir, command, rc);
    tacl::Trainer<float> trainer(rc.model, std::move(student), std::move(teacher), corpus,
                                 rc.train, lcfg, args.out_dir);
    if (!args.resume_prefix.empty()) trainer.resume_from(args.resume_prefix);
    auto result = trainer.train();

    json summary{{"final_checkpoint", result.final_checkpoint},
                 {"steps_run", result.steps_run},
                 {"metrics", trainer.metrics_path()},
                 {"seed", rc.train.seed},
                 {"recipe", rc.train.recipe},
                 {"final_total_loss", result.last.total}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_build_vocab(const std::string& corpus_path, int size, int min_freq,
                    const std::string& out_path, uint64_t seed) {
    auto vocab = tacl::build_vocab_from_file(corpus_path, size, min_freq);
    vocab.save(out_path);
    json summary{{"vocab_size", vocab.size()}, {"out", out_path}, {"seed", seed}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_pretrain_base(const TrainArgs& args) {
    auto vocab = tacl::Vocab::load(args.vocab_path);
    tacl::RunConfig rc = resolve_run_config(args, /*allow_model_section=*/true);
    rc.train.recipe = "pretrain-base";
    if (rc.model.vocab_size == 0)
        rc.model.vocab_size = vocab.size();
    else if (rc.model.vocab_size != vocab.size())
        throw tacl::ConfigError("model.vocab_size disagrees with the vocabulary file (" +
                                std::to_string(rc.model.vocab_size) + " vs " +
                                std::to_string(vocab.size()) + ")");
    auto params = tacl::init_params<float>(rc.model, rc.train.seed);
    return run_training("pretrain-base", args, std::move(rc), std::move(params), std::nullopt,
                        vocab);
}

int cmd_train_tacl(const TrainArgs& args, const std::string& base_prefix,
                   const std::string& recipe_name) {
    if (recipe_name == "pretrain-base")
        throw tacl::ConfigError(
            "train-tacl: recipe must be one of tacl, baseline-mt, model-1, model-2 (use the "
            "pretrain-base subcommand for base pre-training)");
    tacl::Recipe recipe = tacl::recipe_by_name(recipe_name);  // reject unknown names early
    auto vocab = tacl::Vocab::load(args.vocab_path);
    auto [params, meta] = tacl::load_checkpoint<float>(base_prefix);
    if (meta.config.vocab_size != vocab.size())
        throw tacl::ConfigError("base checkpoint vocab_size " +
                                std::to_string(meta.config.vocab_size) +
                                " disagrees with the vocabulary file (" +
                                std::to_string(vocab.size()) + ")");
    tacl::RunConfig rc = resolve_run_config(args, /*allow_model_section=*/false);
    rc.model = meta.config;
    rc.train.recipe = recipe_name;

    std::optional<tacl::ModelParams<float>> teacher;
    if (recipe.needs_teacher()) teacher = params.clone();
    return run_training("train-tacl", args, std::move(rc), std::move(params), std::move(teacher),
                        vocab);
}

int cmd_analyze(const std::string& ckpt_prefix, const std::string& corpus_path,
                const std::string& vocab_path, const std::string& out_path, int sample,
                bool include_specials, uint64_t seed, std::string tag) {
    auto vocab = tacl::Vocab::load(vocab_path);
    auto [params, meta] = tacl::load_checkpoint<float>(ckpt_prefix);
    auto corpus = tacl::EncodedCorpus::from(tacl::load_corpus(corpus_path), vocab);

    std::vector<std::vector<int>> sentences;
    for (const auto* s : corpus.all_sentences()) sentences.push_back(*s);

    tacl::AnalysisConfig acfg;
    acfg.sample = sample;
    acfg.exclude_special = !include_specials;
    acfg.seed = seed;
    if (tag.empty()) tag = basename_of(ckpt_prefix);
    auto report = tacl::layerwise_self_similarity(params, meta.config, sentences, acfg, tag,
                                                  basename_of(corpus_path));
    report.save(out_path);
    json summary{{"out", out_path},
                 {"model_tag", report.model_tag},
                 {"n_layers", report.layers.size()},
                 {"final_layer_mean", report.layers.back().mean},
                 {"seed", seed}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_heatmap(const std::string& ckpt_prefix, const std::string& vocab_path,
                const std::string& text, int layer, bool include_specials,
                const std::string& out_prefix) {
    auto vocab = tacl::Vocab::load(vocab_path);
    auto [params, meta] = tacl::load_checkpoint<float>(ckpt_prefix);
    auto ids = tacl::encode(text, vocab);
    if (ids.empty()) throw tacl::ValueError("heatmap: text tokenized to nothing");
    auto seq = tacl::make_single_sequence(ids, meta.config.max_len);
    auto matrix =
        tacl::self_sim_matrix(params, meta.config, vocab, seq, layer, !include_specials);
    tacl::export_heatmap(matrix, out_prefix);
    json summary{{"csv", out_prefix + ".csv"},
                 {"pgm", out_prefix + ".pgm"},
                 {"tokens", matrix.size()},
                 {"layer", layer == -1 ? meta.config.n_layers : layer}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path) {
    auto a = tacl::SelfSimReport::load(a_path);
    auto b = tacl::SelfSimReport::load(b_path);
    auto cmp = tacl::compare_models(a, b);
    std::cout << "A = " << a.model_tag << ", B = " << b.model_tag << "\n" << cmp.to_table();
    json summary{{"final_delta", cmp.final_delta}, {"more_discriminative", cmp.verdict}};
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_gradcheck(const std::string& op, bool full_model, int instances, uint64_t seed) {
    std::vector<tacl::OpCheckSummary> summaries;
    if (!op.empty()) {
        summaries.push_back(tacl::check_op(op, instances, seed));
    } else if (full_model) {
        summaries.push_back(tacl::check_full_model(instances, seed, /*train_mode=*/true));
        summaries.push_back(tacl::check_full_model(instances, seed + 1, /*train_mode=*/false));
    } else {
        for (const auto& name : tacl::checkable_ops())
            summaries.push_back(tacl::check_op(name, instances, seed));
        summaries.push_back(tacl::check_full_model(2, seed, /*train_mode=*/true));
        summaries.push_back(tacl::check_full_model(1, seed + 1, /*train_mode=*/false));
    }
    bool all_pass = true;
    for (const auto& s : summaries) {
        all_pass = all_pass && s.pass;
        std::printf("[%s] %-22s instances=%d coords=%zu max_rel_err=%.3e\n",
                    s.pass ? "pass" : "FAIL", s.op.c_str(), s.instances, s.coords, s.max_rel_err);
    }
    return all_pass ? 0 : 1;
}

int cmd_selftest(bool quick, uint64_t seed) {
    auto results = tacl::selfcheck::run_all(seed, quick);
    bool all_pass = true;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::printf("[%s] %s: %s\n", r.pass ? "pass" : "FAIL", r.name.c_str(), r.detail.c_str());
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-aware contrastive continual pre-training workbench"};
    app.require_subcommand(1);

    // build-vocab
    auto* build = app.add_subcommand("build-vocab", "build a subword vocabulary from a corpus");
    std::string bv_corpus, bv_out;
    int bv_size = 2000, bv_min_freq = 2;
    uint64_t bv_seed = 13;
    build->add_option("--corpus", bv_corpus)->required()->check(CLI::ExistingFile);
    build->add_option("--size", bv_size, "target vocabulary size")->required();
    build->add_option("--min-freq", bv_min_freq, "minimum pair frequency for merges");
    build->add_option("--out", bv_out, "vocabulary file to write")->required();
    build->add_option("--seed", bv_seed);

    // pretrain-base
    auto* pretrain = app.add_subcommand("pretrain-base", "MLM+NSP pre-training from scratch");
    TrainArgs pt_args;
    add_train_options(pretrain, pt_args, /*needs_vocab=*/true);

    // train-tacl
    auto* train = app.add_subcommand("train-tacl", "continual training from a base checkpoint");
    TrainArgs tt_args;
    std::string tt_base, tt_recipe;
    train->add_option("--base", tt_base, "base checkpoint prefix")->required();
    train->add_option("--recipe", tt_recipe, "tacl | baseline-mt | model-1 | model-2")->required();
    add_train_options(train, tt_args, /*needs_vocab=*/true);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "layer-wise self-similarity report");
    std::string an_ckpt, an_corpus, an_vocab, an_out, an_tag;
    int an_sample = 2000;
    bool an_include_specials = false;
    uint64_t an_seed = 13;
    analyze->add_option("--ckpt", an_ckpt)->required();
    analyze->add_option("--corpus", an_corpus)->required()->check(CLI::ExistingFile);
    analyze->add_option("--vocab", an_vocab)->required()->check(CLI::ExistingFile);
    analyze->add_option("--sample", an_sample, "number of sentences to sample");
    analyze->add_flag("--include-specials", an_include_specials,
                      "keep [CLS]/[SEP] positions in the metric");
    analyze->add_option("--seed", an_seed);
    analyze->add_option("--tag", an_tag, "model tag in the report");
    analyze->add_option("--out", an_out, "report JSON path")->required();

    // heatmap
    auto* heatmap = app.add_subcommand("heatmap", "self-similarity matrix of one sentence");
    std::string hm_ckpt, hm_vocab, hm_text, hm_out;
    int hm_layer = -1;
    bool hm_include_specials = false;
    heatmap->add_option("--ckpt", hm_ckpt)->required();
    heatmap->add_option("--vocab", hm_vocab)->required()->check(CLI::ExistingFile);
    heatmap->add_option("--text", hm_text, "sentence to visualize")->required();
    heatmap->add_option("--layer", hm_layer, "layer index (default: final)");
    heatmap->add_flag("--include-specials", hm_include_specials);
    heatmap->add_option("--out", hm_out, "output prefix (.csv and .pgm)")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "compare two self-similarity reports");
    std::string cp_a, cp_b;
    compare->add_option("--a", cp_a)->required()->check(CLI::ExistingFile);
    compare->add_option("--b", cp_b)->required()->check(CLI::ExistingFile);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_op;
    bool gc_full = false;
    int gc_instances = 6;
    uint64_t gc_seed = 13;
    gradcheck->add_option("--op", gc_op, "single operation to check");
    gradcheck->add_flag("--full-model", gc_full, "composite loss through a tiny encoder");
    gradcheck->add_option("--instances", gc_instances, "random instances per check");
    gradcheck->add_option("--seed", gc_seed);

    // selftest
    auto* selftest = app.add_subcommand("selftest", "loss oracles and masking statistics");
    bool st_quick = false;
    uint64_t st_seed = 13;
    selftest->add_flag("--quick", st_quick, "reduced instance counts");
    selftest->add_option("--seed", st_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (*build) return cmd_build_vocab(bv_corpus, bv_size, bv_min_freq, bv_out, bv_seed);
        if (*pretrain) return cmd_pretrain_base(pt_args);
        if (*train) return cmd_train_tacl(tt_args, tt_base, tt_recipe);
        if (*analyze)
            return cmd_analyze(an_ckpt, an_corpus, an_vocab, an_out, an_sample,
                               an_include_specials, an_seed, an_tag);
        if (*heatmap)
            return cmd_heatmap(hm_ckpt, hm_vocab, hm_text, hm_layer, hm_include_specials, hm_out);
        if (*compare) return cmd_compare(cp_a, cp_b);
        if (*gradcheck) return cmd_gradcheck(gc_op, gc_full, gc_instances, gc_seed);
        if (*selftest) return cmd_selftest(st_quick, st_seed);
    } catch (const tacl::ConfigError& e) {
        print_error("config", e.what());
        return 2;
    } catch (const tacl::Error& e) {
        print_error("runtime", e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("runtime", e.what());
        return 1;
    }
    return 0;
}
