// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run with --only N to execute a single criterion.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tacl/analysis.hpp"
#include "tacl/opcheck.hpp"
#include "tacl/selfcheck.hpp"
#include "tacl/trainer.hpp"

namespace {

using namespace tacl;
using Clock = std::chrono::steady_clock;

constexpr uint64_t kSeed = 20260808;

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::filesystem::path work_dir() {
    return std::filesystem::temp_directory_path() / "tacl_acceptance";
}

std::string fixture_corpus_path() {
    return std::string(TACL_SOURCE_DIR) + "/data/fixture_corpus.txt";
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<nlohmann::json> metrics_without_seconds(const std::string& path) {
    std::ifstream in(path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        j.erase("seconds");  // wall-clock; everything else must be identical
        out.push_back(std::move(j));
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---- shared fixture-corpus setup --------------------------------------------

struct FixtureSetup {
    Vocab vocab;
    EncodedCorpus corpus;
    std::vector<std::vector<int>> sentences;
};

const FixtureSetup& fixture_setup() {
    static FixtureSetup setup = [] {
        FixtureSetup s;
        s.vocab = build_vocab_from_file(fixture_corpus_path(), 1500, 2);
        s.corpus = EncodedCorpus::from(load_corpus(fixture_corpus_path()), s.vocab);
        for (const auto* sent : s.corpus.all_sentences()) s.sentences.push_back(*sent);
        return s;
    }();
    return setup;
}

ModelConfig desk_model_config(int vocab_size) {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = 64;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 256;
    cfg.max_len = 48;
    cfg.dropout_p = 0.1;
    return cfg;
}

ModelConfig small_model_config(int vocab_size) {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = 32;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 64;
    cfg.max_len = 32;
    cfg.dropout_p = 0.1;
    return cfg;
}

TrainConfig train_config(int64_t steps, const std::string& recipe, uint64_t seed, int batch = 8) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = batch;
    cfg.lr_peak = 1e-4;
    cfg.recipe = recipe;
    cfg.seed = seed;
    return cfg;
}

TrainResult run_branch(const ModelConfig& mcfg, const std::string& base_prefix,
                       const std::string& recipe, int64_t steps, uint64_t seed,
                       const std::string& out_dir, int64_t checkpoint_every = 0) {
    auto [params, meta] = load_checkpoint<float>(base_prefix);
    std::optional<ModelParams<float>> teacher;
    if (recipe_by_name(recipe).needs_teacher()) teacher = params.clone();
    auto tcfg = train_config(steps, recipe, seed);
    tcfg.checkpoint_every = checkpoint_every;
    LossConfig lcfg = apply_recipe(LossConfig{}, recipe_by_name(recipe));
    Trainer<float> trainer(mcfg, std::move(params), std::move(teacher), fixture_setup().corpus,
                           tcfg, lcfg, out_dir);
    return trainer.train();
}

std::string pretrain_base(const ModelConfig& mcfg, int64_t steps, uint64_t seed,
                          const std::string& out_dir) {
    LossConfig lcfg = apply_recipe(LossConfig{}, recipe_by_name("pretrain-base"));
    Trainer<float> trainer(mcfg, init_params<float>(mcfg, seed), std::nullopt,
                           fixture_setup().corpus, train_config(steps, "pretrain-base", seed),
                           lcfg, out_dir);
    return trainer.train().final_checkpoint;
}

// ---- criteria ----------------------------------------------------------------

// 1. every differentiable op + composite loss vs central differences,
//    rel err <= 1e-4 in wide precision, >= 100 randomized instances, < 2 min
CriterionResult criterion_gradients() {
    CriterionResult r{1, "gradient suite (finite differences, wide precision)"};
    auto t0 = Clock::now();
    int instances = 0;
    double worst = 0.0;
    std::string worst_op;
    bool pass = true;
    for (const auto& op : checkable_ops()) {
        auto s = check_op(op, 5, kSeed, 1e-5, 1e-4);
        instances += s.instances;
        pass = pass && s.pass;
        if (s.max_rel_err > worst) {
            worst = s.max_rel_err;
            worst_op = s.op;
        }
    }
    for (auto s : {check_full_model(2, kSeed, true, 1e-5, 1e-4),
                   check_full_model(1, kSeed + 1, false, 1e-5, 1e-4)}) {
        instances += s.instances;
        pass = pass && s.pass;
        if (s.max_rel_err > worst) {
            worst = s.max_rel_err;
            worst_op = s.op;
        }
    }
    double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    r.pass = pass && instances >= 100 && elapsed < 120.0;
    r.detail = std::to_string(instances) + " instances, worst rel err " + fmt(worst) + " (" +
               worst_op + "), " + fmt(elapsed) + "s";
    return r;
}

// 2. vectorized tacl_loss vs brute-force double loop, 1000 instances, 1e-6;
//    per-position terms >= 0
CriterionResult criterion_tacl_oracle() {
    CriterionResult r{2, "TaCL loss vs double-loop oracle"};
    auto c = selfcheck::tacl_oracle(1000, kSeed, 1e-6);
    r.pass = c.pass;
    r.detail = c.detail;
    return r;
}

// 3. closed-form anchors at 1e-9
CriterionResult criterion_closed_forms() {
    CriterionResult r{3, "closed-form anchors (log n_valid, log(1+e^-1), log K)"};
    r.pass = true;
    for (const auto& c : selfcheck::closed_form_anchors(1e-9)) {
        r.pass = r.pass && c.pass;
        if (!c.pass) r.detail += "[" + c.name + ": " + c.detail + "] ";
    }
    if (r.pass) r.detail = "all anchors within 1e-9";
    return r;
}

// 4. masking statistics over 10^6 maskable tokens
CriterionResult criterion_masking() {
    CriterionResult r{4, "masking statistics (0.15 +- 0.002, 80/10/10 +- 0.005)"};
    auto c = selfcheck::masking_statistics(1000000, kSeed, 0.002, 0.005);
    r.pass = c.pass;
    r.detail = c.detail;
    return r;
}

// 5. frozen teacher across a 500-step run; scale invariance at 1e-9
CriterionResult criterion_frozen_teacher() {
    CriterionResult r{5, "frozen teacher (500 steps) and row-rescaling invariance"};
    const auto& fx = fixture_setup();
    auto mcfg = small_model_config(fx.vocab.size());
    auto dir = work_dir() / "frozen";
    auto base_prefix = pretrain_base(mcfg, 50, 13, (dir / "base").string());

    auto [params, meta] = load_checkpoint<float>(base_prefix);
    auto teacher = params.clone();
    LossConfig lcfg = apply_recipe(LossConfig{}, recipe_by_name("tacl"));
    Trainer<float> trainer(mcfg, std::move(params), teacher.clone(), fx.corpus,
                           train_config(500, "tacl", 13, 4), lcfg, (dir / "run").string());
    auto before_path = (dir / "teacher_before.tensors").string();
    save_named_tensors(before_path, to_named_tensors(teacher.tensors));
    trainer.train();
    auto after_path = (dir / "teacher_after.tensors").string();
    save_named_tensors(after_path, to_named_tensors(trainer.teacher().tensors));
    bool frozen = file_bytes(before_path) == file_bytes(after_path);

    auto inv = selfcheck::scale_invariance(200, kSeed, 1e-9);
    r.pass = frozen && inv.pass;
    r.detail = std::string("teacher bytes ") + (frozen ? "identical" : "CHANGED") + "; " +
               inv.detail;
    return r;
}

// 6. s(x) vs double-loop oracle at 1e-9, anchors, and the -1/(n-1) bound
CriterionResult criterion_selfsim_oracle() {
    CriterionResult r{6, "self-similarity oracle and bounds"};
    auto c = selfcheck::self_similarity_oracle(1000, kSeed, 1e-9);
    r.pass = c.pass;
    r.detail = c.detail;
    return r;
}

// 7. directional desk-scale reproduction: continue the base model with
//    baseline-mt and tacl for equal steps; the tacl branch's final-layer mean
//    self-similarity must be lower by >= 0.05 for each of 3 seeds, < 30 min
CriterionResult criterion_directional() {
    CriterionResult r{7, "directional desk run (tacl vs baseline-mt, 3 seeds)"};
    auto t0 = Clock::now();
    const auto& fx = fixture_setup();
    auto mcfg = desk_model_config(fx.vocab.size());
    auto dir = work_dir() / "desk";

    const int64_t base_steps = 200, branch_steps = 400;
    auto base_prefix = pretrain_base(mcfg, base_steps, 13, (dir / "base").string());

    AnalysisConfig acfg;
    acfg.sample = 500;
    acfg.seed = 13;
    auto final_mean = [&](const std::string& ckpt, const std::string& tag) {
        auto [params, meta] = load_checkpoint<float>(ckpt);
        auto report =
            layerwise_self_similarity(params, meta.config, fx.sentences, acfg, tag, "fixture");
        return report.layers.back().mean;
    };

    bool pass = true;
    std::ostringstream detail;
    for (uint64_t seed : {13, 14, 15}) {
        auto mt = run_branch(mcfg, base_prefix, "baseline-mt", branch_steps, seed,
                             (dir / ("mt" + std::to_string(seed))).string());
        auto tc = run_branch(mcfg, base_prefix, "tacl", branch_steps, seed,
                             (dir / ("tacl" + std::to_string(seed))).string());
        double mt_mean = final_mean(mt.final_checkpoint, "baseline-mt");
        double tacl_mean = final_mean(tc.final_checkpoint, "tacl");
        double delta = tacl_mean - mt_mean;
        pass = pass && delta <= -0.05;
        detail << "seed " << seed << ": mt=" << fmt(mt_mean) << " tacl=" << fmt(tacl_mean)
               << " delta=" << fmt(delta) << "; ";
    }
    double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    pass = pass && elapsed < 1800.0;
    detail << fmt(elapsed) << "s";
    r.pass = pass;
    r.detail = detail.str();
    return r;
}

// 8. fixed seed => identical logs and checkpoints; resume == uninterrupted
CriterionResult criterion_determinism() {
    CriterionResult r{8, "determinism and checkpoint resume"};
    const auto& fx = fixture_setup();
    auto mcfg = small_model_config(fx.vocab.size());
    auto dir = work_dir() / "determinism";
    auto base_prefix = pretrain_base(mcfg, 30, 13, (dir / "base").string());

    auto a = run_branch(mcfg, base_prefix, "tacl", 40, 21, (dir / "a").string());
    auto b = run_branch(mcfg, base_prefix, "tacl", 40, 21, (dir / "b").string());
    bool same_metrics = metrics_without_seconds((dir / "a/metrics.jsonl").string()) ==
                        metrics_without_seconds((dir / "b/metrics.jsonl").string());
    bool same_ckpt = file_bytes(a.final_checkpoint + ".tensors") ==
                     file_bytes(b.final_checkpoint + ".tensors");

    // interrupted at 20, resumed to 40, against the uninterrupted run
    auto full = run_branch(mcfg, base_prefix, "tacl", 40, 33, (dir / "full").string(),
                           /*checkpoint_every=*/20);
    {
        auto [params, meta] = load_checkpoint<float>(base_prefix);
        auto teacher = params.clone();
        LossConfig lcfg = apply_recipe(LossConfig{}, recipe_by_name("tacl"));
        Trainer<float> trainer(mcfg, std::move(params), std::move(teacher), fx.corpus,
                               train_config(40, "tacl", 33), lcfg, (dir / "resumed").string());
        trainer.resume_from((dir / "full/ckpt_step20").string());
        trainer.train();
    }
    bool resume_exact = file_bytes(full.final_checkpoint + ".tensors") ==
                        file_bytes((dir / "resumed/ckpt_final.tensors").string());

    r.pass = same_metrics && same_ckpt && resume_exact;
    r.detail = std::string("metrics ") + (same_metrics ? "identical" : "DIFFER") +
               " (seconds field excluded), checkpoints " + (same_ckpt ? "identical" : "DIFFER") +
               ", resume " + (resume_exact ? "exact" : "DIVERGED");
    return r;
}

// 9. right-padding changes no loss and no analysis metric by more than 1e-6
CriterionResult criterion_padding() {
    CriterionResult r{9, "padding neutrality of losses and analysis metrics"};
    Rng rng(kSeed);
    ModelConfig cfg;
    cfg.vocab_size = 40;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_len = 16;
    cfg.dropout_p = 0.0;
    auto params = init_params<double>(cfg, 77);
    auto teacher = params.clone();
    teacher.set_requires_grad(false);
    params.set_requires_grad(false);

    struct Seq {
        std::vector<int> original, masked, segs, targets;
        std::vector<uint8_t> indicator, padmask;
    };
    auto make_seq = [&](size_t len) {
        Seq s;
        s.original.push_back(Vocab::kCls);
        for (size_t i = 1; i + 1 < len; ++i)
            s.original.push_back(Vocab::kNumReserved +
                                 rng.uniform_int(cfg.vocab_size - Vocab::kNumReserved));
        s.original.push_back(Vocab::kSep);
        s.masked = s.original;
        s.segs.assign(len, 0);
        s.targets.assign(len, -1);
        s.indicator.assign(len, 0);
        s.padmask.assign(len, 1);
        for (size_t i = 1; i + 1 < len; i += 3) {
            s.indicator[i] = 1;
            s.targets[i] = s.original[i];
            s.masked[i] = Vocab::kMask;
        }
        return s;
    };
    auto pad_to = [&](Seq s, size_t n) {
        s.original.resize(n, Vocab::kPad);
        s.masked.resize(n, Vocab::kPad);
        s.segs.resize(n, 0);
        s.targets.resize(n, -1);
        s.indicator.resize(n, 0);
        s.padmask.resize(n, 0);
        return s;
    };

    struct Metrics {
        double mlm = 0, nsp = 0, tacl = 0;
        std::vector<double> selfsim;
        Tensor<double> pooled;
    };
    auto evaluate = [&](const Seq& s) {
        Graph<double> g(false);
        auto acts = encoder_forward<double>(g, params, cfg, s.masked, s.segs, s.padmask,
                                            Mode::infer, nullptr);
        auto teacher_acts = encoder_forward<double>(g, teacher, cfg, s.original, s.segs,
                                                    s.padmask, Mode::infer, nullptr);
        Metrics m;
        m.mlm = mlm_loss(g, mlm_logits(g, acts, params, cfg), s.targets, s.indicator).value();
        m.nsp = nsp_loss(g, nsp_logits(g, acts, params), true).value();
        TaclOptions opt;
        opt.tau = 0.01;
        m.tacl = tacl_loss(g, acts.hidden.back(), teacher_acts.hidden.back(), s.indicator,
                           s.padmask, opt)
                     .value();
        for (const auto& h : acts.hidden) {
            std::vector<size_t> keep;
            for (size_t i = 0; i < s.masked.size(); ++i)
                if (s.padmask[i] && !Vocab::is_special(s.masked[i])) keep.push_back(i);
            m.selfsim.push_back(self_similarity(detail::gather_rows_double(h, keep)));
        }
        m.pooled = acts.pooled;
        return m;
    };

    double max_diff = 0.0;
    std::vector<Tensor<double>> pooled_plain, pooled_padded;
    for (size_t len : {8, 11}) {
        Seq plain = make_seq(len);
        Seq padded = pad_to(plain, 14);
        auto a = evaluate(plain);
        auto b = evaluate(padded);
        max_diff = std::max({max_diff, std::abs(a.mlm - b.mlm), std::abs(a.nsp - b.nsp),
                             std::abs(a.tacl - b.tacl)});
        for (size_t l = 0; l < a.selfsim.size(); ++l)
            max_diff = std::max(max_diff, std::abs(a.selfsim[l] - b.selfsim[l]));
        pooled_plain.push_back(a.pooled);
        pooled_padded.push_back(b.pooled);
    }
    // batch-level sentence contrastive term over the pooled states
    {
        Graph<double> g(false);
        double plain =
            sent_cl_loss(g, concat_rows(g, pooled_plain), concat_rows(g, pooled_plain), 0.1)
                .value();
        double padded =
            sent_cl_loss(g, concat_rows(g, pooled_padded), concat_rows(g, pooled_padded), 0.1)
                .value();
        max_diff = std::max(max_diff, std::abs(plain - padded));
    }
    r.pass = max_diff <= 1e-6;
    r.detail = "max |padded - unpadded| = " + fmt(max_diff);
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

    std::filesystem::remove_all(work_dir());
    std::filesystem::create_directories(work_dir());

    using Runner = CriterionResult (*)();
    const Runner criteria[] = {
        criterion_gradients,   criterion_tacl_oracle,    criterion_closed_forms,
        criterion_masking,     criterion_frozen_teacher, criterion_selfsim_oracle,
        criterion_directional, criterion_determinism,    criterion_padding,
    };

    bool all_pass = true;
    for (size_t i = 0; i < std::size(criteria); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        auto t0 = Clock::now();
        CriterionResult result;
        try {
            result = criteria[i]();
        } catch (const std::exception& e) {
            result.id = static_cast<int>(i + 1);
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        result.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        all_pass = all_pass && result.pass;
        std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", result.pass ? "PASS" : "FAIL",
                    result.id, result.name.c_str(), result.detail.c_str(), result.seconds);
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
