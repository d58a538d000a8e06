#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "tacl/corpus.hpp"
#include "tacl/losses.hpp"
#include "tacl/masking.hpp"
#include "tacl/model.hpp"
#include "tacl/optimizer.hpp"

namespace tacl {

struct TrainConfig {
    int64_t steps = 100;
    int batch_size = 8;
    double lr_peak = 1e-4;
    double warmup_ratio = 0.10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip_norm = 1.0;
    uint64_t seed = 13;
    int64_t checkpoint_every = 0;  // 0: final checkpoint only
    std::string recipe;
    int max_len = 0;  // 0: inherit the model's max_len
    // NSP pairs and masks are re-drawn every step; false cycles a fixed,
    // pre-drawn pool instead.
    bool dynamic_masking = true;
    int static_pool_size = 512;

    void validate() const {
        if (steps <= 0) throw ConfigError("TrainConfig: steps must be positive");
        if (batch_size <= 0) throw ConfigError("TrainConfig: batch_size must be positive");
        if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
            throw ConfigError("TrainConfig: warmup_ratio must be in [0,1)");
        if (lr_peak <= 0.0) throw ConfigError("TrainConfig: lr_peak must be positive");
        if (grad_clip_norm <= 0.0)
            throw ConfigError("TrainConfig: grad_clip_norm must be positive");
        if (max_len != 0 && max_len < 8)
            throw ConfigError("TrainConfig: max_len must be 0 (inherit) or at least 8");
        if (!dynamic_masking && static_pool_size <= 0)
            throw ConfigError("TrainConfig: static_pool_size must be positive");
    }

    AdamConfig adam() const { return {adam_beta1, adam_beta2, adam_eps, weight_decay}; }
};

// Objective combinations, named after the ablation table rows.
struct Recipe {
    std::string name;
    bool mlm = false, nsp = false, tacl = false, sent_cl = false;
    bool needs_teacher() const { return tacl; }
};

const std::vector<Recipe>& known_recipes();
Recipe recipe_by_name(const std::string& name);  // ConfigError listing valid names

// Applies a recipe's term selection onto a LossConfig.
inline LossConfig apply_recipe(LossConfig cfg, const Recipe& r) {
    cfg.mlm = r.mlm;
    cfg.nsp = r.nsp;
    cfg.tacl = r.tacl;
    cfg.sent_cl = r.sent_cl;
    return cfg;
}

struct TrainResult {
    int64_t steps_run = 0;
    std::string final_checkpoint;  // prefix
    LossBreakdown last;
};

// Continual pre-training loop: frozen teacher (when the recipe uses one),
// trainable student, AdamW with linear warmup/decay, periodic checkpoints,
// JSONL metrics. Deterministic given (config, seed): all randomness is
// re-derived per (seed, stream, step, example), so resuming from a checkpoint
// reproduces an uninterrupted run exactly.
template <typename T>
class Trainer {
public:
    Trainer(ModelConfig mcfg, ModelParams<T> student, std::optional<ModelParams<T>> teacher,
            EncodedCorpus corpus, TrainConfig tcfg, LossConfig lcfg, std::string out_dir)
        : mcfg_(mcfg),
          student_(std::move(student)),
          teacher_(std::move(teacher)),
          corpus_(std::move(corpus)),
          tcfg_(tcfg),
          lcfg_(lcfg),
          out_dir_(std::move(out_dir)),
          opt_state_(init_adam_state(student_)) {
        mcfg_.validate();
        tcfg_.validate();
        lcfg_.validate();
        if (lcfg_.tacl && !teacher_)
            throw ConfigError("Trainer: recipe requires a teacher model");
        if (lcfg_.sent_cl && tcfg_.batch_size < 2)
            throw ConfigError("Trainer: sentence-level contrastive term needs batch_size >= 2");
        if (tcfg_.max_len == 0) tcfg_.max_len = mcfg_.max_len;
        if (tcfg_.max_len > mcfg_.max_len)
            throw ConfigError("Trainer: max_len exceeds the model's position table");
        if (corpus_.docs.size() < 2)
            throw ValueError("Trainer: corpus must contain at least two documents");
        student_.set_requires_grad(true);
        if (teacher_) teacher_->set_requires_grad(false);  // frozen
        std::filesystem::create_directories(out_dir_);
        if (!tcfg_.dynamic_masking) build_static_pool();
    }

    const ModelParams<T>& student() const { return student_; }
    const ModelParams<T>& teacher() const {
        if (!teacher_) throw ValueError("Trainer: no teacher in this recipe");
        return *teacher_;
    }
    int64_t step() const { return opt_state_.step; }

    // Loads params + optimizer state + step from a training checkpoint
    // written by this class, to continue a partial run.
    void resume_from(const std::string& prefix) {
        auto [params, meta] = load_checkpoint<T>(prefix);
        if (!(meta.config == mcfg_))
            throw ConfigError("resume: checkpoint config differs from trainer config");
        student_ = std::move(params);
        student_.set_requires_grad(true);
        auto state_tensors = load_named_tensors(prefix + ".state.tensors");
        opt_state_ = init_adam_state(student_);
        for (const auto& nt : state_tensors) {
            if (nt.name.rfind("adam_m/", 0) == 0)
                copy_into(opt_state_.m.at(nt.name.substr(7)), nt);
            else if (nt.name.rfind("adam_v/", 0) == 0)
                copy_into(opt_state_.v.at(nt.name.substr(7)), nt);
            else
                throw IoError("resume: unexpected state tensor '" + nt.name + "'");
        }
        opt_state_.step = meta.step;
        resumed_ = true;
    }

    TrainResult train() {
        std::ofstream metrics(metrics_path(),
                              resumed_ ? std::ios::app : std::ios::trunc);
        if (!metrics) throw IoError("cannot open metrics log: " + metrics_path());
        if (teacher_) write_checkpoint(out_dir_ + "/teacher", *teacher_, std::nullopt);

        TrainResult result;
        const int64_t start_step = opt_state_.step;
        for (int64_t s = start_step + 1; s <= tcfg_.steps; ++s) {
            auto t0 = std::chrono::steady_clock::now();
            double lr = lr_at(s, tcfg_.steps, tcfg_.lr_peak, tcfg_.warmup_ratio);
            LossBreakdown bd;
            try {
                bd = run_step(s, lr);
            } catch (const NumericError&) {
                // Leave a usable checkpoint of the last completed step behind.
                write_checkpoint(out_dir_ + "/ckpt_abort_last_good", student_, opt_state_);
                throw;
            }
            double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_metrics_line(metrics, s, bd, lr, seconds);
            if (tcfg_.checkpoint_every > 0 && s % tcfg_.checkpoint_every == 0)
                write_checkpoint(out_dir_ + "/ckpt_step" + std::to_string(s), student_,
                                 opt_state_);
            result.last = bd;
        }
        result.steps_run = tcfg_.steps - start_step;
        result.final_checkpoint = out_dir_ + "/ckpt_final";
        write_checkpoint(result.final_checkpoint, student_, opt_state_);
        return result;
    }

    std::string metrics_path() const { return out_dir_ + "/metrics.jsonl"; }

private:
    struct DrawnBatch {
        PaddedBatch view1;
        std::optional<PaddedBatch> view2;  // second stochastic view for sent_cl
    };

    static void copy_into(Tensor<T>& dst, const NamedTensor& src) {
        if (dst.shape() != src.shape)
            throw IoError("resume: state tensor shape mismatch for '" + src.name + "'");
        for (size_t i = 0; i < src.values.size(); ++i)
            dst.at(i) = static_cast<T>(src.values[i]);
    }

    std::vector<NspSample> draw_pairs(Rng& rng) {
        std::vector<NspSample> pairs;
        pairs.reserve(tcfg_.batch_size);
        for (int b = 0; b < tcfg_.batch_size; ++b)
            pairs.push_back(make_nsp_pair(corpus_, rng, tcfg_.max_len));
        return pairs;
    }

    DrawnBatch draw_batch(int64_t step) {
        if (!tcfg_.dynamic_masking) return pool_batch(step);
        Rng data_rng = Rng::derive(tcfg_.seed, "data", static_cast<uint64_t>(step));
        auto pairs = draw_pairs(data_rng);
        DrawnBatch batch;
        batch.view1 = mask_view(pairs, "mask", step);
        if (lcfg_.sent_cl) batch.view2 = mask_view(pairs, "mask2", step);
        return batch;
    }

    PaddedBatch mask_view(const std::vector<NspSample>& pairs, const char* label, int64_t step) {
        std::vector<MaskedExample> examples;
        examples.reserve(pairs.size());
        for (size_t b = 0; b < pairs.size(); ++b) {
            Rng rng = Rng::derive(tcfg_.seed, label,
                                  static_cast<uint64_t>(step) * tcfg_.batch_size + b);
            examples.push_back(
                apply_masking(pairs[b].seq, pairs[b].is_next, rng, rates_, mcfg_.vocab_size));
        }
        return pad_batch(examples, tcfg_.max_len);
    }

    void build_static_pool() {
        Rng data_rng = Rng::derive(tcfg_.seed, "pool-data");
        pool_.reserve(tcfg_.static_pool_size);
        for (int i = 0; i < tcfg_.static_pool_size; ++i) {
            auto pair = make_nsp_pair(corpus_, data_rng, tcfg_.max_len);
            Rng mask_rng = Rng::derive(tcfg_.seed, "pool-mask", static_cast<uint64_t>(i));
            PoolEntry entry;
            entry.view1 =
                apply_masking(pair.seq, pair.is_next, mask_rng, rates_, mcfg_.vocab_size);
            if (lcfg_.sent_cl) {
                Rng mask2 = Rng::derive(tcfg_.seed, "pool-mask2", static_cast<uint64_t>(i));
                entry.view2 =
                    apply_masking(pair.seq, pair.is_next, mask2, rates_, mcfg_.vocab_size);
            }
            pool_.push_back(std::move(entry));
        }
    }

    DrawnBatch pool_batch(int64_t step) {
        std::vector<MaskedExample> v1, v2;
        for (int b = 0; b < tcfg_.batch_size; ++b) {
            size_t idx = (static_cast<size_t>(step - 1) * tcfg_.batch_size + b) % pool_.size();
            v1.push_back(pool_[idx].view1);
            if (lcfg_.sent_cl) v2.push_back(*pool_[idx].view2);
        }
        DrawnBatch batch;
        batch.view1 = pad_batch(v1, tcfg_.max_len);
        if (lcfg_.sent_cl) batch.view2 = pad_batch(v2, tcfg_.max_len);
        return batch;
    }

    LossBreakdown run_step(int64_t step, double lr) {
        DrawnBatch batch = draw_batch(step);
        const auto& examples = batch.view1.examples;
        size_t bsz = examples.size();

        Graph<T> g;
        std::vector<Tensor<T>> mlm_sums, nsp_sums, tacl_sums;
        std::vector<Tensor<T>> pooled1, pooled2;
        double mlm_weight = 0.0, tacl_weight = 0.0;

        for (size_t b = 0; b < bsz; ++b) {
            const auto& ex = examples[b];
            const auto& padmask = batch.view1.padding_mask[b];
            Rng drop1 = Rng::derive(tcfg_.seed, "dropout", static_cast<uint64_t>(step), b);
            auto acts = encoder_forward<T>(g, student_, mcfg_, ex.masked_ids, ex.segment_ids,
                                           padmask, Mode::train, &drop1);

            if (lcfg_.mlm) {
                auto logits = mlm_logits(g, acts, student_, mcfg_);
                auto wl = mlm_loss_sum(g, logits, ex.mlm_targets, ex.mask_indicator);
                mlm_sums.push_back(wl.sum);
                mlm_weight += wl.weight;
            }
            if (lcfg_.nsp)
                nsp_sums.push_back(nsp_loss(g, nsp_logits(g, acts, student_), ex.is_next));
            if (lcfg_.tacl) {
                std::vector<uint8_t> indicator =
                    lcfg_.tacl_literal_mask_only ? ex.literal_mask_indicator() : ex.mask_indicator;
                bool any_selected = false;
                for (size_t i = 0; i < indicator.size(); ++i)
                    any_selected = any_selected || (indicator[i] && padmask[i]);
                // Under the literal-[MASK]-only switch an example may carry no
                // qualifying position; it simply contributes nothing.
                if (any_selected) {
                    auto teacher_acts =
                        encoder_forward<T>(g, *teacher_, mcfg_, ex.original_ids, ex.segment_ids,
                                           padmask, Mode::infer, nullptr);
                    std::vector<uint8_t> specials(ex.original_ids.size(), 0);
                    for (size_t i = 0; i < ex.original_ids.size(); ++i)
                        specials[i] = Vocab::is_special(ex.original_ids[i]) &&
                                              ex.original_ids[i] != Vocab::kPad
                                          ? 1
                                          : 0;
                    auto wl =
                        tacl_loss_sum(g, acts.hidden.back(), teacher_acts.hidden.back(),
                                      indicator, padmask, TaclOptions::from(lcfg_), specials);
                    tacl_sums.push_back(wl.sum);
                    tacl_weight += wl.weight;
                }
            }
            if (lcfg_.sent_cl) {
                const auto& ex2 = batch.view2->examples[b];
                Rng drop2 = Rng::derive(tcfg_.seed, "dropout2", static_cast<uint64_t>(step), b);
                auto acts2 =
                    encoder_forward<T>(g, student_, mcfg_, ex2.masked_ids, ex2.segment_ids,
                                       batch.view2->padding_mask[b], Mode::train, &drop2);
                pooled1.push_back(acts.pooled);
                pooled2.push_back(acts2.pooled);
            }
        }

        auto add_n = [&](std::vector<Tensor<T>>& parts) {
            Tensor<T> acc = parts[0];
            for (size_t i = 1; i < parts.size(); ++i) acc = add(g, acc, parts[i]);
            return acc;
        };

        LossTerms<T> terms;
        if (lcfg_.mlm)
            terms.mlm = scale(g, add_n(mlm_sums), static_cast<T>(1.0 / mlm_weight));
        if (lcfg_.nsp)
            terms.nsp = scale(g, add_n(nsp_sums), static_cast<T>(1.0 / double(bsz)));
        if (lcfg_.tacl) {
            if (tacl_sums.empty())
                throw ValueError(
                    "train: no batch example carries a contrastive position (literal-[MASK]-only "
                    "with an all-keep/random draw)");
            double denom = lcfg_.tacl_token_mean ? tacl_weight : double(bsz);
            terms.tacl = scale(g, add_n(tacl_sums), static_cast<T>(1.0 / denom));
        }
        if (lcfg_.sent_cl)
            terms.sent_cl =
                sent_cl_loss(g, concat_rows(g, pooled1), concat_rows(g, pooled2), lcfg_.tau);

        auto [total, bd] = total_loss(g, terms, lcfg_);
        GradMap touched = g.backward(total);
        clip_global_norm(student_, touched, tcfg_.grad_clip_norm);
        adamw_step(student_, touched, opt_state_, lr, tcfg_.adam());
        return bd;
    }

    void write_metrics_line(std::ofstream& out, int64_t step, const LossBreakdown& bd, double lr,
                            double seconds);

    void write_checkpoint(const std::string& prefix, const ModelParams<T>& params,
                          const std::optional<AdamState<T>>& state) {
        CheckpointMeta meta;
        meta.step = opt_state_.step;
        meta.recipe = tcfg_.recipe;
        meta.config = mcfg_;
        save_checkpoint(prefix, params, meta);
        if (state) {
            std::map<std::string, Tensor<T>> st;
            for (const auto& [name, t] : state->m) st.emplace("adam_m/" + name, t);
            for (const auto& [name, t] : state->v) st.emplace("adam_v/" + name, t);
            save_named_tensors(prefix + ".state.tensors", to_named_tensors(st));
        }
    }

    struct PoolEntry {
        MaskedExample view1;
        std::optional<MaskedExample> view2;
    };

    ModelConfig mcfg_;
    ModelParams<T> student_;
    std::optional<ModelParams<T>> teacher_;
    EncodedCorpus corpus_;
    TrainConfig tcfg_;
    LossConfig lcfg_;
    std::string out_dir_;
    AdamState<T> opt_state_;
    MaskingRates rates_;
    std::vector<PoolEntry> pool_;
    bool resumed_ = false;
};

void append_metrics_line(std::ofstream& out, int64_t step, const LossBreakdown& bd, double lr,
                         double seconds);

template <typename T>
void Trainer<T>::write_metrics_line(std::ofstream& out, int64_t step, const LossBreakdown& bd,
                                    double lr, double seconds) {
    append_metrics_line(out, step, bd, lr, seconds);
}

}  // namespace tacl
