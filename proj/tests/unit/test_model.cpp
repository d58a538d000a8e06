#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tacl/gradcheck.hpp"
#include "tacl/losses.hpp"
#include "tacl/model.hpp"

using namespace tacl;

namespace {

ModelConfig tiny_config(double dropout = 0.0) {
    ModelConfig cfg;
    cfg.vocab_size = 32;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_len = 16;
    cfg.dropout_p = dropout;
    return cfg;
}

struct Inputs {
    std::vector<int> ids, segs;
    std::vector<uint8_t> padmask;
};

Inputs nsp_like_inputs(size_t n_pad = 0) {
    Inputs in;
    in.ids = {Vocab::kCls, 7, 9, 12, Vocab::kSep, 20, 6, Vocab::kSep};
    in.segs = {0, 0, 0, 0, 0, 1, 1, 1};
    in.padmask.assign(in.ids.size(), 1);
    for (size_t i = 0; i < n_pad; ++i) {
        in.ids.push_back(Vocab::kPad);
        in.segs.push_back(0);
        in.padmask.push_back(0);
    }
    return in;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("init: deterministic per seed, bit-identical parameter files") {
    auto cfg = tiny_config();
    auto dir = std::filesystem::temp_directory_path() / "tacl_model_test";
    std::filesystem::create_directories(dir);
    CheckpointMeta meta;
    meta.config = cfg;
    for (int run = 0; run < 2; ++run)
        save_checkpoint((dir / ("p" + std::to_string(run))).string(),
                        init_params<float>(cfg, 13), meta);
    CHECK(file_bytes((dir / "p0.tensors").string()) == file_bytes((dir / "p1.tensors").string()));

    auto other = init_params<float>(cfg, 14);
    save_checkpoint((dir / "p2").string(), other, meta);
    CHECK(file_bytes((dir / "p0.tensors").string()) != file_bytes((dir / "p2.tensors").string()));
}

TEST_CASE("init: weight std 0.02, truncation, gains exactly 1, biases 0") {
    ModelConfig cfg = tiny_config();
    cfg.vocab_size = 4000;  // big table for a tight moment estimate
    auto params = init_params<double>(cfg, 13);

    const auto& tok = params.at("embed.token");
    double mean = 0.0;
    for (double v : tok.data()) mean += v;
    mean /= double(tok.numel());
    double var = 0.0, maxabs = 0.0;
    for (double v : tok.data()) {
        var += (v - mean) * (v - mean);
        maxabs = std::max(maxabs, std::abs(v));
    }
    double std_hat = std::sqrt(var / double(tok.numel()));
    CHECK(std::abs(std_hat - 0.02) < 0.001);
    CHECK(maxabs <= 2.0 * 0.02 / 0.8796 + 1e-12);  // parent +-2 sigma truncation

    for (double v : params.at("embed.ln.gain").data()) CHECK(v == 1.0);
    for (double v : params.at("layer.01.ffn.ln.gain").data()) CHECK(v == 1.0);
    for (double v : params.at("mlm.transform.b").data()) CHECK(v == 0.0);
    for (double v : params.at("nsp.b").data()) CHECK(v == 0.0);
}

TEST_CASE("forward: padding invariance of non-pad activations") {
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 5);
    params.set_requires_grad(false);
    auto base = nsp_like_inputs();
    auto padded = nsp_like_inputs(4);

    Graph<double> g(false);
    auto a = encoder_forward<double>(g, params, cfg, base.ids, base.segs, base.padmask,
                                     Mode::infer, nullptr);
    auto b = encoder_forward<double>(g, params, cfg, padded.ids, padded.segs, padded.padmask,
                                     Mode::infer, nullptr);
    REQUIRE(a.hidden.size() == size_t(cfg.n_layers) + 1);
    for (size_t l = 0; l < a.hidden.size(); ++l)
        for (size_t i = 0; i < base.ids.size(); ++i)
            for (size_t j = 0; j < size_t(cfg.d_model); ++j)
                CHECK(std::abs(a.hidden[l].at(i, j) - b.hidden[l].at(i, j)) < 1e-6);
    for (size_t j = 0; j < size_t(cfg.d_model); ++j)
        CHECK(std::abs(a.pooled.at(0, j) - b.pooled.at(0, j)) < 1e-6);
}

TEST_CASE("forward: infer mode twice gives bit-identical activations") {
    auto cfg = tiny_config(0.2);  // dropout configured but inactive in infer
    auto params = init_params<float>(cfg, 3);
    params.set_requires_grad(false);
    auto in = nsp_like_inputs();
    Graph<float> g(false);
    auto a = encoder_forward<float>(g, params, cfg, in.ids, in.segs, in.padmask, Mode::infer,
                                    nullptr);
    auto b = encoder_forward<float>(g, params, cfg, in.ids, in.segs, in.padmask, Mode::infer,
                                    nullptr);
    for (size_t l = 0; l < a.hidden.size(); ++l) {
        auto da = a.hidden[l].data();
        auto db = b.hidden[l].data();
        CHECK(std::equal(da.begin(), da.end(), db.begin()));
    }
}

TEST_CASE("forward: all activations finite on random inputs") {
    auto cfg = tiny_config(0.1);
    auto params = init_params<float>(cfg, 11);
    Rng rng(4);
    for (int it = 0; it < 10; ++it) {
        size_t n = 3 + size_t(rng.uniform_int(10));
        std::vector<int> ids(n), segs(n, 0);
        std::vector<uint8_t> mask(n, 1);
        ids[0] = Vocab::kCls;
        for (size_t i = 1; i + 1 < n; ++i) ids[i] = 5 + rng.uniform_int(cfg.vocab_size - 5);
        ids[n - 1] = Vocab::kSep;
        Graph<float> g;
        Rng drop(100 + uint64_t(it));
        auto acts = encoder_forward<float>(g, params, cfg, ids, segs, mask, Mode::train, &drop);
        for (auto& h : acts.hidden) CHECK_NOTHROW(h.check_finite("activations"));
    }
}

TEST_CASE("forward: out-of-range ids rejected") {
    auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 1);
    std::vector<int> ids = {Vocab::kCls, cfg.vocab_size, Vocab::kSep};
    std::vector<int> segs = {0, 0, 0};
    std::vector<uint8_t> mask = {1, 1, 1};
    Graph<float> g(false);
    CHECK_THROWS_AS(
        encoder_forward<float>(g, params, cfg, ids, segs, mask, Mode::infer, nullptr),
        ValueError);
}

TEST_CASE("position-equivariance: swapping tokens with their position ids") {
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 23);
    params.set_requires_grad(false);
    auto in = nsp_like_inputs();
    size_t n = in.ids.size();
    std::vector<int> pos(n);
    for (size_t i = 0; i < n; ++i) pos[i] = int(i);

    // swap two non-special positions together with their position ids
    size_t p = 1, q = 3;
    auto ids2 = in.ids, segs2 = in.segs, pos2 = pos;
    std::swap(ids2[p], ids2[q]);
    std::swap(segs2[p], segs2[q]);
    std::swap(pos2[p], pos2[q]);

    Graph<double> g(false);
    auto a = encoder_forward<double>(g, params, cfg, in.ids, in.segs, in.padmask, Mode::infer,
                                     nullptr, pos);
    auto b = encoder_forward<double>(g, params, cfg, ids2, segs2, in.padmask, Mode::infer,
                                     nullptr, pos2);
    const auto& ha = a.hidden.back();
    const auto& hb = b.hidden.back();
    for (size_t i = 0; i < n; ++i) {
        size_t i_b = i == p ? q : i == q ? p : i;
        for (size_t j = 0; j < size_t(cfg.d_model); ++j)
            CHECK(std::abs(ha.at(i, j) - hb.at(i_b, j)) < 1e-9);
    }
}

TEST_CASE("heads: logits shapes and the zeroed-hidden-state identity") {
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    params.set_requires_grad(false);
    auto in = nsp_like_inputs();
    Graph<double> g(false);
    auto acts = encoder_forward<double>(g, params, cfg, in.ids, in.segs, in.padmask, Mode::infer,
                                        nullptr);
    auto ml = mlm_logits(g, acts, params, cfg);
    CHECK(ml.shape() == std::vector<size_t>{in.ids.size(), size_t(cfg.vocab_size)});
    auto nl = nsp_logits(g, acts, params);
    CHECK(nl.shape() == std::vector<size_t>{1, 2});

    // zeroed final hidden state: transform gives 0 (bias 0), gelu(0)=0, LN of
    // the zero vector is 0 (gain*0+0), so logits equal the output bias vector
    EncoderActivations<double> zeroed = acts;
    zeroed.hidden.back() = Tensor<double>::zeros({in.ids.size(), size_t(cfg.d_model)});
    auto mlz = mlm_logits(g, zeroed, params, cfg);
    const auto& bias = params.at("mlm.output_bias");
    for (size_t i = 0; i < in.ids.size(); ++i)
        for (size_t k = 0; k < size_t(cfg.vocab_size); ++k)
            CHECK(mlz.at(i, k) == doctest::Approx(bias.at(k)).epsilon(1e-12));
}

TEST_CASE("gradient check through both heads on a tiny model") {
    ModelConfig cfg;
    cfg.vocab_size = 12;
    cfg.d_model = 6;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.max_len = 8;
    cfg.dropout_p = 0.0;
    auto params = init_params<double>(cfg, 31);
    std::vector<int> ids = {Vocab::kCls, 6, 8, Vocab::kSep};
    std::vector<int> segs = {0, 0, 0, 0};
    std::vector<uint8_t> mask = {1, 1, 1, 1};
    std::vector<int> targets = {-1, 7, 9, -1};
    std::vector<uint8_t> indicator = {0, 1, 1, 0};

    std::vector<Tensor<double>> wrt;
    for (auto& [name, t] : params.tensors) wrt.push_back(t);
    auto report = grad_check_fn<double>(
        [&](Graph<double>& g) {
            auto acts =
                encoder_forward<double>(g, params, cfg, ids, segs, mask, Mode::infer, nullptr);
            auto l1 = mlm_loss(g, mlm_logits(g, acts, params, cfg), targets, indicator);
            auto l2 = nsp_loss(g, nsp_logits(g, acts, params), false);
            return add(g, l1, l2);
        },
        wrt, 1e-5, 1e-4);
    INFO("max_rel_err " << report.max_rel_err);
    CHECK(report.pass);
}

TEST_CASE("checkpoint round trip preserves parameters and meta") {
    auto cfg = tiny_config();
    auto params = init_params<float>(cfg, 77);
    auto dir = std::filesystem::temp_directory_path() / "tacl_model_test";
    std::filesystem::create_directories(dir);
    auto prefix = (dir / "ckpt_roundtrip").string();
    CheckpointMeta meta;
    meta.config = cfg;
    meta.step = 42;
    meta.recipe = "tacl";
    save_checkpoint(prefix, params, meta);

    auto [loaded, meta2] = load_checkpoint<float>(prefix);
    CHECK(meta2.step == 42);
    CHECK(meta2.recipe == "tacl");
    CHECK(meta2.config == cfg);
    for (const auto& [name, t] : params.tensors) {
        auto l = loaded.at(name).data();
        CHECK(std::equal(t.data().begin(), t.data().end(), l.begin()));
    }
}
