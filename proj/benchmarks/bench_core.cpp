#include <benchmark/benchmark.h>

#include "tacl/losses.hpp"
#include "tacl/model.hpp"

namespace {

using tacl::Graph;
using tacl::Rng;
using tacl::Tensor;

template <typename T>
Tensor<T> rand_tensor(Rng& rng, std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
    return Tensor<T>::from_data(std::move(shape), std::move(v));
}

void BM_matmul_f32(benchmark::State& state) {
    size_t n = static_cast<size_t>(state.range(0));
    Rng rng(1);
    auto a = rand_tensor<float>(rng, {n, n});
    auto b = rand_tensor<float>(rng, {n, n});
    for (auto _ : state) {
        Graph<float> g(false);
        auto c = tacl::matmul(g, a, b);
        benchmark::DoNotOptimize(c.ptr());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(2 * n * n * n));
}
BENCHMARK(BM_matmul_f32)->Arg(64)->Arg(128)->Arg(256);

void BM_softmax_rows(benchmark::State& state) {
    Rng rng(2);
    auto a = rand_tensor<float>(rng, {64, 2000});
    for (auto _ : state) {
        Graph<float> g(false);
        auto out = tacl::softmax(g, a, 1);
        benchmark::DoNotOptimize(out.ptr());
    }
}
BENCHMARK(BM_softmax_rows);

void BM_layer_norm(benchmark::State& state) {
    Rng rng(3);
    auto x = rand_tensor<float>(rng, {128, 64});
    auto gain = rand_tensor<float>(rng, {64});
    auto bias = rand_tensor<float>(rng, {64});
    for (auto _ : state) {
        Graph<float> g(false);
        auto out = tacl::layer_norm(g, x, gain, bias, 1e-12f);
        benchmark::DoNotOptimize(out.ptr());
    }
}
BENCHMARK(BM_layer_norm);

tacl::ModelConfig bench_config() {
    tacl::ModelConfig cfg;
    cfg.vocab_size = 2000;
    cfg.d_model = 64;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 256;
    cfg.max_len = 64;
    cfg.dropout_p = 0.1;
    return cfg;
}

void BM_encoder_forward(benchmark::State& state) {
    auto cfg = bench_config();
    auto params = tacl::init_params<float>(cfg, 13);
    params.set_requires_grad(false);
    size_t n = 48;
    std::vector<int> ids(n, 7), segs(n, 0);
    ids[0] = tacl::Vocab::kCls;
    ids[n - 1] = tacl::Vocab::kSep;
    std::vector<uint8_t> padmask(n, 1);
    for (auto _ : state) {
        Graph<float> g(false);
        auto acts = tacl::encoder_forward<float>(g, params, cfg, ids, segs, padmask,
                                                 tacl::Mode::infer, nullptr);
        benchmark::DoNotOptimize(acts.hidden.back().ptr());
    }
}
BENCHMARK(BM_encoder_forward);

void BM_train_step_fwd_bwd(benchmark::State& state) {
    auto cfg = bench_config();
    auto params = tacl::init_params<float>(cfg, 13);
    size_t n = 48;
    std::vector<int> ids(n, 7), segs(n, 0), targets(n, -1);
    ids[0] = tacl::Vocab::kCls;
    ids[n - 1] = tacl::Vocab::kSep;
    std::vector<uint8_t> padmask(n, 1), indicator(n, 0);
    for (size_t i = 2; i < n; i += 7) {
        indicator[i] = 1;
        targets[i] = 7;
    }
    for (auto _ : state) {
        Graph<float> g;
        Rng drop(42);
        auto acts = tacl::encoder_forward<float>(g, params, cfg, ids, segs, padmask,
                                                 tacl::Mode::train, &drop);
        auto loss = tacl::mlm_loss(g, tacl::mlm_logits(g, acts, params, cfg), targets, indicator);
        g.backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
}
BENCHMARK(BM_train_step_fwd_bwd);

void BM_tacl_loss(benchmark::State& state) {
    Rng rng(4);
    size_t n = 48, d = 64;
    auto student = rand_tensor<float>(rng, {n, d});
    auto teacher = rand_tensor<float>(rng, {n, d});
    student.set_requires_grad(true);
    std::vector<uint8_t> indicator(n, 0), padmask(n, 1);
    for (size_t i = 0; i < n; i += 6) indicator[i] = 1;
    tacl::TaclOptions opt;
    opt.tau = 0.01;
    for (auto _ : state) {
        Graph<float> g;
        auto loss = tacl::tacl_loss(g, student, teacher, indicator, padmask, opt);
        g.backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
}
BENCHMARK(BM_tacl_loss);

}  // namespace

BENCHMARK_MAIN();
