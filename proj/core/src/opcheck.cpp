#include "tacl/opcheck.hpp"

#include <functional>

#include "tacl/losses.hpp"
#include "tacl/model.hpp"

namespace tacl {

namespace {

using TD = Tensor<double>;
using GD = Graph<double>;

TD rand_tensor(Rng& rng, std::vector<size_t> shape, double lo = -1.5, double hi = 1.5) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return TD::from_data(std::move(shape), std::move(v));
}

size_t dim(Rng& rng, size_t lo, size_t hi) {
    return lo + static_cast<size_t>(rng.uniform_int(static_cast<int>(hi - lo + 1)));
}

// Scalar readout with fixed random per-element weights, so output gradients
// are non-uniform.
std::function<TD(GD&, TD)> make_wsum(Rng& rng, const std::vector<size_t>& shape) {
    TD w = rand_tensor(rng, shape, -1.0, 1.0);
    return [w](GD& g, TD x) { return sum_all(g, mul(g, x, w)); };
}

struct Instance {
    std::function<TD(GD&)> build;
    std::vector<TD> wrt;
};

double pick_tau(Rng& rng) {
    constexpr double taus[3] = {1.0, 0.1, 0.01};
    return taus[rng.uniform_int(3)];
}

Instance make_instance(const std::string& op, Rng& rng, uint64_t instance_seed) {
    if (op == "matmul") {
        size_t n = dim(rng, 2, 4), k = dim(rng, 2, 4), m = dim(rng, 2, 4);
        TD a = rand_tensor(rng, {n, k}), b = rand_tensor(rng, {k, m});
        auto w = make_wsum(rng, {n, m});
        return {[=](GD& g) { return w(g, matmul(g, a, b)); }, {a, b}};
    }
    if (op == "transpose") {
        size_t n = dim(rng, 2, 5), m = dim(rng, 2, 5);
        TD a = rand_tensor(rng, {n, m});
        auto w = make_wsum(rng, {m, n});
        return {[=](GD& g) { return w(g, transpose(g, a)); }, {a}};
    }
    if (op == "add") {
        size_t n = dim(rng, 2, 4), m = dim(rng, 2, 4);
        TD a = rand_tensor(rng, {n, m}), b = rand_tensor(rng, {n, m});
        auto w = make_wsum(rng, {n, m});
        return {[=](GD& g) { return w(g, add(g, a, b)); }, {a, b}};
    }
    if (op == "mul") {
        size_t n = dim(rng, 2, 4), m = dim(rng, 2, 4);
        TD a = rand_tensor(rng, {n, m}), b = rand_tensor(rng, {n, m});
        auto w = make_wsum(rng, {n, m});
        return {[=](GD& g) { return w(g, mul(g, a, b)); }, {a, b}};
    }
    if (op == "add_row_broadcast") {
        size_t n = dim(rng, 2, 4), m = dim(rng, 2, 5);
        TD a = rand_tensor(rng, {n, m}), bias = rand_tensor(rng, {m});
        auto w = make_wsum(rng, {n, m});
        return {[=](GD& g) { return w(g, add_row_broadcast(g, a, bias)); }, {a, bias}};
    }
    if (op == "scale") {
        size_t n = dim(rng, 2, 5);
        double c = rng.uniform(-2.0, 2.0);
        TD a = rand_tensor(rng, {n, n});
        auto w = make_wsum(rng, {n, n});
        return {[=](GD& g) { return w(g, scale(g, a, c)); }, {a}};
    }
    if (op == "sum_all") {
        size_t n = dim(rng, 2, 5), m = dim(rng, 2, 5);
        TD a = rand_tensor(rng, {n, m});
        return {[=](GD& g) { return sum_all(g, a); }, {a}};
    }
    if (op == "softmax") {
        size_t n = dim(rng, 2, 5), m = dim(rng, 2, 5);
        int axis = rng.uniform_int(2);
        // include large-magnitude logits as the stability case
        TD a = rand_tensor(rng, {n, m}, -50.0, 50.0);
        auto w = make_wsum(rng, {n, m});
        return {[=](GD& g) { return w(g, softmax(g, a, axis)); }, {a}};
    }
    if (op == "gelu") {
        size_t n = dim(rng, 2, 6);
        TD a = rand_tensor(rng, {n}, -3.0, 3.0);
        auto w = make_wsum(rng, {n});
        return {[=](GD& g) { return w(g, gelu(g, a)); }, {a}};
    }
    if (op == "tanh") {
        size_t n = dim(rng, 2, 6);
        TD a = rand_tensor(rng, {n}, -3.0, 3.0);
        auto w = make_wsum(rng, {n});
        return {[=](GD& g) { return w(g, tanh_act(g, a)); }, {a}};
    }
    if (op == "layer_norm") {
        size_t n = dim(rng, 2, 4), d = dim(rng, 3, 6);
        TD x = rand_tensor(rng, {n, d});
        TD gain = rand_tensor(rng, {d}, 0.5, 1.5);
        TD bias = rand_tensor(rng, {d}, -0.5, 0.5);
        auto w = make_wsum(rng, {n, d});
        return {[=](GD& g) { return w(g, layer_norm(g, x, gain, bias, 1e-12)); },
                {x, gain, bias}};
    }
    if (op == "embedding_lookup") {
        size_t v = dim(rng, 4, 8), d = dim(rng, 2, 5), n = dim(rng, 3, 6);
        TD table = rand_tensor(rng, {v, d});
        std::vector<int> ids(n);
        for (auto& id : ids) id = rng.uniform_int(static_cast<int>(v));  // repeats likely
        auto w = make_wsum(rng, {n, d});
        return {[=](GD& g) { return w(g, embedding_lookup(g, table, ids)); }, {table}};
    }
    if (op == "col_slice") {
        size_t n = dim(rng, 2, 4), m = dim(rng, 3, 6);
        size_t width = dim(rng, 1, m - 1);
        size_t start = dim(rng, 0, m - width);
        TD a = rand_tensor(rng, {n, m});
        auto w = make_wsum(rng, {n, width});
        return {[=](GD& g) { return w(g, col_slice(g, a, start, width)); }, {a}};
    }
    if (op == "concat_cols") {
        size_t n = dim(rng, 2, 4);
        TD a = rand_tensor(rng, {n, dim(rng, 1, 3)});
        TD b = rand_tensor(rng, {n, dim(rng, 1, 3)});
        TD c = rand_tensor(rng, {n, dim(rng, 1, 3)});
        auto w = make_wsum(rng, {n, a.extent(1) + b.extent(1) + c.extent(1)});
        return {[=](GD& g) { return w(g, concat_cols<double>(g, {a, b, c})); }, {a, b, c}};
    }
    if (op == "concat_rows") {
        size_t d = dim(rng, 2, 5);
        TD a = rand_tensor(rng, {d}), b = rand_tensor(rng, {d}), c = rand_tensor(rng, {d});
        auto w = make_wsum(rng, {3, d});
        return {[=](GD& g) { return w(g, concat_rows<double>(g, {a, b, c})); }, {a, b, c}};
    }
    if (op == "dropout") {
        size_t n = dim(rng, 3, 6), m = dim(rng, 3, 6);
        TD a = rand_tensor(rng, {n, m});
        double p = 0.1 + 0.3 * rng.uniform();
        auto w = make_wsum(rng, {n, m});
        // The mask stream is re-derived per evaluation, so finite differences
        // see the same mask as the recorded backward pass.
        return {[=](GD& g) {
                    Rng mask_rng = Rng::derive(instance_seed, "dropout-mask");
                    return w(g, dropout(g, a, p, mask_rng));
                },
                {a}};
    }
    if (op == "row_l2_normalize") {
        size_t n = dim(rng, 2, 4), d = dim(rng, 2, 5);
        TD a = rand_tensor(rng, {n, d}, 0.25, 1.5);
        auto w = make_wsum(rng, {n, d});
        return {[=](GD& g) { return w(g, row_l2_normalize(g, a)); }, {a}};
    }
    if (op == "cosine_sim") {
        size_t d = dim(rng, 2, 8);
        TD u = rand_tensor(rng, {d}, 0.25, 1.5);
        TD v = rand_tensor(rng, {d}, 0.25, 1.5);
        return {[=](GD& g) { return cosine_sim(g, u, v); }, {u, v}};
    }
    if (op == "cross_entropy") {
        size_t n = dim(rng, 2, 5), k = dim(rng, 3, 7);
        TD logits = rand_tensor(rng, {n, k}, -2.0, 2.0);
        std::vector<int> targets(n);
        std::vector<double> weights(n);
        bool any = false;
        for (size_t i = 0; i < n; ++i) {
            targets[i] = rng.uniform_int(static_cast<int>(k));
            weights[i] = rng.bernoulli(0.7) ? rng.uniform(0.5, 2.0) : 0.0;
            any = any || weights[i] > 0.0;
        }
        if (!any) weights[0] = 1.0;
        bool mean = rng.bernoulli(0.5);
        return {[=](GD& g) {
                    return cross_entropy(g, logits, std::span<const int>(targets),
                                         std::span<const double>(weights), mean);
                },
                {logits}};
    }
    if (op == "mlm_loss") {
        size_t n = dim(rng, 3, 5), k = dim(rng, 4, 7);
        TD logits = rand_tensor(rng, {n, k}, -2.0, 2.0);
        std::vector<int> targets(n, -1);
        std::vector<uint8_t> indicator(n, 0);
        size_t sel = dim(rng, 1, n);
        for (size_t i = 0; i < sel; ++i) {
            indicator[i] = 1;
            targets[i] = rng.uniform_int(static_cast<int>(k));
        }
        return {[=](GD& g) {
                    return mlm_loss(g, logits, std::span<const int>(targets),
                                    std::span<const uint8_t>(indicator));
                },
                {logits}};
    }
    if (op == "nsp_loss") {
        TD logits = rand_tensor(rng, {1, 2}, -2.0, 2.0);
        bool is_next = rng.bernoulli(0.5);
        return {[=](GD& g) { return nsp_loss(g, logits, is_next); }, {logits}};
    }
    if (op == "tacl_loss") {
        size_t n = dim(rng, 3, 6), d = dim(rng, 4, 8);
        TD student = rand_tensor(rng, {n, d}, -1.0, 1.0);
        TD teacher = rand_tensor(rng, {n, d}, -1.0, 1.0);
        TaclOptions opt;
        opt.tau = pick_tau(rng);
        std::vector<uint8_t> indicator(n, 0), padmask(n, 1);
        indicator[dim(rng, 0, n - 1)] = 1;
        for (size_t i = 0; i < n; ++i)
            if (rng.bernoulli(0.4)) indicator[i] = 1;
        if (rng.bernoulli(0.4)) {  // padded tail
            padmask[n - 1] = 0;
            indicator[n - 1] = 0;
        }
        bool token_mean = rng.bernoulli(0.5);
        return {[=](GD& g) {
                    return tacl_loss(g, student, teacher, std::span<const uint8_t>(indicator),
                                     std::span<const uint8_t>(padmask), opt, token_mean);
                },
                {student}};
    }
    if (op == "sent_cl_loss") {
        size_t b = dim(rng, 2, 4), d = dim(rng, 3, 6);
        TD v1 = rand_tensor(rng, {b, d}, -1.0, 1.0);
        TD v2 = rand_tensor(rng, {b, d}, -1.0, 1.0);
        double tau = pick_tau(rng) * 10.0;  // 10, 1, 0.1
        return {[=](GD& g) { return sent_cl_loss(g, v1, v2, tau); }, {v1, v2}};
    }
    throw ValueError("gradcheck: unknown op '" + op + "'");
}

}  // namespace

std::vector<std::string> checkable_ops() {
    return {"matmul",           "transpose",     "add",           "mul",
            "add_row_broadcast", "scale",        "sum_all",       "softmax",
            "gelu",             "tanh",          "layer_norm",    "embedding_lookup",
            "col_slice",        "concat_cols",   "concat_rows",   "dropout",
            "row_l2_normalize", "cosine_sim",    "cross_entropy", "mlm_loss",
            "nsp_loss",         "tacl_loss",     "sent_cl_loss"};
}

OpCheckSummary check_op(const std::string& op, int n_instances, uint64_t seed, double eps,
                        double tol) {
    OpCheckSummary summary;
    summary.op = op;
    summary.pass = true;
    for (int i = 0; i < n_instances; ++i) {
        uint64_t instance_seed = splitmix64(seed ^ fnv1a64(op)) + static_cast<uint64_t>(i);
        Rng rng = Rng::derive(instance_seed, "opcheck");
        Instance inst = make_instance(op, rng, instance_seed);
        auto report = grad_check_fn<double>(inst.build, inst.wrt, eps, tol);
        summary.instances += 1;
        summary.coords += report.n_coords;
        summary.max_rel_err = std::max(summary.max_rel_err, report.max_rel_err);
        summary.pass = summary.pass && report.pass;
    }
    return summary;
}

OpCheckSummary check_full_model(int n_instances, uint64_t seed, bool train_mode, double eps,
                                double tol) {
    OpCheckSummary summary;
    summary.op = train_mode ? "full-model(train)" : "full-model(infer)";
    summary.pass = true;

    for (int i = 0; i < n_instances; ++i) {
        uint64_t instance_seed = splitmix64(seed ^ 0x5ca1ab1eULL) + static_cast<uint64_t>(i);
        Rng rng = Rng::derive(instance_seed, "fullmodel");

        ModelConfig cfg;
        cfg.vocab_size = 16;
        cfg.d_model = 8;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_ff = 16;
        cfg.max_len = 12;
        cfg.dropout_p = train_mode ? 0.1 : 0.0;

        auto student = init_params<double>(cfg, instance_seed);
        auto teacher = student.clone();
        teacher.set_requires_grad(false);

        // [CLS] a b [SEP] c d [SEP] + one [PAD] column.
        size_t n = 8;
        std::vector<int> original = {Vocab::kCls, 0, 0, Vocab::kSep, 0, 0, Vocab::kSep,
                                     Vocab::kPad};
        for (size_t p : {1u, 2u, 4u, 5u})
            original[p] = Vocab::kNumReserved + rng.uniform_int(cfg.vocab_size - 5);
        std::vector<int> masked = original;
        std::vector<int> targets(n, -1);
        std::vector<uint8_t> indicator(n, 0);
        for (size_t p : {1u, 5u}) {
            indicator[p] = 1;
            targets[p] = original[p];
            masked[p] = rng.bernoulli(0.8) ? Vocab::kMask : original[p];
        }
        std::vector<int> segs = {0, 0, 0, 0, 1, 1, 1, 0};
        std::vector<uint8_t> padmask = {1, 1, 1, 1, 1, 1, 1, 0};
        double tau = pick_tau(rng);

        auto build = [=](Graph<double>& g) {
            Rng drop = Rng::derive(instance_seed, "drop");
            auto acts = encoder_forward<double>(g, student, cfg, masked, segs, padmask,
                                                train_mode ? Mode::train : Mode::infer, &drop);
            auto mlm = mlm_loss(g, mlm_logits(g, acts, student, cfg),
                                std::span<const int>(targets), std::span<const uint8_t>(indicator));
            auto nsp = nsp_loss(g, nsp_logits(g, acts, student), true);
            Graph<double> tg(false);
            auto teacher_acts = encoder_forward<double>(tg, teacher, cfg, original, segs, padmask,
                                                        Mode::infer, nullptr);
            TaclOptions opt;
            opt.tau = tau;
            auto tl = tacl_loss(g, acts.hidden.back(), teacher_acts.hidden.back(),
                                std::span<const uint8_t>(indicator),
                                std::span<const uint8_t>(padmask), opt);
            return add(g, add(g, mlm, nsp), tl);
        };

        std::vector<Tensor<double>> wrt;
        for (auto& [name, t] : student.tensors) wrt.push_back(t);
        auto report = grad_check_fn<double>(build, wrt, eps, tol);
        summary.instances += 1;
        summary.coords += report.n_coords;
        summary.max_rel_err = std::max(summary.max_rel_err, report.max_rel_err);
        summary.pass = summary.pass && report.pass;
    }
    return summary;
}

}  // namespace tacl
