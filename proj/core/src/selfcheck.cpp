#include "tacl/selfcheck.hpp"

#include <cmath>
#include <sstream>

#include "tacl/analysis.hpp"
#include "tacl/losses.hpp"

namespace tacl::selfcheck {

namespace {

using Rows = std::vector<std::vector<double>>;

Rows rand_rows(Rng& rng, size_t n, size_t d, double lo = -1.0, double hi = 1.0) {
    Rows rows(n, std::vector<double>(d));
    for (auto& r : rows)
        for (auto& x : r) x = rng.uniform(lo, hi);
    return rows;
}

Tensor<double> rows_to_tensor(const Rows& rows) {
    size_t n = rows.size(), d = rows[0].size();
    std::vector<double> flat;
    flat.reserve(n * d);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor<double>::from_data({n, d}, std::move(flat));
}

double eval_tacl(const Rows& student, const Rows& teacher, std::span<const uint8_t> indicator,
                 std::span<const uint8_t> padmask, double tau, bool token_mean) {
    Graph<double> g(false);
    TaclOptions opt;
    opt.tau = tau;
    return tacl_loss(g, rows_to_tensor(student), rows_to_tensor(teacher), indicator, padmask, opt,
                     token_mean)
        .value();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

CheckResult make_result(const std::string& name, bool pass, const std::string& detail) {
    return {name, pass, detail};
}

double pick_tau(Rng& rng) {
    constexpr double taus[3] = {1.0, 0.1, 0.01};
    return taus[rng.uniform_int(3)];
}

}  // namespace

CheckResult tacl_oracle(int n_instances, uint64_t seed, double tol) {
    double max_diff = 0.0;
    double min_term = 1e300;
    for (int i = 0; i < n_instances; ++i) {
        Rng rng = Rng::derive(seed, "tacl-oracle", static_cast<uint64_t>(i));
        size_t n = 2 + static_cast<size_t>(rng.uniform_int(7));   // 2..8
        size_t d = 2 + static_cast<size_t>(rng.uniform_int(15));  // 2..16
        double tau = pick_tau(rng);
        Rows student = rand_rows(rng, n, d);
        Rows teacher = rand_rows(rng, n, d);
        std::vector<uint8_t> indicator(n, 0), padmask(n, 1);
        for (size_t p = 0; p < n; ++p) indicator[p] = rng.bernoulli(0.5) ? 1 : 0;
        if (n >= 3 && rng.bernoulli(0.3)) {
            padmask[n - 1] = 0;
            indicator[n - 1] = 0;
        }
        indicator[0] = 1;  // at least one selected, never on the padded tail
        bool token_mean = rng.bernoulli(0.5);

        double got = eval_tacl(student, teacher, indicator, padmask, tau, token_mean);
        auto ref = oracles::tacl_loss_ref(student, teacher, indicator, padmask, tau, token_mean);
        max_diff = std::max(max_diff, std::abs(got - ref.loss));
        for (double term : ref.per_position_terms) min_term = std::min(min_term, term);
    }
    bool pass = max_diff <= tol && min_term >= 0.0;
    return make_result("tacl vs double-loop oracle (" + std::to_string(n_instances) + " instances)",
                       pass, "max|diff|=" + fmt(max_diff) + ", min per-position term=" +
                                 fmt(min_term));
}

std::vector<CheckResult> closed_form_anchors(double tol) {
    std::vector<CheckResult> results;
    const double log1pe = std::log(1.0 + std::exp(-1.0));

    {  // uniform teacher -> per-selected-token loss log(n_valid)
        Rng rng = Rng::derive(99, "anchor-uniform");
        size_t n = 6, d = 8;
        Rows student = rand_rows(rng, n, d);
        std::vector<double> trow(d);
        for (auto& x : trow) x = rng.uniform(-1.0, 1.0);
        Rows teacher(n, trow);
        std::vector<uint8_t> indicator = {1, 0, 1, 1, 0, 0}, padmask(n, 1);
        padmask[n - 1] = 0;  // n_valid = 5
        double got = eval_tacl(student, teacher, indicator, padmask, 0.01, true);
        double want = std::log(5.0);
        results.push_back(make_result("uniform teacher -> log n_valid",
                                      std::abs(got - want) <= tol,
                                      "got " + fmt(got) + ", want " + fmt(want)));
    }
    {  // orthogonal two-token case at tau=1
        Rows student = {{1, 0, 0, 0}, {0, 0, 1, 0}};
        Rows teacher = {{1, 0, 0, 0}, {0, 1, 0, 0}};
        std::vector<uint8_t> indicator = {1, 0}, padmask = {1, 1};
        double got = eval_tacl(student, teacher, indicator, padmask, 1.0, true);
        results.push_back(make_result("orthogonal pair at tau=1 -> log(1+e^-1)",
                                      std::abs(got - log1pe) <= tol,
                                      "got " + fmt(got) + ", want " + fmt(log1pe)));
    }
    {  // uniform MLM logits -> log K
        size_t n = 4, k = 11;
        Graph<double> g(false);
        auto logits = Tensor<double>::from_data({n, k}, std::vector<double>(n * k, 0.7));
        std::vector<int> targets = {3, 5, 0, 10};
        std::vector<uint8_t> indicator = {1, 1, 0, 1};
        double got = mlm_loss(g, logits, targets, indicator).value();
        double want = std::log(static_cast<double>(k));
        results.push_back(make_result("uniform MLM logits -> log K", std::abs(got - want) <= tol,
                                      "got " + fmt(got) + ", want " + fmt(want)));
    }
    {  // sentence-level: orthonormal matched pairs at tau=1, then identical rows
        Graph<double> g(false);
        Rows v = {{1, 0, 0, 0}, {0, 1, 0, 0}};
        double got = sent_cl_loss(g, rows_to_tensor(v), rows_to_tensor(v), 1.0).value();
        results.push_back(make_result("sent_cl orthonormal pairs at tau=1 -> log(1+e^-1)",
                                      std::abs(got - log1pe) <= tol,
                                      "got " + fmt(got) + ", want " + fmt(log1pe)));
        Graph<double> g2(false);
        Rows same(4, {0.3, -0.2, 0.9});
        double got2 = sent_cl_loss(g2, rows_to_tensor(same), rows_to_tensor(same), 0.5).value();
        double want2 = std::log(4.0);
        results.push_back(make_result("sent_cl identical rows -> log(batch)",
                                      std::abs(got2 - want2) <= tol,
                                      "got " + fmt(got2) + ", want " + fmt(want2)));
    }
    return results;
}

CheckResult mlm_oracle(int n_instances, uint64_t seed, double tol) {
    double max_diff = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        Rng rng = Rng::derive(seed, "mlm-oracle", static_cast<uint64_t>(i));
        size_t n = 2 + static_cast<size_t>(rng.uniform_int(5));
        size_t k = 3 + static_cast<size_t>(rng.uniform_int(8));
        Rows logits = rand_rows(rng, n, k, -3.0, 3.0);
        std::vector<int> targets(n, -1);
        std::vector<uint8_t> indicator(n, 0);
        for (size_t p = 0; p < n; ++p)
            if (rng.bernoulli(0.6)) {
                indicator[p] = 1;
                targets[p] = rng.uniform_int(static_cast<int>(k));
            }
        if (std::none_of(indicator.begin(), indicator.end(), [](uint8_t x) { return x; })) {
            indicator[0] = 1;
            targets[0] = 0;
        }
        Graph<double> g(false);
        double got = mlm_loss(g, rows_to_tensor(logits), targets, indicator).value();
        double ref = oracles::mlm_loss_ref(logits, targets, indicator);
        max_diff = std::max(max_diff, std::abs(got - ref));
    }
    return make_result("mlm vs per-position oracle", max_diff <= tol,
                       "max|diff|=" + fmt(max_diff));
}

CheckResult sent_cl_oracle(int n_instances, uint64_t seed, double tol) {
    double max_diff = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        Rng rng = Rng::derive(seed, "sentcl-oracle", static_cast<uint64_t>(i));
        size_t b = 2 + static_cast<size_t>(rng.uniform_int(3));
        size_t d = 3 + static_cast<size_t>(rng.uniform_int(6));
        double tau = pick_tau(rng);
        Rows v1 = rand_rows(rng, b, d), v2 = rand_rows(rng, b, d);
        Graph<double> g(false);
        double got = sent_cl_loss(g, rows_to_tensor(v1), rows_to_tensor(v2), tau).value();
        double ref = oracles::sent_cl_ref(v1, v2, tau);
        max_diff = std::max(max_diff, std::abs(got - ref));
    }
    return make_result("sent_cl vs double-loop oracle", max_diff <= tol,
                       "max|diff|=" + fmt(max_diff));
}

CheckResult self_similarity_oracle(int n_instances, uint64_t seed, double tol) {
    double max_diff = 0.0;
    bool bounds_ok = true;
    for (int i = 0; i < n_instances; ++i) {
        Rng rng = Rng::derive(seed, "selfsim-oracle", static_cast<uint64_t>(i));
        size_t n = 2 + static_cast<size_t>(rng.uniform_int(7));
        size_t d = 2 + static_cast<size_t>(rng.uniform_int(15));
        Rows rows = rand_rows(rng, n, d);
        double got = self_similarity(rows);
        double ref = oracles::self_similarity_ref(rows);
        max_diff = std::max(max_diff, std::abs(got - ref));
        double lower = -1.0 / static_cast<double>(n - 1);
        bounds_ok = bounds_ok && got >= lower - 1e-12 && got <= 1.0 + 1e-12;
    }
    // anchors: identical rows -> 1, orthonormal rows -> 0
    Rows same(5, {0.4, -0.3, 0.8});
    double s_same = self_similarity(same);
    Rows ortho = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double s_ortho = self_similarity(ortho);
    bool anchors_ok = std::abs(s_same - 1.0) <= tol && std::abs(s_ortho) <= tol;
    return make_result("s(x) vs double-loop oracle + bounds",
                       max_diff <= tol && bounds_ok && anchors_ok,
                       "max|diff|=" + fmt(max_diff) + ", identical=" + fmt(s_same) +
                           ", orthonormal=" + fmt(s_ortho));
}

CheckResult scale_invariance(int n_instances, uint64_t seed, double tol) {
    double max_diff = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        Rng rng = Rng::derive(seed, "scale-inv", static_cast<uint64_t>(i));
        size_t n = 3 + static_cast<size_t>(rng.uniform_int(5));
        size_t d = 4 + static_cast<size_t>(rng.uniform_int(10));
        Rows student = rand_rows(rng, n, d);
        Rows teacher = rand_rows(rng, n, d);
        std::vector<uint8_t> indicator(n, 0), padmask(n, 1);
        indicator[0] = 1;
        for (size_t p = 1; p < n; ++p) indicator[p] = rng.bernoulli(0.5) ? 1 : 0;
        double tau = pick_tau(rng);

        Rows student2 = student, teacher2 = teacher;
        for (size_t r = 0; r < n; ++r) {
            double cs = rng.uniform(0.1, 10.0), ct = rng.uniform(0.1, 10.0);
            for (size_t c = 0; c < d; ++c) {
                student2[r][c] *= cs;
                teacher2[r][c] *= ct;
            }
        }
        double base = eval_tacl(student, teacher, indicator, padmask, tau, true);
        double scaled = eval_tacl(student2, teacher2, indicator, padmask, tau, true);
        max_diff = std::max(max_diff, std::abs(base - scaled));

        Rows rows2 = student;
        for (size_t r = 0; r < n; ++r) {
            double c = rng.uniform(0.1, 10.0);
            for (auto& x : rows2[r]) x *= c;
        }
        max_diff = std::max(max_diff, std::abs(self_similarity(student) - self_similarity(rows2)));
    }
    return make_result("tacl/s(x) invariance under positive row rescaling", max_diff <= tol,
                       "max|diff|=" + fmt(max_diff));
}

CheckResult masking_statistics(long long min_maskable, uint64_t seed, double rate_tol,
                               double split_tol) {
    MaskingRates rates;
    auto stats = oracles::run_masking_stats(min_maskable, 62, seed, rates, 1000);
    bool pass = std::abs(stats.selection_rate() - rates.select) <= rate_tol &&
                std::abs(stats.mask_fraction() - rates.mask) <= split_tol &&
                std::abs(stats.random_fraction() - rates.random_replace) <= split_tol &&
                std::abs(stats.keep_fraction() - rates.keep) <= split_tol &&
                stats.special_selected == 0;
    std::ostringstream os;
    os.precision(5);
    os << std::fixed << "selection=" << stats.selection_rate() << " split="
       << stats.mask_fraction() << "/" << stats.random_fraction() << "/" << stats.keep_fraction()
       << " specials_selected=" << stats.special_selected << " (n=" << stats.maskable << ")";
    return make_result("masking statistics", pass, os.str());
}

std::vector<CheckResult> run_all(uint64_t seed, bool quick) {
    std::vector<CheckResult> results;
    int loss_instances = quick ? 100 : 1000;
    long long mask_tokens = quick ? 200000 : 1000000;

    results.push_back(tacl_oracle(loss_instances, seed, 1e-6));
    for (auto& r : closed_form_anchors(1e-9)) results.push_back(std::move(r));
    results.push_back(mlm_oracle(quick ? 50 : 200, seed, 1e-9));
    results.push_back(sent_cl_oracle(quick ? 50 : 200, seed, 1e-6));
    results.push_back(self_similarity_oracle(quick ? 100 : 500, seed, 1e-9));
    results.push_back(scale_invariance(quick ? 50 : 200, seed, 1e-9));
    results.push_back(masking_statistics(mask_tokens, seed, 0.002, 0.005));
    return results;
}

}  // namespace tacl::selfcheck
