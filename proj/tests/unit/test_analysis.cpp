#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "tacl/analysis.hpp"
#include "tacl/oracles.hpp"
#include "tacl/selfcheck.hpp"

#include "test_util.hpp"

using namespace tacl;

namespace {

std::filesystem::path tmp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "tacl_analysis_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

using Rows = std::vector<std::vector<double>>;

Rows rand_rows(Rng& rng, size_t n, size_t d) {
    Rows rows(n, std::vector<double>(d));
    for (auto& r : rows)
        for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    return rows;
}

ModelConfig small_config(int vocab_size) {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_len = 24;
    cfg.dropout_p = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("self_similarity: anchors, oracle, bounds, errors") {
    Rows same(4, {0.2, -0.9, 0.5});
    CHECK(self_similarity(same) == doctest::Approx(1.0).epsilon(1e-12));
    Rows ortho = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    CHECK(self_similarity(ortho) == doctest::Approx(0.0).epsilon(1e-15));

    auto oracle = selfcheck::self_similarity_oracle(200, 11, 1e-9);
    INFO(oracle.detail);
    CHECK(oracle.pass);

    Rows one_row = {{1, 2}};
    CHECK_THROWS_AS(self_similarity(one_row), ValueError);
    Rows with_zero = {{1, 2}, {0, 0}};
    CHECK_THROWS_AS(self_similarity(with_zero), ValueError);
}

TEST_CASE("self_similarity: permutation and per-row scale invariance") {
    Rng rng(13);
    for (int it = 0; it < 30; ++it) {
        size_t n = 3 + size_t(rng.uniform_int(5)), d = 2 + size_t(rng.uniform_int(8));
        Rows rows = rand_rows(rng, n, d);
        double base = self_similarity(rows);

        Rows shuffled = rows;
        for (size_t i = n; i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[size_t(rng.uniform_int(int(i)))]);
        CHECK(self_similarity(shuffled) == doctest::Approx(base).epsilon(1e-12));

        Rows scaled = rows;
        for (auto& r : scaled) {
            double c = rng.uniform(0.05, 20.0);
            for (auto& x : r) x *= c;
        }
        CHECK(std::abs(self_similarity(scaled) - base) < 1e-9);

        double lower = -1.0 / double(n - 1);
        CHECK(base >= lower - 1e-12);
        CHECK(base <= 1.0 + 1e-12);
    }
}

TEST_CASE("layerwise report: single sentence, order invariance, recompute oracle") {
    auto setup = tacl_test::make_test_setup(8, 5, 3);
    auto cfg = small_config(setup.vocab.size());
    auto params = init_params<float>(cfg, 21);
    params.set_requires_grad(false);

    std::vector<std::vector<int>> sentences;
    for (const auto* s : setup.corpus.all_sentences()) sentences.push_back(*s);
    REQUIRE(sentences.size() >= 10);

    AnalysisConfig acfg;
    acfg.sample = 1000;

    SUBCASE("single sentence has zero std per layer") {
        std::vector<std::vector<int>> one = {sentences[0]};
        auto report = layerwise_self_similarity(params, cfg, one, acfg, "m", "c");
        REQUIRE(report.layers.size() == size_t(cfg.n_layers) + 1);
        for (const auto& l : report.layers) {
            CHECK(l.stddev == 0.0);
            CHECK(l.n_sentences == 1);
        }
    }

    SUBCASE("permuting the sentence sample leaves the report unchanged") {
        auto report_a = layerwise_self_similarity(params, cfg, sentences, acfg, "m", "c");
        auto reversed = sentences;
        std::reverse(reversed.begin(), reversed.end());
        auto report_b = layerwise_self_similarity(params, cfg, reversed, acfg, "m", "c");
        REQUIRE(report_a.layers.size() == report_b.layers.size());
        for (size_t l = 0; l < report_a.layers.size(); ++l) {
            CHECK(report_a.layers[l].mean == report_b.layers[l].mean);
            CHECK(report_a.layers[l].stddev == report_b.layers[l].stddev);
        }
    }

    SUBCASE("means equal direct recomputation from per-sentence values") {
        auto report = layerwise_self_similarity(params, cfg, sentences, acfg, "m", "c");
        std::vector<std::vector<double>> values(size_t(cfg.n_layers) + 1);
        for (const auto& ids : sentences) {
            auto seq = make_single_sequence(ids, cfg.max_len);
            auto per_layer = sentence_self_similarity(params, cfg, seq, true);
            if (per_layer.empty()) continue;
            for (size_t l = 0; l < per_layer.size(); ++l) values[l].push_back(per_layer[l]);
        }
        for (size_t l = 0; l < values.size(); ++l) {
            double mean = 0;
            for (double v : values[l]) mean += v;
            mean /= double(values[l].size());
            CHECK(std::abs(report.layers[l].mean - mean) < 1e-9);
            CHECK(report.layers[l].n_sentences == int(values[l].size()));
        }
    }

    SUBCASE("report json round trip") {
        auto report = layerwise_self_similarity(params, cfg, sentences, acfg, "tag-a", "corp");
        auto path = (tmp_dir() / "report.json").string();
        report.save(path);
        auto loaded = SelfSimReport::load(path);
        CHECK(loaded.model_tag == "tag-a");
        CHECK(loaded.corpus_tag == "corp");
        REQUIRE(loaded.layers.size() == report.layers.size());
        for (size_t l = 0; l < loaded.layers.size(); ++l)
            CHECK(loaded.layers[l].mean == doctest::Approx(report.layers[l].mean).epsilon(1e-12));
    }
}

TEST_CASE("self-similarity matrix: diagonal, symmetry, pairwise oracle") {
    auto setup = tacl_test::make_test_setup(6, 4, 5);
    auto cfg = small_config(setup.vocab.size());
    auto params = init_params<float>(cfg, 33);
    params.set_requires_grad(false);

    auto ids = *setup.corpus.all_sentences()[0];
    auto seq = make_single_sequence(ids, cfg.max_len);
    auto m = self_sim_matrix(params, cfg, setup.vocab, seq, -1, true);
    REQUIRE(m.size() >= 2);
    REQUIRE(m.values.size() == m.size());

    for (size_t i = 0; i < m.size(); ++i) {
        CHECK(m.values[i][i] == 1.0);  // exactly, by definition
        for (size_t j = 0; j < m.size(); ++j) CHECK(m.values[i][j] == m.values[j][i]);
    }

    // oracle: cosine of the dumped final-layer activations at analyzed positions
    auto hidden = sentence_activations(params, cfg, seq);
    auto keep = detail::analyzed_positions(seq.ids, true);
    auto rows = detail::gather_rows_double(hidden.back(), keep);
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < m.size(); ++j) {
            if (i == j) continue;
            CHECK(std::abs(m.values[i][j] - oracles::cosine_ref(rows[i], rows[j])) < 1e-9);
        }

    // labels match the analyzed tokens
    for (size_t i = 0; i < m.size(); ++i)
        CHECK(m.labels[i] == setup.vocab.token_of(seq.ids[keep[i]]));

    CHECK_THROWS_AS(self_sim_matrix(params, cfg, setup.vocab, seq, cfg.n_layers + 1, true),
                    ValueError);
}

TEST_CASE("heatmap export: pixel mapping, csv round trip, determinism") {
    SelfSimMatrix m;
    m.labels = {"alpha", "be\"ta", "gamma,delta"};
    m.values = {{1.0, 0.0, -1.0}, {0.0, 1.0, 0.25}, {-1.0, 0.25, 1.0}};
    auto prefix = (tmp_dir() / "heat").string();
    export_heatmap(m, prefix);

    SUBCASE("pgm pixels: diag 0, zero-cosine 128 (round-half-up), -1 -> 255") {
        auto pgm = file_bytes(prefix + ".pgm");
        std::string header = "P5\n3 3\n255\n";
        REQUIRE(pgm.size() == header.size() + 9);
        CHECK(pgm.substr(0, header.size()) == header);
        const auto* px = reinterpret_cast<const unsigned char*>(pgm.data() + header.size());
        CHECK(px[0] == 0);    // cosine 1.0
        CHECK(px[1] == 128);  // cosine 0.0, 127.5 rounds half-up
        CHECK(px[2] == 255);  // cosine -1.0
        CHECK(px[5] == 96);   // cosine 0.25 -> 95.625 + 0.5 -> 96
    }

    SUBCASE("csv round trip reproduces the matrix to printed precision") {
        auto parsed = parse_heatmap_csv(prefix + ".csv");
        REQUIRE(parsed.size() == 3);
        CHECK(parsed.labels == m.labels);  // quoting survives commas and quotes
        for (size_t i = 0; i < 3; ++i)
            for (size_t j = 0; j < 3; ++j)
                CHECK(std::abs(parsed.values[i][j] - m.values[i][j]) < 5e-10);
    }

    SUBCASE("byte-identical output across runs") {
        auto prefix2 = (tmp_dir() / "heat2").string();
        export_heatmap(m, prefix2);
        CHECK(file_bytes(prefix + ".csv") == file_bytes(prefix2 + ".csv"));
        CHECK(file_bytes(prefix + ".pgm") == file_bytes(prefix2 + ".pgm"));
    }
}

TEST_CASE("compare_models: self-delta zero, synthetic gap, verdict, mismatch") {
    SelfSimReport a;
    a.model_tag = "tacl";
    a.corpus_tag = "c";
    a.layers = {{0, 0.50, 0.01, 100}, {1, 0.60, 0.02, 100}, {2, 0.30, 0.02, 100}};

    auto self_cmp = compare_models(a, a);
    for (const auto& l : self_cmp.layers) CHECK(l.delta == 0.0);
    CHECK(self_cmp.verdict == "tie");

    SelfSimReport b = a;
    b.model_tag = "baseline";
    b.layers[2].mean = 0.42;
    auto cmp = compare_models(a, b);
    CHECK(cmp.final_delta == doctest::Approx(0.30 - 0.42).epsilon(1e-15));
    CHECK(cmp.verdict == "tacl");  // lower final-layer s(x) is more discriminative
    CHECK(cmp.layers[0].delta == 0.0);

    SelfSimReport short_report = a;
    short_report.layers.pop_back();
    CHECK_THROWS_AS(compare_models(a, short_report), ValueError);
}
