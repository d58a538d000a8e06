#include "tacl/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tacl {

double self_similarity(const std::vector<std::vector<double>>& rows) {
    size_t n = rows.size();
    if (n < 2) throw ValueError("self_similarity: need at least two rows");
    size_t d = rows[0].size();
    std::vector<std::vector<double>> unit(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i) {
        if (rows[i].size() != d) throw ShapeError("self_similarity: ragged rows");
        double sq = 0.0;
        for (double x : rows[i]) sq += x * x;
        if (sq == 0.0) throw ValueError("self_similarity: zero-norm row " + std::to_string(i));
        double inv = 1.0 / std::sqrt(sq);
        for (size_t j = 0; j < d; ++j) unit[i][j] = rows[i][j] * inv;
    }
    double total = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < d; ++k) dot += unit[i][k] * unit[j][k];
            total += dot;
        }
    return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

void SelfSimReport::save(const std::string& path) const {
    nlohmann::json layers_json = nlohmann::json::array();
    for (const auto& l : layers)
        layers_json.push_back({{"layer", l.layer},
                               {"mean", l.mean},
                               {"std", l.stddev},
                               {"n", l.n_sentences}});
    nlohmann::json j{{"model_tag", model_tag},
                     {"corpus_tag", corpus_tag},
                     {"layer_zero", "embedding_output"},
                     {"layers", layers_json}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

SelfSimReport SelfSimReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad report " + path + ": " + e.what());
    }
    SelfSimReport r;
    r.model_tag = j.at("model_tag").get<std::string>();
    r.corpus_tag = j.at("corpus_tag").get<std::string>();
    for (const auto& l : j.at("layers"))
        r.layers.push_back({l.at("layer").get<int>(), l.at("mean").get<double>(),
                            l.at("std").get<double>(), l.at("n").get<int>()});
    return r;
}

namespace {

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

// cosine in [-1,1] -> intensity in [255,0], darker = higher, round half up.
int heat_pixel(double v) {
    double x = (1.0 - v) * 0.5 * 255.0;
    int p = static_cast<int>(std::floor(x + 0.5));
    return std::clamp(p, 0, 255);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

void export_heatmap(const SelfSimMatrix& m, const std::string& prefix) {
    size_t n = m.size();
    if (n == 0 || m.values.size() != n) throw ValueError("export_heatmap: empty or ragged matrix");

    {
        std::ofstream csv(prefix + ".csv", std::ios::trunc);
        if (!csv) throw IoError("cannot open for writing: " + prefix + ".csv");
        for (const auto& label : m.labels) csv << "," << csv_quote(label);
        csv << "\n";
        for (size_t i = 0; i < n; ++i) {
            csv << csv_quote(m.labels[i]);
            for (size_t j = 0; j < n; ++j) csv << "," << format9(m.values[i][j]);
            csv << "\n";
        }
        if (!csv) throw IoError("write failed: " + prefix + ".csv");
    }
    {
        std::ofstream pgm(prefix + ".pgm", std::ios::binary | std::ios::trunc);
        if (!pgm) throw IoError("cannot open for writing: " + prefix + ".pgm");
        pgm << "P5\n" << n << " " << n << "\n255\n";
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                pgm.put(static_cast<char>(heat_pixel(m.values[i][j])));
        if (!pgm) throw IoError("write failed: " + prefix + ".pgm");
    }
}

SelfSimMatrix parse_heatmap_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty heatmap csv: " + path);
    auto header = split_csv_line(line);
    if (header.empty() || !header[0].empty()) throw IoError("bad heatmap csv header: " + path);

    SelfSimMatrix m;
    m.labels.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != m.labels.size() + 1)
            throw IoError("ragged heatmap csv row in " + path);
        std::vector<double> row;
        row.reserve(m.labels.size());
        for (size_t j = 1; j < fields.size(); ++j) row.push_back(std::stod(fields[j]));
        m.values.push_back(std::move(row));
    }
    if (m.values.size() != m.labels.size()) throw IoError("heatmap csv not square: " + path);
    return m;
}

ModelComparison compare_models(const SelfSimReport& a, const SelfSimReport& b) {
    if (a.layers.size() != b.layers.size())
        throw ValueError("compare_models: layer counts differ (" +
                         std::to_string(a.layers.size()) + " vs " +
                         std::to_string(b.layers.size()) + ")");
    if (a.layers.empty()) throw ValueError("compare_models: empty reports");
    ModelComparison cmp;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        const auto& la = a.layers[l];
        const auto& lb = b.layers[l];
        cmp.layers.push_back({la.layer, la.mean, lb.mean, la.mean - lb.mean});
    }
    cmp.final_delta = cmp.layers.back().delta;
    // Lower final-layer self-similarity = more discriminative token space.
    cmp.verdict = cmp.final_delta < 0.0   ? a.model_tag
                  : cmp.final_delta > 0.0 ? b.model_tag
                                          : "tie";
    return cmp;
}

std::string ModelComparison::to_table() const {
    std::ostringstream os;
    os << "layer      mean_a      mean_b       delta\n";
    char buf[96];
    for (const auto& l : layers) {
        std::snprintf(buf, sizeof(buf), "%5d  %10.6f  %10.6f  %+10.6f\n", l.layer, l.mean_a,
                      l.mean_b, l.delta);
        os << buf;
    }
    os << "more discriminative at final layer: " << verdict << "\n";
    return os.str();
}

}  // namespace tacl
