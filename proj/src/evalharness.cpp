#include "phg/evalharness.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace phg::eval {

using imaging::ImageBuffer;
using phash::HashAlgorithm;

SimilarityScore perceptual_similarity(const ImageBuffer& a, const ImageBuffer& b,
                                      HashAlgorithm metric) {
    return {metric, phash::hamming(phash::compute_hash(a, metric), phash::compute_hash(b, metric))};
}

double SimilarityCell::mean_percent() const {
    // 100 * (1 - raw_sum / (count * bits))
    const double total = static_cast<double>(count) * bits;
    return 100.0 * (total - static_cast<double>(raw_sum)) / total;
}

double SimilarityCell::max_percent() const {
    return 100.0 * static_cast<double>(bits - raw_min) / bits;
}

double SimilarityRow::average_mean() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.mean_percent();
    return s / static_cast<double>(cells.size());
}

double SimilarityRow::average_max() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.max_percent();
    return s / static_cast<double>(cells.size());
}

SimilarityTable evaluate_pairs(const std::vector<LabeledPair>& pairs,
                               const std::vector<HashAlgorithm>& metrics, unsigned workers) {
    if (pairs.empty()) throw EmptyInput("evaluate_pairs: no pairs");
    if (metrics.empty()) throw EmptyInput("evaluate_pairs: no metrics");

    std::vector<std::vector<phash::HashDistance>> distances(
        pairs.size(), std::vector<phash::HashDistance>(metrics.size()));
    detail::parallel_for(pairs.size(), workers, [&](std::size_t i) {
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            distances[i][m] = perceptual_similarity(pairs[i].a, pairs[i].b, metrics[m]).distance;
        }
    });

    SimilarityTable table;
    table.metrics = metrics;
    std::map<std::string, SimilarityRow> rows;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& row = rows[pairs[i].label];
        if (row.cells.empty()) {
            row.label = pairs[i].label;
            row.cells.resize(metrics.size());
        }
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            const auto& d = distances[i][m];
            auto& cell = row.cells[m];
            cell.raw_min = cell.count == 0 ? d.raw : std::min(cell.raw_min, d.raw);
            cell.raw_sum += d.raw;
            cell.bits = d.bits;
            ++cell.count;
            table.scores[metrics[m]].push_back(SimilarityScore{metrics[m], d}.similarity_percent());
        }
    }
    for (auto& [label, row] : rows) table.rows.push_back(std::move(row));
    return table;
}

Histogram histogram(const std::vector<double>& scores, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram: bins must be >= 1");
    Histogram h;
    h.counts.assign(bins, 0);
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = 100.0 * static_cast<double>(i) / static_cast<double>(bins);
    }
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 100.0)) {
            throw std::invalid_argument("histogram: score outside [0, 100]");
        }
        auto idx = static_cast<std::size_t>(std::floor(s * static_cast<double>(bins) / 100.0));
        // Guard the floor against edge values that land one bin off.
        while (idx > 0 && s < h.edges[idx]) --idx;
        while (idx + 1 < bins && s >= h.edges[idx + 1]) ++idx;
        h.counts[std::min(idx, bins - 1)]++;
    }
    return h;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

std::vector<DistanceStats> robustness_report(const std::vector<ImageBuffer>& corpus,
                                             const std::vector<imaging::TransformSpec>& transforms,
                                             HashAlgorithm alg, unsigned workers) {
    if (corpus.empty()) throw EmptyInput("robustness_report: empty corpus");
    for (const auto& t : transforms) imaging::validate(t);

    std::vector<phash::PerceptualHash> originals(corpus.size(), phash::PerceptualHash(alg));
    detail::parallel_for(corpus.size(), workers,
                         [&](std::size_t i) { originals[i] = phash::compute_hash(corpus[i], alg); });

    std::vector<DistanceStats> report;
    for (const auto& t : transforms) {
        DistanceStats stats;
        stats.transform = imaging::describe(t);
        stats.distances.resize(corpus.size());
        detail::parallel_for(corpus.size(), workers, [&](std::size_t i) {
            const auto edited = phash::compute_hash(imaging::apply_transform(corpus[i], t), alg);
            stats.distances[i] = phash::hamming(originals[i], edited).normalized();
        });
        const auto& d = stats.distances;
        stats.samples = d.size();
        stats.min = *std::min_element(d.begin(), d.end());
        stats.max = *std::max_element(d.begin(), d.end());
        stats.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
        stats.median = median_of(d);
        report.push_back(std::move(stats));
    }
    return report;
}

double semantic_distance(const ImageBuffer& a, const ImageBuffer& b,
                         const SemanticDistanceConfig& cfg) {
    const auto x = imaging::resize_box(imaging::to_luminance(a), cfg.side, cfg.side);
    const auto y = imaging::resize_box(imaging::to_luminance(b), cfg.side, cfg.side);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        sum += static_cast<std::uint64_t>(std::abs(int{x.data()[i]} - int{y.data()[i]}));
    }
    return static_cast<double>(sum) / (255.0 * static_cast<double>(x.data().size()));
}

DistinctnessReport distinctness_report(const std::vector<ImageBuffer>& corpus, HashAlgorithm alg,
                                       const phash::MatchPolicy& policy,
                                       const SemanticDistanceConfig& semantic) {
    if (corpus.size() < 2) throw EmptyInput("distinctness_report: need at least two images");
    std::vector<phash::PerceptualHash> hashes(corpus.size(), phash::PerceptualHash(alg));
    detail::parallel_for(corpus.size(), 0,
                         [&](std::size_t i) { hashes[i] = phash::compute_hash(corpus[i], alg); });

    DistinctnessReport report;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (std::size_t j = i + 1; j < corpus.size(); ++j) {
            if (semantic_distance(corpus[i], corpus[j], semantic) <= semantic.epsilon) continue;
            ++report.qualifying_pairs;
            if (phash::is_match(hashes[i], hashes[j], policy)) ++report.collisions;
        }
    }
    return report;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

}  // namespace

std::string export_csv(const SimilarityTable& table) {
    std::string out = "label";
    for (auto m : table.metrics) {
        const std::string tag(phash::algorithm_tag(m));
        out += "," + tag + "_mean," + tag + "_max";
    }
    out += ",avg_mean,avg_max\r\n";
    for (const auto& row : table.rows) {
        out += csv_field(row.label);
        for (const auto& c : row.cells) {
            out += "," + fixed2(c.mean_percent()) + "," + fixed2(c.max_percent());
        }
        out += "," + fixed2(row.average_mean()) + "," + fixed2(row.average_max()) + "\r\n";
    }
    return out;
}

std::string export_csv(const Histogram& hist) {
    std::string out = "bin_lo,bin_hi,count\r\n";
    for (std::size_t i = 0; i < hist.bin_count(); ++i) {
        out += fixed2(hist.edges[i]) + "," + fixed2(hist.edges[i + 1]) + "," +
               std::to_string(hist.counts[i]) + "\r\n";
    }
    return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
    const auto base = manifest.parent_path();
    auto resolve = [&base](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) +
                                     ": expected label,pathA,pathB");
        }
        entries.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
    }
    return entries;
}

}  // namespace phg::eval
