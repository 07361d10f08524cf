// Corpus-level evaluation: perceptual similarity between image pairs, mean/max
// tables, histograms, and robustness / distinctness reports.
#pragma once

#include "phg/imaging.hpp"
#include "phg/phash.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace phg::eval {

class EmptyInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SimilarityScore {
    phash::HashAlgorithm metric;
    phash::HashDistance distance;

    double pd() const { return distance.normalized(); }
    /// (1 - pd) * 100, computed from the integer distance so that the
    /// identical-image case is exactly 100.
    double similarity_percent() const {
        return 100.0 * static_cast<double>(distance.bits - distance.raw) / distance.bits;
    }
};

SimilarityScore perceptual_similarity(const imaging::ImageBuffer& a,
                                      const imaging::ImageBuffer& b,
                                      phash::HashAlgorithm metric);

struct LabeledPair {
    std::string label;
    imaging::ImageBuffer a;
    imaging::ImageBuffer b;
};

/// Aggregate of one (label, metric) cell. Keeps integer sums so that means
/// do not depend on the order pairs were processed in.
struct SimilarityCell {
    std::uint64_t count = 0;
    std::uint64_t raw_sum = 0;
    std::uint32_t raw_min = 0;
    std::uint32_t bits = 0;

    double mean_percent() const;
    double max_percent() const;
};

struct SimilarityRow {
    std::string label;
    std::vector<SimilarityCell> cells;  // parallel to SimilarityTable::metrics

    /// Average of the row's per-metric means (resp. maxes).
    double average_mean() const;
    double average_max() const;
};

struct SimilarityTable {
    std::vector<phash::HashAlgorithm> metrics;
    std::vector<SimilarityRow> rows;  // sorted by label
    /// Every per-pair score, per metric, in input order.
    std::map<phash::HashAlgorithm, std::vector<double>> scores;
};

/// Throws EmptyInput on no pairs or no metrics. Pair hashing fans out across
/// `workers` threads (0 = hardware concurrency); results are aggregated by
/// input index and are independent of the worker count.
SimilarityTable evaluate_pairs(const std::vector<LabeledPair>& pairs,
                               const std::vector<phash::HashAlgorithm>& metrics,
                               unsigned workers = 0);

struct Histogram {
    std::vector<double> edges;           // bin_count + 1, uniform over [0, 100]
    std::vector<std::uint64_t> counts;   // bin_count

    std::size_t bin_count() const { return counts.size(); }
};

/// Bins are [lo, hi) except the last, which is [lo, 100].
Histogram histogram(const std::vector<double>& scores, std::size_t bins);

struct DistanceStats {
    std::string transform;
    std::size_t samples = 0;
    double min = 0, median = 0, mean = 0, max = 0;
    std::vector<double> distances;  // per corpus image, input order
};

std::vector<DistanceStats> robustness_report(const std::vector<imaging::ImageBuffer>& corpus,
                                             const std::vector<imaging::TransformSpec>& transforms,
                                             phash::HashAlgorithm alg, unsigned workers = 0);

struct SemanticDistanceConfig {
    std::uint32_t side = 64;
    double epsilon = 0.25;
};

/// Mean absolute luminance difference after resizing both images to
/// side x side, normalized to [0, 1].
double semantic_distance(const imaging::ImageBuffer& a, const imaging::ImageBuffer& b,
                         const SemanticDistanceConfig& cfg = {});

struct DistinctnessReport {
    std::size_t qualifying_pairs = 0;  // pairs with semantic distance > epsilon
    std::size_t collisions = 0;        // of those, pairs whose hashes match
    double rate() const {
        return qualifying_pairs == 0 ? 0.0
                                     : static_cast<double>(collisions) / qualifying_pairs;
    }
};

DistinctnessReport distinctness_report(const std::vector<imaging::ImageBuffer>& corpus,
                                       phash::HashAlgorithm alg,
                                       const phash::MatchPolicy& policy,
                                       const SemanticDistanceConfig& semantic = {});

std::string export_csv(const SimilarityTable& table);
std::string export_csv(const Histogram& hist);

/// Manifest lines are `label,pathA,pathB`; blank lines and lines starting
/// with '#' are skipped. Relative paths resolve against the manifest's
/// directory.
struct ManifestEntry {
    std::string label;
    std::filesystem::path a;
    std::filesystem::path b;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

}  // namespace phg::eval
