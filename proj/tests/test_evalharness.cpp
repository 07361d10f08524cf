#include "phg/evalharness.hpp"

#include "support.hpp"
#include "toy_corpus.hpp"

#include "doctest.h"

#include <algorithm>
#include <numeric>

using namespace phg;
using namespace phg::eval;
using phash::HashAlgorithm;

namespace {

const std::vector<HashAlgorithm> kBoth = {HashAlgorithm::AHash64, HashAlgorithm::Pdq256};

}  // namespace

TEST_CASE("perceptual similarity") {
    const auto img = test::synthetic_image(1);
    for (const auto alg : kBoth) CHECK(perceptual_similarity(img, img, alg).similarity_percent() == 100.0);

    // aHash of black-left/white-right vs white-left/black-right: complementary.
    auto left = imaging::ImageBuffer::filled(8, 8, 1, 0);
    auto right = imaging::ImageBuffer::filled(8, 8, 1, 255);
    for (std::uint32_t y = 0; y < 8; ++y) {
        for (std::uint32_t x = 4; x < 8; ++x) {
            left.at(x, y) = 255;
            right.at(x, y) = 0;
        }
    }
    const auto s = perceptual_similarity(left, right, HashAlgorithm::AHash64);
    CHECK(s.distance.raw == 64);
    CHECK(s.similarity_percent() == 0.0);
    CHECK(s.pd() == 1.0);
}

TEST_CASE("similarity from raw hashes, 3-image toy set") {
    std::vector<imaging::ImageBuffer> imgs = {test::synthetic_image(10), test::synthetic_image(11),
                                             test::synthetic_image(12)};
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        for (std::size_t j = 0; j < imgs.size(); ++j) {
            for (const auto alg : kBoth) {
                const auto a = phash::compute_hash(imgs[i], alg);
                const auto b = phash::compute_hash(imgs[j], alg);
                int differing = 0;
                for (std::uint32_t k = 0; k < a.bit_count(); ++k) differing += a.bit(k) != b.bit(k);
                const double expected = (1.0 - double(differing) / a.bit_count()) * 100.0;
                CHECK(perceptual_similarity(imgs[i], imgs[j], alg).similarity_percent() ==
                      doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("evaluate_pairs basics") {
    const auto img = test::synthetic_image(3);
    const auto table = evaluate_pairs({{"same", img, img}}, kBoth);
    REQUIRE(table.rows.size() == 1);
    for (const auto& c : table.rows[0].cells) {
        CHECK(c.mean_percent() == 100.0);
        CHECK(c.max_percent() == 100.0);
    }
    CHECK(table.rows[0].average_mean() == 100.0);
    CHECK_THROWS_AS(evaluate_pairs({}, kBoth), EmptyInput);
    CHECK_THROWS_AS(evaluate_pairs({{"x", img, img}}, {}), EmptyInput);
}

TEST_CASE("cell arithmetic: similarities 75 and 100 give mean 87.5, max 100") {
    // 16 of 64 bits differ -> 75%.
    const SimilarityCell cell{2, 16, 0, 64};
    CHECK(cell.mean_percent() == 87.5);
    CHECK(cell.max_percent() == 100.0);
    const SimilarityRow row{"r", {cell, SimilarityCell{1, 32, 32, 256}}};
    CHECK(row.average_mean() == (87.5 + 87.5) / 2);
    CHECK(row.average_max() == (100.0 + 87.5) / 2);
}

TEST_CASE("toy manifest matches the spreadsheet oracle") {
    test::TempDir dir;
    const auto manifest = test::write_toy_manifest(dir.path());
    const auto entries = read_manifest(manifest);
    REQUIRE(entries.size() == 5);
    std::vector<LabeledPair> pairs;
    for (const auto& e : entries) {
        pairs.push_back({e.label, imaging::load_image_file(e.a), imaging::load_image_file(e.b)});
    }
    const auto table = evaluate_pairs(pairs, kBoth);
    const auto expected = test::oracle_table(pairs, kBoth);
    CHECK(export_csv(table) == expected);
}

TEST_CASE("evaluate_pairs is order and worker independent") {
    std::vector<LabeledPair> pairs;
    for (std::uint64_t i = 0; i < 12; ++i) {
        const auto a = test::synthetic_image(100 + i, 64, 64);
        const auto b = imaging::apply_transform(a, imaging::transform::BoxBlur{1 + int(i % 3)});
        pairs.push_back({i % 2 ? "odd" : "even", a, b});
    }
    const auto base = export_csv(evaluate_pairs(pairs, kBoth, 1));
    std::mt19937_64 rng(4);
    for (int round = 0; round < 3; ++round) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        CHECK(export_csv(evaluate_pairs(pairs, kBoth, 3)) == base);
    }
}

TEST_CASE("histogram") {
    const auto two = histogram({0.0, 100.0}, 2);
    CHECK(two.counts == std::vector<std::uint64_t>{1, 1});
    CHECK(histogram({50.0}, 2).counts == std::vector<std::uint64_t>{0, 1});
    CHECK(histogram({49.999}, 2).counts == std::vector<std::uint64_t>{1, 0});

    const auto h = histogram({}, 4);
    CHECK(h.edges == std::vector<double>{0, 25, 50, 75, 100});
    const auto csv = export_csv(h);
    CHECK(csv ==
          "bin_lo,bin_hi,count\r\n0.00,25.00,0\r\n25.00,50.00,0\r\n50.00,75.00,0\r\n75.00,100.00,0\r\n");

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<double> scores(1000);
    for (auto& s : scores) s = u(rng);
    for (std::size_t bins : {1u, 3u, 7u, 20u, 64u}) {
        const auto hist = histogram(scores, bins);
        CHECK(std::accumulate(hist.counts.begin(), hist.counts.end(), std::uint64_t{0}) == 1000);
        for (std::size_t i = 0; i < bins; ++i) CHECK(hist.edges[i] < hist.edges[i + 1]);
    }
    // Every k/64 similarity lands in the bin whose lower edge it equals.
    std::vector<double> grid;
    for (int k = 0; k <= 64; ++k) grid.push_back(100.0 * k / 64);
    const auto g = histogram(grid, 64);
    for (std::size_t i = 0; i + 1 < 64; ++i) CHECK(g.counts[i] == 1);
    CHECK(g.counts[63] == 2);

    CHECK_THROWS(histogram({101.0}, 4));
    CHECK_THROWS(histogram({1.0}, 0));
}

TEST_CASE("table CSV parses back to the same numbers") {
    std::vector<LabeledPair> pairs;
    for (std::uint64_t i = 0; i < 6; ++i) {
        const auto a = test::synthetic_image(200 + i, 72, 60);
        pairs.push_back({"label, with comma", a, imaging::apply_transform(a, imaging::transform::BrightnessShift{12})});
        pairs.push_back({"plain", a, test::synthetic_image(300 + i, 72, 60)});
    }
    const auto table = evaluate_pairs(pairs, kBoth);
    const auto csv = export_csv(table);
    const auto rows = test::parse_csv(csv);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"label", "ahash64_mean", "ahash64_max", "pdq256_mean",
                                              "pdq256_max", "avg_mean", "avg_max"});
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto& fields = rows[r + 1];
        CHECK(fields[0] == row.label);
        std::vector<double> want;
        for (const auto& c : row.cells) {
            want.push_back(c.mean_percent());
            want.push_back(c.max_percent());
            CHECK(c.max_percent() >= c.mean_percent());
        }
        want.push_back(row.average_mean());
        want.push_back(row.average_max());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(std::abs(std::stod(fields[i + 1]) - want[i]) <= 0.005 + 1e-9);
        }
    }
}

TEST_CASE("robustness report") {
    std::vector<imaging::ImageBuffer> corpus;
    for (std::uint64_t i = 0; i < 8; ++i) corpus.push_back(test::synthetic_image(400 + i, 80, 64));
    const auto report = robustness_report(
        corpus,
        {imaging::transform::Grayscale{}, imaging::transform::Resize{80, 64}, imaging::transform::MirrorHorizontal{}},
        HashAlgorithm::Pdq256);
    REQUIRE(report.size() == 3);
    CHECK(report[0].max == 0.0);
    CHECK(report[1].max == 0.0);
    CHECK(report[0].samples == 8);
    CHECK(report[2].min <= report[2].median);
    CHECK(report[2].median <= report[2].max);
    CHECK(report[2].mean > 0.2);  // mirroring moves PDQ a long way

    const auto a = robustness_report(corpus, {imaging::transform::Resize{80, 64}}, HashAlgorithm::AHash64);
    CHECK(a[0].max == 0.0);

    // median of an even count averages the middle two
    const auto b = robustness_report(std::vector(corpus.begin(), corpus.begin() + 4),
                                     {imaging::transform::BoxBlur{3}}, HashAlgorithm::Pdq256);
    auto d = b[0].distances;
    std::sort(d.begin(), d.end());
    CHECK(b[0].median == (d[1] + d[2]) / 2);
    CHECK(b[0].mean == doctest::Approx((d[0] + d[1] + d[2] + d[3]) / 4));

    CHECK_THROWS_AS(robustness_report({}, {imaging::transform::Grayscale{}}, HashAlgorithm::Pdq256), EmptyInput);
}

TEST_CASE("semantic distance and distinctness") {
    const auto black = imaging::ImageBuffer::filled(32, 32, 1, 0);
    const auto white = imaging::ImageBuffer::filled(40, 20, 3, 255);
    CHECK(semantic_distance(black, white) == 1.0);
    const auto img = test::synthetic_image(7);
    CHECK(semantic_distance(img, img) == 0.0);
    const auto other = test::synthetic_image(8);
    CHECK(semantic_distance(img, other) == semantic_distance(other, img));

    const auto twins = distinctness_report({img, img}, HashAlgorithm::Pdq256, {});
    CHECK(twins.qualifying_pairs == 0);
    CHECK(twins.rate() == 0.0);

    const auto degenerate = distinctness_report({black, white}, HashAlgorithm::Pdq256, {});
    CHECK(degenerate.qualifying_pairs == 1);
    CHECK(degenerate.collisions == 1);

    std::mt19937_64 rng(50);
    std::vector<imaging::ImageBuffer> noise;
    for (int i = 0; i < 50; ++i) noise.push_back(test::random_image(rng, 64, 64, 1));
    const auto r = distinctness_report(noise, HashAlgorithm::Pdq256, {});
    CHECK(r.qualifying_pairs == 50 * 49 / 2);
    CHECK(r.rate() <= 0.01);

    CHECK_THROWS_AS(distinctness_report({img}, HashAlgorithm::Pdq256, {}), EmptyInput);
}

TEST_CASE("manifest parsing") {
    test::TempDir dir;
    test::write_text(dir / "m.csv",
                     "# comment\n\nsame,a.pgm,b.pgm\r\n\"quoted, label\",\"sub/c.pgm\",/abs/d.pgm\n");
    const auto entries = read_manifest(dir / "m.csv");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].label == "same");
    CHECK(entries[0].a == dir.path() / "a.pgm");
    CHECK(entries[1].label == "quoted, label");
    CHECK(entries[1].a == dir.path() / "sub/c.pgm");
    CHECK(entries[1].b == "/abs/d.pgm");

    test::write_text(dir / "bad.csv", "only,two\n");
    CHECK_THROWS(read_manifest(dir / "bad.csv"));
    CHECK_THROWS(read_manifest(dir / "missing.csv"));
}
