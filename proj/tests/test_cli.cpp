#include "phg/psi/token_index.hpp"

#include "deployment.hpp"
#include "process.hpp"
#include "toy_corpus.hpp"

#include "doctest.h"

#include <regex>

using namespace phg;
using phash::HashAlgorithm;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

// Writes n distinct images and returns their paths in name order.
std::vector<std::filesystem::path> write_images(const std::filesystem::path& dir, std::uint64_t seed, int n) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(dir / ("img" + std::to_string(i) + ".ppm"));
        imaging::save_pnm(test::synthetic_image(seed + i, 64, 48), out.back());
    }
    return out;
}

}  // namespace

TEST_CASE("phg hash") {
    test::TempDir dir;
    imaging::save_pnm(imaging::ImageBuffer::filled(16, 16, 1, 255), dir / "white.pgm");
    imaging::save_pnm(imaging::ImageBuffer::filled(40, 30, 3, 77), dir / "flat.ppm");
    const auto white = (dir / "white.pgm").string(), flat = (dir / "flat.ppm").string();

    auto r = test::run_cli({"hash", "--algo", "ahash", white});
    CHECK(r.status == 0);
    CHECK(r.out == white + "\tahash64:ffffffffffffffff\n");

    r = test::run_cli({"hash", "--algo", "pdq", flat});
    CHECK(r.status == 0);
    CHECK(r.out == flat + "\tpdq256:" + std::string(64, '0') + "\t0\n");

    const auto img = test::synthetic_image(5, 90, 70);
    imaging::save_pnm(img, dir / "s.ppm");
    const auto s = (dir / "s.ppm").string();
    r = test::run_cli({"hash", "--algo", "pdq256", s, (dir / "missing.png").string(), white});
    CHECK(r.status == 1);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 3);
    const auto lib = phash::pdq(img);
    CHECK(lines[0] == s + "\t" + lib.hash.to_text() + "\t" + std::to_string(lib.quality));
    CHECK(lines[1].rfind((dir / "missing.png").string() + "\tERROR:", 0) == 0);
    CHECK(lines[2].rfind(white + "\tpdq256:", 0) == 0);

    CHECK(test::run_cli({"hash", "--algo", "md5", white}).status == 2);
    CHECK(test::run_cli({"hash", "--algo", "ahash"}).status == 2);
    CHECK(test::run_cli({}).status == 2);
    CHECK(test::run_cli({"frobnicate"}).status == 2);
    CHECK(test::run_cli({"--help"}).status == 0);
    CHECK(test::run_cli({"hash", "--help"}).status == 0);
}

TEST_CASE("phg eval") {
    test::TempDir dir;
    const auto manifest = test::write_toy_manifest(dir.path());
    auto r = test::run_cli({"eval", "--manifest", manifest.string(), "--out", (dir / "out").string(), "--bins", "10"});
    REQUIRE(r.status == 0);

    std::vector<eval::LabeledPair> pairs;
    for (const auto& e : eval::read_manifest(manifest)) {
        pairs.push_back({e.label, imaging::load_image_file(e.a), imaging::load_image_file(e.b)});
    }
    CHECK(test::read_text(dir / "out" / "table.csv") ==
          test::oracle_table(pairs, {HashAlgorithm::AHash64, HashAlgorithm::Pdq256}));
    for (const char* tag : {"ahash64", "pdq256"}) {
        const auto hist = test::parse_csv(test::read_text(dir / "out" / ("histogram_" + std::string(tag) + ".csv")));
        REQUIRE(hist.size() == 11);
        std::uint64_t total = 0;
        for (std::size_t i = 1; i < hist.size(); ++i) total += std::stoull(hist[i][2]);
        CHECK(total == pairs.size());
    }

    r = test::run_cli({"eval", "--manifest", manifest.string(), "--out", (dir / "one").string(), "--metrics", "pdq"});
    CHECK(r.status == 0);
    CHECK(std::filesystem::exists(dir / "one" / "histogram_pdq256.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "one" / "histogram_ahash64.csv"));

    test::write_text(dir / "empty.csv", "# nothing\n");
    r = test::run_cli({"eval", "--manifest", (dir / "empty.csv").string(), "--out", (dir / "e").string()});
    CHECK(r.status == 1);
    CHECK(r.err.find("no pairs") != std::string::npos);

    CHECK(test::run_cli({"eval", "--manifest", manifest.string(), "--out", (dir / "x").string(), "--bins", "0"})
              .status == 2);
    CHECK(test::run_cli({"eval", "--manifest", manifest.string(), "--out", (dir / "x").string(), "--metrics", "sha1"})
              .status == 2);
}

TEST_CASE("phg ingest") {
    test::TempDir dir;
    const auto key = (dir / "k.bin").string();
    auto r = test::run_cli({"ingest", "--gen-key", "--key-file", key});
    REQUIRE(r.status == 0);
    const auto key_bytes = test::read_bytes(key);
    CHECK(key_bytes.size() == 32);
    r = test::run_cli({"ingest", "--gen-key", "--key-file", key});
    CHECK(r.status == 1);
    CHECK(test::read_bytes(key) == key_bytes);

    const psi::Ristretto255Group g;
    const auto loaded = psi::load_key(g, key);

    SUBCASE("empty directory") {
        std::filesystem::create_directories(dir / "none");
        r = test::run_cli({"ingest", "--dir", (dir / "none").string(), "--algo", "pdq", "--key-file", key, "--out",
                           (dir / "i.phix").string(), "--map-out", (dir / "m.tsv").string()});
        CHECK(r.status == 0);
        const auto index = psi::TokenIndex::load(dir / "i.phix");
        CHECK(index.size() == 0);
        CHECK(index.key_id() == loaded.id);
        CHECK(test::read_text(dir / "m.tsv").empty());
    }
    SUBCASE("directory ingest is deterministic and matches the library") {
        const auto images = write_images(dir / "imgs", 60, 5);
        test::write_text(dir / "imgs" / "broken.ppm", "P6\n1 1\n255\n");
        for (const char* out : {"a", "b"}) {
            r = test::run_cli({"ingest", "--dir", (dir / "imgs").string(), "--algo", "ahash", "--key-file", key,
                               "--out", (dir / (std::string(out) + ".phix")).string(), "--map-out",
                               (dir / (std::string(out) + ".tsv")).string()});
            CHECK(r.status == 1);  // the truncated file
            CHECK(r.err.find("broken.ppm") != std::string::npos);
        }
        CHECK(test::read_bytes(dir / "a.phix") == test::read_bytes(dir / "b.phix"));
        CHECK(test::read_bytes(dir / "a.tsv") == test::read_bytes(dir / "b.tsv"));

        std::vector<phash::PerceptualHash> ys;
        for (const auto& p : images) ys.push_back(phash::ahash(imaging::load_image_file(p)));
        const auto built = psi::build_index(g, HashAlgorithm::AHash64, ys, loaded);
        CHECK(psi::TokenIndex::load(dir / "a.phix") == built.index);
        CHECK(psi::read_reverse_map(dir / "a.tsv") == built.reverse);

        r = test::run_cli({"ingest", "--dir", (dir / "imgs").string(), "--algo", "ahash", "--key-file", key,
                           "--out", (dir / "s.phix").string(), "--map-out", (dir / "s.tsv").string(), "--strict"});
        CHECK(r.status == 1);
        CHECK_FALSE(std::filesystem::exists(dir / "s.phix"));
    }
    SUBCASE("hash list") {
        std::mt19937_64 rng(61);
        std::string list = "# comment\n";
        std::vector<phash::PerceptualHash> ys;
        for (int i = 0; i < 20; ++i) {
            ys.push_back(test::random_hash(rng, HashAlgorithm::Pdq256));
            list += ys.back().to_text() + (i % 2 ? "\r\n" : "\n");
        }
        test::write_text(dir / "h.txt", list);
        r = test::run_cli({"ingest", "--hashes", (dir / "h.txt").string(), "--algo", "pdq", "--key-file", key,
                           "--out", (dir / "h.phix").string(), "--map-out", (dir / "h.tsv").string()});
        CHECK(r.status == 0);
        CHECK(psi::TokenIndex::load(dir / "h.phix") == psi::build_index(g, HashAlgorithm::Pdq256, ys, loaded).index);

        test::write_text(dir / "bad.txt", list + "ahash64:0000000000000000\nnonsense\n");
        r = test::run_cli({"ingest", "--hashes", (dir / "bad.txt").string(), "--algo", "pdq", "--key-file", key,
                           "--out", (dir / "bad.phix").string(), "--map-out", (dir / "bad.tsv").string()});
        CHECK(r.status == 1);
        CHECK(psi::TokenIndex::load(dir / "bad.phix").size() == 20);
    }
    SUBCASE("usage errors") {
        std::filesystem::create_directories(dir / "d");
        test::write_text(dir / "h.txt", "");
        CHECK(test::run_cli({"ingest", "--dir", (dir / "d").string(), "--hashes", (dir / "h.txt").string(), "--algo",
                             "pdq", "--key-file", key, "--out", (dir / "o").string(), "--map-out",
                             (dir / "m").string()})
                  .status == 2);
        CHECK(test::run_cli({"ingest", "--dir", (dir / "d").string(), "--algo", "pdq", "--key-file", key}).status == 2);
        CHECK(test::run_cli({"ingest", "--key-file", key}).status == 2);
        CHECK(test::run_cli({"ingest", "--dir", (dir / "d").string(), "--algo", "pdq", "--key-file",
                             (dir / "nokey").string(), "--out", (dir / "o").string(), "--map-out",
                             (dir / "m").string()})
                  .status == 1);
    }
}

TEST_CASE("phg report argument handling") {
    test::TempDir dir;
    imaging::save_pnm(test::synthetic_image(1, 32, 32), dir / "a.ppm");
    const auto a = (dir / "a.ppm").string();
    CHECK(test::run_cli({"report", "--connect", "127.0.0.1:1", "--algo", "pdq"}).status == 2);
    CHECK(test::run_cli({"report", "--connect", "nowhere", "--algo", "pdq", a}).status == 2);
    CHECK(test::run_cli({"report", "--connect", "127.0.0.1:1", "--algo", "nope", a}).status == 2);

    service::Listener probe({"127.0.0.1", 0});
    const auto dead = "127.0.0.1:" + std::to_string(probe.port());
    probe.close();
    const auto r = test::run_cli({"report", "--connect", dead, "--algo", "pdq", a});
    CHECK(r.status == 1);
    CHECK(r.err.find("connection failed") != std::string::npos);
    CHECK(test::run_cli({"report", "--connect", dead, "--algo", "pdq", (dir / "missing.ppm").string()}).status == 1);
}

TEST_CASE("serve, provider and report processes") {
    test::TempDir dir;
    const auto key = (dir / "k.bin").string();
    const auto images = write_images(dir / "y", 500, 4);
    REQUIRE(test::run_cli({"ingest", "--gen-key", "--key-file", key, "--dir", (dir / "y").string(), "--algo", "pdq",
                           "--out", (dir / "y.phix").string(), "--map-out", (dir / "y.tsv").string()})
                .status == 0);

    test::Background serve({"serve", "--listen", "127.0.0.1:0", "--data-dir", (dir / "data").string()},
                           dir / "serve.err");
    const auto banner = serve.read_line();
    REQUIRE(banner.has_value());
    std::smatch m;
    REQUIRE(std::regex_match(*banner, m, std::regex(R"(listening\t127\.0\.0\.1:(\d+))")));
    const auto addr = "127.0.0.1:" + m[1].str();
    const auto ep = service::Endpoint::parse(addr);

    test::Background provider({"provider", "--connect", addr, "--key-file", key, "--index", (dir / "y.phix").string(),
                               "--map", (dir / "y.tsv").string(), "--log", (dir / "matches.log").string()},
                              dir / "provider.err");
    const psi::Ristretto255Group g;
    const auto default_id = "p-" + to_hex(psi::load_key(g, key).id);
    REQUIRE(test::wait_until([&] { return test::listed_providers(ep, "pdq256") == std::vector{default_id}; }));
    CHECK(std::filesystem::exists(dir / "data" / (default_id + ".phix")));

    imaging::save_pnm(test::synthetic_image(9999, 64, 48), dir / "fresh.ppm");
    const auto r = test::run_cli({"report", "--connect", addr, "--algo", "pdq", images[2].string(),
                                  (dir / "fresh.ppm").string()});
    CHECK(r.status == 0);
    CHECK(r.out == "providers_contacted\t1\ntokens_sent\t2\n");
    REQUIRE(test::wait_until([&] { return !test::read_text(dir / "matches.log").empty(); }));
    const auto logged = test::read_lines(dir / "matches.log");
    REQUIRE(logged.size() == 1);
    CHECK(logged[0].rfind(phash::pdq(imaging::load_image_file(images[2])).hash.to_text() + "\t", 0) == 0);

    const auto ahash_client = test::run_cli({"report", "--connect", addr, "--algo", "ahash", images[0].string()});
    CHECK(ahash_client.out == "providers_contacted\t0\ntokens_sent\t1\n");

    CHECK(provider.stop() == 0);
    CHECK(serve.stop(SIGINT) == 0);
}
