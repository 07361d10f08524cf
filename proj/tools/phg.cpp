// phg: hashing, evaluation, index building and the three protocol roles.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "phg/encoding.hpp"
#include "phg/evalharness.hpp"
#include "phg/psi/token_index.hpp"
#include "phg/service/client.hpp"
#include "phg/service/coordinator.hpp"
#include "phg/service/provider.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace phg;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

phash::HashAlgorithm algo_flag(const std::string& name) {
    try {
        return phash::parse_algorithm(name);
    } catch (const std::invalid_argument&) {
        throw UsageError("unknown algorithm '" + name + "' (expected ahash or pdq)");
    }
}

service::Endpoint endpoint_flag(const std::string& text) {
    try {
        return service::Endpoint::parse(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::string file_error(const std::exception& e) {
    std::string s = e.what();
    for (auto& c : s) {
        if (c == '\t' || c == '\n') c = ' ';
    }
    return s;
}

// Sorted regular files directly inside dir.
std::vector<fs::path> list_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// ---- hash -------------------------------------------------------------------

struct HashArgs {
    std::string algo;
    std::vector<std::string> files;
};

int cmd_hash(const HashArgs& args) {
    const auto alg = algo_flag(args.algo);
    int status = 0;
    for (const auto& file : args.files) {
        try {
            const auto img = imaging::load_image_file(file);
            if (alg == phash::HashAlgorithm::Pdq256) {
                const auto r = phash::pdq(img);
                std::cout << file << '\t' << r.hash.to_text() << '\t' << r.quality << '\n';
            } else {
                std::cout << file << '\t' << phash::ahash(img).to_text() << '\n';
            }
        } catch (const std::exception& e) {
            std::cout << file << "\tERROR:" << file_error(e) << '\n';
            status = 1;
        }
    }
    return status;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string manifest;
    std::string metrics = "ahash,pdq";
    std::string out;
    std::size_t bins = 20;
};

int cmd_eval(const EvalArgs& args) {
    std::vector<phash::HashAlgorithm> metrics;
    std::stringstream list(args.metrics);
    for (std::string name; std::getline(list, name, ',');) {
        if (!name.empty()) metrics.push_back(algo_flag(name));
    }
    if (metrics.empty()) throw UsageError("--metrics is empty");

    const auto entries = eval::read_manifest(args.manifest);
    if (entries.empty()) {
        std::cerr << "no pairs\n";
        return 1;
    }
    std::vector<eval::LabeledPair> pairs;
    for (const auto& e : entries) {
        pairs.push_back({e.label, imaging::load_image_file(e.a), imaging::load_image_file(e.b)});
    }
    const auto table = eval::evaluate_pairs(pairs, metrics);

    fs::create_directories(args.out);
    auto write = [&](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + path.string());
    };
    write(fs::path(args.out) / "table.csv", eval::export_csv(table));
    for (const auto alg : metrics) {
        const auto hist = eval::histogram(table.scores.at(alg), args.bins);
        write(fs::path(args.out) / ("histogram_" + std::string(phash::algorithm_tag(alg)) + ".csv"),
              eval::export_csv(hist));
    }
    return 0;
}

// ---- ingest -----------------------------------------------------------------

struct IngestArgs {
    std::string dir;
    std::string hashes;
    std::string algo;
    std::string key_file;
    std::string out;
    std::string map_out;
    bool strict = false;
    bool gen_key = false;
};

int cmd_ingest(const IngestArgs& args) {
    const psi::Ristretto255Group group;
    if (args.gen_key) {
        if (fs::exists(args.key_file)) {
            std::cerr << "refusing to overwrite existing key file " << args.key_file << "\n";
            return 1;
        }
        const auto key = psi::OprfKey::generate(group);
        psi::save_key(key, args.key_file);
        std::cerr << "generated key " << to_hex(key.id) << "\n";
    }
    if (args.dir.empty() && args.hashes.empty()) {
        if (args.gen_key) return 0;
        throw UsageError("one of --dir or --hashes is required");
    }
    if (args.out.empty() || args.map_out.empty() || args.algo.empty()) {
        throw UsageError("--algo, --out and --map-out are required to build an index");
    }
    const auto alg = algo_flag(args.algo);
    const auto key = psi::load_key(group, args.key_file);

    std::vector<phash::PerceptualHash> ys;
    int status = 0;
    if (!args.dir.empty()) {
        for (const auto& file : list_dir(args.dir)) {
            try {
                ys.push_back(phash::compute_hash(imaging::load_image_file(file), alg));
            } catch (const std::exception& e) {
                std::cerr << file.string() << ": " << e.what() << "\n";
                status = 1;
            }
        }
    } else {
        std::ifstream in(args.hashes);
        if (!in) throw std::runtime_error("cannot open " + args.hashes);
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            try {
                auto h = phash::PerceptualHash::from_text(line);
                if (h.algorithm() != alg) throw phash::AlgorithmMismatch("algorithm differs from --algo");
                ys.push_back(std::move(h));
            } catch (const std::exception& e) {
                std::cerr << args.hashes << ":" << line_no << ": " << e.what() << "\n";
                status = 1;
            }
        }
    }
    if (status != 0 && args.strict) {
        std::cerr << "not writing an index (--strict)\n";
        return 1;
    }
    const auto built = psi::build_index(group, alg, ys, key);
    built.index.save(args.out);
    psi::write_reverse_map(built.reverse, args.map_out);
    std::cerr << "indexed " << built.index.size() << " tokens\n";
    return status;
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
    std::string listen = "127.0.0.1:7420";
    std::string data_dir;
};

// Blocks SIGINT/SIGTERM in every thread; the main thread then waits for them.
sigset_t block_shutdown_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

int cmd_serve(const ServeArgs& args) {
    service::CoordinatorOptions options;
    options.listen = endpoint_flag(args.listen);
    if (!args.data_dir.empty()) {
        options.data_dir = args.data_dir;
    } else if (const char* env = std::getenv("PHG_DATA_DIR"); env && *env) {
        options.data_dir = env;
    } else {
        options.data_dir = "phg-data";
    }
    const auto signals = block_shutdown_signals();
    service::Coordinator coordinator(options);
    coordinator.start();
    std::cout << "listening\t" << options.listen.host << ':' << coordinator.port() << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    coordinator.stop();
    return 0;
}

// ---- provider ---------------------------------------------------------------

struct ProviderArgs {
    std::string connect;
    std::string key_file;
    std::string index;
    std::string map;
    std::string log;
    std::string id;
};

int cmd_provider(const ProviderArgs& args) {
    static const psi::Ristretto255Group group;
    service::ProviderOptions options;
    options.coordinator = endpoint_flag(args.connect);
    options.group = &group;
    options.key = psi::load_key(group, args.key_file);
    options.index = std::make_shared<const psi::TokenIndex>(psi::TokenIndex::load(args.index));
    options.reverse = psi::read_reverse_map(args.map);
    options.match_log = args.log;
    options.provider_id = args.id.empty() ? "p-" + to_hex(options.key.id) : args.id;

    const auto signals = block_shutdown_signals();
    service::ProviderAgent agent(std::move(options));
    std::thread runner([&] { agent.run(); });
    int sig = 0;
    sigwait(&signals, &sig);
    agent.stop();
    runner.join();
    return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
    std::string connect;
    std::string algo;
    std::vector<std::string> files;
};

int cmd_report(const ReportArgs& args) {
    const auto alg = algo_flag(args.algo);
    std::vector<phash::PerceptualHash> x;
    for (const auto& file : args.files) {
        try {
            x.push_back(phash::compute_hash(imaging::load_image_file(file), alg));
        } catch (const std::exception& e) {
            std::cerr << file << ": " << e.what() << "\n";
            return 1;
        }
    }
    const psi::Ristretto255Group group;
    try {
        const auto receipt = service::client_report(endpoint_flag(args.connect), group, x);
        std::cout << "providers_contacted\t" << receipt.providers_contacted << '\n'
                  << "tokens_sent\t" << receipt.tokens_sent << '\n';
    } catch (const service::ProtocolError& e) {
        std::cerr << "error " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const service::ConnectionFailed& e) {
        std::cerr << "connection failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perceptual hashing and private hash matching"};
    app.require_subcommand(1);

    HashArgs hash_args;
    auto* hash = app.add_subcommand("hash", "Print the perceptual hash of each file");
    hash->add_option("--algo", hash_args.algo, "ahash or pdq")->required();
    hash->add_option("files", hash_args.files, "Image files (PGM, PPM, PNG)")->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Similarity table and histograms for a pair manifest");
    eval->add_option("--manifest", eval_args.manifest, "CSV of label,pathA,pathB")->required();
    eval->add_option("--metrics", eval_args.metrics, "Comma-separated algorithms")->capture_default_str();
    eval->add_option("--out", eval_args.out, "Output directory")->required();
    eval->add_option("--bins", eval_args.bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Build a token index and reverse map");
    auto* dir_opt = ingest->add_option("--dir", ingest_args.dir, "Directory of images")->check(CLI::ExistingDirectory);
    ingest->add_option("--hashes", ingest_args.hashes, "File of hash texts, one per line")
        ->check(CLI::ExistingFile)
        ->excludes(dir_opt);
    ingest->add_option("--algo", ingest_args.algo, "ahash or pdq");
    ingest->add_option("--key-file", ingest_args.key_file, "Raw 32-octet key")->required();
    ingest->add_option("--out", ingest_args.out, "PHIX index to write");
    ingest->add_option("--map-out", ingest_args.map_out, "Reverse map TSV to write");
    ingest->add_flag("--strict", ingest_args.strict, "Write nothing if any input fails");
    ingest->add_flag("--gen-key", ingest_args.gen_key, "Generate a new key into --key-file first");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the coordinator");
    serve->add_option("--listen", serve_args.listen, "host:port")->capture_default_str();
    serve->add_option("--data-dir", serve_args.data_dir, "Index directory (default $PHG_DATA_DIR or ./phg-data)");

    ProviderArgs provider_args;
    auto* provider = app.add_subcommand("provider", "Run a provider agent");
    provider->add_option("--connect", provider_args.connect, "Coordinator host:port")->required();
    provider->add_option("--key-file", provider_args.key_file)->required()->check(CLI::ExistingFile);
    provider->add_option("--index", provider_args.index)->required()->check(CLI::ExistingFile);
    provider->add_option("--map", provider_args.map)->required()->check(CLI::ExistingFile);
    provider->add_option("--log", provider_args.log)->required();
    provider->add_option("--id", provider_args.id, "Provider id (default p-<key id>)");

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "Report images without revealing their hashes");
    report->add_option("--connect", report_args.connect, "Coordinator host:port")->required();
    report->add_option("--algo", report_args.algo, "ahash or pdq")->required();
    report->add_option("files", report_args.files, "Image files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*hash) return cmd_hash(hash_args);
        if (*eval) return cmd_eval(eval_args);
        if (*ingest) return cmd_ingest(ingest_args);
        if (*serve) return cmd_serve(serve_args);
        if (*provider) return cmd_provider(provider_args);
        if (*report) return cmd_report(report_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
