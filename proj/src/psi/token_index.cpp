#include "phg/psi/token_index.hpp"

#include "../parallel.hpp"
#include "phg/encoding.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace phg::psi {

namespace {

constexpr char kMagic[4] = {'P', 'H', 'I', 'X'};

phash::HashAlgorithm algorithm_from_code(std::uint8_t code) {
    switch (code) {
        case 1: return phash::HashAlgorithm::AHash64;
        case 2: return phash::HashAlgorithm::Pdq256;
        default: throw IndexFormatError("PHIX: unknown algorithm code " + std::to_string(code));
    }
}

}  // namespace

TokenIndex::TokenIndex(phash::HashAlgorithm alg, const KeyId& key_id, std::vector<Token> tokens)
    : alg_(alg), key_id_(key_id), tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
}

bool TokenIndex::contains(const Token& t) const {
    return std::binary_search(tokens_.begin(), tokens_.end(), t);
}

std::vector<std::uint8_t> TokenIndex::serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + tokens_.size() * sizeof(Token));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(alg_));
    out.push_back(static_cast<std::uint8_t>(sizeof(Token)));
    out.insert(out.end(), key_id_.begin(), key_id_.end());
    const std::uint64_t count = tokens_.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(count >> (8 * i)));
    for (const auto& t : tokens_) out.insert(out.end(), t.begin(), t.end());
    return out;
}

TokenIndex TokenIndex::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) throw IndexFormatError("PHIX: truncated header");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw IndexFormatError("PHIX: bad magic");
    }
    if (bytes[4] != kVersion) {
        throw IndexFormatError("PHIX: unsupported version " + std::to_string(bytes[4]));
    }
    const auto alg = algorithm_from_code(bytes[5]);
    if (bytes[6] != sizeof(Token)) {
        throw IndexFormatError("PHIX: unsupported token length " + std::to_string(bytes[6]));
    }
    KeyId key_id{};
    std::copy_n(bytes.begin() + 7, key_id.size(), key_id.begin());
    std::uint64_t count = 0;
    for (int i = 0; i < 8; ++i) count |= static_cast<std::uint64_t>(bytes[15 + i]) << (8 * i);
    const auto body = bytes.subspan(kHeaderSize);
    if (count > body.size() / sizeof(Token) || body.size() != count * sizeof(Token)) {
        throw IndexFormatError("PHIX: body length does not match count");
    }
    std::vector<Token> tokens(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::copy_n(body.begin() + static_cast<std::ptrdiff_t>(i * sizeof(Token)), sizeof(Token),
                    tokens[i].begin());
        if (i > 0 && !(tokens[i - 1] < tokens[i])) {
            throw IndexFormatError("PHIX: tokens are not strictly sorted");
        }
    }
    return TokenIndex(alg, key_id, std::move(tokens));
}

void TokenIndex::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

TokenIndex TokenIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    return deserialize(bytes);
}

BuiltIndex build_index(const GroupOps& group, phash::HashAlgorithm alg,
                       std::span<const phash::PerceptualHash> ys, const OprfKey& key,
                       unsigned workers) {
    for (const auto& y : ys) {
        if (y.algorithm() != alg) {
            throw MixedAlgorithms("index input contains a " +
                                  std::string(phash::algorithm_tag(y.algorithm())) +
                                  " hash; expected " + std::string(phash::algorithm_tag(alg)));
        }
    }
    std::vector<Token> tokens(ys.size());
    detail::parallel_for(ys.size(), workers,
                         [&](std::size_t i) { tokens[i] = direct_token(group, ys[i], key); });
    ReverseMap reverse;
    for (std::size_t i = 0; i < ys.size(); ++i) reverse.emplace(tokens[i], ys[i]);
    return {TokenIndex(alg, key.id, std::move(tokens)), std::move(reverse)};
}

std::vector<Token> intersect(std::span<const Token> client_tokens, const TokenIndex& index) {
    std::vector<Token> out;
    for (const auto& t : client_tokens) {
        if (index.contains(t)) out.push_back(t);
    }
    return out;
}

void write_reverse_map(const ReverseMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [token, hash] : map) {
        out << to_base64(token) << '\t' << hash.to_text() << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

ReverseMap read_reverse_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    ReverseMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        auto fail = [&](const std::string& why) {
            return std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (tab == std::string::npos) throw fail("expected token_b64<TAB>hash_text");
        std::vector<std::uint8_t> raw;
        try {
            raw = from_base64(std::string_view(line).substr(0, tab));
        } catch (const std::invalid_argument&) {
            throw fail("bad base64 token");
        }
        if (raw.size() != sizeof(Token)) throw fail("token must decode to 32 octets");
        Token t{};
        std::copy(raw.begin(), raw.end(), t.begin());
        map.insert_or_assign(t, phash::PerceptualHash::from_text(std::string_view(line).substr(tab + 1)));
    }
    return map;
}

LocalPsiResult run_psi_local(const GroupOps& client_group, const GroupOps& provider_group,
                             const ClientSet& x, std::span<const phash::PerceptualHash> ys,
                             const OprfKey& key) {
    for (const auto& y : ys) {
        if (y.algorithm() != x.algorithm()) {
            throw MixedAlgorithms("client and provider sets use different algorithms");
        }
    }
    // Offline: the provider's index, built without any client input.
    const auto built = build_index(provider_group, x.algorithm(), ys, key);

    // Online.
    const auto blinded = x.blinded_elements(client_group);
    std::vector<Element> evaluated;
    evaluated.reserve(blinded.size());
    for (const auto& b : blinded) evaluated.push_back(evaluate(provider_group, b, key));
    const auto tokens = x.finalize(client_group, evaluated);
    const auto matched = intersect(tokens, built.index);

    LocalPsiResult result;
    result.client_set_size = x.size();
    for (const auto& t : matched) result.provider_learned.push_back(built.reverse.at(t));
    return result;
}

LocalPsiResult run_psi_local(const GroupOps& group, const ClientSet& x,
                             std::span<const phash::PerceptualHash> ys, const OprfKey& key) {
    return run_psi_local(group, group, x, ys, key);
}

}  // namespace phg::psi
