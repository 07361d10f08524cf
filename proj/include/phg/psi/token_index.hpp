// The provider's precomputed token index, its PHIX file format, and the
// client-side intersection and local protocol driver.
//
// PHIX layout (all multi-octet integers little-endian):
//   "PHIX" | version u8 = 1 | algorithm u8 (1 = ahash64, 2 = pdq256)
//   | token_len u8 = 32 | key_id[8] | count u64 | count * 32 octets, sorted
#pragma once

#include "phg/phash.hpp"
#include "phg/psi/group.hpp"
#include "phg/psi/oprf.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace phg::psi {

class IndexFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MixedAlgorithms : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class TokenIndex {
public:
    static constexpr std::uint8_t kVersion = 1;
    static constexpr std::size_t kHeaderSize = 4 + 1 + 1 + 1 + 8 + 8;

    TokenIndex(phash::HashAlgorithm alg, const KeyId& key_id, std::vector<Token> tokens);

    phash::HashAlgorithm algorithm() const { return alg_; }
    const KeyId& key_id() const { return key_id_; }
    std::size_t size() const { return tokens_.size(); }
    std::span<const Token> tokens() const { return tokens_; }

    bool contains(const Token& t) const;

    std::vector<std::uint8_t> serialize() const;
    /// Throws IndexFormatError on any deviation from the layout, including
    /// unsorted or duplicated tokens.
    static TokenIndex deserialize(std::span<const std::uint8_t> bytes);

    void save(const std::filesystem::path& path) const;
    static TokenIndex load(const std::filesystem::path& path);

    friend bool operator==(const TokenIndex&, const TokenIndex&) = default;

private:
    phash::HashAlgorithm alg_;
    KeyId key_id_;
    std::vector<Token> tokens_;
};

using ReverseMap = std::map<Token, phash::PerceptualHash>;

struct BuiltIndex {
    TokenIndex index;
    ReverseMap reverse;
};

/// Throws MixedAlgorithms when some y is not of algorithm `alg`.
BuiltIndex build_index(const GroupOps& group, phash::HashAlgorithm alg,
                       std::span<const phash::PerceptualHash> ys, const OprfKey& key,
                       unsigned workers = 0);

/// Client tokens present in the index, in client order, duplicates kept.
std::vector<Token> intersect(std::span<const Token> client_tokens, const TokenIndex& index);

/// TSV with one `token_b64<TAB>hash_text` line per entry, in token order.
void write_reverse_map(const ReverseMap& map, const std::filesystem::path& path);
ReverseMap read_reverse_map(const std::filesystem::path& path);

struct LocalPsiResult {
    std::vector<phash::PerceptualHash> provider_learned;  // X ∩ Y, client order
    std::size_t client_set_size = 0;
};

/// In-process protocol run: blind, evaluate, finalize, intersect, then the
/// provider maps matched tokens back to hashes. The client's operations go
/// through `client_group`, the provider's through `provider_group`; both must
/// be the same underlying group.
LocalPsiResult run_psi_local(const GroupOps& client_group, const GroupOps& provider_group,
                             const ClientSet& x, std::span<const phash::PerceptualHash> ys,
                             const OprfKey& key);
LocalPsiResult run_psi_local(const GroupOps& group, const ClientSet& x,
                             std::span<const phash::PerceptualHash> ys, const OprfKey& key);

}  // namespace phg::psi
