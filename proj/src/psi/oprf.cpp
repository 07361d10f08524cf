#include "phg/psi/oprf.hpp"

#include "phg/encoding.hpp"

#include <sodium.h>

#include <fstream>
#include <iterator>

namespace phg::psi {

namespace {

constexpr std::string_view kKeyIdDomain = "phg/oprf-key-id/v1";

std::string hash_input(const phash::PerceptualHash& h) { return h.to_text(); }

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Token finalize_token(const std::string& text, const Octets32& encoded) {
    ensure_sodium();
    Token t{};
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(text.data()), text.size());
    crypto_hash_sha256_update(&st, encoded.data(), encoded.size());
    crypto_hash_sha256_final(&st, t.data());
    return t;
}

}  // namespace

OprfKey OprfKey::generate(const GroupOps& group) {
    return from_scalar(group, group.scalar_random());
}

OprfKey OprfKey::from_scalar(const GroupOps& group, const Scalar& scalar) {
    if (group.is_zero(scalar)) throw ZeroScalar("OPRF key must be nonzero");
    ensure_sodium();
    std::array<std::uint8_t, crypto_hash_sha256_BYTES> digest{};
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(kKeyIdDomain.data()),
                              kKeyIdDomain.size());
    crypto_hash_sha256_update(&st, scalar.bytes.data(), scalar.bytes.size());
    crypto_hash_sha256_final(&st, digest.data());
    OprfKey key{scalar, {}};
    std::copy_n(digest.begin(), key.id.size(), key.id.begin());
    return key;
}

void save_key(const OprfKey& key, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write key file " + path.string());
    out.write(reinterpret_cast<const char*>(key.scalar.bytes.data()),
              static_cast<std::streamsize>(key.scalar.bytes.size()));
    if (!out) throw std::runtime_error("short write to key file " + path.string());
}

OprfKey load_key(const GroupOps& group, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open key file " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    return OprfKey::from_scalar(group, group.scalar_from_bytes(bytes));
}

Element hash_to_group(const GroupOps& group, const phash::PerceptualHash& h) {
    return group.hash_to_group(as_bytes(hash_input(h)));
}

Element blind(const GroupOps& group, const phash::PerceptualHash& h, const Scalar& r) {
    if (group.is_zero(r)) throw ZeroScalar("blinding scalar must be nonzero");
    return group.exp(hash_to_group(group, h), r);
}

Element evaluate(const GroupOps& group, const Element& blinded, const OprfKey& key) {
    return group.exp(group.decode(blinded.bytes), key.scalar);
}

Token unblind_finalize(const GroupOps& group, const Element& evaluated, const Scalar& r,
                       const phash::PerceptualHash& h) {
    if (group.is_zero(r)) throw ZeroScalar("blinding scalar must be nonzero");
    const auto unblinded = group.exp(evaluated, group.scalar_invert(r));
    return finalize_token(hash_input(h), group.encode(unblinded));
}

Token direct_token(const GroupOps& group, const phash::PerceptualHash& h, const OprfKey& key) {
    return finalize_token(hash_input(h), group.encode(group.exp(hash_to_group(group, h), key.scalar)));
}

ClientSet ClientSet::create(const GroupOps& group, std::vector<phash::PerceptualHash> hashes) {
    if (hashes.empty()) throw std::invalid_argument("client set must not be empty");
    for (const auto& h : hashes) {
        if (h.algorithm() != hashes.front().algorithm()) {
            throw std::invalid_argument("client set mixes hash algorithms");
        }
    }
    std::vector<Scalar> blinds;
    blinds.reserve(hashes.size());
    for (std::size_t i = 0; i < hashes.size(); ++i) blinds.push_back(group.scalar_random());
    return ClientSet(std::move(hashes), std::move(blinds));
}

std::vector<Element> ClientSet::blinded_elements(const GroupOps& group) const {
    std::vector<Element> out;
    out.reserve(hashes_.size());
    for (std::size_t i = 0; i < hashes_.size(); ++i) out.push_back(blind(group, hashes_[i], blinds_[i]));
    return out;
}

std::vector<Token> ClientSet::finalize(const GroupOps& group,
                                       std::span<const Element> evaluated) const {
    if (evaluated.size() != hashes_.size()) {
        throw std::invalid_argument("expected " + std::to_string(hashes_.size()) +
                                    " evaluated elements, got " +
                                    std::to_string(evaluated.size()));
    }
    std::vector<Token> out;
    out.reserve(hashes_.size());
    for (std::size_t i = 0; i < hashes_.size(); ++i) {
        out.push_back(unblind_finalize(group, evaluated[i], blinds_[i], hashes_[i]));
    }
    return out;
}

}  // namespace phg::psi
