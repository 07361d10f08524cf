// Blinded-exponentiation OPRF over a prime-order group.
//
//   client:   B = H1(x)^r
//   provider: E = B^k
//   client:   token = SHA-256(x || E^(1/r)) = SHA-256(x || H1(x)^k)
//
// x is the canonical text form of a perceptual hash ("pdq256:<hex>"), so
// tokens for different algorithms never collide.
#pragma once

#include "phg/phash.hpp"
#include "phg/psi/group.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace phg::psi {

using Token = std::array<std::uint8_t, 32>;
using KeyId = std::array<std::uint8_t, 8>;

struct OprfKey {
    Scalar scalar;
    KeyId id{};

    static OprfKey generate(const GroupOps& group);
    /// Throws ZeroScalar for a zero scalar.
    static OprfKey from_scalar(const GroupOps& group, const Scalar& scalar);
};

/// Key files hold the raw 32-octet canonical scalar.
void save_key(const OprfKey& key, const std::filesystem::path& path);
/// Throws InvalidScalar / ZeroScalar on a malformed file.
OprfKey load_key(const GroupOps& group, const std::filesystem::path& path);

Element hash_to_group(const GroupOps& group, const phash::PerceptualHash& h);

Element blind(const GroupOps& group, const phash::PerceptualHash& h, const Scalar& r);

/// Re-validates the element's encoding; throws InvalidElement.
Element evaluate(const GroupOps& group, const Element& blinded, const OprfKey& key);

Token unblind_finalize(const GroupOps& group, const Element& evaluated, const Scalar& r,
                       const phash::PerceptualHash& h);

/// The provider-side token, computed with the key and no blinding.
Token direct_token(const GroupOps& group, const phash::PerceptualHash& h, const OprfKey& key);

/// The client's set X with fresh per-item blinding scalars. One instance per
/// (session, provider); never shared.
class ClientSet {
public:
    /// Throws std::invalid_argument on an empty set or mixed algorithms.
    static ClientSet create(const GroupOps& group, std::vector<phash::PerceptualHash> hashes);

    const std::vector<phash::PerceptualHash>& hashes() const { return hashes_; }
    std::size_t size() const { return hashes_.size(); }
    phash::HashAlgorithm algorithm() const { return hashes_.front().algorithm(); }

    std::vector<Element> blinded_elements(const GroupOps& group) const;
    /// Throws std::invalid_argument when evaluated.size() != size().
    std::vector<Token> finalize(const GroupOps& group, std::span<const Element> evaluated) const;

private:
    ClientSet(std::vector<phash::PerceptualHash> hashes, std::vector<Scalar> blinds)
        : hashes_(std::move(hashes)), blinds_(std::move(blinds)) {}

    std::vector<phash::PerceptualHash> hashes_;
    std::vector<Scalar> blinds_;
};

}  // namespace phg::psi
