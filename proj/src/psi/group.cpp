#include "phg/psi/group.hpp"

#include "phg/encoding.hpp"

#include <sodium.h>

#include <algorithm>
#include <string>

namespace phg::psi {

namespace {

constexpr std::string_view kHashToGroupDomain = "phg/hash-to-group/v1";

bool all_zero(std::span<const std::uint8_t> bytes) {
    return std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; });
}

void require_length(std::span<const std::uint8_t> octets, const char* what) {
    if (octets.size() != kEncodedLength) {
        throw InvalidElement(std::string(what) + " must be 32 octets, got " +
                             std::to_string(octets.size()));
    }
}

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, base, m);
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    return result;
}

}  // namespace

// ---- ristretto255 ----------------------------------------------------------

Ristretto255Group::Ristretto255Group() { ensure_sodium(); }

Element Ristretto255Group::hash_to_group(std::span<const std::uint8_t> input) const {
    std::array<std::uint8_t, crypto_hash_sha512_BYTES> wide{};
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, reinterpret_cast<const unsigned char*>(kHashToGroupDomain.data()),
                              kHashToGroupDomain.size());
    crypto_hash_sha512_update(&st, input.data(), input.size());
    crypto_hash_sha512_final(&st, wide.data());
    Element e;
    crypto_core_ristretto255_from_hash(e.bytes.data(), wide.data());
    return e;
}

Scalar Ristretto255Group::scalar_random() const {
    Scalar s;
    do {
        crypto_core_ristretto255_scalar_random(s.bytes.data());
    } while (is_zero(s));
    return s;
}

Scalar Ristretto255Group::scalar_invert(const Scalar& s) const {
    Scalar out;
    if (crypto_core_ristretto255_scalar_invert(out.bytes.data(), s.bytes.data()) != 0) {
        throw ZeroScalar("cannot invert the zero scalar");
    }
    return out;
}

Element Ristretto255Group::exp(const Element& e, const Scalar& s) const {
    if (all_zero(e.bytes) || is_zero(s)) return identity();
    Element out;
    if (crypto_scalarmult_ristretto255(out.bytes.data(), s.bytes.data(), e.bytes.data()) != 0) {
        throw InvalidElement("ristretto255 exponentiation on an invalid element");
    }
    return out;
}

bool Ristretto255Group::is_zero(const Scalar& s) const { return all_zero(s.bytes); }

Element Ristretto255Group::decode(std::span<const std::uint8_t> octets) const {
    require_length(octets, "ristretto255 element");
    Element e;
    std::copy(octets.begin(), octets.end(), e.bytes.begin());
    if (all_zero(e.bytes)) return e;  // identity
    if (crypto_core_ristretto255_is_valid_point(e.bytes.data()) != 1) {
        throw InvalidElement("not a canonical ristretto255 encoding");
    }
    return e;
}

Scalar Ristretto255Group::scalar_from_bytes(std::span<const std::uint8_t> octets) const {
    if (octets.size() != kEncodedLength) throw InvalidScalar("scalar must be 32 octets");
    std::array<std::uint8_t, 64> wide{};
    std::copy(octets.begin(), octets.end(), wide.begin());
    Scalar reduced;
    crypto_core_ristretto255_scalar_reduce(reduced.bytes.data(), wide.data());
    if (!std::equal(octets.begin(), octets.end(), reduced.bytes.begin())) {
        throw InvalidScalar("scalar is not reduced modulo the group order");
    }
    return reduced;
}

// ---- toy group -------------------------------------------------------------

Scalar ToyGroup::scalar_of(std::uint64_t v) {
    Scalar s;
    for (std::size_t i = 0; i < 8; ++i) s.bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return s;
}

Element ToyGroup::element_of(std::uint64_t v) {
    Element e;
    for (std::size_t i = 0; i < 8; ++i) e.bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return e;
}

std::uint64_t ToyGroup::value_of(const Octets32& bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

Element ToyGroup::hash_to_group(std::span<const std::uint8_t> input) const {
    ensure_sodium();
    std::array<std::uint8_t, crypto_hash_sha256_BYTES> digest{};
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, reinterpret_cast<const unsigned char*>(kHashToGroupDomain.data()),
                              kHashToGroupDomain.size());
    crypto_hash_sha256_update(&st, input.data(), input.size());
    crypto_hash_sha256_final(&st, digest.data());
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
    // Squaring a unit lands in the order-q subgroup of quadratic residues.
    const std::uint64_t unit = v % (kModulus - 1) + 1;
    return element_of(mul_mod(unit, unit, kModulus));
}

Scalar ToyGroup::scalar_random() const {
    ensure_sodium();
    return scalar_of(static_cast<std::uint64_t>(randombytes_uniform(
                         static_cast<std::uint32_t>(kOrder - 1))) +
                     1);
}

Scalar ToyGroup::scalar_invert(const Scalar& s) const {
    const auto v = value_of(s.bytes);
    if (v % kOrder == 0) throw ZeroScalar("cannot invert the zero scalar");
    return scalar_of(pow_mod(v, kOrder - 2, kOrder));
}

Element ToyGroup::exp(const Element& e, const Scalar& s) const {
    return element_of(pow_mod(value_of(e.bytes), value_of(s.bytes), kModulus));
}

Element ToyGroup::identity() const { return element_of(1); }

bool ToyGroup::is_zero(const Scalar& s) const { return value_of(s.bytes) % kOrder == 0; }

Element ToyGroup::decode(std::span<const std::uint8_t> octets) const {
    require_length(octets, "toy group element");
    Element e;
    std::copy(octets.begin(), octets.end(), e.bytes.begin());
    if (!all_zero(std::span(e.bytes).subspan(8))) {
        throw InvalidElement("toy group element has nonzero high octets");
    }
    const auto v = value_of(e.bytes);
    if (v == 0 || v >= kModulus || pow_mod(v, kOrder, kModulus) != 1) {
        throw InvalidElement("not an element of the toy group");
    }
    return e;
}

Scalar ToyGroup::scalar_from_bytes(std::span<const std::uint8_t> octets) const {
    if (octets.size() != kEncodedLength) throw InvalidScalar("scalar must be 32 octets");
    Scalar s;
    std::copy(octets.begin(), octets.end(), s.bytes.begin());
    if (!all_zero(std::span(s.bytes).subspan(8)) || value_of(s.bytes) >= kOrder) {
        throw InvalidScalar("scalar is not reduced modulo the group order");
    }
    return s;
}

}  // namespace phg::psi
