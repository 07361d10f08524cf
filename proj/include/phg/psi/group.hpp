// Prime-order group abstraction used by the OPRF, with a ristretto255
// instantiation, a small insecure test group and an operation-counting
// decorator.
#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace phg::psi {

inline constexpr std::size_t kEncodedLength = 32;
using Octets32 = std::array<std::uint8_t, kEncodedLength>;

/// A group element, held by its canonical 32-octet encoding.
struct Element {
    Octets32 bytes{};
    friend bool operator==(const Element&, const Element&) = default;
};

/// An exponent, canonical little-endian modulo the group order.
struct Scalar {
    Octets32 bytes{};
    friend bool operator==(const Scalar&, const Scalar&) = default;
};

class InvalidElement : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ZeroScalar : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidScalar : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class GroupOps {
public:
    virtual ~GroupOps() = default;

    virtual std::string_view name() const = 0;

    virtual Element hash_to_group(std::span<const std::uint8_t> input) const = 0;
    /// Uniform nonzero scalar.
    virtual Scalar scalar_random() const = 0;
    /// Throws ZeroScalar for zero.
    virtual Scalar scalar_invert(const Scalar& s) const = 0;
    virtual Element exp(const Element& e, const Scalar& s) const = 0;
    virtual Element identity() const = 0;
    virtual bool is_zero(const Scalar& s) const = 0;

    Octets32 encode(const Element& e) const { return e.bytes; }
    /// Throws InvalidElement unless the octets are the canonical encoding of
    /// a group element.
    virtual Element decode(std::span<const std::uint8_t> octets) const = 0;
    /// Throws InvalidScalar unless the octets are a canonical scalar.
    virtual Scalar scalar_from_bytes(std::span<const std::uint8_t> octets) const = 0;
};

/// ristretto255 via libsodium.
class Ristretto255Group final : public GroupOps {
public:
    Ristretto255Group();

    std::string_view name() const override { return "ristretto255"; }
    Element hash_to_group(std::span<const std::uint8_t> input) const override;
    Scalar scalar_random() const override;
    Scalar scalar_invert(const Scalar& s) const override;
    Element exp(const Element& e, const Scalar& s) const override;
    Element identity() const override { return Element{}; }
    bool is_zero(const Scalar& s) const override;
    Element decode(std::span<const std::uint8_t> octets) const override;
    Scalar scalar_from_bytes(std::span<const std::uint8_t> octets) const override;
};

/// Quadratic residues modulo the safe prime p = 2q + 1, with q = 2147483543.
/// Order ~2^31: INSECURE, for tests only. Elements encode as p-residues in
/// little-endian, zero-padded to 32 octets; the identity is 1.
class ToyGroup final : public GroupOps {
public:
    static constexpr std::uint64_t kOrder = 2147483543ull;
    static constexpr std::uint64_t kModulus = 2 * kOrder + 1;

    std::string_view name() const override { return "toy-qr-p32"; }
    Element hash_to_group(std::span<const std::uint8_t> input) const override;
    Scalar scalar_random() const override;
    Scalar scalar_invert(const Scalar& s) const override;
    Element exp(const Element& e, const Scalar& s) const override;
    Element identity() const override;
    bool is_zero(const Scalar& s) const override;
    Element decode(std::span<const std::uint8_t> octets) const override;
    Scalar scalar_from_bytes(std::span<const std::uint8_t> octets) const override;

    static Scalar scalar_of(std::uint64_t v);
    static Element element_of(std::uint64_t v);
    static std::uint64_t value_of(const Octets32& bytes);
};

/// Forwards to an inner group and counts the operations that matter for the
/// client's online cost.
class CountingGroup final : public GroupOps {
public:
    explicit CountingGroup(const GroupOps& inner) : inner_(inner) {}

    std::string_view name() const override { return inner_.name(); }
    Element hash_to_group(std::span<const std::uint8_t> input) const override {
        ++hashes_;
        return inner_.hash_to_group(input);
    }
    Scalar scalar_random() const override { return inner_.scalar_random(); }
    Scalar scalar_invert(const Scalar& s) const override {
        ++inversions_;
        return inner_.scalar_invert(s);
    }
    Element exp(const Element& e, const Scalar& s) const override {
        ++exponentiations_;
        return inner_.exp(e, s);
    }
    Element identity() const override { return inner_.identity(); }
    bool is_zero(const Scalar& s) const override { return inner_.is_zero(s); }
    Element decode(std::span<const std::uint8_t> octets) const override {
        return inner_.decode(octets);
    }
    Scalar scalar_from_bytes(std::span<const std::uint8_t> octets) const override {
        return inner_.scalar_from_bytes(octets);
    }

    std::uint64_t exponentiations() const { return exponentiations_; }
    std::uint64_t inversions() const { return inversions_; }
    std::uint64_t hashes() const { return hashes_; }
    void reset() {
        exponentiations_ = 0;
        inversions_ = 0;
        hashes_ = 0;
    }

private:
    const GroupOps& inner_;
    mutable std::atomic<std::uint64_t> exponentiations_{0};
    mutable std::atomic<std::uint64_t> inversions_{0};
    mutable std::atomic<std::uint64_t> hashes_{0};
};

}  // namespace phg::psi
