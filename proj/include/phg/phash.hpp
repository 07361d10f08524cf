// Perceptual hashes (aHash-64, PDQ-256), normalized Hamming distance and
// threshold matching.
#pragma once

#include "phg/imaging.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phg::phash {

enum class HashAlgorithm : std::uint8_t { AHash64 = 1, Pdq256 = 2 };

constexpr std::uint32_t bit_length(HashAlgorithm alg) {
    return alg == HashAlgorithm::AHash64 ? 64 : 256;
}

/// "ahash64" / "pdq256", the tag used in hash text.
std::string_view algorithm_tag(HashAlgorithm alg);

/// Accepts the tag as well as the short CLI names "ahash" and "pdq".
HashAlgorithm parse_algorithm(std::string_view name);

class AlgorithmMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class HashParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Fixed-length bit string tagged with its algorithm. Bit i is stored
/// MSB-first: bit 0 is the high bit of byte 0. Bits follow the underlying
/// grid in row-major order.
class PerceptualHash {
public:
    /// All-zero hash.
    explicit PerceptualHash(HashAlgorithm alg);
    /// Throws HashParseError when bytes.size() != bit_length(alg) / 8.
    PerceptualHash(HashAlgorithm alg, std::span<const std::uint8_t> bytes);

    /// Parses "<tag>:<lowercase hex>"; uppercase hex is accepted on input.
    static PerceptualHash from_text(std::string_view text);

    HashAlgorithm algorithm() const noexcept { return alg_; }
    std::uint32_t bit_count() const noexcept { return bit_length(alg_); }
    std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

    bool bit(std::uint32_t i) const { return (bytes_[i / 8] >> (7 - i % 8)) & 1u; }
    void set_bit(std::uint32_t i, bool value);

    std::string hex() const;
    std::string to_text() const;

    friend bool operator==(const PerceptualHash&, const PerceptualHash&) = default;
    friend auto operator<=>(const PerceptualHash&, const PerceptualHash&) = default;

private:
    HashAlgorithm alg_;
    std::vector<std::uint8_t> bytes_;
};

struct HashDistance {
    std::uint32_t raw = 0;   // differing bits
    std::uint32_t bits = 0;  // k

    double normalized() const { return static_cast<double>(raw) / bits; }
    friend bool operator==(const HashDistance&, const HashDistance&) = default;
};

/// A threshold expressed as the exact fraction numerator / denominator.
struct Threshold {
    std::uint32_t numerator;
    std::uint32_t denominator;

    double value() const { return static_cast<double>(numerator) / denominator; }
};

struct MatchPolicy {
    Threshold pdq256{31, 256};
    Threshold ahash64{10, 64};

    const Threshold& threshold(HashAlgorithm alg) const {
        return alg == HashAlgorithm::AHash64 ? ahash64 : pdq256;
    }
};

struct PdqResult {
    PerceptualHash hash{HashAlgorithm::Pdq256};
    int quality = 0;
};

PerceptualHash ahash(const imaging::ImageBuffer& img);
PdqResult pdq(const imaging::ImageBuffer& img);

/// Dispatch on algorithm; returns only the hash.
PerceptualHash compute_hash(const imaging::ImageBuffer& img, HashAlgorithm alg);

using Matrix64 = std::array<std::array<double, 64>, 64>;
using Matrix16 = std::array<std::array<double, 16>, 16>;

/// Orthonormal DCT-II of a 64x64 block restricted to frequencies 1..16 on
/// both axes. out[i][j] pairs row frequency i+1 with column frequency j+1.
Matrix16 dct16_from64(const Matrix64& block);

/// Value of the 64-point orthonormal DCT-II basis function of the given
/// frequency at sample u.
double dct_basis(int frequency, int u);

HashDistance hamming(const PerceptualHash& a, const PerceptualHash& b);

/// Strict: normalized distance < threshold.
bool is_match(const PerceptualHash& a, const PerceptualHash& b, const MatchPolicy& policy);

}  // namespace phg::phash
