#include "phg/phash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace phg::phash {

using imaging::ImageBuffer;

std::string_view algorithm_tag(HashAlgorithm alg) {
    return alg == HashAlgorithm::AHash64 ? "ahash64" : "pdq256";
}

HashAlgorithm parse_algorithm(std::string_view name) {
    if (name == "ahash64" || name == "ahash") return HashAlgorithm::AHash64;
    if (name == "pdq256" || name == "pdq") return HashAlgorithm::Pdq256;
    throw std::invalid_argument("unknown hash algorithm '" + std::string(name) + "'");
}

PerceptualHash::PerceptualHash(HashAlgorithm alg) : alg_(alg), bytes_(bit_length(alg) / 8, 0) {}

PerceptualHash::PerceptualHash(HashAlgorithm alg, std::span<const std::uint8_t> bytes)
    : alg_(alg), bytes_(bytes.begin(), bytes.end()) {
    if (bytes_.size() != bit_length(alg) / 8) {
        throw HashParseError(std::string(algorithm_tag(alg)) + " hash must be " +
                             std::to_string(bit_length(alg) / 8) + " bytes, got " +
                             std::to_string(bytes_.size()));
    }
}

PerceptualHash PerceptualHash::from_text(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw HashParseError("hash text must look like '<algo>:<hex>'");
    }
    HashAlgorithm alg;
    try {
        alg = parse_algorithm(text.substr(0, colon));
    } catch (const std::invalid_argument& e) {
        throw HashParseError(e.what());
    }
    const auto hex = text.substr(colon + 1);
    if (hex.size() != bit_length(alg) / 4) {
        throw HashParseError("hash hex has wrong length for " + std::string(algorithm_tag(alg)));
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<std::uint8_t> bytes(hex.size() / 2);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw HashParseError("invalid hex digit in hash text");
        bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return PerceptualHash(alg, bytes);
}

void PerceptualHash::set_bit(std::uint32_t i, bool value) {
    const auto mask = static_cast<std::uint8_t>(1u << (7 - i % 8));
    if (value) {
        bytes_[i / 8] |= mask;
    } else {
        bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
    }
}

std::string PerceptualHash::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes_.size() * 2);
    for (auto b : bytes_) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

std::string PerceptualHash::to_text() const {
    return std::string(algorithm_tag(alg_)) + ":" + hex();
}

PerceptualHash ahash(const ImageBuffer& img) {
    const auto small = imaging::resize_box(imaging::to_luminance(img), 8, 8);
    const auto samples = small.data();
    std::uint32_t sum = 0;
    for (auto v : samples) sum += v;
    // sample >= sum / 64, kept in integers.
    PerceptualHash h(HashAlgorithm::AHash64);
    for (std::uint32_t i = 0; i < 64; ++i) {
        h.set_bit(i, 64u * samples[i] >= sum);
    }
    return h;
}

namespace {

constexpr int kPdqDim = 64;
constexpr int kPdqPasses = 2;
constexpr int kPdqMinQualityDim = 16;

// Running-sum box filter with a window that shrinks at both ends, matching
// the PDQ reference ("Jarosz" filter building block).
void box_1d(const double* in, double* out, int length, int stride, int window) {
    const int half = (window + 2) / 2;
    const int phase1 = half - 1;
    const int phase2 = window - half + 1;
    const int phase3 = length - window;
    const int phase4 = half - 1;

    int li = 0;
    int ri = 0;
    int oi = 0;
    double sum = 0.0;
    int current = 0;
    for (int i = 0; i < phase1; ++i) {
        sum += in[ri];
        ++current;
        ri += stride;
    }
    for (int i = 0; i < phase2; ++i) {
        sum += in[ri];
        ++current;
        out[oi] = sum / current;
        ri += stride;
        oi += stride;
    }
    for (int i = 0; i < phase3; ++i) {
        sum += in[ri];
        sum -= in[li];
        out[oi] = sum / current;
        li += stride;
        ri += stride;
        oi += stride;
    }
    for (int i = 0; i < phase4; ++i) {
        sum -= in[li];
        --current;
        out[oi] = sum / current;
        li += stride;
        oi += stride;
    }
}

Matrix64 downsample_to_64(const ImageBuffer& luma) {
    const int rows = static_cast<int>(luma.height());
    const int cols = static_cast<int>(luma.width());
    std::vector<double> a(luma.data().begin(), luma.data().end());
    Matrix64 out{};
    if (rows == kPdqDim && cols == kPdqDim) {
        for (int i = 0; i < kPdqDim; ++i)
            for (int j = 0; j < kPdqDim; ++j) out[i][j] = a[i * kPdqDim + j];
        return out;
    }
    const int window_along_rows = (cols + 2 * kPdqDim - 1) / (2 * kPdqDim);
    const int window_along_cols = (rows + 2 * kPdqDim - 1) / (2 * kPdqDim);
    std::vector<double> b(a.size());
    for (int pass = 0; pass < kPdqPasses; ++pass) {
        for (int i = 0; i < rows; ++i) {
            box_1d(&a[static_cast<std::size_t>(i) * cols], &b[static_cast<std::size_t>(i) * cols],
                   cols, 1, window_along_rows);
        }
        for (int j = 0; j < cols; ++j) {
            box_1d(&b[j], &a[j], rows, cols, window_along_cols);
        }
    }
    for (int i = 0; i < kPdqDim; ++i) {
        const int si = static_cast<int>(((i + 0.5) * rows) / kPdqDim);
        for (int j = 0; j < kPdqDim; ++j) {
            const int sj = static_cast<int>(((j + 0.5) * cols) / kPdqDim);
            out[i][j] = a[static_cast<std::size_t>(si) * cols + sj];
        }
    }
    return out;
}

int gradient_quality(const Matrix64& m) {
    int count = 0;
    for (int i = 0; i < kPdqDim; ++i) {
        for (int j = 0; j < kPdqDim; ++j) {
            if (i + 1 < kPdqDim && std::abs(m[i][j] - m[i + 1][j]) > 2.0) ++count;
            if (j + 1 < kPdqDim && std::abs(m[i][j] - m[i][j + 1]) > 2.0) ++count;
        }
    }
    constexpr int kMax = 2 * kPdqDim * (kPdqDim - 1);
    const int q = (200 * count + kMax) / (2 * kMax);
    return std::clamp(q, 0, 100);
}

const std::array<std::array<double, 64>, 16>& dct_table() {
    static const auto table = [] {
        std::array<std::array<double, 64>, 16> t{};
        for (int f = 1; f <= 16; ++f)
            for (int u = 0; u < 64; ++u) t[f - 1][u] = dct_basis(f, u);
        return t;
    }();
    return table;
}

}  // namespace

double dct_basis(int frequency, int u) {
    return std::sqrt(2.0 / 64.0) * std::cos(std::numbers::pi * frequency * (2 * u + 1) / 128.0);
}

Matrix16 dct16_from64(const Matrix64& block) {
    const auto& d = dct_table();
    // The retained basis functions are all orthogonal to constants, so the
    // block mean can be removed up front. Constant blocks then map to exact
    // zeros instead of rounding noise.
    double mean = 0.0;
    for (const auto& row : block)
        for (double v : row) mean += v;
    mean /= 64.0 * 64.0;
    // First along rows of the block (index u), then along columns (v).
    std::array<std::array<double, 64>, 16> partial{};
    for (int i = 0; i < 16; ++i) {
        for (int v = 0; v < 64; ++v) {
            double s = 0.0;
            for (int u = 0; u < 64; ++u) s += d[i][u] * (block[u][v] - mean);
            partial[i][v] = s;
        }
    }
    Matrix16 out{};
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            double s = 0.0;
            for (int v = 0; v < 64; ++v) s += partial[i][v] * d[j][v];
            out[i][j] = s;
        }
    }
    return out;
}

PdqResult pdq(const ImageBuffer& img) {
    const auto luma = imaging::to_luminance(img);
    const auto block = downsample_to_64(luma);
    const auto coeffs = dct16_from64(block);

    std::array<double, 256> flat{};
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) flat[i * 16 + j] = coeffs[i][j];
    // Lower median (128th smallest), as the reference's Torben selection.
    auto sorted = flat;
    std::nth_element(sorted.begin(), sorted.begin() + 127, sorted.end());
    const double median = sorted[127];

    PdqResult result;
    for (std::uint32_t k = 0; k < 256; ++k) result.hash.set_bit(k, flat[k] > median);
    const bool too_small =
        std::min(luma.width(), luma.height()) < static_cast<std::uint32_t>(kPdqMinQualityDim);
    result.quality = too_small ? 0 : gradient_quality(block);
    return result;
}

PerceptualHash compute_hash(const ImageBuffer& img, HashAlgorithm alg) {
    return alg == HashAlgorithm::AHash64 ? ahash(img) : pdq(img).hash;
}

HashDistance hamming(const PerceptualHash& a, const PerceptualHash& b) {
    if (a.algorithm() != b.algorithm()) {
        throw AlgorithmMismatch("cannot compare " + std::string(algorithm_tag(a.algorithm())) +
                                " with " + std::string(algorithm_tag(b.algorithm())));
    }
    std::uint32_t raw = 0;
    const auto x = a.bytes();
    const auto y = b.bytes();
    for (std::size_t i = 0; i < x.size(); ++i) {
        raw += static_cast<std::uint32_t>(std::popcount(static_cast<unsigned>(x[i] ^ y[i])));
    }
    return {raw, a.bit_count()};
}

bool is_match(const PerceptualHash& a, const PerceptualHash& b, const MatchPolicy& policy) {
    const auto d = hamming(a, b);
    const auto& t = policy.threshold(a.algorithm());
    // raw / k < num / den, cross-multiplied.
    return static_cast<std::uint64_t>(d.raw) * t.denominator <
           static_cast<std::uint64_t>(t.numerator) * d.bits;
}

}  // namespace phg::phash
