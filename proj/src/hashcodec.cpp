#include "phg/hashcodec.hpp"

#include <algorithm>
#include <cmath>

namespace phg::hashcodec {

namespace {

// Exact integer square root, or 0 when n is not a perfect square.
std::uint32_t exact_sqrt(std::size_t n) {
    auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r * r == n ? static_cast<std::uint32_t>(r) : 0;
}

}  // namespace

PixelGrid encode_binary_grid(const phash::PerceptualHash& h) {
    const auto k = h.bit_count();
    const auto side = exact_sqrt(k);
    if (side == 0) {
        throw GridError(GridError::Kind::NonSquareBitLength,
                        "bit length " + std::to_string(k) + " is not a perfect square");
    }
    PixelGrid g{side, GridMode::Binary, std::vector<std::uint8_t>(k)};
    for (std::uint32_t i = 0; i < k; ++i) g.samples[i] = h.bit(i) ? 255 : 0;
    return g;
}

PixelGrid encode_byte_grid(std::span<const std::uint8_t> bytes) {
    const auto side = exact_sqrt(bytes.size());
    if (side == 0) {
        throw GridError(GridError::Kind::NonSquareLength,
                        "length " + std::to_string(bytes.size()) + " is not a perfect square");
    }
    return PixelGrid{side, GridMode::Byte, {bytes.begin(), bytes.end()}};
}

phash::PerceptualHash decode_grid(const PixelGrid& g, phash::HashAlgorithm alg) {
    const auto k = phash::bit_length(alg);
    if (static_cast<std::uint64_t>(g.side) * g.side != k || g.samples.size() != k) {
        throw GridError(GridError::Kind::DimensionMismatch,
                        "grid of side " + std::to_string(g.side) + " cannot hold a " +
                            std::string(phash::algorithm_tag(alg)) + " hash");
    }
    phash::PerceptualHash h(alg);
    for (std::uint32_t i = 0; i < k; ++i) h.set_bit(i, g.samples[i] >= 128);
    return h;
}

imaging::ImageBuffer to_image(const PixelGrid& g) {
    return imaging::ImageBuffer(g.side, g.side, 1, g.samples);
}

PixelGrid from_image(const imaging::ImageBuffer& img) {
    if (img.channels() != 1 || img.width() != img.height()) {
        throw GridError(GridError::Kind::DimensionMismatch,
                        "grid images must be square and single-channel");
    }
    const auto data = img.data();
    const bool binary =
        std::all_of(data.begin(), data.end(), [](auto v) { return v == 0 || v == 255; });
    return PixelGrid{img.width(), binary ? GridMode::Binary : GridMode::Byte,
                     {data.begin(), data.end()}};
}

}  // namespace phg::hashcodec
