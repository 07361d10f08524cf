// Square pixel-grid encodings of hashes: one black/white pixel per bit, or
// one grayscale pixel per byte.
#pragma once

#include "phg/imaging.hpp"
#include "phg/phash.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace phg::hashcodec {

enum class GridMode { Binary, Byte };

class GridError : public std::invalid_argument {
public:
    enum class Kind { NonSquareBitLength, NonSquareLength, DimensionMismatch };

    GridError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct PixelGrid {
    std::uint32_t side = 0;
    GridMode mode = GridMode::Binary;
    std::vector<std::uint8_t> samples;  // side * side, row-major

    std::uint8_t at(std::uint32_t row, std::uint32_t col) const {
        return samples[static_cast<std::size_t>(row) * side + col];
    }
    friend bool operator==(const PixelGrid&, const PixelGrid&) = default;
};

/// Bit 1 -> 255 (white), bit 0 -> 0 (black); bit 0 lands top-left.
PixelGrid encode_binary_grid(const phash::PerceptualHash& h);

/// One octet per sample, row-major. Length must be a perfect square.
PixelGrid encode_byte_grid(std::span<const std::uint8_t> bytes);

/// Samples >= 128 decode to 1. Total on any grayscale grid of the right size.
phash::PerceptualHash decode_grid(const PixelGrid& g, phash::HashAlgorithm alg);

/// Single-channel image view of the grid, for PGM export.
imaging::ImageBuffer to_image(const PixelGrid& g);

/// Accepts any square single-channel image; mode is set to Binary when every
/// sample is 0 or 255, otherwise Byte.
PixelGrid from_image(const imaging::ImageBuffer& img);

}  // namespace phg::hashcodec
