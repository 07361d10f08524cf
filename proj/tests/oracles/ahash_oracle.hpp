// Brute-force average hash, kept independent of the library: no shared
// helpers, supersampled area averaging instead of overlap spans.
#pragma once

#include <cstdint>
#include <vector>

namespace phg::oracle {

/// rgb: row-major, `channels` interleaved samples per pixel (1 or 3).
/// Returns the 64 bits in row-major order.
inline std::vector<int> ahash_bits(const std::vector<std::uint8_t>& pixels, int w, int h, int channels) {
    // luma with round half up, via quotient and remainder
    std::vector<long> luma(static_cast<std::size_t>(w) * h);
    for (int i = 0; i < w * h; ++i) {
        if (channels == 1) {
            luma[i] = pixels[i];
            continue;
        }
        const long weighted = 299L * pixels[3 * i] + 587L * pixels[3 * i + 1] + 114L * pixels[3 * i + 2];
        long v = weighted / 1000 + (weighted % 1000 >= 500 ? 1 : 0);
        luma[i] = v > 255 ? 255 : v;
    }
    // Fine grid of (8w) x (8h): fine cell (X, Y) lies in source pixel
    // (X / 8, Y / 8) and in output cell (X / w, Y / h). Each output cell
    // collects exactly w*h fine cells.
    long cell_sum[8][8] = {};
    for (int Y = 0; Y < 8 * h; ++Y) {
        for (int X = 0; X < 8 * w; ++X) {
            cell_sum[Y / h][X / w] += luma[static_cast<std::size_t>(Y / 8) * w + X / 8];
        }
    }
    const long area = static_cast<long>(w) * h;
    long small[64];
    long total = 0;
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            // round half up of cell_sum / area
            const long s = cell_sum[r][c];
            long v = s / area;
            if (2 * (s % area) >= area) ++v;
            small[r * 8 + c] = v;
            total += v;
        }
    }
    std::vector<int> bits(64);
    for (int i = 0; i < 64; ++i) {
        // small[i] >= total / 64 as exact rationals
        bits[i] = small[i] * 64 >= total ? 1 : 0;
    }
    return bits;
}

}  // namespace phg::oracle
