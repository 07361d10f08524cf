// Shared fixtures for the unit tests and the acceptance suite.
#pragma once

#include "phg/imaging.hpp"
#include "phg/phash.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace phg::test {

inline std::filesystem::path data_dir() { return PHG_TEST_DATA; }

class TempDir {
public:
    explicit TempDir(const std::string& tag = "phg") {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    const auto s = read_text(p);
    return {s.begin(), s.end()};
}

inline imaging::ImageBuffer random_image(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h,
                                         std::uint32_t channels) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : data) v = static_cast<std::uint8_t>(byte(rng));
    return imaging::ImageBuffer(w, h, channels, std::move(data));
}

inline phash::PerceptualHash random_hash(std::mt19937_64& rng, phash::HashAlgorithm alg) {
    std::vector<std::uint8_t> bytes(phash::bit_length(alg) / 8);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(byte(rng));
    return phash::PerceptualHash(alg, bytes);
}

/// Smooth natural-looking content: a few soft blobs over a gradient plus
/// mild noise. Each seed gives a structurally different image.
inline imaging::ImageBuffer synthetic_image(std::uint64_t seed, std::uint32_t w = 128,
                                            std::uint32_t h = 128, std::uint32_t channels = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    struct Blob {
        double cx, cy, r, amp[3];
    };
    std::vector<Blob> blobs(3 + rng() % 5);
    for (auto& b : blobs) {
        b.cx = unit(rng) * w;
        b.cy = unit(rng) * h;
        b.r = (0.08 + 0.3 * unit(rng)) * std::min(w, h);
        for (auto& a : b.amp) a = (unit(rng) - 0.5) * 220.0;
    }
    const double gx = (unit(rng) - 0.5) * 120.0, gy = (unit(rng) - 0.5) * 120.0;
    const double base = 80.0 + 90.0 * unit(rng);
    std::normal_distribution<double> noise(0.0, 3.0);
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            for (std::uint32_t c = 0; c < channels; ++c) {
                double v = base + gx * (x / double(w) - 0.5) + gy * (y / double(h) - 0.5);
                for (const auto& b : blobs) {
                    const double dx = x - b.cx, dy = y - b.cy;
                    v += b.amp[c] * std::exp(-(dx * dx + dy * dy) / (2 * b.r * b.r));
                }
                v += noise(rng);
                data[(static_cast<std::size_t>(y) * w + x) * channels + c] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return imaging::ImageBuffer(w, h, channels, std::move(data));
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace phg::test
