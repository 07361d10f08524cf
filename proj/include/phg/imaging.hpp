// Image decoding, luminance conversion, resampling and the edit transforms
// used for robustness testing. Everything here is integer arithmetic so that
// results are bit-exact across platforms.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace phg::imaging {

enum class ImageFormat { Pgm, Ppm, Png };

class ImageError : public std::runtime_error {
public:
    enum class Kind { MalformedFile, UnsupportedVariant, InvalidImage, Io };

    ImageError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Row-major 8-bit image with 1 (luma) or 3 (RGB) interleaved channels.
class ImageBuffer {
public:
    ImageBuffer() = default;

    /// Throws ImageError(InvalidImage) unless width, height >= 1, channels is
    /// 1 or 3 and data.size() == width * height * channels.
    ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                std::vector<std::uint8_t> data);

    static ImageBuffer filled(std::uint32_t width, std::uint32_t height,
                              std::uint32_t channels, std::uint8_t value);

    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> mutable_data() noexcept { return data_; }

    std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::uint32_t channels_ = 0;
    std::vector<std::uint8_t> data_;
};

ImageBuffer load_image(std::span<const std::uint8_t> bytes, ImageFormat format);

/// Detects the format from the file's magic bytes.
ImageBuffer load_image_file(const std::filesystem::path& path);

/// Binary PNM: P5 for one channel, P6 for three, maxval 255.
std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img);
void save_pnm(const ImageBuffer& img, const std::filesystem::path& path);

/// Rec.601 luma, round half up. Identity on single-channel input.
ImageBuffer to_luminance(const ImageBuffer& img);

/// Area-average resampling, exact in integers, round half up. Works per
/// channel, so it accepts RGB as well as luma.
ImageBuffer resize_box(const ImageBuffer& img, std::uint32_t width, std::uint32_t height);

namespace transform {
struct Grayscale {};
struct Resize {
    std::uint32_t width;
    std::uint32_t height;
};
/// Resize by a factor of numerator/denominator of the input's dimensions
/// (floored, at least 1 pixel). Lets one spec apply to a mixed-size corpus.
struct Rescale {
    std::uint32_t numerator;
    std::uint32_t denominator;
};
struct BrightnessShift {
    int delta;  // [-64, 64]
};
struct BoxBlur {
    int radius;  // {1, 2, 3}
};
struct CenterCrop {
    double fraction;  // [0.8, 1.0)
};
struct MirrorHorizontal {};
}  // namespace transform

using TransformSpec =
    std::variant<transform::Grayscale, transform::Resize, transform::Rescale,
                 transform::BrightnessShift, transform::BoxBlur, transform::CenterCrop,
                 transform::MirrorHorizontal>;

/// Throws std::invalid_argument when parameters are out of range.
void validate(const TransformSpec& spec);

/// Short human-readable name, e.g. "BrightnessShift(+10)".
std::string describe(const TransformSpec& spec);

ImageBuffer apply_transform(const ImageBuffer& img, const TransformSpec& spec);

}  // namespace phg::imaging
