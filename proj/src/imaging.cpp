#include "phg/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace phg::imaging {

namespace {

using Kind = ImageError::Kind;

std::uint8_t clamp_u8(int v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

// Round-half-up quotient for nonnegative operands.
std::uint64_t div_round_half_up(std::uint64_t num, std::uint64_t den) {
    return (2 * num + den) / (2 * den);
}

class PnmReader {
public:
    explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    // Skips whitespace and '#' comments, then reads a decimal token.
    std::uint64_t read_number() {
        skip_separators();
        if (pos_ >= bytes_.size() || !is_digit(bytes_[pos_])) {
            throw ImageError(Kind::MalformedFile, "pnm: expected a number in header");
        }
        std::uint64_t v = 0;
        while (pos_ < bytes_.size() && is_digit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 0xFFFFFFFFull) {
                throw ImageError(Kind::MalformedFile, "pnm: header value too large");
            }
            ++pos_;
        }
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void expect_single_whitespace() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
            throw ImageError(Kind::MalformedFile, "pnm: missing separator before raster");
        }
        ++pos_;
    }

    std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

private:
    static bool is_digit(std::uint8_t c) { return c >= '0' && c <= '9'; }
    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    }

    void skip_separators() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

ImageBuffer load_pnm(std::span<const std::uint8_t> bytes, std::uint32_t channels) {
    const char expected = channels == 1 ? '5' : '6';
    if (bytes.size() < 2 || bytes[0] != 'P') {
        throw ImageError(Kind::MalformedFile, "pnm: bad magic");
    }
    if (bytes[1] != static_cast<std::uint8_t>(expected)) {
        if (bytes[1] >= '1' && bytes[1] <= '7') {
            throw ImageError(Kind::UnsupportedVariant,
                             std::string("pnm: unsupported variant P") +
                                 static_cast<char>(bytes[1]));
        }
        throw ImageError(Kind::MalformedFile, "pnm: bad magic");
    }
    PnmReader reader(bytes);
    const auto width = reader.read_number();
    const auto height = reader.read_number();
    const auto maxval = reader.read_number();
    if (width == 0 || height == 0) {
        throw ImageError(Kind::MalformedFile, "pnm: zero dimension");
    }
    if (maxval != 255) {
        throw ImageError(Kind::UnsupportedVariant,
                         "pnm: only maxval 255 is supported, got " + std::to_string(maxval));
    }
    reader.expect_single_whitespace();
    const std::uint64_t needed = width * height * channels;
    auto raster = reader.rest();
    if (raster.size() < needed) {
        throw ImageError(Kind::MalformedFile, "pnm: truncated raster (" +
                                                  std::to_string(raster.size()) + " of " +
                                                  std::to_string(needed) + " bytes)");
    }
    return ImageBuffer(static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height),
                       channels, std::vector<std::uint8_t>(raster.begin(),
                                                           raster.begin() + needed));
}

ImageBuffer load_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageError(Kind::MalformedFile, "png: " + msg);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageError(Kind::MalformedFile, "png: " + msg);
    }
    return ImageBuffer(image.width, image.height, color ? 3 : 1, std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError(Kind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                         std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width == 0 || height == 0) {
        throw ImageError(Kind::InvalidImage, "image dimensions must be at least 1x1");
    }
    if (channels != 1 && channels != 3) {
        throw ImageError(Kind::InvalidImage, "image must have 1 or 3 channels");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw ImageError(Kind::InvalidImage, "image data length does not match dimensions");
    }
}

ImageBuffer ImageBuffer::filled(std::uint32_t width, std::uint32_t height,
                                std::uint32_t channels, std::uint8_t value) {
    return ImageBuffer(width, height, channels,
                       std::vector<std::uint8_t>(
                           static_cast<std::size_t>(width) * height * channels, value));
}

ImageBuffer load_image(std::span<const std::uint8_t> bytes, ImageFormat format) {
    switch (format) {
        case ImageFormat::Pgm: return load_pnm(bytes, 1);
        case ImageFormat::Ppm: return load_pnm(bytes, 3);
        case ImageFormat::Png: return load_png(bytes);
    }
    throw ImageError(Kind::UnsupportedVariant, "unknown image format");
}

ImageBuffer load_image_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic),
                                        bytes.begin())) {
        return load_image(bytes, ImageFormat::Png);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        return load_image(bytes, bytes[1] == '6' ? ImageFormat::Ppm : ImageFormat::Pgm);
    }
    throw ImageError(Kind::MalformedFile, "unrecognized image format: " + path.string());
}

std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img) {
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width()) + " " +
                               std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

void save_pnm(const ImageBuffer& img, const std::filesystem::path& path) {
    const auto bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError(Kind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageError(Kind::Io, "short write to " + path.string());
}

ImageBuffer to_luminance(const ImageBuffer& img) {
    if (img.channels() == 1) return img;
    const auto src = img.data();
    std::vector<std::uint8_t> luma(src.size() / 3);
    for (std::size_t i = 0; i < luma.size(); ++i) {
        const std::uint32_t weighted =
            299u * src[3 * i] + 587u * src[3 * i + 1] + 114u * src[3 * i + 2];
        luma[i] = static_cast<std::uint8_t>(std::min<std::uint32_t>((weighted + 500) / 1000, 255));
    }
    return ImageBuffer(img.width(), img.height(), 1, std::move(luma));
}

ImageBuffer resize_box(const ImageBuffer& img, std::uint32_t width, std::uint32_t height) {
    if (width == 0 || height == 0) {
        throw std::invalid_argument("resize_box: target dimensions must be >= 1");
    }
    const std::uint64_t in_w = img.width();
    const std::uint64_t in_h = img.height();
    if (in_w == width && in_h == height) return img;

    // Work in a coordinate system scaled by the output size along x (and y),
    // so that input pixel i spans [i*out, (i+1)*out) and output pixel o spans
    // [o*in, (o+1)*in). All overlaps are then integers.
    struct Span {
        std::uint32_t first;
        std::vector<std::uint64_t> weights;
    };
    auto spans_for = [](std::uint64_t in, std::uint64_t out) {
        std::vector<Span> spans(out);
        for (std::uint64_t o = 0; o < out; ++o) {
            const std::uint64_t lo = o * in;
            const std::uint64_t hi = (o + 1) * in;
            const std::uint64_t first = lo / out;
            const std::uint64_t last = (hi - 1) / out;
            spans[o].first = static_cast<std::uint32_t>(first);
            for (std::uint64_t i = first; i <= last; ++i) {
                const std::uint64_t a = std::max(lo, i * out);
                const std::uint64_t b = std::min(hi, (i + 1) * out);
                spans[o].weights.push_back(b - a);
            }
        }
        return spans;
    };
    const auto xs = spans_for(in_w, width);
    const auto ys = spans_for(in_h, height);
    const std::uint64_t area = in_w * in_h;
    const std::uint32_t ch = img.channels();

    std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height * ch);
    for (std::uint32_t oy = 0; oy < height; ++oy) {
        for (std::uint32_t ox = 0; ox < width; ++ox) {
            for (std::uint32_t c = 0; c < ch; ++c) {
                std::uint64_t sum = 0;
                for (std::size_t dy = 0; dy < ys[oy].weights.size(); ++dy) {
                    const auto y = ys[oy].first + static_cast<std::uint32_t>(dy);
                    std::uint64_t row = 0;
                    for (std::size_t dx = 0; dx < xs[ox].weights.size(); ++dx) {
                        const auto x = xs[ox].first + static_cast<std::uint32_t>(dx);
                        row += xs[ox].weights[dx] * img.at(x, y, c);
                    }
                    sum += row * ys[oy].weights[dy];
                }
                out[(static_cast<std::size_t>(oy) * width + ox) * ch + c] =
                    static_cast<std::uint8_t>(div_round_half_up(sum, area));
            }
        }
    }
    return ImageBuffer(width, height, ch, std::move(out));
}

void validate(const TransformSpec& spec) {
    std::visit(
        [](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, transform::Resize>) {
                if (t.width == 0 || t.height == 0) {
                    throw std::invalid_argument("Resize: dimensions must be >= 1");
                }
            } else if constexpr (std::is_same_v<T, transform::Rescale>) {
                if (t.numerator == 0 || t.denominator == 0) {
                    throw std::invalid_argument("Rescale: factor must be positive");
                }
            } else if constexpr (std::is_same_v<T, transform::BrightnessShift>) {
                if (t.delta < -64 || t.delta > 64) {
                    throw std::invalid_argument("BrightnessShift: delta outside [-64, 64]");
                }
            } else if constexpr (std::is_same_v<T, transform::BoxBlur>) {
                if (t.radius < 1 || t.radius > 3) {
                    throw std::invalid_argument("BoxBlur: radius must be 1, 2 or 3");
                }
            } else if constexpr (std::is_same_v<T, transform::CenterCrop>) {
                if (!(t.fraction >= 0.8 && t.fraction < 1.0)) {
                    throw std::invalid_argument("CenterCrop: fraction outside [0.8, 1.0)");
                }
            }
        },
        spec);
}

std::string describe(const TransformSpec& spec) {
    return std::visit(
        [](const auto& t) -> std::string {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, transform::Grayscale>) {
                return "Grayscale";
            } else if constexpr (std::is_same_v<T, transform::Resize>) {
                return "Resize(" + std::to_string(t.width) + "x" + std::to_string(t.height) + ")";
            } else if constexpr (std::is_same_v<T, transform::Rescale>) {
                return "Rescale(" + std::to_string(t.numerator) + "/" +
                       std::to_string(t.denominator) + ")";
            } else if constexpr (std::is_same_v<T, transform::BrightnessShift>) {
                return std::string("BrightnessShift(") + (t.delta >= 0 ? "+" : "") +
                       std::to_string(t.delta) + ")";
            } else if constexpr (std::is_same_v<T, transform::BoxBlur>) {
                return "BoxBlur(" + std::to_string(t.radius) + ")";
            } else if constexpr (std::is_same_v<T, transform::CenterCrop>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "CenterCrop(%.2f)", t.fraction);
                return buf;
            } else {
                return "MirrorHorizontal";
            }
        },
        spec);
}

namespace {

ImageBuffer brightness_shift(const ImageBuffer& img, int delta) {
    ImageBuffer out = img;
    for (auto& v : out.mutable_data()) v = clamp_u8(v + delta);
    return out;
}

// Mean over the in-bounds part of the (2r+1)^2 window, round half up.
ImageBuffer box_blur(const ImageBuffer& img, int radius) {
    const auto w = static_cast<int>(img.width());
    const auto h = static_cast<int>(img.height());
    const auto ch = img.channels();
    ImageBuffer out = img;
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - radius);
        const int y1 = std::min(h - 1, y + radius);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - radius);
            const int x1 = std::min(w - 1, x + radius);
            const auto count = static_cast<std::uint64_t>((y1 - y0 + 1) * (x1 - x0 + 1));
            for (std::uint32_t c = 0; c < ch; ++c) {
                std::uint64_t sum = 0;
                for (int yy = y0; yy <= y1; ++yy) {
                    for (int xx = x0; xx <= x1; ++xx) {
                        sum += img.at(static_cast<std::uint32_t>(xx),
                                      static_cast<std::uint32_t>(yy), c);
                    }
                }
                out.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), c) =
                    static_cast<std::uint8_t>(div_round_half_up(sum, count));
            }
        }
    }
    return out;
}

ImageBuffer center_crop(const ImageBuffer& img, double fraction) {
    // The epsilon absorbs representation error such as 0.9 * 10 = 9.000000000000002
    // or 0.7 * 10 = 6.999999999999999.
    auto keep = [fraction](std::uint32_t dim) {
        const auto k = static_cast<std::uint32_t>(std::floor(fraction * dim + 1e-9));
        return std::max<std::uint32_t>(1, k);
    };
    const std::uint32_t nw = keep(img.width());
    const std::uint32_t nh = keep(img.height());
    const std::uint32_t ox = (img.width() - nw) / 2;
    const std::uint32_t oy = (img.height() - nh) / 2;
    const auto ch = img.channels();
    std::vector<std::uint8_t> data;
    data.reserve(static_cast<std::size_t>(nw) * nh * ch);
    for (std::uint32_t y = 0; y < nh; ++y) {
        const auto* row = img.data().data() +
                          (static_cast<std::size_t>(y + oy) * img.width() + ox) * ch;
        data.insert(data.end(), row, row + static_cast<std::size_t>(nw) * ch);
    }
    return ImageBuffer(nw, nh, ch, std::move(data));
}

ImageBuffer mirror_horizontal(const ImageBuffer& img) {
    ImageBuffer out = img;
    const auto w = img.width();
    const auto ch = img.channels();
    for (std::uint32_t y = 0; y < img.height(); ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            for (std::uint32_t c = 0; c < ch; ++c) {
                out.at(x, y, c) = img.at(w - 1 - x, y, c);
            }
        }
    }
    return out;
}

}  // namespace

ImageBuffer apply_transform(const ImageBuffer& img, const TransformSpec& spec) {
    validate(spec);
    return std::visit(
        [&img](const auto& t) -> ImageBuffer {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, transform::Grayscale>) {
                return to_luminance(img);
            } else if constexpr (std::is_same_v<T, transform::Resize>) {
                return resize_box(img, t.width, t.height);
            } else if constexpr (std::is_same_v<T, transform::Rescale>) {
                auto scaled = [&t](std::uint32_t dim) {
                    const auto v = static_cast<std::uint64_t>(dim) * t.numerator / t.denominator;
                    return static_cast<std::uint32_t>(std::max<std::uint64_t>(1, v));
                };
                return resize_box(img, scaled(img.width()), scaled(img.height()));
            } else if constexpr (std::is_same_v<T, transform::BrightnessShift>) {
                return brightness_shift(img, t.delta);
            } else if constexpr (std::is_same_v<T, transform::BoxBlur>) {
                return box_blur(img, t.radius);
            } else if constexpr (std::is_same_v<T, transform::CenterCrop>) {
                return center_crop(img, t.fraction);
            } else {
                return mirror_horizontal(img);
            }
        },
        spec);
}

}  // namespace phg::imaging
