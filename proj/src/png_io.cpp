#include <cstring>

#include <png.h>

#include <fmt/format.h>

#include "boxprompt/storage.hpp"

namespace boxprompt {

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr unsigned char kColorTypeGray = 0;

std::uint32_t read_be32(const char* p) {
    const auto* u = reinterpret_cast<const unsigned char*>(p);
    return (std::uint32_t{u[0]} << 24) | (std::uint32_t{u[1]} << 16) | (std::uint32_t{u[2]} << 8) | u[3];
}

/// Decodes an 8-bit single-channel PNG; everything else is UnsupportedPng.
std::vector<std::uint8_t> decode_gray8(const fs::path& path, int& width, int& height) {
    const std::vector<char> bytes = read_file_bytes(path);
    // signature(8) + IHDR length(4) + type(4) + width(4) + height(4) + depth(1) + colour(1)
    if (bytes.size() < 26 || std::memcmp(bytes.data(), kPngSignature, 8) != 0 ||
        std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
        throw Error(ErrorKind::UnsupportedPng, path.string() + " is not a PNG file");
    }
    const int bit_depth = static_cast<unsigned char>(bytes[24]);
    const int color_type = static_cast<unsigned char>(bytes[25]);
    if (color_type != kColorTypeGray || bit_depth != 8) {
        throw Error(ErrorKind::UnsupportedPng,
                    fmt::format("{}: colour type {} at {} bits; only 8-bit single-channel grayscale is accepted",
                                path.string(), color_type, bit_depth));
    }
    const std::uint32_t w = read_be32(bytes.data() + 16);
    const std::uint32_t h = read_be32(bytes.data() + 20);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
        throw Error(ErrorKind::UnsupportedPng, fmt::format("{}: unsupported size {}x{}", path.string(), w, h));
    }

    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw Error(ErrorKind::UnsupportedPng, fmt::format("{}: {}", path.string(), image.message));
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorKind::UnsupportedPng, fmt::format("{}: {}", path.string(), image.message));
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return pixels;
}

void encode_gray8(const fs::path& path, int width, int height, const std::uint8_t* pixels) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorKind::InvalidArgument, "cannot write an empty PNG");
    }
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorKind::Io, fmt::format("{}: {}", path.string(), image.message));
    }
    std::vector<char> buffer(size);
    if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorKind::Io, fmt::format("{}: {}", path.string(), image.message));
    }
    write_file_bytes(path, buffer.data(), size);
}

}  // namespace

BinaryMask read_mask(const fs::path& path) {
    int w = 0, h = 0;
    auto pixels = decode_gray8(path, w, h);
    for (auto& p : pixels) p = p != 0 ? 1 : 0;
    return BinaryMask(w, h, std::move(pixels));
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> pixels(mask.size());
    const auto bits = mask.values();
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = bits[i] != 0 ? 255 : 0;
    encode_gray8(path, mask.width(), mask.height(), pixels.data());
}

Image read_image(const fs::path& path) {
    int w = 0, h = 0;
    auto pixels = decode_gray8(path, w, h);
    return Image(w, h, std::move(pixels));
}

void write_image(const fs::path& path, const Image& image) {
    encode_gray8(path, image.width(), image.height(), image.values().data());
}

}  // namespace boxprompt
