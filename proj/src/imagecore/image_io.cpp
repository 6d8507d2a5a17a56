#include "d3net/imagecore.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace d3net {
namespace {

constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 28;

std::string lower_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return ext;
}

void check_dims(std::uint64_t w, std::uint64_t h, std::uint64_t c, const std::filesystem::path& path) {
    if (w == 0 || h == 0) {
        throw IoError(path.string() + ": zero image dimension");
    }
    if (w > kMaxPixels || h > kMaxPixels || w * h * c > kMaxPixels) {
        throw IoError(path.string() + ": image dimensions overflow (" + std::to_string(w) + "x" +
                      std::to_string(h) + ")");
    }
}

// IHDR lives at a fixed offset right after the signature.
void check_png_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::array<unsigned char, 29> head{};
    in.read(reinterpret_cast<char*>(head.data()), head.size());
    if (in.gcount() != static_cast<std::streamsize>(head.size()) ||
        png_sig_cmp(head.data(), 0, 8) != 0) {
        throw IoError(path.string() + ": not a PNG file");
    }
    const int bit_depth = head[24];
    const int color_type = head[25];
    if (bit_depth != 8 && !(color_type == PNG_COLOR_TYPE_PALETTE && bit_depth <= 8)) {
        throw IoError(path.string() + ": unsupported PNG bit depth " + std::to_string(bit_depth) +
                      " (only 8-bit gray/RGB)");
    }
}

} // namespace

unsigned char quantize_u8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

Image load_png(const std::filesystem::path& path) {
    check_png_header(path);

    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
        throw IoError(path.string() + ": " + png.message);
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    try {
        check_dims(png.width, png.height, channels, path);
    } catch (...) {
        png_image_free(&png);
        throw;
    }

    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
    if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError(path.string() + ": " + msg);
    }

    const int h = static_cast<int>(png.height);
    const int w = static_cast<int>(png.width);
    Image img(channels, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                const auto idx = (static_cast<std::size_t>(y) * w + x) * channels + c;
                img.at(c, y, x) = buffer[idx] / 255.0;
            }
        }
    }
    return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
    const int channels = img.channels();
    const int h = img.height();
    const int w = img.width();
    std::vector<unsigned char> buffer(static_cast<std::size_t>(channels) * h * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] = quantize_u8(img.at(c, y, x));
            }
        }
    }

    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr) == 0) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot write '" + path.string() + "': " + msg);
    }
}

Image load_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::string magic;
    std::int64_t w = 0;
    std::int64_t h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (!in || (magic != "Pf" && magic != "PF")) {
        throw IoError(path.string() + ": malformed PFM header");
    }
    in.get(); // single whitespace before the raster
    if (w <= 0 || h <= 0 || scale == 0.0) {
        throw IoError(path.string() + ": invalid PFM dimensions or scale");
    }
    const int channels = magic == "PF" ? 3 : 1;
    check_dims(static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(h), channels, path);

    const bool file_little = scale < 0.0;
    const bool swap = file_little != (std::endian::native == std::endian::little);

    const auto count = static_cast<std::size_t>(w * h * channels);
    std::vector<std::uint32_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
        throw IoError(path.string() + ": truncated PFM raster");
    }

    Image img(channels, static_cast<int>(h), static_cast<int>(w));
    std::size_t idx = 0;
    for (int row = 0; row < h; ++row) {
        const int y = static_cast<int>(h) - 1 - row; // bottom-up
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                std::uint32_t bits = raw[idx++];
                if (swap) {
                    bits = __builtin_bswap32(bits);
                }
                const float v = std::bit_cast<float>(bits);
                if (!std::isfinite(v)) {
                    throw IoError(path.string() + ": non-finite sample in PFM");
                }
                img.at(c, y, x) = v;
            }
        }
    }
    return img;
}

void save_pfm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    const int channels = img.channels();
    out << (channels == 3 ? "PF" : "Pf") << '\n' << img.width() << ' ' << img.height() << "\n-1.0\n";

    std::vector<std::uint32_t> raw;
    raw.reserve(img.size());
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(c, y, x)));
                if constexpr (std::endian::native == std::endian::big) {
                    bits = __builtin_bswap32(bits);
                }
                raw.push_back(bits);
            }
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

Image load_image(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") {
        return load_png(path);
    }
    if (ext == ".pfm") {
        return load_pfm(path);
    }
    throw IoError(path.string() + ": unsupported image format (expected .png or .pfm)");
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") {
        save_png(img, path);
    } else if (ext == ".pfm") {
        save_pfm(img, path);
    } else {
        throw IoError(path.string() + ": unsupported image format (expected .png or .pfm)");
    }
}

} // namespace d3net
