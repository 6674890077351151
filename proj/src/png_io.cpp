#include "gazekit/png_io.hpp"

#include <cstdio>
#include <memory>

#include <png.h>

namespace gaze {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, const void* data, int height, int width,
               int channels, int bit_depth) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng write error for " + path.string());
    }
    png_init_io(png, fp.get());
    const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png); // in-memory data is little-endian

    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(bytes + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngHeader {
    int height = 0, width = 0, channels = 0, bit_depth = 0;
};

PngHeader read_png(const std::filesystem::path& path, std::vector<unsigned char>& out,
                   int want_depth) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng read error for " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    PngHeader h;
    h.width = static_cast<int>(png_get_image_width(png, info));
    h.height = static_cast<int>(png_get_image_height(png, info));
    h.bit_depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && h.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (want_depth == 8 && h.bit_depth == 16) png_set_strip_16(png);
    if (want_depth == 16 && h.bit_depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    h.bit_depth = png_get_bit_depth(png, info);
    h.channels = png_get_channels(png, info);
    if (h.bit_depth != want_depth) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": expected " + std::to_string(want_depth) + "-bit PNG");
    }

    const std::size_t stride = png_get_rowbytes(png, info);
    out.resize(stride * h.height);
    for (int y = 0; y < h.height; ++y) {
        png_read_row(png, out.data() + y * stride, nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return h;
}

} // namespace

void write_png_u8(const std::filesystem::path& path, const ImageU8& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw IoError("write_png_u8: expected 1 or 3 channels");
    }
    write_png(path, img.data(), img.height(), img.width(), img.channels(), 8);
}

ImageU8 read_png_u8(const std::filesystem::path& path) {
    std::vector<unsigned char> raw;
    const PngHeader h = read_png(path, raw, 8);
    ImageU8 img(h.height, h.width, h.channels);
    std::copy(raw.begin(), raw.end(), img.data());
    return img;
}

void write_png_u16(const std::filesystem::path& path, const ImageU16& img) {
    if (img.channels() != 1) throw IoError("write_png_u16: expected a single channel");
    write_png(path, img.data(), img.height(), img.width(), 1, 16);
}

ImageU16 read_png_u16(const std::filesystem::path& path) {
    std::vector<unsigned char> raw;
    const PngHeader h = read_png(path, raw, 16);
    if (h.channels != 1) throw IoError(path.string() + ": expected a single channel");
    ImageU16 img(h.height, h.width, 1);
    std::copy(reinterpret_cast<const std::uint16_t*>(raw.data()),
              reinterpret_cast<const std::uint16_t*>(raw.data()) + img.size(), img.data());
    return img;
}

} // namespace gaze
