#pragma once

#include <filesystem>

#include "gazekit/image.hpp"

namespace gaze {

/// 8-bit PNG, grayscale (1 channel) or RGB (3 channels).
void write_png_u8(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_png_u8(const std::filesystem::path& path);

/// 16-bit single-channel PNG (depth maps, millimeters).
void write_png_u16(const std::filesystem::path& path, const ImageU16& img);
ImageU16 read_png_u16(const std::filesystem::path& path);

} // namespace gaze
