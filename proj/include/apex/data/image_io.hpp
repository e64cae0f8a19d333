#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apex/core/types.hpp"

namespace apex::data {

// Decodes PNG/JPEG (or anything the backend reads) into RGB floats in [0,1].
// Throws InputError when the bytes cannot be decoded.
PlotImage decode_image(std::span<const std::uint8_t> bytes);
PlotImage read_image(const std::filesystem::path& path);

// 8-bit RGB PNG. Pixels are rounded to the nearest 1/255.
std::vector<std::uint8_t> encode_png(const PlotImage& image);
void write_png(const PlotImage& image, const std::filesystem::path& path);

// e.g. "opencv-4.5.4"
std::string backend_version();

}  // namespace apex::data
