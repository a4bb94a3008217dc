#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace cadloop {

/// Minimal PNG encoder for 8-bit RGB rows. The zlib stream uses stored
/// (uncompressed) blocks only, so output bytes depend on nothing but the
/// pixel values: identical images encode bit-identically on any platform.
std::vector<uint8_t> encode_png_rgb8(int width, int height, const std::vector<uint8_t>& rgb);

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<uint8_t>& rgb);

}  // namespace cadloop
