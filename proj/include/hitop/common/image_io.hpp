#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hitop/common/grid.hpp"

namespace hitop::io {

/// Writes an 8-bit grayscale PNG.
void write_png(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
std::vector<std::uint8_t> encode_png(const Grid<std::uint8_t>& image);

/// Reads a PNG and converts it to 8-bit grayscale. Throws LoadError on failure.
Grid<std::uint8_t> read_png(const std::filesystem::path& path);

/// Densities in [0,1] to gray levels (0 = void, 255 = solid).
Grid<std::uint8_t> density_to_gray(const DensityGrid& density);
/// Binary mask to 0/255.
Grid<std::uint8_t> mask_to_gray(const Mask& mask);
/// Gray >= 128 is set.
Mask gray_to_mask(const Grid<std::uint8_t>& gray);

/// Minimal reader for 2D little-endian float32/float64 .npy arrays (C order).
DensityGrid read_npy(const std::filesystem::path& path);
/// Little-endian float64, C order, format version 1.0.
void write_npy(const std::filesystem::path& path, const DensityGrid& grid);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hitop::io
