#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hitop/topopt/filter.hpp"
#include "hitop/topopt/optimizer.hpp"

namespace hitop::topopt {

// Snapshot layout (little-endian):
//   "HTOP1" | int32 nelx | int32 nely | int32 iteration
//   | float64[N] x | float64[N] x̃ | float64[N] x̄ | float64[N] rmin     (row-major, N = nelx*nely)
//   | uint32 history length H | float64[H] compliance history | float64 beta | float64 eta
// The trailer after the four arrays is optional on read.

struct Snapshot {
  DesignState state;
  RminMap rmin;
};

std::vector<std::uint8_t> encode_snapshot(const DesignState& state, const RminMap& rmin);
Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes);

void save_snapshot(const std::filesystem::path& path, const DesignState& state, const RminMap& rmin);
Snapshot load_snapshot(const std::filesystem::path& path);

/// RminMap alone: "HRMN1" | int32 nelx | int32 nely | float64[N].
std::vector<std::uint8_t> encode_rmin(const RminMap& rmin);
RminMap decode_rmin(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// x̄ as an 8-bit grayscale PNG, 0 = void and 255 = solid.
void export_density_png(const std::filesystem::path& path, const DesignState& state);

/// "iteration,compliance" CSV with one row per completed iteration.
std::string history_csv(const DesignState& state);

}  // namespace hitop::topopt
