#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vhist/image.hpp"
#include "vhist/imagecore.hpp"
#include "vhist/optics.hpp"
#include "vhist/phantom.hpp"

namespace vhist::io {

namespace fs = std::filesystem;

// PNG. Float images are scaled from [0,1] (clamped) and rounded.
void write_png8(const fs::path& path, const Image& img);
void write_png16(const fs::path& path, const Image& img);
void write_png8(const fs::path& path, const Grid<std::uint8_t>& gray);
Image read_png(const fs::path& path);  // any bit depth → floats in [0,1]
Grid<std::uint8_t> read_png8_gray(const fs::path& path);
Grid<std::uint16_t> read_png16_gray(const fs::path& path);
void write_png16(const fs::path& path, const Grid<std::uint16_t>& gray);

/// Phantom: `labels.png` (8-bit, slices stacked vertically) + `index.phnt`
/// (16-byte header: "PHNT", u32 width, u32 height, u32 depth; then f32 LE Δn).
void write_phantom(const fs::path& dir, const Phantom& phantom);
Phantom read_phantom(const fs::path& dir);

/// Raw phase: "QPHI", u32 width, u32 height, u32 pitch_um×1000, then f32 LE radians.
void write_phase(const fs::path& path, const PhaseImage& phase);
PhaseImage read_phase(const fs::path& path);
/// Min/max stretched 16-bit PNG for viewing.
void write_phase_png(const fs::path& path, const PhaseImage& phase);

/// Four 16-bit PNGs (capture_1..4.png) + captures.meta (key = value).
void write_captures(const fs::path& dir, const CaptureSet& captures, double counts_per_unit);
CaptureSet read_captures(const fs::path& dir);

struct ManifestEntry {
  std::string file;
  int x = 0;
  int y = 0;
};

/// Plain-text index: one "filename x y" line per tile; '#' starts a comment.
void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const fs::path& path);

/// Writes tiles as 16-bit (gray) or 8-bit (RGB) PNGs plus `manifest.txt`.
void write_tile_grid(const fs::path& dir, const TileGrid& grid, const std::string& stem);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace vhist::io
