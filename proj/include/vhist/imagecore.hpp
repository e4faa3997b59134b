#pragma once

#include <vector>

#include "vhist/image.hpp"

namespace vhist {

struct Offset {
  int x = 0;
  int y = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Equal-sized tiles with their positions in a parent frame, in row-major scan order.
struct TileGrid {
  std::vector<Image> tiles;
  std::vector<Offset> offsets;
  int tile_width = 0;
  int tile_height = 0;
  int parent_width = 0;
  int parent_height = 0;

  std::size_t size() const noexcept { return offsets.size(); }
  /// Throws DimensionError if a tile leaves the frame or offsets are out of order.
  void validate() const;
  /// True when every parent pixel lies in at least one tile.
  bool covers_parent() const;
};

struct VolumeStack {
  std::vector<Image> slices;
  double z_spacing_um = 1.0;

  int depth() const noexcept { return static_cast<int>(slices.size()); }
};

struct SectionViews {
  Image xy;  // central slice
  Image xz;  // width × depth, row z = central row of slice z
  Image yz;  // height × depth, row z = central column of slice z
  double z_spacing_um = 1.0;
};

struct ContrastResult {
  Image image;
  bool degenerate = false;  // input was constant; output is 0.5 everywhere
};

inline constexpr double kDefaultPercentileLow = 0.5;
inline constexpr double kDefaultPercentileHigh = 99.5;

/// Nearest-rank percentile (rank = round(p/100 · (n − 1))) over all values.
float percentile(std::span<const float> values, double p);

/// Clip to the [p_low, p_high] percentiles, then map affinely onto [0,1].
ContrastResult enhance_contrast(const Image& img, double p_low = kDefaultPercentileLow,
                                double p_high = kDefaultPercentileHigh);

/// 1 − x; throws RangeError for values outside [0,1].
Image invert(const Image& img);

/// Offsets along one axis for tiles of `tile` px with the given stride ratio; the last
/// tile is snapped to the edge.
std::vector<int> tile_positions(int length, int tile, double overlap_fraction);

/// Layout only (no pixel copies) for tile_overlapping.
std::vector<Offset> tile_layout(int width, int height, int tile, double overlap_fraction);

TileGrid center_crop_tile(const Image& img, int crop_size = 1536, int tile_size = 512);
TileGrid tile_overlapping(const Image& img, int tile_size, double overlap_fraction);

/// Writes every tile back at its offset (later tiles win).
Image paste_tiles(const TileGrid& grid);

/// Corner-aligned bilinear upsampling; output dims = round-half-up(factor · dims).
Image upsample_bilinear(const Image& img, double factor);

/// exp(−d²/(2σ²)), d = distance from (px, py) to the centre of a w × h tile at `at`.
double tile_weight(Offset at, int w, int h, double sigma, double px, double py) noexcept;

/// Gaussian-weighted average of overlapping tiles. sigma ≤ 0 selects tile_size/4.
Image blend_tiles(const TileGrid& grid, double sigma = 0.0);

VolumeStack assemble_stack(std::vector<Image> slices, double z_spacing_um = 1.0);
SectionViews orthogonal_views(const VolumeStack& stack);

}  // namespace vhist
