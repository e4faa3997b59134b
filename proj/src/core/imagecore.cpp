#include "vhist/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vhist {

void TileGrid::validate() const {
  if (tiles.size() != offsets.size()) throw DimensionError("tile/offset count mismatch");
  if (tile_width <= 0 || tile_height <= 0) throw DimensionError("tile size must be positive");
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const Offset& o = offsets[i];
    if (o.x < 0 || o.y < 0 || o.x + tile_width > parent_width || o.y + tile_height > parent_height) {
      throw DimensionError("tile " + std::to_string(i) + " at (" + std::to_string(o.x) + ", " +
                           std::to_string(o.y) + ") leaves the parent frame");
    }
    if (!tiles.empty() && (tiles[i].width() != tile_width || tiles[i].height() != tile_height)) {
      throw DimensionError("tile " + std::to_string(i) + " has the wrong size");
    }
    if (i > 0) {
      const Offset& p = offsets[i - 1];
      if (!(o.y > p.y || (o.y == p.y && o.x > p.x))) {
        throw DimensionError("tile offsets are not strictly increasing in scan order");
      }
    }
  }
}

bool TileGrid::covers_parent() const {
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(parent_width) * parent_height, 0);
  for (const Offset& o : offsets) {
    for (int y = std::max(0, o.y); y < std::min(parent_height, o.y + tile_height); ++y) {
      for (int x = std::max(0, o.x); x < std::min(parent_width, o.x + tile_width); ++x) {
        hit[static_cast<std::size_t>(y) * parent_width + x] = 1;
      }
    }
  }
  return std::all_of(hit.begin(), hit.end(), [](std::uint8_t h) { return h != 0; });
}

float percentile(std::span<const float> values, double p) {
  if (values.empty()) throw DimensionError("percentile of an empty image");
  if (!(p >= 0.0 && p <= 100.0)) throw ParameterError("percentile must lie in [0, 100]");
  std::vector<float> v(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::llround(p / 100.0 * (v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + rank, v.end());
  return v[rank];
}

ContrastResult enhance_contrast(const Image& img, double p_low, double p_high) {
  if (!(p_low < p_high)) throw ParameterError("enhance_contrast requires p_low < p_high");
  ContrastResult out{Image(img.width(), img.height(), img.channels()), false};
  if (img.empty()) return out;
  const float lo = percentile(img.values(), p_low);
  const float hi = percentile(img.values(), p_high);
  if (!(hi > lo)) {
    std::fill(out.image.values().begin(), out.image.values().end(), 0.5f);
    out.degenerate = true;
    return out;
  }
  const double span = static_cast<double>(hi) - lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.data()[i]), static_cast<double>(lo),
                                static_cast<double>(hi));
    out.image.data()[i] = static_cast<float>((v - lo) / span);
  }
  return out;
}

Image invert(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = img.data()[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw RangeError("invert expects values in [0,1], found " + std::to_string(v));
    }
    out.data()[i] = 1.0f - v;
  }
  return out;
}

std::vector<int> tile_positions(int length, int tile, double overlap_fraction) {
  if (tile <= 0) throw DimensionError("tile size must be positive");
  if (tile > length) {
    throw DimensionError("tile size " + std::to_string(tile) + " exceeds image extent " +
                         std::to_string(length));
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw ParameterError("overlap fraction must lie in [0, 1)");
  }
  const int stride = std::max(1, static_cast<int>(std::lround(tile * (1.0 - overlap_fraction))));
  std::vector<int> pos;
  for (int p = 0;; p += stride) {
    if (p + tile >= length) {
      const int snapped = length - tile;
      if (pos.empty() || pos.back() < snapped) pos.push_back(snapped);
      break;
    }
    pos.push_back(p);
  }
  return pos;
}

std::vector<Offset> tile_layout(int width, int height, int tile, double overlap_fraction) {
  const std::vector<int> xs = tile_positions(width, tile, overlap_fraction);
  const std::vector<int> ys = tile_positions(height, tile, overlap_fraction);
  std::vector<Offset> out;
  out.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) out.push_back({x, y});
  }
  return out;
}

TileGrid center_crop_tile(const Image& img, int crop_size, int tile_size) {
  if (tile_size <= 0 || crop_size <= 0 || crop_size % tile_size != 0) {
    throw ParameterError("crop size must be a positive multiple of the tile size");
  }
  if (img.width() < crop_size || img.height() < crop_size) {
    throw DimensionError("image " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " is smaller than the crop " +
                         std::to_string(crop_size));
  }
  const int x0 = (img.width() - crop_size) / 2;
  const int y0 = (img.height() - crop_size) / 2;
  TileGrid grid;
  grid.tile_width = grid.tile_height = tile_size;
  grid.parent_width = grid.parent_height = crop_size;
  for (int y = 0; y < crop_size; y += tile_size) {
    for (int x = 0; x < crop_size; x += tile_size) {
      grid.tiles.push_back(img.crop(x0 + x, y0 + y, tile_size, tile_size));
      grid.offsets.push_back({x, y});
    }
  }
  return grid;
}

TileGrid tile_overlapping(const Image& img, int tile_size, double overlap_fraction) {
  TileGrid grid;
  grid.offsets = tile_layout(img.width(), img.height(), tile_size, overlap_fraction);
  grid.tile_width = grid.tile_height = tile_size;
  grid.parent_width = img.width();
  grid.parent_height = img.height();
  grid.tiles.reserve(grid.offsets.size());
  for (const Offset& o : grid.offsets) grid.tiles.push_back(img.crop(o.x, o.y, tile_size, tile_size));
  return grid;
}

Image paste_tiles(const TileGrid& grid) {
  grid.validate();
  const int channels = grid.tiles.empty() ? 1 : grid.tiles.front().channels();
  Image out(grid.parent_width, grid.parent_height, channels);
  for (std::size_t i = 0; i < grid.size(); ++i) out.paste(grid.tiles[i], grid.offsets[i].x, grid.offsets[i].y);
  return out;
}

Image upsample_bilinear(const Image& img, double factor) {
  if (!(factor >= 1.0)) throw ParameterError("upsampling factor must be >= 1");
  if (img.empty()) throw DimensionError("cannot upsample an empty image");
  const auto scaled = [factor](int n) {
    return static_cast<int>(std::floor(factor * n + 0.5));
  };
  const int ow = scaled(img.width());
  const int oh = scaled(img.height());
  if (ow == img.width() && oh == img.height()) return img;
  Image out(ow, oh, img.channels());
  // Corner-aligned: output pixel 0 and n'−1 sample input pixels 0 and n−1.
  const auto source = [](int i, int n_out, int n_in) {
    return n_out > 1 ? static_cast<double>(i) * (n_in - 1) / (n_out - 1) : 0.0;
  };
  for (int y = 0; y < oh; ++y) {
    const double sy = source(y, oh, img.height());
    const int y0 = std::min(static_cast<int>(std::floor(sy)), img.height() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < ow; ++x) {
      const double sx = source(x, ow, img.width());
      const int x0 = std::min(static_cast<int>(std::floor(sx)), img.width() - 1);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

double tile_weight(Offset at, int w, int h, double sigma, double px, double py) noexcept {
  const double cx = at.x + (w - 1) / 2.0;
  const double cy = at.y + (h - 1) / 2.0;
  const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

Image blend_tiles(const TileGrid& grid, double sigma) {
  grid.validate();
  if (grid.tiles.empty()) throw DimensionError("blend_tiles needs at least one tile");
  if (sigma <= 0.0) sigma = std::max(grid.tile_width, grid.tile_height) / 4.0;
  const int channels = grid.tiles.front().channels();
  const std::size_t pixels = static_cast<std::size_t>(grid.parent_width) * grid.parent_height;
  std::vector<double> acc(pixels * channels, 0.0);
  std::vector<double> weight(pixels, 0.0);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const Image& tile = grid.tiles[t];
    if (tile.channels() != channels) throw DimensionError("tiles differ in channel count");
    const Offset o = grid.offsets[t];
    for (int y = 0; y < grid.tile_height; ++y) {
      for (int x = 0; x < grid.tile_width; ++x) {
        const double w = tile_weight(o, grid.tile_width, grid.tile_height, sigma, o.x + x, o.y + y);
        const std::size_t p = static_cast<std::size_t>(o.y + y) * grid.parent_width + o.x + x;
        weight[p] += w;
        for (int c = 0; c < channels; ++c) acc[p * channels + c] += w * tile.at(x, y, c);
      }
    }
  }
  Image out(grid.parent_width, grid.parent_height, channels);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!(weight[p] > 0.0)) {
      throw CoverageError("pixel (" + std::to_string(p % grid.parent_width) + ", " +
                          std::to_string(p / grid.parent_width) + ") is not covered by any tile");
    }
    for (int c = 0; c < channels; ++c) {
      out.data()[p * channels + c] = static_cast<float>(acc[p * channels + c] / weight[p]);
    }
  }
  return out;
}

VolumeStack assemble_stack(std::vector<Image> slices, double z_spacing_um) {
  if (slices.empty()) throw DimensionError("a stack needs at least one slice");
  if (!(z_spacing_um > 0.0)) throw ParameterError("z spacing must be positive");
  for (std::size_t i = 1; i < slices.size(); ++i) {
    if (!slices[i].same_shape(slices[0])) {
      throw DimensionError("slice " + std::to_string(i) + " differs in shape from slice 0");
    }
  }
  return VolumeStack{std::move(slices), z_spacing_um};
}

SectionViews orthogonal_views(const VolumeStack& stack) {
  if (stack.slices.empty()) throw DimensionError("empty stack");
  const Image& first = stack.slices.front();
  const int w = first.width(), h = first.height(), ch = first.channels(), d = stack.depth();
  SectionViews views;
  views.z_spacing_um = stack.z_spacing_um;
  views.xy = stack.slices[d / 2];
  views.xz = Image(w, d, ch);
  views.yz = Image(h, d, ch);
  const int row = h / 2, col = w / 2;
  for (int z = 0; z < d; ++z) {
    const Image& s = stack.slices[z];
    if (!s.same_shape(first)) throw DimensionError("stack slices differ in shape");
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) views.xz.at(x, z, c) = s.at(x, row, c);
    }
    for (int y = 0; y < h; ++y) {
      for (int c = 0; c < ch; ++c) views.yz.at(y, z, c) = s.at(col, y, c);
    }
  }
  return views;
}

}  // namespace vhist
