#include "vhist/color.hpp"

#include <algorithm>
#include <cmath>

namespace vhist {

Hsv rgb_to_hsv(double r, double g, double b) {
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double chroma = hi - lo;
  Hsv out;
  out.value = hi;
  out.saturation = hi > 0.0 ? chroma / hi : 0.0;
  if (chroma <= 0.0) return out;
  double h;
  if (hi == r) {
    h = 60.0 * (g - b) / chroma;
  } else if (hi == g) {
    h = 60.0 * (b - r) / chroma + 120.0;
  } else {
    h = 60.0 * (r - g) / chroma + 240.0;
  }
  if (h < 0.0) h += 360.0;
  out.hue = h;
  return out;
}

bool HueBand::contains(const Hsv& c) const noexcept {
  if (c.saturation < min_saturation || c.saturation > max_saturation) return false;
  double h = c.hue;
  if (lo < 0.0 && h >= 360.0 + lo) h -= 360.0;
  return h >= lo && h <= hi;
}

Grid<std::uint8_t> band_mask(const Image& rgb, const HueBand& band) {
  if (rgb.channels() != 3) throw DimensionError("band_mask expects an RGB image");
  Grid<std::uint8_t> mask(rgb.width(), rgb.height(), 0);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const Hsv c = rgb_to_hsv(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
      mask(x, y) = band.contains(c) ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace vhist
