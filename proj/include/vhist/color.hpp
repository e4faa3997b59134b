#pragma once

#include <array>
#include <cstdint>

#include "vhist/image.hpp"

namespace vhist {

struct Hsv {
  double hue = 0.0;         // degrees in [0, 360); 0 for achromatic pixels
  double saturation = 0.0;  // [0, 1]
  double value = 0.0;       // [0, 1]
};

Hsv rgb_to_hsv(double r, double g, double b);

/// Hue interval in degrees. `lo` may be negative to wrap through 0 (e.g. red: [-10, 15]).
struct HueBand {
  double lo = 0.0;
  double hi = 0.0;
  double min_saturation = 0.0;
  double max_saturation = 1.0;

  bool contains(const Hsv& c) const noexcept;
};

// Stain colour bands used to make the oracle H&E machine-checkable.
inline constexpr HueBand kPurpleBand{260.0, 300.0, 0.15, 1.0};
inline constexpr HueBand kPinkBand{300.0, 345.0, 0.10, 0.50};
inline constexpr HueBand kRedBand{-10.0, 15.0, 0.60, 1.0};

/// Pixels of an RGB image whose colour lies inside `band`.
Grid<std::uint8_t> band_mask(const Image& rgb, const HueBand& band);

}  // namespace vhist
