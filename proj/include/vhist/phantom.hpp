#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vhist/image.hpp"

namespace vhist {

/// Structure label stored per pixel in a phantom.
enum class Tissue : std::uint8_t { background = 0, cytoplasm = 1, nucleus = 2, vessel = 3, rbc = 4 };
inline constexpr int kTissueCount = 5;

enum class TissueClass : std::uint8_t { healthy = 0, tumor = 1 };

std::string to_string(TissueClass c);
TissueClass tissue_class_from_string(const std::string& s);

/// Refractive-index increments per structure (dimensionless).
struct IndexTable {
  double background = 0.00;
  double cytoplasm = 0.02;
  double nucleus = 0.05;
  double vessel = 0.01;
  double rbc = 0.08;

  double of(Tissue t) const noexcept;
};

struct TumorModifiers {
  double density_multiplier = 2.5;
  double nucleus_size_multiplier = 1.5;
  double irregularity = 0.6;
};

struct PhantomSpec {
  int width_px = 256;
  int height_px = 256;
  double cell_density = 10.0;  // nuclei per 100×100 px
  double nucleus_radius_mean = 4.0;
  double nucleus_radius_spread = 0.8;
  double cell_radius_ratio = 2.2;  // cytoplasm disk radius / nucleus radius
  int vessel_count = 0;
  double vessel_radius = 5.0;
  double rbc_fraction = 0.5;
  TissueClass class_label = TissueClass::healthy;
  TumorModifiers tumor;
  int depth_slices = 1;
  double z_spacing_um = 1.0;
  IndexTable index;
  std::uint64_t seed = 0;

  /// Throws DimensionError / ParameterError on an invalid spec.
  void validate() const;
};

struct Phantom {
  int width = 0;
  int height = 0;
  double z_spacing_um = 1.0;
  std::vector<Grid<std::uint8_t>> labels;  // one per z slice
  std::vector<Grid<float>> index;          // Δn, same shape as labels

  int depth() const noexcept { return static_cast<int>(labels.size()); }
  friend bool operator==(const Phantom&, const Phantom&) = default;
};

Phantom generate_phantom(const PhantomSpec& spec);

/// Quantitative phase in radians with a pixel pitch (μm) as metadata.
struct PhaseImage {
  Grid<double> phase;
  double pixel_pitch_um = 0.25;

  int width() const noexcept { return phase.width(); }
  int height() const noexcept { return phase.height(); }
};

/// Radians per unit Δn used by render_phase: 2π·(thickness 1.15 μm)/(0.72 μm) ≈ 10.
inline constexpr double kDefaultPhaseScale = 10.0;

/// phase = scale · Δn on slice `z`.
PhaseImage render_phase(const Phantom& phantom, int z, double scale = kDefaultPhaseScale);

/// Oracle H&E colours, 8-bit sRGB triplets.
struct HePalette {
  std::array<std::uint8_t, 3> background{242, 240, 244};
  std::array<std::uint8_t, 3> cytoplasm{237, 171, 210};
  std::array<std::uint8_t, 3> nucleus{122, 71, 158};
  std::array<std::uint8_t, 3> vessel{246, 232, 240};
  std::array<std::uint8_t, 3> rbc{217, 39, 33};

  const std::array<std::uint8_t, 3>& of(Tissue t) const noexcept;
};

/// Paired ground-truth H&E rendering of slice `z` (RGB, values in [0,1]).
Image render_he(const Phantom& phantom, int z, const HePalette& palette = {});

/// Binary mask (0/1) of pixels carrying `label` on slice `z`.
Grid<std::uint8_t> label_mask(const Phantom& phantom, int z, Tissue label);

/// 4-connected components with value != 0.
int count_components(const Grid<std::uint8_t>& mask, int min_area = 1);

}  // namespace vhist
