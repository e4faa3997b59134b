#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vhist/cyclegan_config.hpp"
#include "vhist/image.hpp"
#include "vhist/imagecore.hpp"
#include "vhist/optics.hpp"
#include "vhist/phantom.hpp"

namespace vhist {

/// Maps a 3-channel tile in [0,1] to an RGB tile in [0,1] of the same size.
/// Must be safe to call concurrently when inference uses more than one worker.
using TileTranslator = std::function<Image(const Image&)>;

/// A translator bound to the input domain its weights were trained on.
struct ModelHandle {
  TileTranslator translate;
  InputDomain domain = InputDomain::qobm_inverted;
  std::string checkpoint_id = "none";
};

/// Returns the input tile unchanged (as RGB).
ModelHandle identity_model(InputDomain domain = InputDomain::qobm_inverted);

/// What kind of grayscale image a job feeds to the model.
enum class SourceKind { phase, dpc, single_capture };

struct PreprocessSettings {
  double p_low = kDefaultPercentileLow;
  double p_high = kDefaultPercentileHigh;
  bool invert = true;
};

struct InferenceSettings {
  int tile_size = 64;
  double overlap = 0.5;
  double sigma = 0.0;  // ≤ 0 → tile_size / 4
  int workers = 1;
};

enum class MosaicOrder { stitch_then_convert, convert_then_stitch };

struct ConversionSettings {
  SourceKind source = SourceKind::phase;
  PreprocessSettings preprocess;
  InferenceSettings inference;
  MosaicOrder mosaic_order = MosaicOrder::stitch_then_convert;

  /// The model input domain this job produces.
  InputDomain domain() const;
};

/// Throws DomainMismatch when the model was trained on a different input domain.
void check_domain(const ModelHandle& model, const ConversionSettings& settings);

Image to_image(const Grid<double>& values);
Image to_image(const PhaseImage& phase);

/// enhance_contrast → invert (if set) → replicate to 3 channels.
Image preprocess(const Image& gray, const PreprocessSettings& settings);

/// Overlapping tiles → per-tile translation → Gaussian blending.
/// Tile rows are processed as bands; within a band tiles may run in parallel, and
/// accumulation always happens in tile-index order.
Image translate_tiled(const Image& prepared, const TileTranslator& translate,
                      const InferenceSettings& settings);

/// Returns float RGB in [0,1] with the input's spatial dimensions.
Image convert_fov(const Image& gray, const ModelHandle& model, const ConversionSettings& settings);
Image convert_fov(const PhaseImage& phase, const ModelHandle& model,
                  const ConversionSettings& settings);

/// Fields of view placed at known offsets (scan plan).
struct Mosaic {
  std::vector<Image> fields;  // grayscale, all the same size
  std::vector<Offset> offsets;
};

/// Gaussian-blended stitch; throws CoverageError naming the uncovered regions.
Image stitch_fields(const Mosaic& mosaic, double sigma = 0.0);

Image convert_mosaic(const Mosaic& mosaic, const ModelHandle& model,
                     const ConversionSettings& settings);

/// Converts every slice independently. Errors are rethrown with the slice index.
VolumeStack convert_stack(const VolumeStack& stack, const ModelHandle& model,
                          const ConversionSettings& settings);

// Synthetic datasets built from phantoms.

struct AcquisitionSettings {
  double shear_px = kDefaultShearPx;
  double cutoff = kDefaultCutoff;
  double alpha = kDefaultAlpha;
  double background = 1.0;
  double noise_sigma = 0.002;
  double phase_scale = kDefaultPhaseScale;
  bool simulate = true;  // false → use the rendered phase directly
};

/// Grayscale image of the requested source kind for phantom slice `z`, produced
/// through capture simulation and reconstruction when `acq.simulate` is set.
Image acquire(const Phantom& phantom, int z, SourceKind source, const AcquisitionSettings& acq,
              std::uint64_t seed);

/// Non-overlapping tiles covering the centred `(w / tile)·tile` crop.
std::vector<Image> cut_tiles(const Image& img, int tile);

}  // namespace vhist
