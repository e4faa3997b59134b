#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vhist/evalsuite.hpp"
#include "vhist/phantom.hpp"
#include "vhist/pipeline.hpp"

namespace vhist {

/// Synthetic training data recipe shared by `train`, `finetune` and `classify`.
struct DataSettings {
  int tile_size = 64;
  int phantom_size = 256;
  int x_tiles = 200;  // phase-domain tiles
  int y_tiles = 200;  // H&E-domain tiles, from disjoint phantoms
  double tumor_fraction = 0.5;
  double upsample = 1.0;  // bilinear factor applied to H&E renders before tiling
  std::string palette = "standard";  // standard | faded
};

struct ClassifierSettings {
  int folds = 5;
  int tiles_per_class = 96;
  int tile_size = 128;
  int epochs = 6;
  int batch_size = 16;
  double lr = 3e-3;
  double warmup_fraction = 0.1;
  int width = 8;
  int vhe_tiles_per_class = 32;
};

/// Deterministic 64-bit seed derived from (seed, stream, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

/// Class of the i-th phantom so that a fraction `tumor_fraction` of any prefix is tumor.
TissueClass class_for_index(int i, double tumor_fraction) noexcept;

/// Square PhantomSpec of the requested class; the rest are library defaults.
PhantomSpec dataset_phantom_spec(int size, TissueClass label, std::uint64_t seed);

/// Seed streams used by the dataset builders; held-out data uses its own stream.
enum class DataStream : std::uint64_t { x_train = 1, y_train = 2, held_out = 3, classifier = 4, transfer = 5 };

/// Preprocessed (3-channel, [0,1]) X-domain tiles. Whole phantoms are acquired and
/// preprocessed, then cut into non-overlapping tiles.
std::vector<Image> make_x_tiles(const DataSettings& data, const AcquisitionSettings& acq,
                                const ConversionSettings& conv, std::uint64_t seed,
                                DataStream stream = DataStream::x_train);

/// Oracle H&E tiles (RGB, [0,1]).
std::vector<Image> make_y_tiles(const DataSettings& data, const HePalette& palette, std::uint64_t seed,
                                DataStream stream = DataStream::y_train);

/// One phantom field of view with every view a test needs.
struct PhantomField {
  Phantom phantom;
  Image source;  // grayscale acquisition (before preprocessing)
  Image he;      // oracle render
  Grid<std::uint8_t> nuclei;
  TissueClass label = TissueClass::healthy;
  std::string id;
};

PhantomField make_field(int size, TissueClass label, const AcquisitionSettings& acq, SourceKind source,
                        const HePalette& palette, std::uint64_t seed, const std::string& id);

/// Balanced healthy/tumor oracle H&E tiles for the classifier.
LabeledTileSet make_he_tileset(const ClassifierSettings& cls, int phantom_size, const HePalette& palette,
                               std::uint64_t seed, DataStream stream = DataStream::classifier);

}  // namespace vhist
