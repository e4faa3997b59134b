#include "vhist/datasets.hpp"

#include <cmath>

namespace vhist {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  // splitmix64 over a simple combination
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL + index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TissueClass class_for_index(int i, double tumor_fraction) noexcept {
  const bool tumor = std::floor((i + 1) * tumor_fraction) > std::floor(i * tumor_fraction);
  return tumor ? TissueClass::tumor : TissueClass::healthy;
}

PhantomSpec dataset_phantom_spec(int size, TissueClass label, std::uint64_t seed) {
  PhantomSpec spec;
  spec.width_px = spec.height_px = size;
  spec.class_label = label;
  spec.vessel_count = 1;
  spec.seed = seed;
  return spec;
}

std::vector<Image> make_x_tiles(const DataSettings& data, const AcquisitionSettings& acq,
                                const ConversionSettings& conv, std::uint64_t seed, DataStream stream) {
  std::vector<Image> out;
  for (int i = 0; static_cast<int>(out.size()) < data.x_tiles; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(stream), i);
    const Phantom ph =
        generate_phantom(dataset_phantom_spec(data.phantom_size, class_for_index(i, data.tumor_fraction), s));
    const Image prepared = preprocess(acquire(ph, 0, conv.source, acq, s), conv.preprocess);
    for (Image& t : cut_tiles(prepared, data.tile_size)) {
      if (static_cast<int>(out.size()) == data.x_tiles) break;
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<Image> make_y_tiles(const DataSettings& data, const HePalette& palette, std::uint64_t seed,
                                DataStream stream) {
  std::vector<Image> out;
  for (int i = 0; static_cast<int>(out.size()) < data.y_tiles; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(stream), i);
    const Phantom ph =
        generate_phantom(dataset_phantom_spec(data.phantom_size, class_for_index(i, data.tumor_fraction), s));
    Image he = render_he(ph, 0, palette);
    if (data.upsample > 1.0) he = upsample_bilinear(he, data.upsample);
    for (Image& t : cut_tiles(he, data.tile_size)) {
      if (static_cast<int>(out.size()) == data.y_tiles) break;
      out.push_back(std::move(t));
    }
  }
  return out;
}

PhantomField make_field(int size, TissueClass label, const AcquisitionSettings& acq, SourceKind source,
                        const HePalette& palette, std::uint64_t seed, const std::string& id) {
  PhantomField f;
  f.phantom = generate_phantom(dataset_phantom_spec(size, label, seed));
  f.source = acquire(f.phantom, 0, source, acq, seed);
  f.he = render_he(f.phantom, 0, palette);
  f.nuclei = label_mask(f.phantom, 0, Tissue::nucleus);
  f.label = label;
  f.id = id;
  return f;
}

LabeledTileSet make_he_tileset(const ClassifierSettings& cls, int phantom_size, const HePalette& palette,
                               std::uint64_t seed, DataStream stream) {
  LabeledTileSet set;
  for (TissueClass label : {TissueClass::healthy, TissueClass::tumor}) {
    int made = 0;
    for (int i = 0; made < cls.tiles_per_class; ++i) {
      const std::uint64_t s =
          derive_seed(seed, static_cast<std::uint64_t>(stream) * 2 + static_cast<std::uint64_t>(label), i);
      const Phantom ph = generate_phantom(dataset_phantom_spec(phantom_size, label, s));
      const std::vector<Image> tiles = cut_tiles(render_he(ph, 0, palette), cls.tile_size);
      for (std::size_t t = 0; t < tiles.size() && made < cls.tiles_per_class; ++t, ++made) {
        set.add(tiles[t], label, TileSource::real_he,
                to_string(label) + "-" + std::to_string(i) + "-" + std::to_string(t));
      }
    }
  }
  return set;
}

}  // namespace vhist
