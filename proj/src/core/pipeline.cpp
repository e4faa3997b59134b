#include "vhist/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace vhist {

ModelHandle identity_model(InputDomain domain) {
  return ModelHandle{[](const Image& tile) { return replicate_channels(tile, 3); }, domain,
                     "identity"};
}

InputDomain ConversionSettings::domain() const {
  switch (source) {
    case SourceKind::dpc: return InputDomain::dpc;
    case SourceKind::single_capture: return InputDomain::single_capture;
    case SourceKind::phase: break;
  }
  return preprocess.invert ? InputDomain::qobm_inverted : InputDomain::qobm_raw;
}

void check_domain(const ModelHandle& model, const ConversionSettings& settings) {
  const InputDomain job = settings.domain();
  if (job != model.domain) {
    throw DomainMismatch("checkpoint " + model.checkpoint_id + " was trained on '" +
                         to_string(model.domain) + "' inputs but this job produces '" +
                         to_string(job) + "' inputs (check the inversion flag and source)");
  }
}

Image to_image(const Grid<double>& values) {
  Image out(values.width(), values.height(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) out.data()[i] = static_cast<float>(values[i]);
  return out;
}

Image to_image(const PhaseImage& phase) { return to_image(phase.phase); }

Image preprocess(const Image& gray, const PreprocessSettings& settings) {
  Image img = enhance_contrast(gray, settings.p_low, settings.p_high).image;
  if (settings.invert) img = invert(img);
  return replicate_channels(img, 3);
}

namespace {

void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Image translate_tiled(const Image& prepared, const TileTranslator& translate,
                      const InferenceSettings& settings) {
  const int tile = settings.tile_size;
  const std::vector<Offset> layout =
      tile_layout(prepared.width(), prepared.height(), tile, settings.overlap);
  const double sigma = settings.sigma > 0.0 ? settings.sigma : tile / 4.0;

  const int w = prepared.width(), h = prepared.height();
  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  std::vector<double> acc(pixels * 3, 0.0);
  std::vector<double> weight(pixels, 0.0);

  // Precomputed Gaussian window, identical for every tile.
  std::vector<double> window(static_cast<std::size_t>(tile) * tile);
  for (int y = 0; y < tile; ++y) {
    for (int x = 0; x < tile; ++x) window[y * tile + x] = tile_weight({0, 0}, tile, tile, sigma, x, y);
  }

  // Bands = tile rows sharing a y offset; only one band of outputs is alive at a time.
  std::size_t begin = 0;
  while (begin < layout.size()) {
    std::size_t end = begin;
    while (end < layout.size() && layout[end].y == layout[begin].y) ++end;
    std::vector<Image> outputs(end - begin);
    run_parallel(outputs.size(), settings.workers, [&](std::size_t i) {
      const Offset o = layout[begin + i];
      Image out = translate(prepared.crop(o.x, o.y, tile, tile));
      if (out.width() != tile || out.height() != tile || out.channels() != 3) {
        throw DimensionError("translator returned a " + std::to_string(out.width()) + "x" +
                             std::to_string(out.height()) + "x" + std::to_string(out.channels()) +
                             " tile for a " + std::to_string(tile) + "² input");
      }
      outputs[i] = std::move(out);
    });
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const Offset o = layout[begin + i];
      const Image& t = outputs[i];
      for (int y = 0; y < tile; ++y) {
        for (int x = 0; x < tile; ++x) {
          const double wt = window[y * tile + x];
          const std::size_t p = static_cast<std::size_t>(o.y + y) * w + o.x + x;
          weight[p] += wt;
          for (int c = 0; c < 3; ++c) acc[p * 3 + c] += wt * t.at(x, y, c);
        }
      }
    }
    begin = end;
  }

  Image result(w, h, 3);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!(weight[p] > 0.0)) throw CoverageError("tiled inference left a pixel uncovered");
    for (int c = 0; c < 3; ++c) result.data()[p * 3 + c] = static_cast<float>(acc[p * 3 + c] / weight[p]);
  }
  return result;
}

Image convert_fov(const Image& gray, const ModelHandle& model, const ConversionSettings& settings) {
  check_domain(model, settings);
  if (gray.channels() != 1) throw DimensionError("convert_fov expects a single-channel image");
  if (gray.width() < settings.inference.tile_size || gray.height() < settings.inference.tile_size) {
    throw DimensionError("image " + std::to_string(gray.width()) + "x" + std::to_string(gray.height()) +
                         " is smaller than the inference tile " +
                         std::to_string(settings.inference.tile_size));
  }
  PreprocessSettings pre = settings.preprocess;
  pre.invert = settings.domain() == InputDomain::qobm_inverted;
  return translate_tiled(preprocess(gray, pre), model.translate, settings.inference);
}

Image convert_fov(const PhaseImage& phase, const ModelHandle& model,
                  const ConversionSettings& settings) {
  if (settings.source != SourceKind::phase) {
    throw DomainMismatch("a phase image was given to a job configured for " +
                         to_string(settings.domain()) + " input");
  }
  return convert_fov(to_image(phase), model, settings);
}

namespace {

std::string describe_gaps(const std::vector<std::uint8_t>& covered, int w, int h) {
  // Bounding boxes of 4-connected uncovered regions.
  std::vector<std::uint8_t> seen(covered.size(), 0);
  std::ostringstream os;
  int regions = 0;
  for (int start = 0; start < w * h; ++start) {
    if (covered[start] || seen[start]) continue;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int x = i % w, y = i / w;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int j = q[1] * w + q[0];
        if (!covered[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    if (regions < 8) {
      os << (regions ? "; " : "") << "x " << x0 << ".." << x1 << ", y " << y0 << ".." << y1;
    }
    ++regions;
  }
  if (regions > 8) os << "; and " << regions - 8 << " more";
  return os.str();
}

TileGrid mosaic_grid(const Mosaic& mosaic, std::vector<Image> fields) {
  if (mosaic.fields.empty()) throw DimensionError("mosaic has no fields of view");
  if (mosaic.fields.size() != mosaic.offsets.size()) throw DimensionError("field/offset count mismatch");
  const int fw = mosaic.fields.front().width(), fh = mosaic.fields.front().height();
  std::vector<std::size_t> order(mosaic.fields.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
    if (mosaic.fields[i].width() != fw || mosaic.fields[i].height() != fh) {
      throw DimensionError("mosaic fields differ in size");
    }
    if (mosaic.offsets[i].x < 0 || mosaic.offsets[i].y < 0) {
      throw DimensionError("mosaic offsets must be nonnegative");
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Offset& p = mosaic.offsets[a];
    const Offset& q = mosaic.offsets[b];
    return p.y != q.y ? p.y < q.y : p.x < q.x;
  });
  TileGrid grid;
  grid.tile_width = fw;
  grid.tile_height = fh;
  for (std::size_t i : order) {
    const Offset o = mosaic.offsets[i];
    grid.parent_width = std::max(grid.parent_width, o.x + fw);
    grid.parent_height = std::max(grid.parent_height, o.y + fh);
    grid.tiles.push_back(std::move(fields[i]));
    grid.offsets.push_back(o);
  }
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(grid.parent_width) * grid.parent_height, 0);
  for (const Offset& o : grid.offsets) {
    for (int y = o.y; y < o.y + fh; ++y) {
      std::fill_n(covered.begin() + static_cast<std::size_t>(y) * grid.parent_width + o.x, fw, 1);
    }
  }
  if (std::find(covered.begin(), covered.end(), 0) != covered.end()) {
    throw CoverageError("mosaic leaves uncovered regions: " +
                        describe_gaps(covered, grid.parent_width, grid.parent_height));
  }
  grid.validate();
  return grid;
}

}  // namespace

Image stitch_fields(const Mosaic& mosaic, double sigma) {
  return blend_tiles(mosaic_grid(mosaic, mosaic.fields), sigma);
}

Image convert_mosaic(const Mosaic& mosaic, const ModelHandle& model,
                     const ConversionSettings& settings) {
  if (settings.mosaic_order == MosaicOrder::stitch_then_convert) {
    return convert_fov(stitch_fields(mosaic), model, settings);
  }
  std::vector<Image> converted;
  converted.reserve(mosaic.fields.size());
  for (const Image& field : mosaic.fields) converted.push_back(convert_fov(field, model, settings));
  return blend_tiles(mosaic_grid(mosaic, std::move(converted)));
}

VolumeStack convert_stack(const VolumeStack& stack, const ModelHandle& model,
                          const ConversionSettings& settings) {
  if (stack.slices.empty()) throw DimensionError("empty stack");
  std::vector<Image> out;
  out.reserve(stack.slices.size());
  for (std::size_t z = 0; z < stack.slices.size(); ++z) {
    if (!stack.slices[z].same_shape(stack.slices.front())) {
      throw DimensionError("stack slice " + std::to_string(z) + " differs in shape");
    }
    try {
      out.push_back(convert_fov(stack.slices[z], model, settings));
    } catch (const Error& e) {
      throw Error("slice " + std::to_string(z) + ": " + e.what());
    }
  }
  return assemble_stack(std::move(out), stack.z_spacing_um);
}

Image acquire(const Phantom& phantom, int z, SourceKind source, const AcquisitionSettings& acq,
              std::uint64_t seed) {
  const PhaseImage truth = render_phase(phantom, z, acq.phase_scale);
  if (!acq.simulate) {
    if (source != SourceKind::phase) {
      throw ParameterError("dpc and single-capture sources require capture simulation");
    }
    return to_image(truth);
  }
  const OTFSet otf = make_otf_set(truth.width(), truth.height(), acq.shear_px, acq.cutoff);
  const CaptureSet captures =
      simulate_captures(truth, otf, CaptureParams{acq.background, acq.noise_sigma, seed});
  switch (source) {
    case SourceKind::single_capture: return to_image(captures.images[0]);
    case SourceKind::dpc: return to_image(compute_dpc(captures).shear[0]);
    case SourceKind::phase: break;
  }
  return to_image(reconstruct_phase(compute_dpc(captures), otf, acq.alpha, truth.pixel_pitch_um));
}

std::vector<Image> cut_tiles(const Image& img, int tile) {
  const int crop = std::min(img.width(), img.height()) / tile * tile;
  if (crop == 0) throw DimensionError("image smaller than one tile");
  TileGrid grid = center_crop_tile(img, crop, tile);
  return std::move(grid.tiles);
}

}  // namespace vhist
