#include "vhist/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace vhist::io {

namespace {

static_assert(std::endian::native == std::endian::little, "raw formats assume a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

void png_warning_fn(png_structp, png_const_charp) {}

// rows: height × (width·channels·bytes_per_sample), big-endian 16-bit samples.
void write_png_raw(const fs::path& path, int width, int height, int channels, int bit_depth,
                   const std::vector<std::uint8_t>& bytes) {
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : channels == 3 ? PNG_COLOR_TYPE_RGB : -1;
  if (color < 0) throw IoError("unsupported channel count for PNG");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct RawPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

RawPng read_png_raw(const fs::path& path) {
  FilePtr f = open_file(path, "rb");
  RawPng out;
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::uint16_t to16(float v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
}
std::uint8_t to8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of file");
  return v;
}

void expect_magic(std::istream& is, const char* magic, const fs::path& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) {
    throw IoError("'" + path.string() + "' is not a " + std::string(magic, 4) + " file");
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  return is;
}

}  // namespace

void write_png8(const fs::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.size());
  std::transform(img.values().begin(), img.values().end(), bytes.begin(), to8);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, img.width(), img.height(), img.channels(), 8, bytes);
}

void write_png16(const fs::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint16_t v = to16(img.data()[i]);
    bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, img.width(), img.height(), img.channels(), 16, bytes);
}

void write_png8(const fs::path& path, const Grid<std::uint8_t>& gray) {
  std::vector<std::uint8_t> bytes(gray.values().begin(), gray.values().end());
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, gray.width(), gray.height(), 1, 8, bytes);
}

void write_png16(const fs::path& path, const Grid<std::uint16_t>& gray) {
  std::vector<std::uint8_t> bytes(gray.size() * 2);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(gray[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(gray[i] & 0xff);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, gray.width(), gray.height(), 1, 16, bytes);
}

Image read_png(const fs::path& path) {
  const RawPng raw = read_png_raw(path);
  Image out(raw.width, raw.height, raw.channels);
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const int v = (raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1];
      out.data()[i] = static_cast<float>(v / 65535.0);
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(raw.bytes[i] / 255.0);
  }
  return out;
}

Grid<std::uint8_t> read_png8_gray(const fs::path& path) {
  const RawPng raw = read_png_raw(path);
  if (raw.channels != 1 || raw.bit_depth != 8) throw IoError("'" + path.string() + "' is not 8-bit grayscale");
  Grid<std::uint8_t> out(raw.width, raw.height);
  std::copy(raw.bytes.begin(), raw.bytes.end(), out.data());
  return out;
}

Grid<std::uint16_t> read_png16_gray(const fs::path& path) {
  const RawPng raw = read_png_raw(path);
  if (raw.channels != 1 || raw.bit_depth != 16) throw IoError("'" + path.string() + "' is not 16-bit grayscale");
  Grid<std::uint16_t> out(raw.width, raw.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]);
  }
  return out;
}

void write_phantom(const fs::path& dir, const Phantom& phantom) {
  fs::create_directories(dir);
  const int d = phantom.depth();
  Grid<std::uint8_t> stacked(phantom.width, phantom.height * d);
  for (int z = 0; z < d; ++z) {
    std::copy(phantom.labels[z].values().begin(), phantom.labels[z].values().end(),
              stacked.data() + static_cast<std::size_t>(z) * phantom.width * phantom.height);
  }
  write_png8(dir / "labels.png", stacked);

  std::ofstream os = open_out(dir / "index.phnt");
  os.write("PHNT", 4);
  put<std::uint32_t>(os, phantom.width);
  put<std::uint32_t>(os, phantom.height);
  put<std::uint32_t>(os, d);
  for (const auto& slice : phantom.index) {
    os.write(reinterpret_cast<const char*>(slice.data()), slice.size() * sizeof(float));
  }
  write_text(dir / "phantom.meta", "z_spacing_um = " + std::to_string(phantom.z_spacing_um) + "\n");
  if (!os) throw IoError("failed writing phantom index");
}

Phantom read_phantom(const fs::path& dir) {
  std::ifstream is = open_in(dir / "index.phnt");
  expect_magic(is, "PHNT", dir / "index.phnt");
  Phantom p;
  p.width = static_cast<int>(get<std::uint32_t>(is));
  p.height = static_cast<int>(get<std::uint32_t>(is));
  const int d = static_cast<int>(get<std::uint32_t>(is));
  for (int z = 0; z < d; ++z) {
    Grid<float> slice(p.width, p.height);
    is.read(reinterpret_cast<char*>(slice.data()), slice.size() * sizeof(float));
    if (!is) throw IoError("truncated phantom index");
    p.index.push_back(std::move(slice));
  }
  const Grid<std::uint8_t> stacked = read_png8_gray(dir / "labels.png");
  if (stacked.width() != p.width || stacked.height() != p.height * d) {
    throw IoError("labels.png does not match index.phnt dimensions");
  }
  for (int z = 0; z < d; ++z) {
    Grid<std::uint8_t> slice(p.width, p.height);
    const auto* src = stacked.data() + static_cast<std::size_t>(z) * p.width * p.height;
    std::copy(src, src + slice.size(), slice.data());
    p.labels.push_back(std::move(slice));
  }
  if (fs::exists(dir / "phantom.meta")) {
    std::istringstream meta(read_text(dir / "phantom.meta"));
    std::string key, eq;
    double v;
    while (meta >> key >> eq >> v) {
      if (key == "z_spacing_um") p.z_spacing_um = v;
    }
  }
  return p;
}

void write_phase(const fs::path& path, const PhaseImage& phase) {
  std::ofstream os = open_out(path);
  os.write("QPHI", 4);
  put<std::uint32_t>(os, phase.width());
  put<std::uint32_t>(os, phase.height());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(phase.pixel_pitch_um * 1000.0)));
  for (double v : phase.phase.values()) put<float>(os, static_cast<float>(v));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

PhaseImage read_phase(const fs::path& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, "QPHI", path);
  const int w = static_cast<int>(get<std::uint32_t>(is));
  const int h = static_cast<int>(get<std::uint32_t>(is));
  PhaseImage out;
  out.pixel_pitch_um = get<std::uint32_t>(is) / 1000.0;
  out.phase = Grid<double>(w, h);
  std::vector<float> buf(out.phase.size());
  is.read(reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
  if (!is) throw IoError("truncated phase file '" + path.string() + "'");
  std::copy(buf.begin(), buf.end(), out.phase.data());
  return out;
}

void write_phase_png(const fs::path& path, const PhaseImage& phase) {
  const auto [lo, hi] = std::minmax_element(phase.phase.values().begin(), phase.phase.values().end());
  Image img(phase.width(), phase.height(), 1);
  const double span = (lo != phase.phase.values().end() && *hi > *lo) ? *hi - *lo : 1.0;
  for (std::size_t i = 0; i < phase.phase.size(); ++i) {
    img.data()[i] = static_cast<float>((phase.phase[i] - *lo) / span);
  }
  write_png16(path, img);
}

void write_captures(const fs::path& dir, const CaptureSet& captures, double counts_per_unit) {
  captures.validate();
  fs::create_directories(dir);
  for (int i = 0; i < 4; ++i) {
    const Grid<double>& img = captures.images[i];
    Grid<std::uint16_t> counts(img.width(), img.height());
    for (std::size_t p = 0; p < img.size(); ++p) {
      counts[p] = static_cast<std::uint16_t>(std::clamp<long>(std::lround(img[p] * counts_per_unit), 0, 65535));
    }
    write_png16(dir / ("capture_" + std::to_string(i + 1) + ".png"), counts);
  }
  std::ostringstream meta;
  meta << "counts_per_unit = " << counts_per_unit << "\n"
       << "wavelength_nm = " << captures.wavelength_nm << "\n"
       << "inclination_deg = " << captures.inclination_deg << "\n";
  for (int i = 0; i < 4; ++i) meta << "azimuth_" << (i + 1) << "_deg = " << captures.azimuth_deg[i] << "\n";
  write_text(dir / "captures.meta", meta.str());
}

CaptureSet read_captures(const fs::path& dir) {
  std::map<std::string, double> meta;
  {
    std::istringstream is(read_text(dir / "captures.meta"));
    std::string key, eq;
    double v;
    while (is >> key >> eq >> v) meta[key] = v;
  }
  if (!meta.count("counts_per_unit") || !(meta["counts_per_unit"] > 0.0)) {
    throw IoError("captures.meta lacks a positive counts_per_unit");
  }
  const double scale = meta["counts_per_unit"];
  CaptureSet out;
  if (meta.count("wavelength_nm")) out.wavelength_nm = meta["wavelength_nm"];
  if (meta.count("inclination_deg")) out.inclination_deg = meta["inclination_deg"];
  for (int i = 0; i < 4; ++i) {
    const std::string key = "azimuth_" + std::to_string(i + 1) + "_deg";
    if (meta.count(key)) out.azimuth_deg[i] = meta[key];
    const Grid<std::uint16_t> counts = read_png16_gray(dir / ("capture_" + std::to_string(i + 1) + ".png"));
    Grid<double> img(counts.width(), counts.height());
    for (std::size_t p = 0; p < img.size(); ++p) img[p] = counts[p] / scale;
    out.images[i] = std::move(img);
  }
  out.validate();
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  os << "# file x y\n";
  for (const auto& e : entries) os << e.file << ' ' << e.x << ' ' << e.y << '\n';
  write_text(path, os.str());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::istringstream is(read_text(path));
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.file)) continue;
    if (!(ls >> e.x >> e.y)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 'file x y'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_tile_grid(const fs::path& dir, const TileGrid& grid, const std::string& stem) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.png", stem.c_str(), i);
    const Image& tile = grid.tiles[i];
    if (tile.channels() == 1) {
      write_png16(dir / name, tile);
    } else {
      write_png8(dir / name, tile);
    }
    entries.push_back({name, grid.offsets[i].x, grid.offsets[i].y});
  }
  write_manifest(dir / "manifest.txt", entries);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
}

}  // namespace vhist::io
