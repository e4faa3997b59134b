#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vhist/imagecore.hpp"

using namespace vhist;
using vhist::testing::random_image;

namespace {

Image ramp_0_100() {
  Image img(101, 1, 1);
  for (int x = 0; x <= 100; ++x) img.at(x, 0) = static_cast<float>(x);
  return img;
}

Image constant(int w, int h, int c, float v) { return Image(w, h, c, v); }

std::vector<int> covered_count(const TileGrid& g) {
  std::vector<int> n(static_cast<std::size_t>(g.parent_width) * g.parent_height, 0);
  for (const Offset& o : g.offsets) {
    for (int y = 0; y < g.tile_height; ++y) {
      for (int x = 0; x < g.tile_width; ++x) ++n[static_cast<std::size_t>(o.y + y) * g.parent_width + o.x + x];
    }
  }
  return n;
}

}  // namespace

TEST_SUITE("imagecore") {

TEST_CASE("nearest-rank percentile") {
  const Image r = ramp_0_100();
  CHECK(percentile(r.values(), 0.0) == 0.0f);
  CHECK(percentile(r.values(), 1.0) == 1.0f);
  CHECK(percentile(r.values(), 50.0) == 50.0f);
  CHECK(percentile(r.values(), 100.0) == 100.0f);
  CHECK_THROWS_AS(percentile(r.values(), 101.0), ParameterError);
}

TEST_CASE("enhance_contrast maps percentiles to 0 and 1") {
  const ContrastResult c = enhance_contrast(ramp_0_100(), 1.0, 99.0);
  CHECK(c.image.at(1, 0) == doctest::Approx(0.0));
  CHECK(c.image.at(99, 0) == doctest::Approx(1.0));
  CHECK(c.image.at(50, 0) == doctest::Approx(0.5));
  CHECK(c.image.at(0, 0) == 0.0f);
  CHECK(c.image.at(100, 0) == 1.0f);
  CHECK_FALSE(c.degenerate);

  const Image img = random_image(40, 30, 1, 3, -2.0f, 5.0f);
  const Image once = enhance_contrast(img, 0.0, 100.0).image;
  float lo = 1.0f, hi = 0.0f;
  for (float v : once.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);
  CHECK(max_abs_diff(enhance_contrast(once, 0.0, 100.0).image, once) < 1e-6);
  const Image stretched = enhance_contrast(img).image;
  for (float v : stretched.values()) CHECK((v >= 0.0f && v <= 1.0f));

  const ContrastResult flat = enhance_contrast(constant(5, 5, 1, 3.0f));
  CHECK(flat.degenerate);
  for (float v : flat.image.values()) CHECK(v == 0.5f);
  CHECK_THROWS_AS(enhance_contrast(img, 60.0, 40.0), ParameterError);
}

TEST_CASE("invert is an involution on [0,1]") {
  const Image img = random_image(17, 9, 3, 4);
  CHECK(max_abs_diff(invert(invert(img)), img) < 1e-7);
  CHECK(invert(constant(1, 1, 1, 0.0f)).at(0, 0) == 1.0f);
  CHECK_THROWS_AS(invert(constant(2, 2, 1, 1.5f)), RangeError);
}

TEST_CASE("center_crop_tile") {
  Image big = random_image(1600, 1560, 1, 5);
  const TileGrid g = center_crop_tile(big);
  REQUIRE(g.size() == 9);
  std::vector<Offset> expect;
  for (int y : {0, 512, 1024}) {
    for (int x : {0, 512, 1024}) expect.push_back({x, y});
  }
  CHECK(g.offsets == expect);
  CHECK(g.parent_width == 1536);
  const Image crop = big.crop(32, 12, 1536, 1536);
  CHECK(paste_tiles(g) == crop);

  const TileGrid one = center_crop_tile(random_image(512, 512, 3, 6), 512, 512);
  REQUIRE(one.size() == 1);
  CHECK(one.offsets[0] == Offset{0, 0});
  CHECK_THROWS_AS(center_crop_tile(random_image(1000, 1600, 1, 7)), DimensionError);
  CHECK_THROWS_AS(center_crop_tile(big, 1500, 512), ParameterError);
}

TEST_CASE("tile_overlapping arithmetic") {
  const Image img(1024, 1024, 1);
  const TileGrid flat = tile_overlapping(img, 512, 0.0);
  CHECK(flat.size() == 4);
  CHECK(flat.offsets[1] == Offset{512, 0});

  CHECK(tile_positions(1024, 512, 0.2) == std::vector<int>{0, 410, 512});
  const TileGrid g = tile_overlapping(img, 512, 0.2);
  CHECK(g.size() == 9);
  CHECK(g.offsets.back() == Offset{512, 512});
  CHECK(g.covers_parent());
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS(tile_overlapping(img, 2048, 0.2), DimensionError);
  CHECK_THROWS_AS(tile_overlapping(img, 512, 1.0), ParameterError);
}

TEST_CASE("tiling covers the frame for randomized cases") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = std::uniform_int_distribution<int>(8, 300)(rng);
    const int h = std::uniform_int_distribution<int>(8, 300)(rng);
    const int tile = std::uniform_int_distribution<int>(1, std::min(w, h))(rng);
    const double overlap = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
    const std::vector<Offset> layout = tile_layout(w, h, tile, overlap);
    TileGrid g;
    g.offsets = layout;
    g.tile_width = g.tile_height = tile;
    g.parent_width = w;
    g.parent_height = h;
    for (int v : covered_count(g)) REQUIRE(v >= 1);
    for (std::size_t i = 1; i < layout.size(); ++i) {
      const bool ordered = layout[i].y > layout[i - 1].y ||
                           (layout[i].y == layout[i - 1].y && layout[i].x > layout[i - 1].x);
      REQUIRE(ordered);
    }
  }
}

TEST_CASE("bilinear upsampling") {
  const Image img = random_image(7, 5, 3, 8);
  CHECK(upsample_bilinear(img, 1.0) == img);
  const Image c = upsample_bilinear(constant(6, 4, 3, 0.3f), 1.5);
  CHECK(c.width() == 9);
  CHECK(c.height() == 6);
  CHECK(c.channels() == 3);
  for (float v : c.values()) CHECK(v == doctest::Approx(0.3f));

  Image two(2, 2, 1);
  two.at(1, 0) = 1.0f;
  two.at(1, 1) = 1.0f;
  const Image up = upsample_bilinear(two, 2.0);
  REQUIRE(up.width() == 4);
  // corner-aligned: columns sample x = 0, 1/3, 2/3, 1
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(up.at(x, y) == doctest::Approx(x / 3.0));
  }
  CHECK(upsample_bilinear(constant(3, 3, 1, 0.0f), 1.5).width() == 5);  // 4.5 rounds up
  CHECK_THROWS_AS(upsample_bilinear(img, 0.5), ParameterError);
}

TEST_CASE("Gaussian blending") {
  const Image tile = random_image(16, 16, 3, 9);
  TileGrid single;
  single.tiles = {tile};
  single.offsets = {{0, 0}};
  single.tile_width = single.tile_height = 16;
  single.parent_width = single.parent_height = 16;
  CHECK(max_abs_diff(blend_tiles(single, 3.0), tile) < 1e-6);

  const TileGrid ones = tile_overlapping(constant(100, 70, 1, 1.0f), 32, 0.37);
  const Image blended_ones = blend_tiles(ones);
  for (float v : blended_ones.values()) CHECK(std::abs(v - 1.0f) < 1e-6);
  const TileGrid cs = tile_overlapping(constant(100, 70, 3, 0.25f), 40, 0.5);
  const Image blended_cs = blend_tiles(cs, 5.0);
  for (float v : blended_cs.values()) CHECK(std::abs(v - 0.25f) < 1e-6);

  // two tiles a, b of width 20 at x = 0 and x = 10 in a 30 × 20 frame
  TileGrid two;
  two.tiles = {constant(20, 20, 1, 0.2f), constant(20, 20, 1, 0.8f)};
  two.offsets = {{0, 0}, {10, 0}};
  two.tile_width = two.tile_height = 20;
  two.parent_width = 30;
  two.parent_height = 20;
  const double sigma = 4.0;
  const Image out = blend_tiles(two, sigma);
  // centres at x = 9.5 and 19.5; x = 14.5 is equidistant
  const auto expected = [&](double px) {
    const double wa = std::exp(-((px - 9.5) * (px - 9.5) + 0.25) / (2 * sigma * sigma));
    const double wb = std::exp(-((px - 19.5) * (px - 19.5) + 0.25) / (2 * sigma * sigma));
    return (0.2 * wa + 0.8 * wb) / (wa + wb);
  };
  CHECK(expected(14.5) == doctest::Approx(0.5));
  for (int x : {10, 12, 14, 15, 17, 19}) CHECK(out.at(x, 10) == doctest::Approx(expected(x)).epsilon(1e-5));
  CHECK(out.at(5, 3) == doctest::Approx(0.2f));
  CHECK(out.at(25, 3) == doctest::Approx(0.8f));
  CHECK(out.at(11, 10) < 0.5f);
  CHECK(out.at(18, 10) > 0.5f);

  TileGrid gap = two;
  gap.offsets = {{0, 0}, {20, 0}};
  gap.parent_width = 50;
  CHECK_THROWS_AS(blend_tiles(gap), CoverageError);
}

TEST_CASE("stacks and section views") {
  Image s0(6, 4, 1, 0.0f), s1(6, 4, 1, 0.5f), s2(6, 4, 1, 1.0f);
  const SectionViews v = orthogonal_views(assemble_stack({s0, s1, s2}, 2.0));
  CHECK(v.z_spacing_um == 2.0);
  REQUIRE(v.xz.width() == 6);
  REQUIRE(v.xz.height() == 3);
  REQUIRE(v.yz.width() == 4);
  for (int z = 0; z < 3; ++z) {
    for (int x = 0; x < 6; ++x) CHECK(v.xz.at(x, z) == z * 0.5f);
    for (int y = 0; y < 4; ++y) CHECK(v.yz.at(y, z) == z * 0.5f);
  }
  CHECK(v.xy == s1);

  const Image one = random_image(8, 5, 3, 10);
  const SectionViews single = orthogonal_views(assemble_stack({one}));
  REQUIRE(single.xz.height() == 1);
  for (int x = 0; x < 8; ++x) CHECK(single.xz.at(x, 0, 1) == one.at(x, 2, 1));

  const SectionViews same = orthogonal_views(assemble_stack({one, one, one, one}));
  for (int z = 1; z < 4; ++z) {
    for (int x = 0; x < 8; ++x) CHECK(same.xz.at(x, z, 0) == same.xz.at(x, 0, 0));
  }
  CHECK_THROWS_AS(assemble_stack({s0, Image(5, 4, 1)}), DimensionError);
  CHECK_THROWS_AS(assemble_stack({}), DimensionError);
  CHECK_THROWS_AS(assemble_stack({s0}, 0.0), ParameterError);
}

}
