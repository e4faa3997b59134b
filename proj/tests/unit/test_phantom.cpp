#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "vhist/color.hpp"
#include "vhist/phantom.hpp"

using namespace vhist;

namespace {

PhantomSpec spec_with(std::uint64_t seed, TissueClass label = TissueClass::healthy) {
  PhantomSpec s;
  s.seed = seed;
  s.class_label = label;
  s.vessel_count = 1;
  return s;
}

double mean_index(const Phantom& p, Tissue t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.labels[0].size(); ++i) {
    if (p.labels[0][i] == static_cast<std::uint8_t>(t)) {
      sum += p.index[0][i];
      ++n;
    }
  }
  return n ? sum / n : std::nan("");
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("same phantom settings and seed give identical phantoms and renders") {
  const PhantomSpec s = spec_with(11);
  const Phantom a = generate_phantom(s);
  const Phantom b = generate_phantom(s);
  CHECK(a == b);
  CHECK(render_he(a, 0) == render_he(b, 0));
  CHECK(render_phase(a, 0).phase == render_phase(b, 0).phase);
  CHECK_FALSE(generate_phantom(spec_with(12)) == a);
}

TEST_CASE("empty phantom settings give a zero index field and a near-white render") {
  PhantomSpec s;
  s.cell_density = 0.0;
  s.vessel_count = 0;
  const Phantom p = generate_phantom(s);
  for (float v : p.index[0].values()) CHECK(v == 0.0f);
  const PhaseImage phase = render_phase(p, 0);
  for (double v : phase.phase.values()) CHECK(v == 0.0);
  const Image he = render_he(p, 0);
  for (float v : he.values()) CHECK(v > 0.9f);
}

TEST_CASE("nucleus count is Poisson around density times area") {
  PhantomSpec s;
  s.width_px = 500;
  s.height_px = 500;
  s.cell_density = 10.0;
  s.seed = 3;
  const Phantom p = generate_phantom(s);
  const int count = count_components(label_mask(p, 0, Tissue::nucleus));
  // Poisson(250): sd = sqrt(250)
  CHECK(std::abs(count - 250.0) <= 3.0 * std::sqrt(250.0));
}

TEST_CASE("index ordering rbc > nucleus > cytoplasm > background = 0") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Phantom p = generate_phantom(spec_with(seed));
    CHECK(mean_index(p, Tissue::background) == 0.0);
    CHECK(mean_index(p, Tissue::nucleus) > mean_index(p, Tissue::cytoplasm));
    CHECK(mean_index(p, Tissue::cytoplasm) > 0.0);
    const double rbc = mean_index(p, Tissue::rbc);
    if (!std::isnan(rbc)) CHECK(rbc > mean_index(p, Tissue::nucleus));
    float mx = 0.0f;
    for (float v : p.index[0].values()) mx = std::max(mx, v);
    CHECK(mx == doctest::Approx(IndexTable{}.rbc));
  }
}

TEST_CASE("render_phase is linear in the index and orders nucleus above cytoplasm") {
  const Phantom p = generate_phantom(spec_with(4));
  const PhaseImage a = render_phase(p, 0, 10.0);
  const PhaseImage b = render_phase(p, 0, 20.0);
  for (std::size_t i = 0; i < a.phase.size(); ++i) CHECK(b.phase[i] == doctest::Approx(2.0 * a.phase[i]));
  double nuc = 0.0, cyt = 0.0;
  std::size_t nn = 0, nc = 0;
  for (std::size_t i = 0; i < a.phase.size(); ++i) {
    const auto l = static_cast<Tissue>(p.labels[0][i]);
    if (l == Tissue::nucleus) nuc += a.phase[i], ++nn;
    if (l == Tissue::cytoplasm) cyt += a.phase[i], ++nc;
  }
  CHECK(nuc / nn > cyt / nc);
  CHECK_THROWS_AS(render_phase(p, 1), IndexError);
  CHECK_THROWS_AS(render_he(p, -1), IndexError);
}

TEST_CASE("H&E colours sit in their declared bands") {
  const Phantom p = generate_phantom(spec_with(5));
  const Image he = render_he(p, 0);
  int rbc_pixels = 0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const auto l = static_cast<Tissue>(p.labels[0](x, y));
      const Hsv c = rgb_to_hsv(he.at(x, y, 0), he.at(x, y, 1), he.at(x, y, 2));
      if (l == Tissue::nucleus) CHECK(kPurpleBand.contains(c));
      if (l == Tissue::cytoplasm) CHECK(kPinkBand.contains(c));
      if (l == Tissue::rbc) {
        ++rbc_pixels;
        CHECK(he.at(x, y, 0) > he.at(x, y, 1));
        CHECK(he.at(x, y, 0) > he.at(x, y, 2));
        CHECK(kRedBand.contains(c));
      }
    }
  }
  CHECK(rbc_pixels > 0);
}

TEST_CASE("purple-band mask of the oracle render equals the nucleus labels") {
  for (TissueClass label : {TissueClass::healthy, TissueClass::tumor}) {
    const Phantom p = generate_phantom(spec_with(6, label));
    CHECK(band_mask(render_he(p, 0), kPurpleBand) == label_mask(p, 0, Tissue::nucleus));
  }
}

TEST_CASE("tumor phantoms carry more nuclei than healthy ones over 20 seeds") {
  double healthy = 0.0, tumor = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    healthy += count_components(label_mask(generate_phantom(spec_with(seed)), 0, Tissue::nucleus));
    tumor += count_components(
        label_mask(generate_phantom(spec_with(seed, TissueClass::tumor)), 0, Tissue::nucleus));
  }
  CHECK(tumor > healthy);
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec s;
  s.width_px = 0;
  CHECK_THROWS_AS(generate_phantom(s), DimensionError);
  s = PhantomSpec{};
  s.rbc_fraction = 1.5;
  CHECK_THROWS_AS(generate_phantom(s), ParameterError);
  s = PhantomSpec{};
  s.cell_density = -1.0;
  CHECK_THROWS_AS(generate_phantom(s), ParameterError);
}

TEST_CASE("3D phantoms keep nuclei across neighbouring slices") {
  PhantomSpec s = spec_with(8);
  s.vessel_count = 0;
  s.depth_slices = 6;
  const Phantom p = generate_phantom(s);
  REQUIRE(p.depth() == 6);
  for (int z = 0; z + 1 < p.depth(); ++z) {
    const auto a = label_mask(p, z, Tissue::nucleus);
    const auto b = label_mask(p, z + 1, Tissue::nucleus);
    std::size_t both = 0, either = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      both += a[i] && b[i];
      either += a[i] || b[i];
    }
    CHECK(static_cast<double>(both) / either > 0.3);
  }
  CHECK_FALSE(p.labels.front() == p.labels.back());
}

}
