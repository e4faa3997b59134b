#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "vhist/optics.hpp"

using namespace vhist;
using vhist::testing::random_grid;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent evaluation of the parametric transfer function.
double otf_imag(double ux, double uy, ShearDirection s, double shear, double cutoff) {
  const double un = 0.5;
  return std::sin(2.0 * kPi * shear * (ux * s.x + uy * s.y)) *
         std::exp(-(ux * ux + uy * uy) / (2.0 * cutoff * cutoff * un * un));
}

double signed_freq(int k, int n) { return (k <= n / 2 ? k : k - n) / static_cast<double>(n); }

PhaseImage phase_of(Grid<double> g) { return PhaseImage{std::move(g), 0.25}; }

Grid<double> combine(const Grid<double>& a, double ca, const Grid<double>& b, double cb) {
  Grid<double> out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ca * a[i] + cb * b[i];
  return out;
}

double norm(const Grid<double>& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("optics") {

TEST_CASE("OTF is odd, purely imaginary, zero at DC and bounded") {
  for (auto [w, h] : {std::pair{32, 32}, std::pair{48, 40}, std::pair{33, 27}}) {
    const ComplexGrid c = make_otf({1.0, 0.0}, 4.0, 0.5, w, h);
    CHECK(c(0, 0) == std::complex<double>(0.0, 0.0));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        CHECK(c(x, y).real() == 0.0);
        CHECK(std::abs(c(x, y)) <= 1.0);
        const int nx = (w - x) % w, ny = (h - y) % h;
        CHECK(c(x, y) + c(nx, ny) == std::complex<double>(0.0, 0.0));
      }
    }
  }
}

TEST_CASE("OTF bins follow the closed form") {
  const ShearDirection dir{0.6, 0.8};
  const ComplexGrid c = make_otf(dir, 3.0, 0.7, 31, 29);
  for (int y = 0; y < 29; ++y) {
    for (int x = 0; x < 31; ++x) {
      const double expect = otf_imag(signed_freq(x, 31), signed_freq(y, 29), dir, 3.0, 0.7);
      CHECK(c(x, y).imag() == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("OTF parameter validation") {
  CHECK_THROWS_AS(make_otf({1.0, 0.0}, 0.0, 0.5, 16, 16), ParameterError);
  CHECK_THROWS_AS(make_otf({1.0, 0.0}, 4.0, 0.0, 16, 16), ParameterError);
  CHECK_THROWS_AS(make_otf({1.0, 0.0}, 4.0, 1.5, 16, 16), ParameterError);
  // non-unit direction is normalized
  const ComplexGrid a = make_otf({2.0, 0.0}, 4.0, 0.5, 16, 16);
  const ComplexGrid b = make_otf({1.0, 0.0}, 4.0, 0.5, 16, 16);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-15);
}

TEST_CASE("forward model: constants vanish, sign flips, sinusoids shift by a quarter period") {
  const OTFSet otf = make_otf_set(64, 64);
  const DPCPair zero = forward_dpc(phase_of(Grid<double>(64, 64, 1.7)), otf);
  for (int k = 0; k < 2; ++k) {
    for (double v : zero.shear[k].values()) CHECK(std::abs(v) < 1e-12);
  }
  const Grid<double> g = random_grid(64, 64, 1);
  const DPCPair pos = forward_dpc(phase_of(g), otf);
  const DPCPair neg = forward_dpc(phase_of(combine(g, -1.0, g, 0.0)), otf);
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(neg.shear[k][i] == doctest::Approx(-pos.shear[k][i]));
  }

  // cos(2π k x / N) → −s(u_k) sin(2π k x / N) along the x shear, 0 along y
  const int n = 64, kx = 5;
  Grid<double> wave(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) wave(x, y) = std::cos(2.0 * kPi * kx * x / n);
  }
  const DPCPair d = forward_dpc(phase_of(wave), otf);
  const double s = otf_imag(static_cast<double>(kx) / n, 0.0, {1.0, 0.0}, kDefaultShearPx, kDefaultCutoff);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      CHECK(d.shear[0](x, y) == doctest::Approx(-s * std::sin(2.0 * kPi * kx * x / n)).epsilon(1e-9));
      CHECK(std::abs(d.shear[1](x, y)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(forward_dpc(phase_of(Grid<double>(32, 32)), otf), DimensionError);
}

TEST_CASE("captures: flat phase gives the background, round trip matches the forward model") {
  const OTFSet otf = make_otf_set(48, 48);
  const CaptureSet flat = simulate_captures(phase_of(Grid<double>(48, 48, 0.0)), otf, {0.7, 0.0, 1});
  for (const auto& img : flat.images) {
    for (double v : img.values()) CHECK(v == doctest::Approx(0.7));
  }
  Grid<double> g = random_grid(48, 48, 2);
  for (double& v : g.values()) v *= 0.1;
  const PhaseImage ph = phase_of(g);
  const DPCPair fwd = forward_dpc(ph, otf);
  const DPCPair rt = compute_dpc(simulate_captures(ph, otf, {1.3, 0.0, 1}));
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(rt.shear[k][i] - fwd.shear[k][i]) < 1e-6);
  }
  const CaptureSet n1 = simulate_captures(ph, otf, {1.0, 0.01, 9});
  const CaptureSet n2 = simulate_captures(ph, otf, {1.0, 0.01, 9});
  const CaptureSet n3 = simulate_captures(ph, otf, {1.0, 0.01, 10});
  CHECK(n1.images == n2.images);
  CHECK_FALSE(n1.images == n3.images);
  for (const auto& img : n1.images) {
    for (double v : img.values()) CHECK(v >= 0.0);
  }
  CHECK_THROWS_AS(simulate_captures(ph, otf, {0.0, 0.0, 1}), ParameterError);
}

TEST_CASE("compute_dpc arithmetic") {
  CaptureSet c;
  for (auto& img : c.images) img = Grid<double>(4, 4, 1.0);
  c.images[0](1, 1) = 3.0;  // I_a = 3, I_b = 1
  c.images[0](2, 2) = 0.0;
  c.images[2](2, 2) = 0.0;  // zero sum
  const DPCPair d = compute_dpc(c);
  CHECK(d.shear[0](1, 1) == doctest::Approx(0.5));
  CHECK(d.shear[0](0, 0) == 0.0);
  CHECK(d.shear[0](2, 2) == 0.0);
  CHECK(d.zero_sum_pixels == 1);
  std::swap(c.images[0], c.images[2]);
  CHECK(compute_dpc(c).shear[0](1, 1) == doctest::Approx(-0.5));
  CHECK(compute_dpc(c, DpcMode::difference).shear[0](1, 1) == doctest::Approx(-2.0));

  CaptureSet bad = c;
  bad.images[1](0, 0) = -1.0;
  CHECK_THROWS_AS(compute_dpc(bad), RangeError);
  bad = c;
  bad.images[3] = Grid<double>(3, 4, 1.0);
  CHECK_THROWS_AS(compute_dpc(bad), DimensionError);
}

TEST_CASE("reconstruction is linear, zero-mean and shrinks with alpha") {
  const OTFSet otf = make_otf_set(32, 32);
  DPCPair zero;
  zero.shear = {Grid<double>(32, 32), Grid<double>(32, 32)};
  const PhaseImage none = reconstruct_phase(zero, otf, 1e-3);
  for (double v : none.phase.values()) CHECK(v == 0.0);

  DPCPair a, b;
  a.shear = {random_grid(32, 32, 3), random_grid(32, 32, 4)};
  b.shear = {random_grid(32, 32, 5), random_grid(32, 32, 6)};
  DPCPair mix;
  mix.shear = {combine(a.shear[0], 2.0, b.shear[0], -0.5), combine(a.shear[1], 2.0, b.shear[1], -0.5)};
  const Grid<double> ra = reconstruct_phase(a, otf, 1e-3).phase;
  const Grid<double> rb = reconstruct_phase(b, otf, 1e-3).phase;
  const Grid<double> rm = reconstruct_phase(mix, otf, 1e-3).phase;
  const Grid<double> expect = combine(ra, 2.0, rb, -0.5);
  CHECK(norm(combine(rm, 1.0, expect, -1.0)) <= 1e-9 * norm(expect));

  double mean = 0.0;
  for (double v : ra.values()) mean += v;
  CHECK(std::abs(mean / ra.size()) < 1e-12);

  CHECK(norm(reconstruct_phase(a, otf, 1e6).phase) < 1e-5 * norm(ra));
  CHECK_THROWS_AS(reconstruct_phase(a, otf, 0.0), ParameterError);
  CHECK_THROWS_AS(reconstruct_phase(a, otf, -1.0), ParameterError);
}

TEST_CASE("band-limited round trip") {
  PhantomSpec s;
  s.seed = 2;
  s.vessel_count = 1;
  const PhaseImage truth = band_limit(render_phase(generate_phantom(s), 0), 0.5);
  const OTFSet otf = make_otf_set(truth.width(), truth.height());
  const DPCPair dpc = forward_dpc(truth, otf);
  double prev = 1e9;
  for (double alpha : {1e-1, 1e-2, 1e-3, 1e-6}) {
    const double err = relative_l2_zero_mean(reconstruct_phase(dpc, otf, alpha).phase, truth.phase);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev <= 0.02);
}

TEST_CASE("band_limit removes every frequency at or above the cutoff") {
  const PhaseImage p = band_limit(phase_of(random_grid(40, 36, 7)), 0.5);
  const ComplexGrid f = fft2(p.phase);
  for (int y = 0; y < 36; ++y) {
    for (int x = 0; x < 40; ++x) {
      const double u = std::hypot(fft_frequency(x, 40), fft_frequency(y, 36));
      if (u >= 0.25) CHECK(std::abs(f(x, y)) < 1e-9);
    }
  }
  CHECK_THROWS_AS(band_limit(p, 0.0), ParameterError);
  CHECK_THROWS_AS(band_limit(p, 1.5), ParameterError);
}

TEST_CASE("FFT helpers round trip and agree with a direct DFT") {
  const Grid<double> g = random_grid(6, 5, 8);
  const ComplexGrid f = fft2(g);
  for (int v = 0; v < 5; ++v) {
    for (int u = 0; u < 6; ++u) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 6; ++x) {
          acc += g(x, y) * std::polar(1.0, -2.0 * kPi * (static_cast<double>(u * x) / 6 + static_cast<double>(v * y) / 5));
        }
      }
      CHECK(std::abs(f(u, v) - acc) < 1e-10);
    }
  }
  const ComplexGrid back = ifft2(f);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i].real() == doctest::Approx(g[i]));
  CHECK(fft_frequency(3, 8) == 0.375);
  CHECK(fft_frequency(5, 8) == -0.375);
  CHECK(fft_frequency(4, 8) == -0.5);
}

}
