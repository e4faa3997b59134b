#include "vhist/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

namespace vhist {

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex g_plan_mutex;

ComplexGrid transform(const ComplexGrid& in, int sign) {
  ComplexGrid out(in.width(), in.height());
  if (in.empty()) return out;
  // std::complex<double> is layout-compatible with fftw_complex.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(g_plan_mutex);
    plan = fftw_plan_dft_2d(in.height(), in.width(), src, dst, sign,
                            FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  fftw_execute_dft(plan, src, dst);
  {
    std::lock_guard lock(g_plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

void require_same_shape(const Grid<double>& a, const ComplexGrid& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(what) + ": image " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " does not match OTF " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

// Real part of an inverse transform whose imaginary residue must be negligible.
Grid<double> real_part_checked(const ComplexGrid& c, const char* what) {
  Grid<double> out(c.width(), c.height());
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i] = c[i].real();
    max_re = std::max(max_re, std::abs(c[i].real()));
    max_im = std::max(max_im, std::abs(c[i].imag()));
  }
  if (max_im > 1e-9 * max_re + 1e-15) {
    throw Error(std::string(what) + ": imaginary residue " + std::to_string(max_im) +
                " exceeds 1e-9 of the real magnitude " + std::to_string(max_re));
  }
  return out;
}

}  // namespace

double fft_frequency(int k, int n) noexcept {
  const int signed_k = k < (n + 1) / 2 ? k : k - n;
  return static_cast<double>(signed_k) / n;
}

ComplexGrid fft2(const ComplexGrid& in) { return transform(in, FFTW_FORWARD); }

ComplexGrid fft2(const Grid<double>& real) {
  ComplexGrid c(real.width(), real.height());
  for (std::size_t i = 0; i < real.size(); ++i) c[i] = real[i];
  return fft2(c);
}

ComplexGrid ifft2(const ComplexGrid& in) {
  ComplexGrid out = transform(in, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale;
  return out;
}

ComplexGrid make_otf(ShearDirection direction, double shear_px, double cutoff, int width,
                     int height) {
  if (width <= 0 || height <= 0) throw DimensionError("OTF grid must be non-empty");
  if (!(shear_px > 0.0)) throw ParameterError("shear magnitude must be positive");
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ParameterError("cutoff must lie in (0, 1]");
  const double norm = std::hypot(direction.x, direction.y);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ParameterError("shear direction is zero");
  if (std::abs(norm - 1.0) > 1e-12) {
    warn("shear direction (" + std::to_string(direction.x) + ", " + std::to_string(direction.y) +
         ") is not unit length; normalizing");
    direction.x /= norm;
    direction.y /= norm;
  }

  constexpr double kNyquist = 0.5;
  const double band = cutoff * kNyquist;
  ComplexGrid otf(width, height, {0.0, 0.0});
  for (int ky = 0; ky < height; ++ky) {
    const int my = (height - ky) % height;
    for (int kx = 0; kx < width; ++kx) {
      const int mx = (width - kx) % width;
      const bool self_paired = (mx == kx && my == ky) || (2 * kx == width) || (2 * ky == height);
      if (self_paired) continue;  // DC and Nyquist lines stay 0
      // Fill each (k, −k) pair once so oddness holds bit-exactly.
      if (ky > my || (ky == my && kx > mx)) continue;
      const double ux = fft_frequency(kx, width);
      const double uy = fft_frequency(ky, height);
      const double proj = ux * direction.x + uy * direction.y;
      const double envelope = std::exp(-(ux * ux + uy * uy) / (2.0 * band * band));
      const double value = std::sin(2.0 * std::numbers::pi * shear_px * proj) * envelope;
      otf(kx, ky) = {0.0, value};
      otf(mx, my) = {0.0, -value};
    }
  }
  return otf;
}

OTFSet make_otf_set(int width, int height, double shear_px, double cutoff) {
  OTFSet set;
  set.shear_px = shear_px;
  set.cutoff = cutoff;
  for (int k = 0; k < 2; ++k) {
    set.otf[k] = make_otf(set.directions[k], shear_px, cutoff, width, height);
  }
  return set;
}

DPCPair forward_dpc(const PhaseImage& phase, const OTFSet& otf) {
  require_same_shape(phase.phase, otf.otf[0], "forward_dpc");
  const ComplexGrid spectrum = fft2(phase.phase);
  DPCPair out;
  for (int k = 0; k < 2; ++k) {
    ComplexGrid product(spectrum.width(), spectrum.height());
    for (std::size_t i = 0; i < spectrum.size(); ++i) product[i] = otf.otf[k][i] * spectrum[i];
    out.shear[k] = real_part_checked(ifft2(product), "forward_dpc");
  }
  return out;
}

void CaptureSet::validate() const {
  for (int i = 1; i < 4; ++i) {
    if (!images[i].same_shape(images[0])) throw DimensionError("captures differ in shape");
  }
  for (const auto& img : images) {
    for (double v : img.values()) {
      if (!(v >= 0.0)) throw RangeError("capture intensities must be nonnegative");
    }
  }
}

CaptureSet simulate_captures(const PhaseImage& phase, const OTFSet& otf,
                             const CaptureParams& params) {
  if (!(params.background > 0.0)) throw ParameterError("background must be positive");
  if (!(params.noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be nonnegative");
  const DPCPair dpc = forward_dpc(phase, otf);
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double b = params.background;
  CaptureSet out;
  for (int k = 0; k < 2; ++k) {
    const Grid<double>& d = dpc.shear[k];
    Grid<double> plus(d.width(), d.height()), minus(d.width(), d.height());
    for (std::size_t i = 0; i < d.size(); ++i) {
      double a = b * (1.0 + d[i]);
      double c = b * (1.0 - d[i]);
      if (params.noise_sigma > 0.0) {
        a += params.noise_sigma * noise(rng);
        c += params.noise_sigma * noise(rng);
      }
      plus[i] = std::max(0.0, a);
      minus[i] = std::max(0.0, c);
    }
    // k = 0: azimuths 0°/180° → I1/I3; k = 1: 90°/270° → I2/I4.
    out.images[k] = std::move(plus);
    out.images[k + 2] = std::move(minus);
  }
  return out;
}

DPCPair compute_dpc(const CaptureSet& captures, DpcMode mode) {
  captures.validate();
  DPCPair out;
  for (int k = 0; k < 2; ++k) {
    const Grid<double>& a = captures.images[k];
    const Grid<double>& b = captures.images[k + 2];
    Grid<double> d(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mode == DpcMode::difference) {
        d[i] = a[i] - b[i];
        continue;
      }
      const double sum = a[i] + b[i];
      if (sum > 0.0) {
        d[i] = (a[i] - b[i]) / sum;
      } else {
        d[i] = 0.0;
        ++out.zero_sum_pixels;
      }
    }
    out.shear[k] = std::move(d);
  }
  return out;
}

PhaseImage reconstruct_phase(const DPCPair& dpc, const OTFSet& otf, double alpha,
                             double pixel_pitch_um) {
  if (!(alpha > 0.0)) {
    throw ParameterError("alpha must be positive; the unregularized inverse divides by zero "
                         "where both OTFs vanish");
  }
  for (int k = 0; k < 2; ++k) require_same_shape(dpc.shear[k], otf.otf[k], "reconstruct_phase");

  const ComplexGrid s0 = fft2(dpc.shear[0]);
  const ComplexGrid s1 = fft2(dpc.shear[1]);
  ComplexGrid estimate(s0.width(), s0.height());
  for (std::size_t i = 0; i < s0.size(); ++i) {
    const std::complex<double> c0 = otf.otf[0][i], c1 = otf.otf[1][i];
    const double power = std::norm(c0) + std::norm(c1);
    estimate[i] = (s0[i] * std::conj(c0) + s1[i] * std::conj(c1)) / (power + alpha);
  }
  PhaseImage out;
  out.phase = real_part_checked(ifft2(estimate), "reconstruct_phase");
  out.pixel_pitch_um = pixel_pitch_um;
  return out;
}

PhaseImage band_limit(const PhaseImage& phase, double fraction_of_nyquist) {
  if (!(fraction_of_nyquist > 0.0 && fraction_of_nyquist <= 1.0)) {
    throw ParameterError("band limit must lie in (0, 1] of Nyquist");
  }
  ComplexGrid f = fft2(phase.phase);
  const double limit = 0.5 * fraction_of_nyquist;
  for (int y = 0; y < f.height(); ++y) {
    const double v = fft_frequency(y, f.height());
    for (int x = 0; x < f.width(); ++x) {
      const double u = fft_frequency(x, f.width());
      if (std::hypot(u, v) >= limit) f(x, y) = 0.0;
    }
  }
  return PhaseImage{real_part_checked(ifft2(f), "band_limit"), phase.pixel_pitch_um};
}

double relative_l2_zero_mean(const Grid<double>& estimate, const Grid<double>& truth) {
  if (!estimate.same_shape(truth)) throw DimensionError("relative_l2: shape mismatch");
  const double n = static_cast<double>(truth.size());
  double me = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    me += estimate[i];
    mt += truth[i];
  }
  me /= n;
  mt /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = estimate[i] - me, t = truth[i] - mt;
    num += (e - t) * (e - t);
    den += t * t;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace vhist
