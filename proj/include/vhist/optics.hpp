#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>

#include "vhist/image.hpp"
#include "vhist/phantom.hpp"

namespace vhist {

using ComplexGrid = Grid<std::complex<double>>;

struct ShearDirection {
  double x = 1.0;
  double y = 0.0;
};

/// Four oblique captures. Opposing pairs are (I1, I3) along x and (I2, I4) along y.
struct CaptureSet {
  std::array<Grid<double>, 4> images;
  std::array<double, 4> azimuth_deg{0.0, 90.0, 180.0, 270.0};
  double inclination_deg = 45.0;
  double wavelength_nm = 720.0;

  /// Throws DimensionError / RangeError.
  void validate() const;
};

/// DPC images along orthogonal shear directions (k = 0 → x, k = 1 → y).
struct DPCPair {
  std::array<Grid<double>, 2> shear;
  std::size_t zero_sum_pixels = 0;
};

struct OTFSet {
  std::array<ComplexGrid, 2> otf;
  std::array<ShearDirection, 2> directions{ShearDirection{1.0, 0.0}, ShearDirection{0.0, 1.0}};
  double shear_px = 4.0;
  double cutoff = 0.5;

  int width() const noexcept { return otf[0].width(); }
  int height() const noexcept { return otf[0].height(); }
};

enum class DpcMode { normalized, difference };

inline constexpr double kDefaultShearPx = 4.0;
inline constexpr double kDefaultCutoff = 0.5;
inline constexpr double kDefaultAlpha = 1e-3;

/// Parametric odd, purely imaginary DPC transfer function on the unshifted FFT grid:
///   C(u) = i · sin(2π σ ⟨u, ŝ⟩) · exp(−|u|² / (2 f_c² u_N²)),   u_N = 0.5 cycles/px.
/// Bins that are their own negation (DC, Nyquist row/column) are set to zero.
ComplexGrid make_otf(ShearDirection direction, double shear_px, double cutoff, int width,
                     int height);

OTFSet make_otf_set(int width, int height, double shear_px = kDefaultShearPx,
                    double cutoff = kDefaultCutoff);

/// Linear forward model Ī_k = F⁻¹{C_k · F{φ}}.
DPCPair forward_dpc(const PhaseImage& phase, const OTFSet& otf);

struct CaptureParams {
  double background = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// I_a = b(1 + Ī_k) + n, I_b = b(1 − Ī_k) + n, clamped at 0.
CaptureSet simulate_captures(const PhaseImage& phase, const OTFSet& otf, const CaptureParams& params);

/// Normalized (I_a − I_b)/(I_a + I_b) per opposing pair, or the raw difference.
DPCPair compute_dpc(const CaptureSet& captures, DpcMode mode = DpcMode::normalized);

/// Tikhonov-regularized deconvolution
///   φ = F⁻¹{ Σ_k F{Ī_k} · C_k* / (Σ_k |C_k|² + α) }.
PhaseImage reconstruct_phase(const DPCPair& dpc, const OTFSet& otf, double alpha,
                             double pixel_pitch_um = 0.25);

// FFT helpers (FFTW, unnormalized forward, inverse scaled by 1/N).
ComplexGrid fft2(const Grid<double>& real);
ComplexGrid fft2(const ComplexGrid& in);
ComplexGrid ifft2(const ComplexGrid& in);

/// Signed FFT frequency (cycles/px) of bin `k` on an axis of length `n`.
double fft_frequency(int k, int n) noexcept;

/// Zeroes every frequency with |u| ≥ fraction · 0.5 cycles/px.
PhaseImage band_limit(const PhaseImage& phase, double fraction_of_nyquist);

/// ‖a − b‖₂ / ‖b‖₂ after removing both means.
double relative_l2_zero_mean(const Grid<double>& estimate, const Grid<double>& truth);

}  // namespace vhist
