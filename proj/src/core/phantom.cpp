#include "vhist/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace vhist {

std::string to_string(TissueClass c) { return c == TissueClass::tumor ? "tumor" : "healthy"; }

TissueClass tissue_class_from_string(const std::string& s) {
  if (s == "healthy") return TissueClass::healthy;
  if (s == "tumor") return TissueClass::tumor;
  throw ParameterError("unknown tissue class '" + s + "'");
}

double IndexTable::of(Tissue t) const noexcept {
  switch (t) {
    case Tissue::cytoplasm: return cytoplasm;
    case Tissue::nucleus: return nucleus;
    case Tissue::vessel: return vessel;
    case Tissue::rbc: return rbc;
    case Tissue::background: break;
  }
  return background;
}

const std::array<std::uint8_t, 3>& HePalette::of(Tissue t) const noexcept {
  switch (t) {
    case Tissue::cytoplasm: return cytoplasm;
    case Tissue::nucleus: return nucleus;
    case Tissue::vessel: return vessel;
    case Tissue::rbc: return rbc;
    case Tissue::background: break;
  }
  return background;
}

void PhantomSpec::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw DimensionError("phantom dimensions must be positive, got " + std::to_string(width_px) +
                         "x" + std::to_string(height_px));
  }
  if (depth_slices <= 0) throw DimensionError("phantom depth must be positive");
  if (!(cell_density >= 0.0)) throw ParameterError("cell_density must be nonnegative");
  if (!(nucleus_radius_mean > 0.0) || !(nucleus_radius_spread >= 0.0)) {
    throw ParameterError("nucleus radius must be positive with nonnegative spread");
  }
  if (!(cell_radius_ratio >= 1.0)) throw ParameterError("cell_radius_ratio must be >= 1");
  if (vessel_count < 0) throw ParameterError("vessel_count must be nonnegative");
  if (!(vessel_radius > 0.0)) throw ParameterError("vessel_radius must be positive");
  if (!(rbc_fraction >= 0.0 && rbc_fraction <= 1.0)) {
    throw ParameterError("rbc_fraction must lie in [0,1]");
  }
  if (!(tumor.density_multiplier > 1.0) || !(tumor.nucleus_size_multiplier > 1.0)) {
    throw ParameterError("tumor multipliers must exceed 1");
  }
  if (!(tumor.irregularity >= 0.0 && tumor.irregularity <= 1.0)) {
    throw ParameterError("tumor irregularity must lie in [0,1]");
  }
  if (!(z_spacing_um > 0.0)) throw ParameterError("z_spacing_um must be positive");
  const IndexTable& n = index;
  if (!(n.background == 0.0 && n.cytoplasm > n.background && n.nucleus > n.cytoplasm &&
        n.rbc > n.nucleus && n.rbc > n.vessel && n.vessel >= 0.0)) {
    throw ParameterError("index table must satisfy rbc > nucleus > cytoplasm > background = 0");
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Nucleus {
  double x, y, z;
  double radius;
  double half_depth;  // slices
  double aspect, angle;
  std::array<double, 3> harmonic_amp;
  std::array<double, 3> harmonic_phase;
  double irregularity;
};

// Radius of the nucleus outline in direction theta (before z scaling).
double outline_radius(const Nucleus& n, double theta) {
  const double c = std::cos(theta - n.angle);
  const double s = std::sin(theta - n.angle);
  // Ellipse with semi-axes (r·aspect, r/aspect) has equal area to the disc.
  const double a = n.radius * n.aspect;
  const double b = n.radius / n.aspect;
  double r = a * b / std::sqrt(b * b * c * c + a * a * s * s);
  static constexpr std::array<int, 3> kOrders{2, 3, 5};
  double bump = 0.0;
  for (int i = 0; i < 3; ++i) {
    bump += n.harmonic_amp[i] * std::cos(kOrders[i] * theta + n.harmonic_phase[i]);
  }
  return r * (1.0 + n.irregularity * bump);
}

template <typename Fn>
void for_disc(int width, int height, double cx, double cy, double r, Fn&& fn) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) fn(x, y, dx, dy);
    }
  }
}

double slice_scale(const Nucleus& n, int z, int depth) {
  if (depth == 1) return 1.0;
  const double t = (z - n.z) / n.half_depth;
  return std::abs(t) < 1.0 ? std::sqrt(1.0 - t * t) : 0.0;
}

struct VesselPath {
  std::vector<std::array<double, 2>> points;
};

VesselPath random_walk_vessel(std::mt19937_64& rng, int width, int height) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.03);
  const double perimeter = 2.0 * (width + height);
  double p = unit(rng) * perimeter;
  double x, y;
  if (p < width) {
    x = p, y = 0.0;
  } else if (p < width + height) {
    x = width, y = p - width;
  } else if (p < 2.0 * width + height) {
    x = p - width - height, y = height;
  } else {
    x = 0.0, y = p - 2.0 * width - height;
  }
  double heading = std::atan2(height / 2.0 - y, width / 2.0 - x) + (unit(rng) - 0.5) * 1.2;
  double omega = 0.0;
  VesselPath path;
  const int max_steps = 4 * std::max(width, height);
  for (int step = 0; step < max_steps; ++step) {
    path.points.push_back({x, y});
    omega = 0.9 * omega + jitter(rng);
    heading += omega;
    x += std::cos(heading);
    y += std::sin(heading);
    if (step > 4 && (x < -8 || y < -8 || x > width + 8 || y > height + 8)) break;
  }
  return path;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const bool tumor = spec.class_label == TissueClass::tumor;
  const double density = spec.cell_density * (tumor ? spec.tumor.density_multiplier : 1.0);
  const double size_mult = tumor ? spec.tumor.nucleus_size_multiplier : 1.0;
  const double mean_radius = spec.nucleus_radius_mean * size_mult;
  const double radius_spread = spec.nucleus_radius_spread * size_mult;
  const double irregularity = tumor ? spec.tumor.irregularity : 0.0;
  const int depth = spec.depth_slices;
  const double mean_half_depth = std::max(1.0, mean_radius / 2.0);

  const double area = static_cast<double>(spec.width_px) * spec.height_px;
  double expected = density * area / 1e4;
  double z_lo = 0.0, z_span = 0.0;
  if (depth > 1) {
    // Nuclei straddling the volume edges are partially visible; keep the per-slice mean.
    z_lo = -mean_half_depth;
    z_span = (depth - 1) + 2.0 * mean_half_depth;
    expected *= z_span / (2.0 * mean_half_depth);
  }
  int count = 0;
  if (expected > 0.0) count = std::poisson_distribution<int>(expected)(rng);

  std::normal_distribution<double> radius_dist(mean_radius, radius_spread);
  std::vector<Nucleus> nuclei;
  nuclei.reserve(count);
  const double min_dist2 = mean_radius * mean_radius;
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 30; ++attempt) {
      Nucleus n{};
      n.x = unit(rng) * spec.width_px;
      n.y = unit(rng) * spec.height_px;
      n.z = depth > 1 ? z_lo + unit(rng) * z_span : 0.0;
      n.radius = std::clamp(radius_dist(rng), 0.5 * mean_radius, 1.8 * mean_radius);
      n.half_depth = std::max(1.0, n.radius / 2.0);
      n.aspect = 1.0 + 0.25 * unit(rng) + 0.35 * irregularity * unit(rng);
      n.angle = unit(rng) * kTwoPi;
      for (int h = 0; h < 3; ++h) {
        n.harmonic_amp[h] = (0.35 / (h + 1)) * unit(rng);
        n.harmonic_phase[h] = unit(rng) * kTwoPi;
      }
      n.irregularity = irregularity;
      const bool clash = std::any_of(nuclei.begin(), nuclei.end(), [&](const Nucleus& o) {
        if (depth > 1 && std::abs(o.z - n.z) >= o.half_depth + n.half_depth) return false;
        const double dx = o.x - n.x, dy = o.y - n.y;
        return dx * dx + dy * dy < min_dist2;
      });
      if (!clash) {
        nuclei.push_back(n);
        break;
      }
    }
  }

  std::vector<VesselPath> vessels;
  std::vector<std::array<double, 2>> rbcs;
  const double rbc_radius = 2.2;
  for (int v = 0; v < spec.vessel_count; ++v) {
    vessels.push_back(random_walk_vessel(rng, spec.width_px, spec.height_px));
    const auto& pts = vessels.back().points;
    const double reach = std::max(0.0, spec.vessel_radius - rbc_radius);
    for (std::size_t i = 0; i < pts.size(); i += 5) {
      if (unit(rng) < spec.rbc_fraction) {
        const double a = unit(rng) * kTwoPi;
        const double r = reach * std::sqrt(unit(rng));
        rbcs.push_back({pts[i][0] + r * std::cos(a), pts[i][1] + r * std::sin(a)});
      }
    }
  }

  Phantom out;
  out.width = spec.width_px;
  out.height = spec.height_px;
  out.z_spacing_um = spec.z_spacing_um;
  const auto bg = static_cast<std::uint8_t>(Tissue::background);
  for (int z = 0; z < depth; ++z) {
    Grid<std::uint8_t> labels(spec.width_px, spec.height_px, bg);
    for (const Nucleus& n : nuclei) {
      const double s = slice_scale(n, z, depth);
      if (s <= 0.0) continue;
      for_disc(spec.width_px, spec.height_px, n.x, n.y, spec.cell_radius_ratio * n.radius * s,
               [&](int x, int y, double, double) {
                 if (labels(x, y) == bg) labels(x, y) = static_cast<std::uint8_t>(Tissue::cytoplasm);
               });
    }
    for (const Nucleus& n : nuclei) {
      const double s = slice_scale(n, z, depth);
      if (s <= 0.0) continue;
      const double bound = n.radius * n.aspect * (1.0 + n.irregularity) * s + 1.0;
      for_disc(spec.width_px, spec.height_px, n.x, n.y, bound, [&](int x, int y, double dx, double dy) {
        const double r = std::hypot(dx, dy);
        if (r <= outline_radius(n, std::atan2(dy, dx)) * s) {
          labels(x, y) = static_cast<std::uint8_t>(Tissue::nucleus);
        }
      });
    }
    for (const VesselPath& path : vessels) {
      for (const auto& p : path.points) {
        for_disc(spec.width_px, spec.height_px, p[0], p[1], spec.vessel_radius,
                 [&](int x, int y, double, double) {
                   labels(x, y) = static_cast<std::uint8_t>(Tissue::vessel);
                 });
      }
    }
    for (const auto& c : rbcs) {
      for_disc(spec.width_px, spec.height_px, c[0], c[1], rbc_radius,
               [&](int x, int y, double, double) {
                 labels(x, y) = static_cast<std::uint8_t>(Tissue::rbc);
               });
    }

    Grid<float> index(spec.width_px, spec.height_px, 0.0f);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      index[i] = static_cast<float>(spec.index.of(static_cast<Tissue>(labels[i])));
    }
    out.labels.push_back(std::move(labels));
    out.index.push_back(std::move(index));
  }
  return out;
}

namespace {
void check_slice(const Phantom& phantom, int z) {
  if (z < 0 || z >= phantom.depth()) {
    throw IndexError("z_index " + std::to_string(z) + " outside phantom depth " +
                     std::to_string(phantom.depth()));
  }
}
}  // namespace

PhaseImage render_phase(const Phantom& phantom, int z, double scale) {
  check_slice(phantom, z);
  PhaseImage out;
  out.phase = Grid<double>(phantom.width, phantom.height, 0.0);
  const Grid<float>& dn = phantom.index[z];
  for (std::size_t i = 0; i < dn.size(); ++i) out.phase[i] = scale * static_cast<double>(dn[i]);
  return out;
}

Image render_he(const Phantom& phantom, int z, const HePalette& palette) {
  check_slice(phantom, z);
  Image out(phantom.width, phantom.height, 3);
  const Grid<std::uint8_t>& labels = phantom.labels[z];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& rgb = palette.of(static_cast<Tissue>(labels[i]));
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] = rgb[c] / 255.0f;
  }
  return out;
}

Grid<std::uint8_t> label_mask(const Phantom& phantom, int z, Tissue label) {
  check_slice(phantom, z);
  const Grid<std::uint8_t>& labels = phantom.labels[z];
  Grid<std::uint8_t> mask(phantom.width, phantom.height, 0);
  const auto want = static_cast<std::uint8_t>(label);
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == want ? 1 : 0;
  return mask;
}

int count_components(const Grid<std::uint8_t>& mask, int min_area) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack;
  int components = 0;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask[start] || seen[start]) continue;
    int area = 0;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      ++area;
      const int x = i % w, y = i / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int j = q[1] * w + q[0];
        if (mask[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    if (area >= min_area) ++components;
  }
  return components;
}

}  // namespace vhist
