#pragma once

/**
 * @file geometry.hpp
 * @brief Periodic sphere packs, voxelisation and link wall distances.
 *
 * Cell (i,j,k) spans [i,i+1) x [j,j+1) x [k,k+1) and has its centre at
 * (i+0.5, j+0.5, k+0.5). A plane wall at an integer coordinate therefore
 * sits exactly half-way along the links that cross it.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <porelbm/collision.hpp>
#include <porelbm/lattice.hpp>

namespace porelbm {

enum class CellType : std::uint8_t { Fluid = 0, Solid = 1 };

struct FlagField {
  GridShape shape;
  std::vector<CellType> cells;

  FlagField() = default;
  explicit FlagField(GridShape s, CellType fill = CellType::Fluid)
      : shape(s), cells(s.cells(), fill) {}

  bool solid(std::size_t i) const { return cells[i] == CellType::Solid; }
  bool fluid(std::size_t i) const { return cells[i] == CellType::Fluid; }
  std::size_t count_solid() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), CellType::Solid));
  }
  double solid_fraction() const {
    return static_cast<double>(count_solid()) / static_cast<double>(cells.size());
  }
};

inline Vec3 cell_center(int x, int y, int z) { return {x + 0.5, y + 0.5, z + 0.5}; }

struct Sphere {
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 0.0;
};

/// Spheres in a box of whole cells; periodic axes replicate every sphere.
struct SpherePack {
  GridShape domain;
  std::array<bool, 3> periodic{true, true, true};
  std::vector<Sphere> spheres;

  /// Image offsets (in cells) to consider for distance queries.
  std::vector<Vec3> image_offsets() const {
    std::vector<Vec3> out;
    const int ext[3] = {domain.nx, domain.ny, domain.nz};
    for (int a = -1; a <= 1; ++a) {
      if (a != 0 && !periodic[0]) continue;
      for (int b = -1; b <= 1; ++b) {
        if (b != 0 && !periodic[1]) continue;
        for (int c = -1; c <= 1; ++c) {
          if (c != 0 && !periodic[2]) continue;
          out.push_back({double(a * ext[0]), double(b * ext[1]), double(c * ext[2])});
        }
      }
    }
    return out;
  }

  /// True when the point lies inside or on any sphere image.
  bool inside(const Vec3& p) const {
    const auto images = image_offsets();
    for (const auto& s : spheres) {
      for (const auto& off : images) {
        const double dx = p[0] - s.center[0] - off[0];
        const double dy = p[1] - s.center[1] - off[1];
        const double dz = p[2] - s.center[2] - off[2];
        if (dx * dx + dy * dy + dz * dz <= s.radius * s.radius) return true;
      }
    }
    return false;
  }

  /**
   * Smallest t in (0,1] with p + t*dir on a sphere surface, over all images.
   * Returns nullopt when the segment misses every surface.
   */
  std::optional<double> intersect(const Vec3& p, const Velocity& dir) const {
    const double a = double(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    std::optional<double> best;
    for (const auto& off : image_offsets()) {
      for (const auto& s : spheres) {
        const Vec3 rel{p[0] - s.center[0] - off[0], p[1] - s.center[1] - off[1],
                       p[2] - s.center[2] - off[2]};
        const double b = dir[0] * rel[0] + dir[1] * rel[1] + dir[2] * rel[2];
        const double c = rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2] - s.radius * s.radius;
        const double disc = b * b - a * c;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        // entering root; stable form when b < 0 avoids cancellation
        double t;
        if (b < 0.0) {
          t = c / (-b + sq);
        } else {
          t = (-b - sq) / a;
        }
        if (c < 0.0) continue;  // start point inside this image
        if (t > 0.0 && t <= 1.0 + 1e-12) {
          t = std::min(t, 1.0);
          if (!best || t < *best) best = t;
        }
      }
    }
    return best;
  }
};

/// Two solid slabs bounding a straight channel along one axis.
struct ChannelWalls {
  GridShape domain;
  int normal_axis = 1;
  double lower = 1.0;  // fluid occupies (lower, upper) along normal_axis
  double upper = 2.0;

  bool inside(const Vec3& p) const {
    const double c = p[normal_axis];
    return c <= lower || c >= upper;
  }

  std::optional<double> intersect(const Vec3& p, const Velocity& dir) const {
    const double d = dir[normal_axis];
    if (d == 0) return std::nullopt;
    const double wall = d > 0 ? upper : lower;
    const double t = (wall - p[normal_axis]) / d;
    if (t > 0.0 && t <= 1.0 + 1e-12) return std::min(t, 1.0);
    return std::nullopt;
  }
};

/// Cell is solid iff its centre lies inside or on the solid region.
template <class Geometry>
FlagField voxelize_region(const Geometry& g, GridShape shape) {
  FlagField flags(shape);
  for (int z = 0; z < shape.nz; ++z)
    for (int y = 0; y < shape.ny; ++y)
      for (int x = 0; x < shape.nx; ++x)
        if (g.inside(cell_center(x, y, z))) flags.cells[shape.index(x, y, z)] = CellType::Solid;
  return flags;
}

/// Voxelise a pack by visiting only the bounding box of every sphere.
inline FlagField voxelize(const SpherePack& pack) {
  const GridShape& sh = pack.domain;
  FlagField flags(sh);
  const int ext[3] = {sh.nx, sh.ny, sh.nz};
  for (const auto& s : pack.spheres) {
    if (s.radius <= 0.0) continue;
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<int>(std::floor(s.center[a] - s.radius - 0.5));
      hi[a] = static_cast<int>(std::ceil(s.center[a] + s.radius - 0.5));
      if (!pack.periodic[a]) {
        lo[a] = std::max(lo[a], 0);
        hi[a] = std::min(hi[a], ext[a] - 1);
      }
    }
    const double r2 = s.radius * s.radius;
    for (int z = lo[2]; z <= hi[2]; ++z) {
      const double dz = z + 0.5 - s.center[2];
      for (int y = lo[1]; y <= hi[1]; ++y) {
        const double dy = y + 0.5 - s.center[1];
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const double dx = x + 0.5 - s.center[0];
          if (dx * dx + dy * dy + dz * dz <= r2) {
            flags.cells[sh.wrapped_index(x, y, z)] = CellType::Solid;
          }
        }
      }
    }
  }
  return flags;
}

// ---------------------------------------------------------------------------
// Single-sphere representative volume at a prescribed solid fraction

inline double spherical_cap_volume(double r, double h) {
  return std::numbers::pi * h * h * (3.0 * r - h) / 3.0;
}

/**
 * Solid fraction of a simple cubic array with edge @p edge and radius @p r.
 * Caps protruding beyond the six faces overlap with the neighbours and are
 * removed once; valid up to r = edge / sqrt(2).
 */
inline double analytic_solid_fraction(double r, double edge) {
  if (r < 0.0 || edge <= 0.0) throw ConfigError("analytic_solid_fraction: invalid arguments");
  // round-off allowance: bisection brackets sit exactly on the limit
  if (r > edge / std::numbers::sqrt2 * (1.0 + 1e-12)) {
    throw ConfigError("analytic_solid_fraction: caps of neighbouring spheres intersect (r > L/sqrt2)");
  }
  const double h = std::max(0.0, r - 0.5 * edge);
  const double v = 4.0 / 3.0 * std::numbers::pi * r * r * r - 6.0 * spherical_cap_volume(r, h);
  return v / (edge * edge * edge);
}

/// Largest solid fraction the single-sphere formula covers.
inline double max_solid_fraction() { return analytic_solid_fraction(1.0, std::numbers::sqrt2); }

namespace detail {
template <class F>
double bisect(F&& f, double lo, double hi, double rel_tol = 1e-14) {
  double flo = f(lo);
  for (int it = 0; it < 400 && (hi - lo) > rel_tol * std::abs(hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

/// Cubic cell edge for which one sphere of radius r gives solid fraction chi.
inline double domain_size_for_fraction(double r, double chi) {
  if (!(r > 0.0)) throw ConfigError("domain_size_for_fraction: radius must be positive");
  if (!(chi > 0.0) || chi > max_solid_fraction()) {
    throw ConfigError("domain_size_for_fraction: solid fraction " + std::to_string(chi) +
                      " is not reachable with a simple cubic single-sphere cell");
  }
  const double lo = r * std::numbers::sqrt2;
  double hi = 2.0 * r;
  while (analytic_solid_fraction(r, hi) > chi) hi *= 2.0;
  return detail::bisect([&](double L) { return analytic_solid_fraction(r, L) - chi; }, lo, hi);
}

/// Radius giving solid fraction chi in a cubic cell of edge L.
inline double radius_for_fraction(double edge, double chi) {
  if (!(chi > 0.0) || chi > max_solid_fraction()) {
    throw ConfigError("radius_for_fraction: unreachable solid fraction " + std::to_string(chi));
  }
  return detail::bisect([&](double r) { return analytic_solid_fraction(r, edge) - chi; }, 0.0,
                        edge / std::numbers::sqrt2);
}

/**
 * Single-sphere periodic cell near radius @p r at solid fraction @p chi.
 *
 * The edge is rounded to whole cells and the radius then re-solved so that
 * the analytic fraction is exactly chi. @p offset shifts the centre away
 * from the middle of the cell.
 */
inline SpherePack single_sphere_cell(double r, double chi, const Vec3& offset = {0.0, 0.0, 0.0}) {
  const int edge = static_cast<int>(std::lround(domain_size_for_fraction(r, chi)));
  if (edge < 2) throw ConfigError("single_sphere_cell: radius too small for a periodic cell");
  SpherePack pack;
  pack.domain = {edge, edge, edge};
  pack.periodic = {true, true, true};
  const double half = 0.5 * edge;
  pack.spheres.push_back(
      {{half + offset[0], half + offset[1], half + offset[2]}, radius_for_fraction(edge, chi)});
  return pack;
}

/// Single-sphere periodic cell with a given whole-cell edge.
inline SpherePack single_sphere_cell_with_edge(int edge, double chi,
                                               const Vec3& offset = {0.0, 0.0, 0.0}) {
  SpherePack pack;
  pack.domain = {edge, edge, edge};
  const double half = 0.5 * edge;
  pack.spheres.push_back(
      {{half + offset[0], half + offset[1], half + offset[2]}, radius_for_fraction(edge, chi)});
  return pack;
}

struct WallDistance {
  double q = 0.5;
  bool found = false;
};

/**
 * Normalised distance from @p from along lattice direction @p k to the first
 * solid surface. A missed intersection (grazing voxelisation) yields 0.5
 * with found == false.
 */
template <class Geometry>
WallDistance wall_distance(const Vec3& from, int k, const Geometry& g) {
  const auto t = g.intersect(from, kD3Q19.e[k]);
  if (!t) return {0.5, false};
  return {*t, true};
}

}  // namespace porelbm
