#pragma once

/**
 * @file boundary.hpp
 * @brief Solid-wall bounce-back schemes and the periodic pressure jump.
 *
 * A wall link is identified by a fluid cell x_f1 and the direction k that
 * points from x_f1 into the solid. Every scheme reconstructs the population
 * f_{kbar}(x_f1, t+1) that would have been streamed out of the solid, from
 * post-collision values at time t:
 *
 *   x_f2 = x_f1 - e_k,   x_f3 = x_f1 - 2 e_k.
 */

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <porelbm/collision.hpp>
#include <porelbm/geometry.hpp>
#include <porelbm/lattice.hpp>

namespace porelbm {

enum class WallScheme : std::uint8_t { SBB, LIBB, QIBB, IEBB, MR, CLI };

inline constexpr std::array<WallScheme, 6> kAllWallSchemes{
    WallScheme::SBB, WallScheme::LIBB, WallScheme::QIBB,
    WallScheme::IEBB, WallScheme::MR, WallScheme::CLI};

inline std::string to_string(WallScheme s) {
  switch (s) {
    case WallScheme::SBB: return "SBB";
    case WallScheme::LIBB: return "LIBB";
    case WallScheme::QIBB: return "QIBB";
    case WallScheme::IEBB: return "IEBB";
    case WallScheme::MR: return "MR";
    case WallScheme::CLI: return "CLI";
  }
  return "?";
}

inline WallScheme wall_scheme_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto w : kAllWallSchemes)
    if (to_string(w) == s) return w;
  throw ConfigError("unknown wall scheme '" + s + "'");
}

/// Post-collision values a wall scheme may read for one link.
struct LinkValues {
  double f1_k = 0.0;     // f~_k(x_f1)
  double f1_kbar = 0.0;  // f~_kbar(x_f1)
  double f2_k = 0.0;     // f~_k(x_f2)
  double f2_kbar = 0.0;  // f~_kbar(x_f2)
  double f3_k = 0.0;     // f~_k(x_f3)
};

/// Fluid neighbours a scheme needs at a given q.
struct NeighbourNeeds {
  bool f2 = false;
  bool f3 = false;
};

inline NeighbourNeeds neighbour_needs(WallScheme s, double q) {
  switch (s) {
    case WallScheme::SBB: return {false, false};
    case WallScheme::LIBB: return {q < 0.5, false};
    case WallScheme::QIBB: return {true, q < 0.5};
    case WallScheme::IEBB: return {q < 0.5, false};
    case WallScheme::MR: return {true, true};
    case WallScheme::CLI: return {true, false};
  }
  return {false, false};
}

// ---------------------------------------------------------------------------
// Linear schemes

inline double sbb(const LinkValues& v) { return v.f1_k; }

inline double libb(double q, const LinkValues& v) {
  if (q < 0.5) return (1.0 - 2.0 * q) * v.f2_k + 2.0 * q * v.f1_k;
  return (1.0 - 1.0 / (2.0 * q)) * v.f1_kbar + (1.0 / (2.0 * q)) * v.f1_k;
}

inline double qibb(double q, const LinkValues& v) {
  if (q < 0.5) {
    return q * (1.0 + 2.0 * q) * v.f1_k + (1.0 - 4.0 * q * q) * v.f2_k -
           q * (1.0 - 2.0 * q) * v.f3_k;
  }
  return ((2.0 * q - 1.0) / q) * v.f1_kbar + (1.0 / (q * (2.0 * q + 1.0))) * v.f1_k +
         ((1.0 - 2.0 * q) / (2.0 * q + 1.0)) * v.f2_kbar;
}

/// Multi-reflection weights: {on f~_k(x_f2) - f~_kbar(x_f1), on f~_k(x_f3) - f~_kbar(x_f2)}.
inline std::array<double, 2> mr_coefficients(double q) {
  return {(1.0 - 2.0 * q - 2.0 * q * q) / ((1.0 + q) * (1.0 + q)), q * q / ((1.0 + q) * (1.0 + q))};
}

inline double mr(double q, const LinkValues& v) {
  const auto [a, b] = mr_coefficients(q);
  return a * v.f2_k + b * v.f3_k - a * v.f1_kbar - b * v.f2_kbar + v.f1_k;
}

inline double cli(double q, const LinkValues& v) {
  const double a = (1.0 - 2.0 * q) / (1.0 + 2.0 * q);
  return a * v.f2_k - a * v.f1_kbar + v.f1_k;
}

// ---------------------------------------------------------------------------
// Interpolation/extrapolation bounce-back

/// Weight of the fictitious population; @p omega is the viscous rate.
inline double iebb_weight(double q, double omega) {
  const double tau = 1.0 / omega;
  if (q < 0.5) {
    if (tau - 2.0 == 0.0) throw ConfigError("IEBB: relaxation rate 1/2 is singular for q < 1/2");
    return (2.0 * q - 1.0) / (tau - 2.0);
  }
  return (2.0 * q - 1.0) / (tau + 0.5);
}

/// Macroscopic input of IEBB: density at x_f1 and velocities at x_f1, x_f2.
struct IebbState {
  double rho_f1 = kRho0;
  Vec3 u_f1{0.0, 0.0, 0.0};
  Vec3 u_f2{0.0, 0.0, 0.0};
};

inline double iebb(double q, int k, double f1_k, double omega, const IebbState& s) {
  Vec3 u_bf;
  if (q < 0.5) {
    u_bf = s.u_f2;
  } else {
    const double c = 1.0 - 3.0 / (2.0 * q);
    u_bf = {c * s.u_f1[0], c * s.u_f1[1], c * s.u_f1[2]};
  }
  const auto& e = kD3Q19.e[k];
  const double eu_bf = dot(e, u_bf);
  const double eu = dot(e, s.u_f1);
  const double usq = s.u_f1[0] * s.u_f1[0] + s.u_f1[1] * s.u_f1[1] + s.u_f1[2] * s.u_f1[2];
  const double fstar =
      kD3Q19.w[k] * (s.rho_f1 + kRho0 * (3.0 * eu_bf + 4.5 * eu * eu - 1.5 * usq));
  const double x = iebb_weight(q, omega);
  return (1.0 - x) * f1_k + x * fstar;
}

/// Coefficients c with result = c . (f1_k, f1_kbar, f2_k, f2_kbar, f3_k).
inline std::array<double, 5> linear_coefficients(WallScheme s, double q) {
  std::array<double, 5> c{};
  for (int i = 0; i < 5; ++i) {
    LinkValues v;
    double* slot[5] = {&v.f1_k, &v.f1_kbar, &v.f2_k, &v.f2_kbar, &v.f3_k};
    *slot[i] = 1.0;
    switch (s) {
      case WallScheme::SBB: c[i] = sbb(v); break;
      case WallScheme::LIBB: c[i] = libb(q, v); break;
      case WallScheme::QIBB: c[i] = qibb(q, v); break;
      case WallScheme::MR: c[i] = mr(q, v); break;
      case WallScheme::CLI: c[i] = cli(q, v); break;
      case WallScheme::IEBB: throw std::logic_error("IEBB is not a linear scheme");
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Periodic pressure drop

/// Flow axis and density jump rho_L = rho_R + delta_rho across the periodic seam.
struct PeriodicPressureConfig {
  int axis = 0;
  double delta_rho = 0.0;

  void validate(const GridShape& shape) const {
    if (axis < 0 || axis > 2) throw ConfigError("pressure axis must be 0, 1 or 2");
    if (!std::isfinite(delta_rho)) throw ConfigError("density difference must be finite");
    if (delta_rho != 0.0 && shape.extent(axis) < 2) {
      throw ConfigError("pressure axis needs at least two cells");
    }
  }
};

struct GhostLayers {
  std::vector<Populations> left;   // in front of the first layer, fed from the last
  std::vector<Populations> right;  // behind the last layer, fed from the first
};

/**
 * Ghost populations for the periodic pressure drop:
 *   f_L = f_R + w_k drho,   f_R = f_L - w_k drho.
 * @p inlet holds the first layer along the flow axis, @p outlet the last.
 */
inline GhostLayers periodic_pressure_exchange(const std::vector<Populations>& inlet,
                                              const std::vector<Populations>& outlet,
                                              double delta_rho) {
  if (inlet.size() != outlet.size()) {
    throw ConfigError("periodic_pressure_exchange: layer sizes differ");
  }
  GhostLayers g;
  g.left.resize(outlet.size());
  g.right.resize(inlet.size());
  for (std::size_t i = 0; i < inlet.size(); ++i) {
    for (int k = 0; k < kQ; ++k) {
      g.left[i][k] = outlet[i][k] + kD3Q19.w[k] * delta_rho;
      g.right[i][k] = inlet[i][k] - kD3Q19.w[k] * delta_rho;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Precomputed wall links

inline constexpr std::int64_t kNoCell = -1;

struct WallLink {
  std::int64_t f1 = 0;        // fluid cell next to the wall
  std::int64_t f2 = kNoCell;  // x_f1 - e_k when fluid
  std::int64_t f3 = kNoCell;  // x_f1 - 2 e_k when fluid
  std::uint8_t k = 0;         // direction towards the solid
  std::int8_t shift2 = 0;     // pressure-seam crossings between x_f1 and x_f2
  std::int8_t shift3 = 0;     // ... and between x_f1 and x_f3
  WallScheme scheme = WallScheme::SBB;  // effective scheme after fallback
  double q = 0.5;
  std::array<double, 5> coeff{1.0, 0.0, 0.0, 0.0, 0.0};
};

struct WallLinkDiagnostics {
  WallScheme requested = WallScheme::SBB;
  std::size_t links = 0;
  std::size_t fallback_links = 0;  // downgraded to SBB for lack of fluid neighbours
  std::size_t missed_intersections = 0;
  double q_min = 1.0;
  double q_max = 0.0;
  std::array<std::size_t, 10> q_histogram{};

  void write(std::ostream& os) const {
    os << "wall scheme: " << to_string(requested) << "\n";
    os << "links: " << links << "\n";
    os << "fallback to SBB: " << fallback_links << "\n";
    os << "missed intersections (q := 0.5): " << missed_intersections << "\n";
    os << "q min: " << q_min << "\nq max: " << q_max << "\n";
    os << "q histogram (10 bins over (0,1]):";
    for (auto n : q_histogram) os << ' ' << n;
    os << "\n";
  }
  std::string report() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }
};

struct WallLinkSet {
  std::vector<WallLink> links;
  /// links of cell c are links[offset[c] .. offset[c+1])
  std::vector<std::uint32_t> offset;
  /// bit k set when the pull source of direction k is solid
  std::vector<std::uint32_t> mask;
  WallLinkDiagnostics diagnostics;
};

namespace detail {

/// Signed number of times a step from coordinate c by d crosses the seam of @p axis.
inline int seam_crossings(int c, int d, int n) {
  const int t = c + d;
  if (t < 0) return -1;
  if (t >= n) return 1;
  return 0;
}

}  // namespace detail

/**
 * Build every fluid-to-solid link with its wall distance and the neighbour
 * cells the chosen scheme needs. Links whose neighbours are missing fall
 * back to SBB and are counted.
 */
template <class Geometry>
WallLinkSet build_wall_links(const FlagField& flags, const Geometry& geometry, WallScheme scheme,
                             int pressure_axis = 0) {
  const GridShape& sh = flags.shape;
  WallLinkSet set;
  set.offset.assign(sh.cells() + 1, 0);
  set.mask.assign(sh.cells(), 0);
  set.diagnostics.requested = scheme;

  for (int z = 0; z < sh.nz; ++z) {
    for (int y = 0; y < sh.ny; ++y) {
      for (int x = 0; x < sh.nx; ++x) {
        const std::size_t c = sh.index(x, y, z);
        set.offset[c] = static_cast<std::uint32_t>(set.links.size());
        if (!flags.fluid(c)) continue;
        const int xyz[3] = {x, y, z};
        for (int k = 1; k < kQ; ++k) {
          const auto& e = kD3Q19.e[k];
          const std::size_t b = sh.wrapped_index(x + e[0], y + e[1], z + e[2]);
          if (!flags.solid(b)) continue;

          WallLink link;
          link.f1 = static_cast<std::int64_t>(c);
          link.k = static_cast<std::uint8_t>(k);
          const auto wd = wall_distance(cell_center(x, y, z), k, geometry);
          link.q = wd.q;
          if (!wd.found) ++set.diagnostics.missed_intersections;

          const std::size_t c2 = sh.wrapped_index(x - e[0], y - e[1], z - e[2]);
          const std::size_t c3 = sh.wrapped_index(x - 2 * e[0], y - 2 * e[1], z - 2 * e[2]);
          if (flags.fluid(c2)) link.f2 = static_cast<std::int64_t>(c2);
          if (link.f2 != kNoCell && flags.fluid(c3)) link.f3 = static_cast<std::int64_t>(c3);
          const int n = sh.extent(pressure_axis);
          link.shift2 = static_cast<std::int8_t>(
              detail::seam_crossings(xyz[pressure_axis], -e[pressure_axis], n));
          link.shift3 = static_cast<std::int8_t>(
              detail::seam_crossings(xyz[pressure_axis], -2 * e[pressure_axis], n));

          const auto needs = neighbour_needs(scheme, link.q);
          const bool ok = (!needs.f2 || link.f2 != kNoCell) && (!needs.f3 || link.f3 != kNoCell);
          link.scheme = ok ? scheme : WallScheme::SBB;
          if (!ok) ++set.diagnostics.fallback_links;
          if (link.scheme != WallScheme::IEBB) link.coeff = linear_coefficients(link.scheme, link.q);

          set.mask[c] |= 1u << opposite(k);
          auto& d = set.diagnostics;
          d.q_min = std::min(d.q_min, link.q);
          d.q_max = std::max(d.q_max, link.q);
          const int bin = std::clamp(static_cast<int>(std::ceil(link.q * 10.0)) - 1, 0, 9);
          ++d.q_histogram[bin];
          set.links.push_back(link);
        }
      }
    }
  }
  set.offset[sh.cells()] = static_cast<std::uint32_t>(set.links.size());
  set.diagnostics.links = set.links.size();
  return set;
}

}  // namespace porelbm
