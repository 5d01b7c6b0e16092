#pragma once

/**
 * @file lattice.hpp
 * @brief D3Q19 velocity set, incompressible equilibrium and moment evaluation.
 *
 * Everything is expressed in lattice units (dx = dt = 1). The reference
 * density rho0 is fixed to one; density fluctuations are carried in rho.
 */

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace porelbm {

inline constexpr int kQ = 19;

using Vec3 = std::array<double, 3>;
using Populations = std::array<double, kQ>;
using Velocity = std::array<int, 3>;

inline constexpr double kRho0 = 1.0;
inline constexpr double kCs2 = 1.0 / 3.0;
inline constexpr double kInvCs2 = 3.0;

/// Raised when a state leaves the range the discretisation can represent.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Velocity set, weights and opposite map of the D3Q19 stencil.
struct LatticeDescriptor {
  std::array<Velocity, kQ> e;
  std::array<double, kQ> w;
  std::array<int, kQ> opposite;
  double cs2;
};

namespace detail {

inline constexpr LatticeDescriptor make_d3q19() {
  LatticeDescriptor d{};
  // rest, 6 axis directions, 12 edge diagonals; opposite pairs are adjacent
  d.e = {{{0, 0, 0},
          {1, 0, 0},   {-1, 0, 0}, {0, 1, 0},  {0, -1, 0}, {0, 0, 1},  {0, 0, -1},
          {1, 1, 0},   {-1, -1, 0}, {1, -1, 0}, {-1, 1, 0},
          {1, 0, 1},   {-1, 0, -1}, {1, 0, -1}, {-1, 0, 1},
          {0, 1, 1},   {0, -1, -1}, {0, 1, -1}, {0, -1, 1}}};
  for (int k = 0; k < kQ; ++k) {
    int n2 = d.e[k][0] * d.e[k][0] + d.e[k][1] * d.e[k][1] + d.e[k][2] * d.e[k][2];
    d.w[k] = n2 == 0 ? 1.0 / 3.0 : (n2 == 1 ? 1.0 / 18.0 : 1.0 / 36.0);
    d.opposite[k] = k == 0 ? 0 : (k % 2 == 1 ? k + 1 : k - 1);
  }
  d.cs2 = 1.0 / 3.0;
  return d;
}

}  // namespace detail

inline constexpr LatticeDescriptor kD3Q19 = detail::make_d3q19();

inline constexpr int opposite(int k) { return kD3Q19.opposite[k]; }

inline constexpr double dot(const Velocity& e, const Vec3& u) {
  return e[0] * u[0] + e[1] * u[1] + e[2] * u[2];
}

/// Density and velocity of one cell. Velocity is momentum over rho0.
struct MacroState {
  double rho = kRho0;
  Vec3 u{0.0, 0.0, 0.0};
};

/// Incompressible equilibrium; no Mach check, for use in inner loops.
inline Populations equilibrium_unchecked(double rho, const Vec3& u) {
  Populations feq;
  const double usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
  for (int k = 0; k < kQ; ++k) {
    const double eu = dot(kD3Q19.e[k], u);
    feq[k] = kD3Q19.w[k] *
             (rho + kRho0 * (kInvCs2 * eu + 0.5 * kInvCs2 * kInvCs2 * eu * eu -
                             0.5 * kInvCs2 * usq));
  }
  return feq;
}

/// Incompressible equilibrium. Throws StabilityError when |u| >= c_s or rho <= 0.
inline Populations equilibrium(double rho, const Vec3& u) {
  const double usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
  if (!(rho > 0.0)) {
    throw StabilityError("equilibrium: non-positive density " + std::to_string(rho));
  }
  if (!(usq < kCs2)) {
    throw StabilityError("equilibrium: velocity magnitude " + std::to_string(std::sqrt(usq)) +
                         " exceeds the lattice sound speed; the flow is under-resolved");
  }
  return equilibrium_unchecked(rho, u);
}

inline MacroState moments(const Populations& f) {
  MacroState m{0.0, {0.0, 0.0, 0.0}};
  for (int k = 0; k < kQ; ++k) {
    m.rho += f[k];
    m.u[0] += kD3Q19.e[k][0] * f[k];
    m.u[1] += kD3Q19.e[k][1] * f[k];
    m.u[2] += kD3Q19.e[k][2] * f[k];
  }
  for (auto& c : m.u) c /= kRho0;
  return m;
}

/// Extent of a periodic cuboid of cells; x varies fastest in linear indices.
struct GridShape {
  int nx = 0, ny = 0, nz = 0;

  std::size_t cells() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny + static_cast<std::size_t>(y)) * nx +
           static_cast<std::size_t>(x);
  }
  std::array<int, 3> coords(std::size_t i) const {
    const int x = static_cast<int>(i % nx);
    const int y = static_cast<int>((i / nx) % ny);
    const int z = static_cast<int>(i / (static_cast<std::size_t>(nx) * ny));
    return {x, y, z};
  }
  int extent(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }

  /// Periodic wrap of a coordinate along @p axis.
  int wrap(int axis, int c) const {
    const int n = extent(axis);
    c %= n;
    return c < 0 ? c + n : c;
  }
  std::size_t wrapped_index(int x, int y, int z) const {
    return index(wrap(0, x), wrap(1, y), wrap(2, z));
  }
  bool operator==(const GridShape&) const = default;
};

/**
 * Populations of every cell at two time levels.
 *
 * Storage is structure-of-arrays: population k of cell i lives at
 * data[k * cells + i]. The read level holds post-collision values of the
 * current step; the write level is filled by the next fused update and the
 * two are swapped afterwards.
 */
class DistributionField {
 public:
  DistributionField() = default;
  explicit DistributionField(GridShape shape)
      : shape_(shape), read_(shape.cells() * kQ, 0.0), write_(shape.cells() * kQ, 0.0) {}

  const GridShape& shape() const { return shape_; }
  std::size_t cells() const { return shape_.cells(); }

  double& at(int k, std::size_t cell) { return read_[static_cast<std::size_t>(k) * cells() + cell]; }
  double at(int k, std::size_t cell) const {
    return read_[static_cast<std::size_t>(k) * cells() + cell];
  }
  double& next(int k, std::size_t cell) {
    return write_[static_cast<std::size_t>(k) * cells() + cell];
  }

  Populations cell(std::size_t i) const {
    Populations f;
    for (int k = 0; k < kQ; ++k) f[k] = at(k, i);
    return f;
  }
  void set_cell(std::size_t i, const Populations& f) {
    for (int k = 0; k < kQ; ++k) at(k, i) = f[k];
  }

  const double* read_data() const { return read_.data(); }
  double* read_data() { return read_.data(); }
  double* write_data() { return write_.data(); }
  std::vector<double>& read_level() { return read_; }
  std::vector<double>& write_level() { return write_; }
  const std::vector<double>& read_level() const { return read_; }
  const std::vector<double>& write_level() const { return write_; }

  void swap_levels() { read_.swap(write_); }

 private:
  GridShape shape_{};
  std::vector<double> read_;
  std::vector<double> write_;
};

}  // namespace porelbm
