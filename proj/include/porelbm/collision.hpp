#pragma once

/**
 * @file collision.hpp
 * @brief SRT, TRT and MRT relaxation operators on a single cell.
 */

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include <porelbm/lattice.hpp>

namespace porelbm {

/// Invalid relaxation parameters or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class CollisionKind { SRT, TRT, MRT };

inline std::string to_string(CollisionKind k) {
  switch (k) {
    case CollisionKind::SRT: return "SRT";
    case CollisionKind::TRT: return "TRT";
    case CollisionKind::MRT: return "MRT";
  }
  return "?";
}

inline CollisionKind collision_kind_from_string(const std::string& s) {
  if (s == "SRT" || s == "srt") return CollisionKind::SRT;
  if (s == "TRT" || s == "trt") return CollisionKind::TRT;
  if (s == "MRT" || s == "mrt") return CollisionKind::MRT;
  throw ConfigError("unknown collision operator '" + s + "'");
}

/// Relaxation rate of the shear modes for kinematic viscosity nu.
inline double rate_from_viscosity(double nu) { return 1.0 / (3.0 * nu + 0.5); }
inline double viscosity_from_rate(double s) { return (1.0 / s - 0.5) / 3.0; }

inline void require_rate(double s, const char* what) {
  if (!(s > 0.0 && s < 2.0)) {
    throw ConfigError(std::string(what) + " must lie in (0,2), got " + std::to_string(s));
  }
}

/// Antisymmetric TRT rate from the symmetric rate and the magic parameter.
inline double omega_minus(double omega_plus, double magic) {
  require_rate(omega_plus, "omega+");
  if (!(magic > 0.0) || !std::isfinite(magic)) {
    throw ConfigError("magic parameter must be positive, got " + std::to_string(magic));
  }
  const double om = 1.0 / (0.5 + magic / (1.0 / omega_plus - 0.5));
  require_rate(om, "omega-");
  return om;
}

/// Rate of the non-hydrodynamic kinetic modes paired with s_nu.
inline double kinetic_mode_rate(double s_nu) { return 8.0 * (2.0 - s_nu) / (8.0 - s_nu); }

struct CollisionConfig {
  CollisionKind kind = CollisionKind::TRT;
  double omega = 1.0;         // SRT
  double omega_plus = 1.0;    // TRT
  double magic = 0.25;        // TRT
  double s_nu = 1.0;          // MRT
  double energy_ratio = 4.6;  // MRT

  static CollisionConfig srt(double nu) {
    CollisionConfig c;
    c.kind = CollisionKind::SRT;
    c.omega = rate_from_viscosity(nu);
    c.validate();
    return c;
  }
  static CollisionConfig trt(double nu, double magic) {
    CollisionConfig c;
    c.kind = CollisionKind::TRT;
    c.omega_plus = rate_from_viscosity(nu);
    c.magic = magic;
    c.validate();
    return c;
  }
  static CollisionConfig mrt(double nu, double ratio = 4.6) {
    CollisionConfig c;
    c.kind = CollisionKind::MRT;
    c.s_nu = rate_from_viscosity(nu);
    c.energy_ratio = ratio;
    c.validate();
    return c;
  }

  /// Rate controlling the viscosity; the one the IEBB weights use.
  double viscous_rate() const {
    switch (kind) {
      case CollisionKind::SRT: return omega;
      case CollisionKind::TRT: return omega_plus;
      case CollisionKind::MRT: return s_nu;
    }
    return omega;
  }
  double viscosity() const { return viscosity_from_rate(viscous_rate()); }
  double omega_minus() const { return porelbm::omega_minus(omega_plus, magic); }

  void validate() const {
    switch (kind) {
      case CollisionKind::SRT: require_rate(omega, "omega"); break;
      case CollisionKind::TRT: (void)porelbm::omega_minus(omega_plus, magic); break;
      case CollisionKind::MRT:
        require_rate(s_nu, "s_nu");
        if (!(energy_ratio > 0.0)) throw ConfigError("energy-mode ratio must be positive");
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Pure per-cell operators

inline Populations relax_srt(const Populations& f, const Populations& feq, double omega) {
  Populations out;
  for (int k = 0; k < kQ; ++k) out[k] = f[k] - omega * (f[k] - feq[k]);
  return out;
}

inline Populations relax_trt(const Populations& f, const Populations& feq, double omega_plus,
                             double omega_minus) {
  Populations out;
  for (int k = 0; k < kQ; ++k) {
    const int kb = opposite(k);
    const double fp = 0.5 * (f[k] + f[kb]);
    const double fm = 0.5 * (f[k] - f[kb]);
    const double ep = 0.5 * (feq[k] + feq[kb]);
    const double em = 0.5 * (feq[k] - feq[kb]);
    out[k] = f[k] - omega_plus * (fp - ep) - omega_minus * (fm - em);
  }
  return out;
}

using Matrix19 = std::array<std::array<double, kQ>, kQ>;
using Rates = std::array<double, kQ>;

/// Orthogonal moment transform M and its row norms D = diag(M M^T).
struct MomentBasis {
  Matrix19 m{};
  std::array<double, kQ> norm{};

  static constexpr int kDensityRow = 0;
  static constexpr std::array<int, 3> kMomentumRows{3, 5, 7};

  std::array<double, kQ> transform(const Populations& f) const {
    std::array<double, kQ> out{};
    for (int i = 0; i < kQ; ++i) {
      double s = 0.0;
      for (int k = 0; k < kQ; ++k) s += m[i][k] * f[k];
      out[i] = s;
    }
    return out;
  }
  /// Exact inverse for orthogonal rows: M^{-1} = M^T D^{-1}.
  Populations inverse_transform(const std::array<double, kQ>& mom) const {
    Populations out{};
    for (int k = 0; k < kQ; ++k) {
      double s = 0.0;
      for (int i = 0; i < kQ; ++i) s += m[i][k] * mom[i] / norm[i];
      out[k] = s;
    }
    return out;
  }
};

/**
 * Gram-Schmidt orthogonalisation of velocity polynomials, in the d'Humieres
 * ordering: rho, e, eps, jx, qx, jy, qy, jz, qz, 3pxx, 3pixx, pww, piww,
 * pxy, pyz, pxz, mx, my, mz.
 */
inline MomentBasis build_moment_basis() {
  using Poly = std::function<double(double, double, double)>;
  const std::array<Poly, kQ> polys{
      [](double, double, double) { return 1.0; },
      [](double x, double y, double z) { return x * x + y * y + z * z; },
      [](double x, double y, double z) {
        const double c2 = x * x + y * y + z * z;
        return c2 * c2;
      },
      [](double x, double, double) { return x; },
      [](double x, double y, double z) { return x * (x * x + y * y + z * z); },
      [](double, double y, double) { return y; },
      [](double x, double y, double z) { return y * (x * x + y * y + z * z); },
      [](double, double, double z) { return z; },
      [](double x, double y, double z) { return z * (x * x + y * y + z * z); },
      [](double x, double y, double z) { return 3 * x * x - (x * x + y * y + z * z); },
      [](double x, double y, double z) {
        const double c2 = x * x + y * y + z * z;
        return (3 * x * x - c2) * c2;
      },
      [](double, double y, double z) { return y * y - z * z; },
      [](double x, double y, double z) { return (y * y - z * z) * (x * x + y * y + z * z); },
      [](double x, double y, double) { return x * y; },
      [](double, double y, double z) { return y * z; },
      [](double x, double, double z) { return x * z; },
      [](double x, double y, double z) { return x * (y * y - z * z); },
      [](double x, double y, double z) { return y * (z * z - x * x); },
      [](double x, double y, double z) { return z * (x * x - y * y); },
  };

  MomentBasis b;
  for (int i = 0; i < kQ; ++i) {
    std::array<double, kQ> row{};
    for (int k = 0; k < kQ; ++k) {
      const auto& e = kD3Q19.e[k];
      row[k] = polys[i](e[0], e[1], e[2]);
    }
    for (int j = 0; j < i; ++j) {
      double proj = 0.0;
      for (int k = 0; k < kQ; ++k) proj += row[k] * b.m[j][k];
      proj /= b.norm[j];
      for (int k = 0; k < kQ; ++k) row[k] -= proj * b.m[j][k];
    }
    // snap round-off so integer-valued rows stay integer
    double n = 0.0;
    for (int k = 0; k < kQ; ++k) {
      if (std::abs(row[k] - std::round(row[k] * 1e9) / 1e9) < 1e-12) {
        row[k] = std::round(row[k] * 1e9) / 1e9;
      }
      n += row[k] * row[k];
    }
    if (n < 1e-12) throw std::logic_error("moment basis polynomial is linearly dependent");
    b.m[i] = row;
    b.norm[i] = n;
  }
  return b;
}

inline const MomentBasis& default_moment_basis() {
  static const MomentBasis basis = build_moment_basis();
  return basis;
}

/// Relaxation rates per moment for the shear-rate prescription with fixed energy ratio.
inline Rates mrt_rates(double s_nu, double energy_ratio = 4.6) {
  if (!(s_nu > 0.0 && s_nu <= 2.0)) {
    throw ConfigError("s_nu must lie in (0,2], got " + std::to_string(s_nu));
  }
  const double s_zeta = kinetic_mode_rate(s_nu);
  const double s_energy = 1.0 / (0.5 + (1.0 / s_nu - 0.5) / energy_ratio);
  Rates s{};
  s.fill(s_zeta);
  s[0] = s[3] = s[5] = s[7] = 0.0;
  for (int i : {9, 11, 13, 14, 15}) s[i] = s_nu;
  s[1] = s[2] = s_energy;
  return s;
}

inline Populations relax_mrt(const Populations& f, const Populations& feq, const MomentBasis& basis,
                             const Rates& rates) {
  Populations diff;
  for (int k = 0; k < kQ; ++k) diff[k] = f[k] - feq[k];
  auto mom = basis.transform(diff);
  for (int i = 0; i < kQ; ++i) mom[i] *= rates[i];
  const auto delta = basis.inverse_transform(mom);
  Populations out;
  for (int k = 0; k < kQ; ++k) out[k] = f[k] - delta[k];
  return out;
}

/**
 * Collision operator prepared for the time-stepping kernel.
 *
 * MRT is folded into a dense 19x19 matrix A = M^{-1} S M so the kernel
 * applies f' = f - A (f - feq).
 */
class Collider {
 public:
  explicit Collider(const CollisionConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.kind == CollisionKind::TRT) omega_minus_ = cfg_.omega_minus();
    if (cfg_.kind == CollisionKind::MRT) {
      const auto& b = default_moment_basis();
      const auto s = mrt_rates(cfg_.s_nu, cfg_.energy_ratio);
      for (int k = 0; k < kQ; ++k) {
        for (int l = 0; l < kQ; ++l) {
          double a = 0.0;
          for (int i = 0; i < kQ; ++i) a += b.m[i][k] * s[i] * b.m[i][l] / b.norm[i];
          mrt_[k][l] = a;
        }
      }
    }
  }

  const CollisionConfig& config() const { return cfg_; }

  /// Relax towards the incompressible equilibrium of (rho, u) in place.
  void collide(Populations& f, double rho, const Vec3& u) const {
    if (cfg_.kind == CollisionKind::MRT) {
      apply(f, equilibrium_unchecked(rho, u));
      return;
    }
    const double usq = 1.5 * kRho0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    const double wp = cfg_.kind == CollisionKind::TRT ? cfg_.omega_plus : cfg_.omega;
    const double wm = cfg_.kind == CollisionKind::TRT ? omega_minus_ : cfg_.omega;
    f[0] -= wp * (f[0] - kD3Q19.w[0] * (rho - usq));
    for (int k = 1; k < kQ; k += 2) {
      const auto& e = kD3Q19.e[k];
      const double eu = e[0] * u[0] + e[1] * u[1] + e[2] * u[2];
      const double w = kD3Q19.w[k];
      const double eq_sym = w * (rho + kRho0 * 4.5 * eu * eu - usq);
      const double eq_asym = w * kRho0 * 3.0 * eu;
      const double sym = 0.5 * (f[k] + f[k + 1]) - eq_sym;
      const double asym = 0.5 * (f[k] - f[k + 1]) - eq_asym;
      f[k] -= wp * sym + wm * asym;
      f[k + 1] -= wp * sym - wm * asym;
    }
  }

  void apply(Populations& f, const Populations& feq) const {
    switch (cfg_.kind) {
      case CollisionKind::SRT: {
        const double om = cfg_.omega;
        for (int k = 0; k < kQ; ++k) f[k] -= om * (f[k] - feq[k]);
        break;
      }
      case CollisionKind::TRT: {
        const double op = 0.5 * cfg_.omega_plus;
        const double omm = 0.5 * omega_minus_;
        const double d0 = f[0] - feq[0];
        f[0] -= cfg_.omega_plus * d0;
        for (int k = 1; k < kQ; k += 2) {
          const double da = f[k] - feq[k];
          const double db = f[k + 1] - feq[k + 1];
          const double sym = op * (da + db);
          const double asym = omm * (da - db);
          f[k] -= sym + asym;
          f[k + 1] -= sym - asym;
        }
        break;
      }
      case CollisionKind::MRT: {
        Populations d;
        for (int k = 0; k < kQ; ++k) d[k] = f[k] - feq[k];
        for (int k = 0; k < kQ; ++k) {
          double s = 0.0;
          const auto& row = mrt_[k];
          for (int l = 0; l < kQ; ++l) s += row[l] * d[l];
          f[k] -= s;
        }
        break;
      }
    }
  }

 private:
  CollisionConfig cfg_;
  double omega_minus_ = 1.0;
  Matrix19 mrt_{};
};

}  // namespace porelbm
