#pragma once

/**
 * @file engine.hpp
 * @brief Time stepping for pressure-driven flow through periodic solids.
 *
 * One step reads post-collision populations of time t (read level), pulls
 * them along the lattice links, reconstructs the populations leaving the
 * solid with the configured wall scheme, applies the density jump across
 * the periodic seam, collides and stores post-collision values of t+1 in
 * the write level. The levels are then swapped.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <porelbm/boundary.hpp>
#include <porelbm/collision.hpp>
#include <porelbm/geometry.hpp>
#include <porelbm/lattice.hpp>
#include <porelbm/observables.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace porelbm {

/**
 * Sum of w_k |e_k . axis| over seam-crossing links with a solid end.
 *
 * Momentum exchange sees the part of a body lying behind the seam at a
 * pressure lowered by the imposed jump. Adding delta_rho times this weight
 * restores the force of the continuous pressure field.
 */
inline double seam_blocked_weight(const FlagField& flags, int axis) {
  const GridShape& sh = flags.shape;
  const int n = sh.extent(axis);
  double w = 0.0;
  for (std::size_t c = 0; c < sh.cells(); ++c) {
    const auto xyz = sh.coords(c);
    if (xyz[axis] != n - 1) continue;
    for (int k = 1; k < kQ; ++k) {
      const auto& e = kD3Q19.e[k];
      if (e[axis] != 1) continue;
      const std::size_t d = sh.wrapped_index(xyz[0] + e[0], xyz[1] + e[1], xyz[2] + e[2]);
      if (flags.solid(c) || flags.solid(d)) w += 2.0 * kD3Q19.w[k];
    }
  }
  return w;
}

/// Thrown when a population becomes non-finite.
class InstabilityError : public StabilityError {
 public:
  InstabilityError(std::uint64_t step, const std::string& what)
      : StabilityError(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct StepDiagnostics {
  Vec3 force{0.0, 0.0, 0.0};
  Vec3 momentum{0.0, 0.0, 0.0};  // sum of rho0 u over fluid cells at t+1
  double mass = 0.0;             // sum of populations over fluid cells at t+1
  double injected_mass = 0.0;    // mass added across the pressure seam this step
};

class Simulation {
 public:
  Simulation(FlagField flags, WallLinkSet links, const CollisionConfig& collision,
             PeriodicPressureConfig drive)
      : flags_(std::move(flags)),
        links_(std::move(links)),
        collider_(collision),
        drive_(drive),
        field_(flags_.shape) {
    drive_.validate(flags_.shape);
    if (links_.mask.size() != flags_.shape.cells()) {
      throw ConfigError("wall links were built for a different grid");
    }
    fluid_cells_ = flags_.shape.cells() - flags_.count_solid();
    seam_blocked_ = seam_blocked_weight(flags_, drive_.axis);
    for (const auto& l : links_.links) {
      if (l.scheme == WallScheme::IEBB) (void)iebb_weight(l.q, collision.viscous_rate());
    }
    initialize();
  }

  const GridShape& shape() const { return flags_.shape; }
  const FlagField& flags() const { return flags_; }
  const WallLinkSet& links() const { return links_; }
  const CollisionConfig& collision() const { return collider_.config(); }
  const PeriodicPressureConfig& drive() const { return drive_; }
  DistributionField& field() { return field_; }
  const DistributionField& field() const { return field_; }
  std::uint64_t time_step() const { return step_; }
  std::size_t fluid_cells() const { return fluid_cells_; }
  double volume() const { return static_cast<double>(flags_.shape.cells()); }
  const StepDiagnostics& last_step() const { return last_; }
  void set_threads(int n) { threads_ = std::max(1, n); }
  void set_delta_rho(double d) {
    drive_.delta_rho = d;
    drive_.validate(flags_.shape);
  }

  /// Equilibrium at (rho, u) in every fluid cell; solid cells hold zeros.
  void initialize(double rho = kRho0, const Vec3& u = {0.0, 0.0, 0.0}) {
    const auto feq = equilibrium(rho, u);
    std::fill(field_.read_level().begin(), field_.read_level().end(), 0.0);
    std::fill(field_.write_level().begin(), field_.write_level().end(), 0.0);
    for (std::size_t c = 0; c < field_.cells(); ++c)
      if (flags_.fluid(c)) field_.set_cell(c, feq);
    step_ = 0;
    last_ = {};
    last_.mass = total_mass();
  }

  MacroState macro(std::size_t cell) const { return moments(field_.cell(cell)); }

  /// Compensated (Neumaier) sum, so per-step budgets resolve below round-off of a plain sum.
  double total_mass() const {
    double m = 0.0, comp = 0.0;
    for (std::size_t c = 0; c < field_.cells(); ++c) {
      if (!flags_.fluid(c)) continue;
      for (int k = 0; k < kQ; ++k) {
        const double v = field_.at(k, c);
        const double t = m + v;
        comp += std::abs(m) >= std::abs(v) ? (m - t) + v : (v - t) + m;
        m = t;
      }
    }
    return m + comp;
  }

  /// Superficial velocity: sum over fluid cells divided by the full volume.
  Vec3 mean_velocity() const {
    Vec3 s{0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < field_.cells(); ++c) {
      if (!flags_.fluid(c)) continue;
      const auto m = macro(c);
      for (int a = 0; a < 3; ++a) s[a] += m.u[a];
    }
    for (auto& v : s) v /= volume();
    return s;
  }

  void step();

  void advance(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) step();
  }

  ObservableSample sample() const {
    ObservableSample s;
    s.step = step_;
    s.force = last_.force;
    for (int a = 0; a < 3; ++a) s.velocity[a] = last_.momentum[a] / (kRho0 * volume());
    s.speed = std::abs(s.velocity[drive_.axis]);
    s.delta_rho = drive_.delta_rho;
    s.pressure_gradient = -last_.force[drive_.axis] / volume();
    s.mass = last_.mass;
    return s;
  }

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  struct PlaneSums {
    double f[3] = {0, 0, 0};
    double j[3] = {0, 0, 0};
    double mass = 0.0;
    double injected = 0.0;
    bool bad = false;
  };

  void update_plane(int z, const double* src, double* dst, PlaneSums& out) const;

  FlagField flags_;
  WallLinkSet links_;
  Collider collider_;
  PeriodicPressureConfig drive_;
  DistributionField field_;
  std::size_t fluid_cells_ = 0;
  double seam_blocked_ = 0.0;
  std::uint64_t step_ = 0;
  StepDiagnostics last_{};
  int threads_ = 1;
};

inline void Simulation::update_plane(int z, const double* src, double* dst,
                                     PlaneSums& out) const {
  const GridShape& sh = flags_.shape;
  const std::size_t n = sh.cells();
  const int axis = drive_.axis;
  const double drho = drive_.delta_rho;
  const int n_axis = sh.extent(axis);
  const double omega_visc = collider_.config().viscous_rate();
  const auto& lat = kD3Q19;

  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(sh.nx) * sh.ny;
  std::array<std::ptrdiff_t, kQ> pull_offset;
  for (int k = 0; k < kQ; ++k) {
    const auto& e = lat.e[k];
    pull_offset[k] = -(e[0] + static_cast<std::ptrdiff_t>(e[1]) * sh.nx + e[2] * plane);
  }
  const bool z_inner = z > 0 && z < sh.nz - 1;
  const int zi[3] = {sh.wrap(2, z + 1), z, sh.wrap(2, z - 1)};  // source z for e_z = -1, 0, +1
  for (int y = 0; y < sh.ny; ++y) {
    const bool yz_inner = z_inner && y > 0 && y < sh.ny - 1;
    const int yi[3] = {sh.wrap(1, y + 1), y, sh.wrap(1, y - 1)};
    for (int x = 0; x < sh.nx; ++x) {
      const std::size_t c = sh.index(x, y, z);
      if (!flags_.fluid(c)) continue;

      Populations f;
      if (yz_inner && x > 0 && x < sh.nx - 1) {
        for (int k = 0; k < kQ; ++k) {
          f[k] = src[static_cast<std::size_t>(k) * n + static_cast<std::size_t>(
                                                          static_cast<std::ptrdiff_t>(c) + pull_offset[k])];
        }
      } else {
        const int xi[3] = {sh.wrap(0, x + 1), x, sh.wrap(0, x - 1)};
        for (int k = 0; k < kQ; ++k) {
          const auto& e = lat.e[k];
          const std::size_t s = sh.index(xi[e[0] + 1], yi[e[1] + 1], zi[e[2] + 1]);
          f[k] = src[static_cast<std::size_t>(k) * n + s];
        }
      }

      const std::uint32_t mask = links_.mask[c];
      if (drho != 0.0) {
        const int coord = axis == 0 ? x : (axis == 1 ? y : z);
        if (coord == 0 || coord == n_axis - 1) {
          for (int k = 1; k < kQ; ++k) {
            if (mask & (1u << k)) continue;
            const int ea = lat.e[k][axis];
            // pulled across the seam from the last layer: rho_L = rho_R + drho
            if (coord == 0 && ea == 1) {
              f[k] += lat.w[k] * drho;
              out.injected += lat.w[k] * drho;
            }
            if (coord == n_axis - 1 && ea == -1) {
              f[k] -= lat.w[k] * drho;
              out.injected -= lat.w[k] * drho;
            }
          }
        }
      }

      if (mask) {
        for (std::uint32_t li = links_.offset[c]; li < links_.offset[c + 1]; ++li) {
          const WallLink& l = links_.links[li];
          const int kw = l.k;
          const int kb = opposite(kw);
          const double wd = lat.w[kw] * drho;
          const double f1k = src[static_cast<std::size_t>(kw) * n + c];
          double value;
          if (l.scheme == WallScheme::IEBB) {
            IebbState st;
            Populations p1;
            for (int k = 0; k < kQ; ++k) p1[k] = src[static_cast<std::size_t>(k) * n + c];
            const auto m1 = moments(p1);
            st.rho_f1 = m1.rho;
            st.u_f1 = m1.u;
            if (l.f2 != kNoCell) {
              Populations p2;
              for (int k = 0; k < kQ; ++k)
                p2[k] = src[static_cast<std::size_t>(k) * n + static_cast<std::size_t>(l.f2)];
              st.u_f2 = moments(p2).u;
            }
            value = iebb(l.q, kw, f1k, omega_visc, st);
          } else {
            const auto& a = l.coeff;
            value = a[0] * f1k + a[1] * src[static_cast<std::size_t>(kb) * n + c];
            if (l.f2 != kNoCell) {
              const auto c2 = static_cast<std::size_t>(l.f2);
              const double corr = -l.shift2 * wd;
              value += a[2] * (src[static_cast<std::size_t>(kw) * n + c2] + corr) +
                       a[3] * (src[static_cast<std::size_t>(kb) * n + c2] + corr);
            }
            if (l.f3 != kNoCell) {
              const auto c3 = static_cast<std::size_t>(l.f3);
              value += a[4] * (src[static_cast<std::size_t>(kw) * n + c3] - l.shift3 * wd);
            }
          }
          f[kb] = value;
          const auto& e = lat.e[kw];
          const double mom = f1k + value;
          out.f[0] += e[0] * mom;
          out.f[1] += e[1] * mom;
          out.f[2] += e[2] * mom;
        }
      }

      double rho = 0.0, jx = 0.0, jy = 0.0, jz = 0.0;
      for (int k = 0; k < kQ; ++k) {
        rho += f[k];
        jx += lat.e[k][0] * f[k];
        jy += lat.e[k][1] * f[k];
        jz += lat.e[k][2] * f[k];
      }
      // non-finite, or faster than the lattice sound speed
      if (!(jx * jx + jy * jy + jz * jz < kCs2) || !std::isfinite(rho)) out.bad = true;
      out.mass += rho;
      out.j[0] += jx;
      out.j[1] += jy;
      out.j[2] += jz;

      const Vec3 u{jx / kRho0, jy / kRho0, jz / kRho0};
      collider_.collide(f, rho, u);
      for (int k = 0; k < kQ; ++k) dst[static_cast<std::size_t>(k) * n + c] = f[k];
    }
  }
}

inline void Simulation::step() {
  const GridShape& sh = flags_.shape;
  const double* src = field_.read_data();
  double* dst = field_.write_data();
  std::vector<PlaneSums> planes(static_cast<std::size_t>(sh.nz));

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads_) if (threads_ > 1)
#endif
  for (int z = 0; z < sh.nz; ++z) update_plane(z, src, dst, planes[static_cast<std::size_t>(z)]);

  // reduce in plane order so results do not depend on the thread count
  StepDiagnostics d;
  bool bad = false;
  for (const auto& p : planes) {
    for (int a = 0; a < 3; ++a) {
      d.force[a] += p.f[a];
      d.momentum[a] += p.j[a];
    }
    d.mass += p.mass;
    d.injected_mass += p.injected;
    bad = bad || p.bad;
  }
  field_.swap_levels();
  ++step_;
  d.force[drive_.axis] += drive_.delta_rho * seam_blocked_;
  last_ = d;
  if (bad) {
    throw InstabilityError(step_, "non-finite or supersonic state at step " +
                                      std::to_string(step_) +
                                      "; the flow is under-resolved or unstable");
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: "PLBMCKPT", u32 version, i32 nx ny nz, u64 step,
// u8 flags[cells], f64 read level[19*cells], f64 write level[19*cells].

inline constexpr char kCheckpointMagic[8] = {'P', 'L', 'B', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void Simulation::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  const auto& sh = flags_.shape;
  os.write(kCheckpointMagic, 8);
  os.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  const std::int32_t dims[3] = {sh.nx, sh.ny, sh.nz};
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  os.write(reinterpret_cast<const char*>(&step_), sizeof step_);
  os.write(reinterpret_cast<const char*>(flags_.cells.data()),
           static_cast<std::streamsize>(flags_.cells.size()));
  const auto& r = field_.read_level();
  const auto& w = field_.write_level();
  os.write(reinterpret_cast<const char*>(r.data()),
           static_cast<std::streamsize>(r.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(w.data()),
           static_cast<std::streamsize>(w.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

inline void Simulation::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t dims[3];
  std::uint64_t step = 0;
  is.read(magic, 8);
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  is.read(reinterpret_cast<char*>(&step), sizeof step);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto& sh = flags_.shape;
  if (dims[0] != sh.nx || dims[1] != sh.ny || dims[2] != sh.nz) {
    throw std::runtime_error("checkpoint grid does not match the simulation");
  }
  std::vector<CellType> flags(sh.cells());
  is.read(reinterpret_cast<char*>(flags.data()), static_cast<std::streamsize>(flags.size()));
  if (flags != flags_.cells) throw std::runtime_error("checkpoint solid layout differs");
  auto& r = field_.read_level();
  auto& w = field_.write_level();
  is.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(r.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
  if (!is) throw std::runtime_error("truncated checkpoint " + path);
  step_ = step;
  last_ = {};
  last_.mass = total_mass();
}

// ---------------------------------------------------------------------------
// Driver

inline double flow_through_time(double length, double mean_speed) {
  if (!(mean_speed > 0.0)) {
    throw std::domain_error("flow-through time undefined: flow not developed (U = 0)");
  }
  return length / mean_speed;
}

/**
 * Relative change of windowed means between consecutive windows.
 *
 * Converged once a window mean differs from the previous one by less than
 * tolerance * |mean|; never before two full windows.
 */
class ConvergenceMonitor {
 public:
  ConvergenceMonitor(std::size_t window, double tolerance)
      : window_(std::max<std::size_t>(window, 1)), tolerance_(tolerance) {}

  void set_window(std::size_t w) { pending_window_ = std::max<std::size_t>(w, 1); }

  bool add(double value) {
    sum_ += value;
    if (++count_ < window_) return converged_;
    const double mean = sum_ / static_cast<double>(count_);
    if (has_previous_) {
      const double change = std::abs(mean - previous_);
      converged_ = change <= tolerance_ * std::abs(mean) ||
                   (mean == 0.0 && previous_ == 0.0);
      last_change_ = mean != 0.0 ? change / std::abs(mean) : change;
    }
    previous_ = mean;
    has_previous_ = true;
    ++windows_;
    sum_ = 0.0;
    count_ = 0;
    if (pending_window_) {
      window_ = *pending_window_;
      pending_window_.reset();
    }
    return converged_;
  }

  bool converged() const { return converged_; }
  std::size_t windows_completed() const { return windows_; }
  std::size_t window() const { return window_; }
  double tolerance() const { return tolerance_; }
  std::optional<double> last_window_mean() const {
    return has_previous_ ? std::optional<double>(previous_) : std::nullopt;
  }
  double last_relative_change() const { return last_change_; }

 private:
  std::size_t window_;
  std::optional<std::size_t> pending_window_;
  double tolerance_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
  std::size_t windows_ = 0;
  double previous_ = 0.0;
  bool has_previous_ = false;
  bool converged_ = false;
  double last_change_ = std::numeric_limits<double>::infinity();
};

struct RunControl {
  std::uint64_t max_steps = 100000;
  std::uint64_t min_steps = 0;
  std::uint64_t cadence = 10;          // steps between recorded samples
  std::uint64_t window_steps = 1000;   // convergence window
  double window_flow_through = 0.0;    // if > 0, window >= this many flow-through times
  double tolerance = 1e-6;
  std::uint64_t averaging_steps = 0;   // extra averaging after convergence
};

struct RunResult {
  ObservableSeries series;
  bool converged = false;
  bool failed = false;
  std::string failure;
  std::uint64_t steps = 0;
  Vec3 mean_force{0.0, 0.0, 0.0};  // time average over the final window
  double mean_speed = 0.0;
  double pressure_gradient = 0.0;
};

namespace detail {
inline std::uint64_t window_steps_for(const RunControl& c, double length, double speed) {
  std::uint64_t w = c.window_steps;
  if (c.window_flow_through > 0.0 && speed > 0.0) {
    const double ft = c.window_flow_through * length / speed;
    if (ft < 1e12) w = std::max<std::uint64_t>(w, static_cast<std::uint64_t>(std::ceil(ft)));
  }
  return std::max<std::uint64_t>(w, c.cadence);
}
}  // namespace detail

/// Called with every recorded sample.
using SampleObserver = std::function<void(const Simulation&, const ObservableSample&)>;

/// Advance until the drag and the mean velocity stop changing or max_steps.
inline RunResult run(Simulation& sim, const RunControl& ctl, const SampleObserver& observer = {}) {
  RunResult res;
  res.series.axis = sim.drive().axis;
  res.series.volume = sim.volume();
  const double length = sim.shape().extent(sim.drive().axis);
  const std::uint64_t cadence = std::max<std::uint64_t>(ctl.cadence, 1);
  auto window_samples = [&](double speed) {
    return static_cast<std::size_t>(detail::window_steps_for(ctl, length, speed) / cadence);
  };
  ConvergenceMonitor drag(window_samples(0.0), ctl.tolerance);
  ConvergenceMonitor speed(window_samples(0.0), ctl.tolerance);

  std::vector<ObservableSample> window;
  std::uint64_t averaging_left = ctl.averaging_steps;
  bool averaging = false;
  try {
    while (sim.time_step() < ctl.max_steps) {
      sim.step();
      if (sim.time_step() % cadence != 0) continue;
      const auto s = sim.sample();
      res.series.push(s);
      if (observer) observer(sim, s);
      window.push_back(s);
      const std::size_t before = drag.windows_completed();
      drag.add(s.force[sim.drive().axis]);
      speed.add(s.speed);
      if (drag.windows_completed() != before) {
        drag.set_window(window_samples(s.speed));
        speed.set_window(window_samples(s.speed));
        if (!averaging) {
          res.mean_force = {0, 0, 0};
          res.mean_speed = 0.0;
          for (const auto& w : window) {
            for (int a = 0; a < 3; ++a) res.mean_force[a] += w.force[a];
            res.mean_speed += w.speed;
          }
          for (auto& f : res.mean_force) f /= static_cast<double>(window.size());
          res.mean_speed /= static_cast<double>(window.size());
          window.clear();
        }
      }
      if (!averaging && drag.converged() && speed.converged() && sim.time_step() >= ctl.min_steps) {
        res.converged = true;
        if (averaging_left == 0) break;
        averaging = true;
        window.clear();
        continue;
      }
      if (averaging) {
        if (averaging_left <= cadence) {
          res.mean_force = {0, 0, 0};
          res.mean_speed = 0.0;
          for (const auto& w : window) {
            for (int a = 0; a < 3; ++a) res.mean_force[a] += w.force[a];
            res.mean_speed += w.speed;
          }
          for (auto& f : res.mean_force) f /= static_cast<double>(window.size());
          res.mean_speed /= static_cast<double>(window.size());
          break;
        }
        averaging_left -= cadence;
      }
    }
  } catch (const StabilityError& e) {
    res.failed = true;
    res.failure = e.what();
  }
  res.steps = sim.time_step();
  res.pressure_gradient = -res.mean_force[sim.drive().axis] / sim.volume();
  return res;
}

// ---------------------------------------------------------------------------
// Assembly from a geometry description

using SolidGeometry = std::variant<SpherePack, ChannelWalls>;

inline GridShape geometry_shape(const SolidGeometry& g) {
  return std::visit([](const auto& v) { return v.domain; }, g);
}

inline FlagField voxelize_geometry(const SolidGeometry& g) {
  if (const auto* pack = std::get_if<SpherePack>(&g)) return voxelize(*pack);
  const auto& ch = std::get<ChannelWalls>(g);
  return voxelize_region(ch, ch.domain);
}

struct SimulationConfig {
  SolidGeometry geometry = SpherePack{};
  CollisionConfig collision = CollisionConfig::trt(1.0 / 6.0, 0.25);
  WallScheme wall_scheme = WallScheme::CLI;
  PeriodicPressureConfig drive{};
  RunControl control{};
};

inline Simulation make_simulation(const SimulationConfig& cfg) {
  auto flags = voxelize_geometry(cfg.geometry);
  auto links = std::visit(
      [&](const auto& g) { return build_wall_links(flags, g, cfg.wall_scheme, cfg.drive.axis); },
      cfg.geometry);
  return Simulation(std::move(flags), std::move(links), cfg.collision, cfg.drive);
}

/// Straight channel along x with walls normal to y, fluid rows 1..width.
inline ChannelWalls straight_channel(int length, int width, int depth = 1) {
  ChannelWalls ch;
  ch.domain = {length, width + 2, depth};
  ch.normal_axis = 1;
  ch.lower = 1.0;
  ch.upper = 1.0 + width;
  return ch;
}

}  // namespace porelbm
