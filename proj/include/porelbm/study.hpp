#pragma once

/**
 * @file study.hpp
 * @brief Single driven runs reduced to drag and permeability, and the
 * sweeps built on them (radius, displacement, viscosity, Reynolds number).
 */

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <porelbm/analysis.hpp>
#include <porelbm/engine.hpp>

namespace porelbm {

/// One finished run reduced to its observables.
struct CaseSummary {
  bool converged = false;
  bool failed = false;
  std::string failure;
  std::uint64_t steps = 0;
  double radius = 0.0;
  double length = 0.0;  // domain extent along the flow axis
  double solid_fraction = 0.0;
  double viscosity = 0.0;
  double delta_rho = 0.0;
  double force = 0.0;   // streamwise drag per sphere
  double speed = 0.0;   // superficial U
  double grad_p = 0.0;  // |grad P|
  double c_d = 0.0;
  double k_app = 0.0;
  double re_p = 0.0;    // rho U D / mu
  std::size_t fallback_links = 0;
};

inline std::size_t sphere_count(const SolidGeometry& g) {
  if (const auto* p = std::get_if<SpherePack>(&g)) return std::max<std::size_t>(p->spheres.size(), 1);
  return 1;
}

/// Pressure difference across the seam that produces @p grad_p.
inline double delta_rho_for_gradient(double grad_p, double length) { return grad_p * length / kCs2; }

inline CaseSummary summarize(const Simulation& sim, const RunResult& res, const SolidGeometry& geom) {
  CaseSummary s;
  s.converged = res.converged;
  s.failed = res.failed;
  s.failure = res.failure;
  s.steps = res.steps;
  if (const auto* p = std::get_if<SpherePack>(&geom); p && !p->spheres.empty()) {
    s.radius = p->spheres.front().radius;
  } else if (const auto* ch = std::get_if<ChannelWalls>(&geom)) {
    s.radius = 0.5 * (ch->upper - ch->lower);
  }
  const int axis = sim.drive().axis;
  s.length = sim.shape().extent(axis);
  s.solid_fraction = sim.flags().solid_fraction();
  s.viscosity = sim.collision().viscosity();
  s.delta_rho = sim.drive().delta_rho;
  s.force = res.mean_force[axis] / static_cast<double>(sphere_count(geom));
  s.speed = res.mean_speed;
  s.grad_p = std::abs(res.pressure_gradient);
  s.fallback_links = sim.links().diagnostics.fallback_links;
  const double mu = kRho0 * s.viscosity;
  if (s.speed > 0.0 && s.radius > 0.0) {
    s.c_d = drag_coefficient(s.force, mu, s.speed, s.radius);
    s.re_p = reynolds_number(kRho0, s.speed, 2.0 * s.radius, mu);
  }
  if (s.speed > 0.0 && s.grad_p > 0.0) s.k_app = darcy_permeability(mu, s.speed, s.grad_p);
  return s;
}

/// Build, run to convergence and reduce one configuration.
inline CaseSummary run_case(const SimulationConfig& cfg, int threads = 1) {
  auto sim = make_simulation(cfg);
  sim.set_threads(threads);
  const auto res = run(sim, cfg.control);
  return summarize(sim, res, cfg.geometry);
}

/// Relative error of a drag coefficient against the reference table.
inline double drag_error(const CaseSummary& s, const ReferenceDragTable& ref, double chi) {
  const double r = ref(chi);
  return (s.c_d - r) / r;
}

/**
 * Reynolds sweep on one geometry by continuation: each point restarts from the
 * converged field of the previous one. The drive for a target Re_p is taken
 * from the Forchheimer law with the Darcy permeability of the first (Stokes)
 * point and a guessed Forchheimer constant; after each point the guess is
 * replaced by the measured pointwise value.
 */
struct ReynoldsSweepOptions {
  double stokes_re = 1e-3;   // Reynolds number of the calibration point
  double c_f_guess = 0.01;
  int threads = 1;
  std::function<void(const CaseSummary&)> on_point;  // progress callback
};

struct ReynoldsSweepResult {
  CaseSummary stokes;
  std::vector<CaseSummary> points;
  double k_darcy = 0.0;
};

inline double forchheimer_gradient(double speed, double mu, double rho, double k, double c_f) {
  return mu * speed / k + c_f * rho * speed * speed / std::sqrt(k);
}

inline ReynoldsSweepResult reynolds_sweep(SimulationConfig cfg, const std::vector<double>& targets,
                                          const ReynoldsSweepOptions& opt = {}) {
  ReynoldsSweepResult out;
  auto sim = make_simulation(cfg);
  sim.set_threads(opt.threads);
  const double mu = kRho0 * cfg.collision.viscosity();
  const auto* pack = std::get_if<SpherePack>(&cfg.geometry);
  if (!pack || pack->spheres.empty()) throw ConfigError("Reynolds sweep needs a sphere pack");
  const double diameter = 2.0 * pack->spheres.front().radius;
  const double length = sim.shape().extent(cfg.drive.axis);

  auto run_at = [&](double delta_rho) {
    sim.set_delta_rho(delta_rho);
    RunControl ctl = cfg.control;
    ctl.max_steps = sim.time_step() + cfg.control.max_steps;
    ctl.min_steps = sim.time_step() + cfg.control.min_steps;
    const auto res = run(sim, ctl);
    auto s = summarize(sim, res, cfg.geometry);
    if (opt.on_point) opt.on_point(s);
    return s;
  };

  // calibration: a guess from the drag of an isolated sphere, then the measured permeability
  const double guess_speed = opt.stokes_re * mu / (kRho0 * diameter);
  const double cell_volume = static_cast<double>(sim.shape().cells()) / sphere_count(cfg.geometry);
  const double guess_grad = 6.0 * std::numbers::pi * mu * guess_speed * 0.5 * diameter * 50.0 / cell_volume;
  out.stokes = run_at(delta_rho_for_gradient(guess_grad, length));
  if (out.stokes.failed || !(out.stokes.k_app > 0.0)) {
    throw AnalysisError("Reynolds sweep: calibration run failed: " + out.stokes.failure);
  }
  out.k_darcy = out.stokes.k_app;
  double c_f = opt.c_f_guess;
  for (double re : targets) {
    const double speed = re * mu / (kRho0 * diameter);
    const double grad = forchheimer_gradient(speed, mu, kRho0, out.k_darcy, c_f);
    auto s = run_at(delta_rho_for_gradient(grad, length));
    out.points.push_back(s);
    if (s.failed) break;
    if (s.speed > 0.0) {
      const double measured = pointwise_forchheimer_constant({s.speed, s.grad_p}, mu, kRho0, out.k_darcy);
      if (measured > 0.0) c_f = measured;
    }
  }
  return out;
}

}  // namespace porelbm
