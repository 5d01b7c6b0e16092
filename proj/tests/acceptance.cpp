// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: porelbm_acceptance [criterion numbers...]   (default: all)
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <porelbm/config.hpp>
#include <porelbm/study.hpp>
#include <porelbm/verify.hpp>

using namespace porelbm;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

// SRT at this viscosity has the effective magic parameter 3/16
const double kSrtViscosity = std::sqrt(3.0 / 16.0) / 3.0;
constexpr double kChi = 0.6;

std::string fmt(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

void log(const std::string& s) {
  std::cerr << "  " << s << std::endl;
}

RunControl drag_control() {
  RunControl c;
  c.max_steps = 400000;
  c.cadence = 10;
  c.window_steps = 200;
  c.tolerance = 1e-7;
  return c;
}

/// Creeping-flow drag run on the single-sphere cell.
CaseSummary drag_case(double radius, const CollisionConfig& col, WallScheme scheme,
                      const Vec3& offset = {0.0, 0.0, 0.0}) {
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell(radius, kChi, offset);
  cfg.collision = col;
  cfg.wall_scheme = scheme;
  const int edge = geometry_shape(cfg.geometry).nx;
  cfg.drive = {0, 1e-6 * edge};
  cfg.control = drag_control();
  const auto t0 = std::chrono::steady_clock::now();
  auto s = run_case(cfg);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log(std::string(to_string(col.kind)) + "+" + to_string(scheme) + " r=" + fmt(s.radius) + " nu=" +
      fmt(col.viscosity()) + " shift=" + fmt(offset[0]) + ": C_D=" + fmt(s.c_d, 7) +
      " converged=" + std::to_string(s.converged) + " steps=" + std::to_string(s.steps) + " (" +
      fmt(dt, 3) + " s)");
  return s;
}

/// Drag reference: the bundled table, else Richardson extrapolation from fine TRT+CLI runs.
double reference_drag() {
  static std::optional<double> cached;
  if (cached) return *cached;
  try {
    cached = ReferenceDragTable::load(default_reference_table_path())(kChi);
    log("reference C_D(" + fmt(kChi) + ") = " + fmt(*cached, 6) + " from the bundled table");
  } catch (const std::exception& e) {
    log(std::string("reference table unavailable (") + e.what() + "), extrapolating");
    const auto col = CollisionConfig::trt(0.1, 3.0 / 16.0);
    const auto a = drag_case(12.0, col, WallScheme::CLI);
    const auto b = drag_case(16.5, col, WallScheme::CLI);
    const auto c = drag_case(24.0, col, WallScheme::CLI);
    const double order =
        std::log(std::abs((a.c_d - b.c_d) / (b.c_d - c.c_d))) / std::log(c.radius / b.radius);
    cached = richardson(b.radius, b.c_d, c.radius, c.c_d, std::clamp(order, 1.0, 3.0));
  }
  return *cached;
}

Outcome check(const CheckResult& r) {
  return {r.passed, r.name + ": " + fmt(r.value, 3) + " (tol " + fmt(r.tolerance, 3) + ")"};
}

Outcome criterion_1() {
  const auto p = poiseuille_profile(3.0 / 16.0);
  return {p.max_rel_error <= 1e-8, "max relative error " + fmt(p.max_rel_error, 3) + " (tol 1e-8)"};
}

Outcome criterion_2() {
  const std::vector<Outcome> parts{check(check_weight_identities()), check(check_equilibrium_moments()),
                                   check(check_periodic_mass()), check(check_mass_budget())};
  Outcome o{true, ""};
  for (const auto& p : parts) {
    o.passed = o.passed && p.passed;
    o.detail += (o.detail.empty() ? "" : "; ") + p.detail;
  }
  return o;
}

Outcome criterion_3() { return check(check_half_way_degeneracy()); }

Outcome criterion_4() {
  const std::vector<double> radii{4.5, 6.0, 7.5, 9.0, 12.0};
  const double ref = reference_drag();
  struct Series {
    const char* name;
    CollisionConfig col;
    WallScheme scheme;
    double lo, hi;
  };
  const std::vector<Series> series{
      {"SRT+CLI", CollisionConfig::srt(kSrtViscosity), WallScheme::CLI, 1.7, 2.5},
      {"SRT+LIBB", CollisionConfig::srt(kSrtViscosity), WallScheme::LIBB, 1.7, 2.5},
      {"TRT+MR", CollisionConfig::trt(0.1, 3.0 / 16.0), WallScheme::MR, 2.5, 3.5},
  };
  Outcome o{true, ""};
  for (const auto& s : series) {
    std::vector<double> r, err;
    std::string errs;
    for (double radius : radii) {
      const auto c = drag_case(radius, s.col, s.scheme);
      r.push_back(c.radius);
      err.push_back(std::abs(c.c_d / ref - 1.0));
      errs += (errs.empty() ? "" : ",") + fmt(err.back(), 2);
    }
    double slope = std::numeric_limits<double>::quiet_NaN();
    try {
      slope = convergence_order(r, err);
    } catch (const AnalysisError&) {
    }
    const bool ok = slope >= s.lo && slope <= s.hi;
    o.passed = o.passed && ok;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + s.name + " slope " + fmt(slope, 3) + " in [" +
                fmt(s.lo) + "," + fmt(s.hi) + "] " + (ok ? "ok" : "out") + " (errors " + errs + ")";
  }
  return o;
}

Outcome criterion_5() {
  const double ref = reference_drag();
  const auto a = drag_case(8.7, CollisionConfig::srt(kSrtViscosity), WallScheme::CLI);
  const auto b = drag_case(5.7, CollisionConfig::trt(0.1, 0.25), WallScheme::CLI);
  const double ea = std::abs(a.c_d / ref - 1.0), eb = std::abs(b.c_d / ref - 1.0);
  return {ea < 0.015 && eb < 0.015, "SRT+CLI r=8.7 (cell radius " + fmt(a.radius) + ") error " +
                                        fmt(100 * ea, 3) + "%; TRT+CLI magic 1/4 r=5.7 (cell radius " +
                                        fmt(b.radius) + ") error " + fmt(100 * eb, 3) + "% (tol 1.5%)"};
}

Outcome criterion_6() {
  const std::vector<double> nus{0.029, 0.1, 0.2, 0.45};
  const double ref = reference_drag();
  struct Series {
    const char* name;
    std::function<CollisionConfig(double)> col;
    WallScheme scheme;
    bool want_small;
  };
  const std::vector<Series> series{
      {"TRT+CLI", [](double nu) { return CollisionConfig::trt(nu, 3.0 / 16.0); }, WallScheme::CLI, true},
      {"TRT+MR", [](double nu) { return CollisionConfig::trt(nu, 3.0 / 16.0); }, WallScheme::MR, true},
      {"SRT+SBB", [](double nu) { return CollisionConfig::srt(nu); }, WallScheme::SBB, false},
  };
  Outcome o{true, ""};
  for (const auto& s : series) {
    std::vector<double> ratio;
    std::string vals;
    for (double nu : nus) {
      const auto c = drag_case(16.5, s.col(nu), s.scheme);
      const double k_ref = permeability_from_drag(ref, c.radius, c.length);
      ratio.push_back(c.k_app / k_ref);
      vals += (vals.empty() ? "" : ",") + fmt(ratio.back(), 4);
    }
    const auto [mn, mx] = std::minmax_element(ratio.begin(), ratio.end());
    double mean = 0.0;
    for (double v : ratio) mean += v / static_cast<double>(ratio.size());
    const double spread = (*mx - *mn) / mean;
    const bool ok = s.want_small ? spread < 0.02 : spread > 0.05;
    o.passed = o.passed && ok;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + s.name + " spread " + fmt(100 * spread, 3) +
                "% " + (s.want_small ? "< 2%" : "> 5%") + (ok ? " ok" : " violated") + " (K/K_ref " + vals + ")";
  }
  return o;
}

Outcome criterion_7() {
  const double ref = reference_drag();
  auto band = [&](WallScheme scheme) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= 5; ++i) {
      const auto c = drag_case(4.5, CollisionConfig::trt(0.1, 3.0 / 16.0), scheme, {0.1 * i, 0.0, 0.0});
      const double e = c.c_d / ref - 1.0;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    return hi - lo;
  };
  const double cli = band(WallScheme::CLI), sbb = band(WallScheme::SBB);
  return {cli < sbb, "error band TRT+CLI " + fmt(100 * cli, 3) + "% vs TRT+SBB " + fmt(100 * sbb, 3) + "%"};
}

/// Driven runs shared by the Darcy and friction-factor criteria.
struct RegimeData {
  double mu = 0.0;
  double k_darcy = 0.0;
  std::vector<CaseSummary> points;
};

/// Darcy-profile runs at fixed Re_p targets (continuation on one geometry).
const RegimeData& darcy_data() {
  static std::optional<RegimeData> data;
  if (data) return *data;
  const auto& prof = regime_profile("darcy");
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell(0.5 * prof.diameter, kChi);
  cfg.collision = CollisionConfig::trt(0.1, prof.magic);
  cfg.wall_scheme = WallScheme::CLI;
  cfg.control = drag_control();
  cfg.control.tolerance = 1e-9;
  ReynoldsSweepOptions opt;
  opt.stokes_re = 1e-4;
  opt.on_point = [](const CaseSummary& s) {
    log("darcy profile: Re_p=" + fmt(s.re_p) + " U=" + fmt(s.speed, 6) + " drho=" + fmt(s.delta_rho, 6) +
        " converged=" + std::to_string(s.converged));
  };
  const auto res = reynolds_sweep(cfg, {3e-4, 1e-3}, opt);
  data = RegimeData{kRho0 * cfg.collision.viscosity(), res.k_darcy, {res.stokes}};
  for (const auto& p : res.points) data->points.push_back(p);
  return *data;
}

const RegimeData& laminar_data() {
  static std::optional<RegimeData> data;
  if (data) return *data;
  const auto& prof = regime_profile("laminar");
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell(0.5 * prof.diameter, kChi);
  cfg.collision = CollisionConfig::trt(0.01, prof.magic);
  cfg.wall_scheme = WallScheme::CLI;
  cfg.control = drag_control();
  cfg.control.window_steps = 1000;
  cfg.control.max_steps = 1000000;
  ReynoldsSweepOptions opt;
  opt.on_point = [](const CaseSummary& s) {
    log("laminar profile: Re_p=" + fmt(s.re_p) + " U=" + fmt(s.speed, 6) + " drho=" + fmt(s.delta_rho, 6) +
        " K=" + fmt(s.k_app, 6) + " converged=" + std::to_string(s.converged) +
        (s.failed ? " FAILED: " + s.failure : ""));
  };
  const auto res = reynolds_sweep(cfg, {8.0, 20.0, 46.0, 79.0}, opt);
  data = RegimeData{kRho0 * cfg.collision.viscosity(), res.k_darcy, {res.stokes}};
  for (const auto& p : res.points) data->points.push_back(p);
  return *data;
}

Outcome criterion_8() {
  const auto& d = darcy_data();
  // the 1e-4 and 1e-3 points
  const auto& a = d.points.front();
  const auto& b = d.points.back();
  if (!a.converged || !b.converged) return {false, "a Darcy-regime run did not converge"};
  const double lin = std::abs((b.speed / a.speed) / (b.delta_rho / a.delta_rho) - 1.0);
  std::vector<FlowPoint> pts;
  for (const auto& p : d.points) pts.push_back({p.speed, p.grad_p});
  const auto fit = forchheimer_fit(pts, d.mu, kRho0);
  // standard error of beta, with the convergence tolerance as the floor of the noise in grad P
  const double n = static_cast<double>(pts.size());
  double s2 = fit.residual_norm * fit.residual_norm / std::max(1.0, n - 2.0);
  for (const auto& p : pts) s2 = std::max(s2, std::pow(1e-9 * p.grad_p, 2));
  double suu = 0, suq = 0, sqq = 0;
  for (const auto& p : pts) {
    const double q = kRho0 * p.speed * p.speed;
    suu += p.speed * p.speed;
    suq += p.speed * q;
    sqq += q * q;
  }
  const double se = std::sqrt(s2 * suu / (suu * sqq - suq * suq));
  const bool beta_zero = std::abs(fit.beta) <= 3.0 * se;
  return {lin <= 1e-3 && beta_zero,
          "Re_p " + fmt(a.re_p, 3) + ".." + fmt(b.re_p, 3) + ": U/drho deviation " + fmt(lin, 3) +
              " (tol 1e-3); beta " + fmt(fit.beta, 3) + " vs 3 sigma " + fmt(3 * se, 3)};
}

Outcome criterion_9() {
  const auto& d = laminar_data();
  std::vector<FlowPoint> pts;
  std::string res;
  for (std::size_t i = 1; i < d.points.size(); ++i) {
    const auto& p = d.points[i];
    if (p.failed || !p.converged) {
      res += " [Re target #" + std::to_string(i) + " " + (p.failed ? "unstable" : "unconverged") + "]";
      if (p.failed) continue;
    }
    pts.push_back({p.speed, p.grad_p});
    res += " Re_p=" + fmt(p.re_p, 3) + ":C_F=" +
           fmt(pointwise_forchheimer_constant(pts.back(), d.mu, kRho0, d.k_darcy), 3);
  }
  if (pts.size() < 3) return {false, "fewer than three usable laminar points;" + res};
  const auto fit = forchheimer_fit(pts, d.mu, kRho0, d.k_darcy);
  const bool ok = fit.c_f >= 0.006 && fit.c_f <= 0.010;
  return {ok, "C_F " + fmt(fit.c_f, 4) + " (K_D " + fmt(d.k_darcy, 5) + " fixed) in [0.006,0.010]?" + res};
}

Outcome criterion_10() {
  int used = 0;
  double worst = 0.0;
  std::string vals;
  for (const auto* d : {&darcy_data(), &laminar_data()}) {
    for (const auto& p : d->points) {
      if (!p.converged || p.failed) continue;
      const auto fr = friction_factor({{p.speed, p.grad_p}}, d->k_darcy, d->mu, kRho0).front();
      if (fr.re_k >= 1.0) continue;
      ++used;
      const double dev = std::abs(fr.f_k * fr.re_k - 1.0);
      worst = std::max(worst, dev);
      vals += " Re_K=" + fmt(fr.re_k, 3) + ":" + fmt(fr.f_k * fr.re_k, 5);
    }
  }
  return {used > 0 && worst <= 0.02,
          std::to_string(used) + " points with Re_K<1, max |F_K Re_K - 1| " + fmt(worst, 3) + " (tol 0.02);" +
              vals};
}

Outcome criterion_11() {
  const double rho = 1.0, mu = 0.01;
  const BarreeConwayParams truth{0.36, 3.0, 25.0, 1.0, 1.0};
  std::vector<BarreeConwayPoint> pts;
  for (int i = 0; i <= 24; ++i) {
    const double u = 1e-5 * std::pow(10.0, 0.25 * i);
    pts.push_back({u, truth.normalized(u, rho, mu)});
  }
  const auto fit = barree_conway_fit(pts, truth.k_darcy, rho, mu);
  const auto& p = fit.params;
  const double err = std::max({std::abs(p.k_min / truth.k_min - 1.0), std::abs(p.l_t / truth.l_t - 1.0),
                               std::abs(p.e - truth.e), std::abs(p.f - truth.f)});
  const double low = std::abs(p.normalized(1e-14, rho, mu) - 1.0);
  const double high = std::abs(p.normalized(1e14, rho, mu) - p.k_min / p.k_darcy);
  const bool ok = fit.converged && err <= 1e-6 && low <= 1e-9 && high <= 1e-9;
  return {ok, "synthetic recovery max relative error " + fmt(err, 3) + " (tol 1e-6); K*(0)-1 " + fmt(low, 3) +
                  ", K*(inf)-K_min/K_D " + fmt(high, 3) +
                  " [turbulent C_F, friction plateau and Re_p>1000 plateau deviation excluded: not desk scale]"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"Poiseuille exactness", criterion_1}},
      {2, {"moment and mass properties", criterion_2}},
      {3, {"q=1/2 degeneracy", criterion_3}},
      {4, {"grid-convergence orders", criterion_4}},
      {5, {"grid-independence thresholds", criterion_5}},
      {6, {"viscosity independence", criterion_6}},
      {7, {"displacement robustness", criterion_7}},
      {8, {"Darcy linearity", criterion_8}},
      {9, {"laminar Forchheimer constant", criterion_9}},
      {10, {"friction factor Stokes branch", criterion_10}},
      {11, {"Barree-Conway fitter (substitute)", criterion_11}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failed = 0;
  for (const auto& [id, c] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.passed ? 0 : 1;
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << " (" << c.first << "): " << o.detail
              << " [" << fmt(dt, 3) << " s]" << std::endl;
  }
  return failed ? 1 : 0;
}
