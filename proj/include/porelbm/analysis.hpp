#pragma once

/**
 * @file analysis.hpp
 * @brief Drag, permeability and non-Darcy model fits on converged runs.
 *
 * All quantities are in lattice units. Pressure gradients are passed as
 * magnitudes |grad P| along the flow axis, speeds as U = |U . i|.
 */

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <porelbm/engine.hpp>

namespace porelbm {

/// A fit or an analysis could not be carried out on the given data.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dimensionless groups

/// Stokes-normalised drag F / (6 pi mu U r).
inline double drag_coefficient(double force, double mu, double speed, double radius) {
  if (!(speed > 0.0)) throw std::domain_error("drag coefficient undefined for U <= 0");
  return force / (6.0 * std::numbers::pi * mu * speed * radius);
}

/// Inertial drag F / (rho A U^2) with A a cross-section.
inline double inertial_drag_coefficient(double force, double rho, double area, double speed) {
  if (!(speed > 0.0)) throw std::domain_error("drag coefficient undefined for U <= 0");
  return force / (rho * area * speed * speed);
}

inline double reynolds_number(double rho, double speed, double length, double mu) {
  return rho * speed * length / mu;
}

/// Darcy permeability mu U / |grad P|.
inline double darcy_permeability(double mu, double speed, double grad_p) {
  if (!(grad_p > 0.0)) throw AnalysisError("permeability needs a positive pressure gradient");
  return mu * speed / grad_p;
}

/// Darcy permeability of a converged run; a run that did not converge is rejected.
inline double darcy_permeability(const RunResult& run, double mu) {
  if (!run.converged || run.failed) {
    throw AnalysisError("permeability requested from a run that did not converge");
  }
  return darcy_permeability(mu, run.mean_speed, std::abs(run.pressure_gradient));
}

/**
 * Permeability implied by a drag coefficient for one sphere of radius r in a
 * cubic cell of edge L: grad P = F / L^3 and F = 6 pi mu U r C_D.
 */
inline double permeability_from_drag(double drag_coeff, double radius, double edge) {
  return edge * edge * edge / (6.0 * std::numbers::pi * radius * drag_coeff);
}

// ---------------------------------------------------------------------------
// Reference drag table

/**
 * Tabulated C_D,ref(chi) with monotone cubic (Fritsch-Carlson) interpolation.
 *
 * Text format: '#' lines are provenance, other lines hold "chi C_D" pairs
 * in strictly increasing chi with strictly increasing C_D.
 */
class ReferenceDragTable {
 public:
  ReferenceDragTable() = default;
  ReferenceDragTable(std::vector<double> chi, std::vector<double> cd, std::string provenance = {})
      : chi_(std::move(chi)), cd_(std::move(cd)), provenance_(std::move(provenance)) {
    validate();
    build_slopes();
  }

  static ReferenceDragTable parse(std::istream& is) {
    std::vector<double> chi, cd;
    std::string provenance, line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '#') {
        provenance += line.substr(first + 1);
        provenance += '\n';
        continue;
      }
      std::istringstream ls(line);
      double a = 0.0, b = 0.0;
      if (!(ls >> a >> b)) {
        throw AnalysisError("reference table line " + std::to_string(lineno) + ": expected 'chi C_D'");
      }
      chi.push_back(a);
      cd.push_back(b);
    }
    return ReferenceDragTable(std::move(chi), std::move(cd), std::move(provenance));
  }

  static ReferenceDragTable load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw AnalysisError("cannot open reference table " + path);
    return parse(is);
  }

  double operator()(double chi) const { return value(chi); }

  double value(double chi) const {
    if (chi_.empty()) throw AnalysisError("empty reference table");
    if (!(chi >= chi_.front() && chi <= chi_.back())) {
      throw std::out_of_range("solid fraction " + std::to_string(chi) + " outside table range [" +
                              std::to_string(chi_.front()) + ", " + std::to_string(chi_.back()) + "]");
    }
    const auto it = std::upper_bound(chi_.begin(), chi_.end(), chi);
    std::size_t i = it == chi_.begin() ? 0 : static_cast<std::size_t>(it - chi_.begin()) - 1;
    if (i >= chi_.size() - 1) return cd_.back();
    const double h = chi_[i + 1] - chi_[i];
    const double t = (chi - chi_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * cd_[i] + (t3 - 2 * t2 + t) * h * slope_[i] +
           (-2 * t3 + 3 * t2) * cd_[i + 1] + (t3 - t2) * h * slope_[i + 1];
  }

  double chi_min() const { return chi_.front(); }
  double chi_max() const { return chi_.back(); }
  const std::vector<double>& chi() const { return chi_; }
  const std::vector<double>& drag() const { return cd_; }
  const std::string& provenance() const { return provenance_; }

 private:
  void validate() const {
    if (chi_.size() != cd_.size() || chi_.size() < 2) {
      throw AnalysisError("reference table needs at least two (chi, C_D) rows");
    }
    for (std::size_t i = 1; i < chi_.size(); ++i) {
      if (!(chi_[i] > chi_[i - 1])) throw AnalysisError("reference table chi not strictly increasing");
      if (!(cd_[i] > cd_[i - 1])) throw AnalysisError("reference table C_D not strictly increasing");
    }
  }

  void build_slopes() {
    const std::size_t n = chi_.size();
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (cd_[i + 1] - cd_[i]) / (chi_[i + 1] - chi_[i]);
    slope_.assign(n, 0.0);
    slope_[0] = d[0];
    slope_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      // weighted harmonic mean keeps the interpolant monotone
      const double h0 = chi_[i] - chi_[i - 1], h1 = chi_[i + 1] - chi_[i];
      const double w0 = 2 * h1 + h0, w1 = h1 + 2 * h0;
      slope_[i] = (w0 + w1) / (w0 / d[i - 1] + w1 / d[i]);
    }
  }

  std::vector<double> chi_, cd_, slope_;
  std::string provenance_;
};

/// Path of the table shipped with the sources, overridable by PORELBM_REFERENCE_TABLE.
inline std::string default_reference_table_path() {
  if (const char* p = std::getenv("PORELBM_REFERENCE_TABLE")) return p;
#ifdef PORELBM_DATA_DIR
  return std::string(PORELBM_DATA_DIR) + "/reference_drag_sc.txt";
#else
  return "data/reference_drag_sc.txt";
#endif
}

/// Dilute-array drag of a simple cubic array of spheres.
inline double dilute_cubic_array_drag(double chi) {
  const double c13 = std::cbrt(chi);
  const double denom = 1.0 - 1.7601 * c13 + chi - 1.5593 * chi * chi +
                       3.9799 * std::pow(chi, 8.0 / 3.0) - 3.0734 * std::pow(chi, 10.0 / 3.0);
  return 1.0 / denom;
}

// ---------------------------------------------------------------------------
// Convergence studies

/// Extrapolated limit from values at resolutions h1 > h2 (e.g. radii r1 < r2) and order p.
inline double richardson(double r1, double v1, double r2, double v2, double order) {
  const double ratio = std::pow(r2 / r1, order);
  return v2 + (v2 - v1) / (ratio - 1.0);
}

/// Least-squares slope of log(error) against log(resolution); positive for convergence.
inline double convergence_order(const std::vector<double>& resolution,
                                const std::vector<double>& error) {
  if (resolution.size() != error.size() || resolution.size() < 2) {
    throw AnalysisError("convergence order needs at least two (resolution, error) pairs");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(resolution.size());
  for (std::size_t i = 0; i < resolution.size(); ++i) {
    if (!(resolution[i] > 0.0) || !(error[i] > 0.0)) {
      throw AnalysisError("convergence order needs positive resolutions and errors");
    }
    const double x = std::log(resolution[i]), y = std::log(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw AnalysisError("convergence order needs distinct resolutions");
  return -(n * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------
// Regime points and model fits

/// One converged driven run reduced to the quantities the fits consume.
struct FlowPoint {
  double speed = 0.0;   // U
  double grad_p = 0.0;  // |grad P|
};

struct RegimePoint {
  double re_p = 0.0;
  double re_k = 0.0;
  double speed = 0.0;
  double grad_p = 0.0;
  double k_app = 0.0;
  double c_d = 0.0;
  double f_k = 0.0;
};

/// Fill the derived columns of a point from (U, |grad P|).
inline RegimePoint make_regime_point(const FlowPoint& p, double rho, double mu, double diameter,
                                     double k_darcy, double force, double radius) {
  RegimePoint r;
  r.speed = p.speed;
  r.grad_p = p.grad_p;
  r.re_p = reynolds_number(rho, p.speed, diameter, mu);
  r.re_k = reynolds_number(rho, p.speed, std::sqrt(k_darcy), mu);
  r.k_app = darcy_permeability(mu, p.speed, p.grad_p);
  r.c_d = drag_coefficient(force, mu, p.speed, radius);
  r.f_k = p.grad_p * std::sqrt(k_darcy) / (rho * p.speed * p.speed);
  return r;
}

struct ForchheimerFit {
  double k_darcy = 0.0;
  double beta = 0.0;
  double c_f = 0.0;  // beta sqrt(K_D)
  double residual_norm = 0.0;
  bool k_fixed = false;
  std::vector<double> predicted;  // |grad P| per point
};

/**
 * Least squares on |grad P| = (mu / K_D) U + beta rho U^2.
 *
 * With @p fixed_k the Darcy term is taken as known and only beta is fitted.
 */
inline ForchheimerFit forchheimer_fit(const std::vector<FlowPoint>& pts, double mu, double rho,
                                      std::optional<double> fixed_k = std::nullopt) {
  if (pts.size() < 3) throw AnalysisError("Forchheimer fit needs at least three points");
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd y(n), u(n), u2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    if (!(p.speed > 0.0)) throw AnalysisError("Forchheimer fit needs positive speeds");
    y[i] = p.grad_p;
    u[i] = p.speed;
    u2[i] = rho * p.speed * p.speed;
  }
  ForchheimerFit fit;
  double a = 0.0;
  if (fixed_k) {
    if (!(*fixed_k > 0.0)) throw AnalysisError("fixed Darcy permeability must be positive");
    a = mu / *fixed_k;
    fit.beta = u2.dot(y - a * u) / u2.squaredNorm();
    fit.k_darcy = *fixed_k;
    fit.k_fixed = true;
  } else {
    // scale the columns so the rank test is independent of units
    Eigen::MatrixXd A(n, 2);
    A.col(0) = u / u.norm();
    A.col(1) = u2 / u2.norm();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 2) {
      throw AnalysisError("Forchheimer fit is rank deficient: speeds must not all be equal");
    }
    const Eigen::Vector2d c = qr.solve(y);
    a = c[0] / u.norm();
    fit.beta = c[1] / u2.norm();
    if (!(a > 0.0)) throw AnalysisError("Forchheimer fit gave a non-positive viscous coefficient");
    fit.k_darcy = mu / a;
  }
  fit.c_f = fit.beta * std::sqrt(fit.k_darcy);
  fit.predicted.resize(pts.size());
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pred = a * u[i] + fit.beta * u2[i];
    fit.predicted[static_cast<std::size_t>(i)] = pred;
    r2 += (pred - y[i]) * (pred - y[i]);
  }
  fit.residual_norm = std::sqrt(r2);
  return fit;
}

/// Per-point Forchheimer constant (|grad P| - mu U / K_D) sqrt(K_D) / (rho U^2).
inline double pointwise_forchheimer_constant(const FlowPoint& p, double mu, double rho,
                                             double k_darcy) {
  return (p.grad_p - mu * p.speed / k_darcy) * std::sqrt(k_darcy) / (rho * p.speed * p.speed);
}

struct FrictionPoint {
  double re_k = 0.0;
  double f_k = 0.0;
};

inline std::vector<FrictionPoint> friction_factor(const std::vector<FlowPoint>& pts,
                                                  double k_darcy, double mu, double rho) {
  if (!(k_darcy > 0.0)) throw AnalysisError("friction factor needs a positive Darcy permeability");
  std::vector<FrictionPoint> out;
  out.reserve(pts.size());
  const double sk = std::sqrt(k_darcy);
  for (const auto& p : pts) {
    if (!(p.speed > 0.0)) throw AnalysisError("friction factor needs positive speeds");
    out.push_back({rho * p.speed * sk / mu, p.grad_p * sk / (rho * p.speed * p.speed)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Barree-Conway apparent permeability

struct BarreeConwayParams {
  double k_min = 0.0;  // K_min
  double k_darcy = 0.0;
  double l_t = 1.0;    // length in Re_T = rho U l_T / mu
  double e = 1.0;
  double f = 1.0;

  /// K* = K_app / K_D at speed U.
  double normalized(double speed, double rho, double mu) const {
    const double re_t = rho * speed * l_t / mu;
    const double ratio = k_min / k_darcy;
    return ratio + (1.0 - ratio) / std::pow(1.0 + std::pow(re_t, f), e);
  }
  double apparent(double speed, double rho, double mu) const {
    return k_darcy * normalized(speed, rho, mu);
  }
};

struct BarreeConwayPoint {
  double speed = 0.0;
  double k_star = 0.0;  // K_app / K_D
};

struct BarreeConwayFit {
  BarreeConwayParams params;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> predicted;
};

/// Optimiser budget exhausted; carries the best parameters seen.
class FitError : public AnalysisError {
 public:
  FitError(const std::string& what, BarreeConwayFit best) : AnalysisError(what), best_(std::move(best)) {}
  const BarreeConwayFit& best() const { return best_; }

 private:
  BarreeConwayFit best_;
};

struct LevenbergMarquardtOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-15;
  double step_tol = 1e-15;
  double initial_damping = 1e-3;
};

namespace detail {

/// Unconstrained coordinates: logit(K_min/K_D), log l_T, log E, log F.
inline Eigen::Vector4d bc_pack(double ratio, double lt, double e, double f) {
  return {std::log(ratio / (1.0 - ratio)), std::log(lt), std::log(e), std::log(f)};
}

struct BcModel {
  const std::vector<BarreeConwayPoint>* pts;
  double rho, mu;

  void eval(const Eigen::Vector4d& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const double ratio = 1.0 / (1.0 + std::exp(-x[0]));
    const double lt = std::exp(x[1]), e = std::exp(x[2]), f = std::exp(x[3]);
    const auto& p = *pts;
    r.resize(static_cast<Eigen::Index>(p.size()));
    if (jac) jac->resize(static_cast<Eigen::Index>(p.size()), 4);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double re_t = rho * p[i].speed * lt / mu;
      const double s = std::pow(re_t, f);
      const double g = std::pow(1.0 + s, -e);
      const auto ii = static_cast<Eigen::Index>(i);
      r[ii] = ratio + (1.0 - ratio) * g - p[i].k_star;
      if (!jac) continue;
      const double dg_ds = -e * g / (1.0 + s);
      (*jac)(ii, 0) = (1.0 - g) * ratio * (1.0 - ratio);
      (*jac)(ii, 1) = (1.0 - ratio) * dg_ds * f * s;                  // d/d log l_T
      (*jac)(ii, 2) = (1.0 - ratio) * g * -std::log1p(s) * e;          // d/d log E
      (*jac)(ii, 3) = (1.0 - ratio) * dg_ds * s * std::log(re_t) * f;  // d/d log F
    }
  }
};

struct LmResult {
  Eigen::Vector4d x;
  double cost;
  int iterations;
  bool converged;
};

inline LmResult levenberg_marquardt(const BcModel& m, Eigen::Vector4d x,
                                    const LevenbergMarquardtOptions& opt) {
  Eigen::VectorXd r, r_new;
  Eigen::MatrixXd J;
  m.eval(x, r, &J);
  double cost = r.squaredNorm();
  double lambda = opt.initial_damping;
  LmResult out{x, cost, 0, false};
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    const Eigen::Matrix4d jtj = J.transpose() * J;
    const Eigen::Vector4d g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tol || cost == 0.0) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::Matrix4d a = jtj;
      for (int d = 0; d < 4; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      const Eigen::Vector4d step = a.ldlt().solve(-g);
      const Eigen::Vector4d xn = x + step;
      m.eval(xn, r_new, nullptr);
      const double cn = r_new.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        const bool small = step.norm() <= opt.step_tol * (x.norm() + opt.step_tol);
        x = xn;
        const double drop = cost - cn;
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
        m.eval(x, r, &J);
        if (small || drop <= 1e-30) out.converged = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!accepted) {
      // no descent direction left at any damping: a (local) minimum
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.x = x;
  out.cost = cost;
  return out;
}

}  // namespace detail

/**
 * Fit K* = k + (1 - k) / (1 + Re_T^F)^E with k = K_min / K_D to normalised
 * apparent permeabilities. K_D is supplied (from the Darcy regime). Several
 * starts are tried: l_T from the knee of the data, E = F = 1, and scaled
 * variants; the best local optimum is kept.
 */
inline BarreeConwayFit barree_conway_fit(const std::vector<BarreeConwayPoint>& pts, double k_darcy,
                                         double rho, double mu,
                                         const LevenbergMarquardtOptions& opt = {}) {
  if (pts.size() < 4) throw AnalysisError("Barree-Conway fit needs at least four points");
  if (!(k_darcy > 0.0)) throw AnalysisError("Barree-Conway fit needs a positive Darcy permeability");
  double kmin_obs = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (!(p.speed > 0.0) || !(p.k_star > 0.0)) {
      throw AnalysisError("Barree-Conway fit needs positive speeds and permeabilities");
    }
    kmin_obs = std::min(kmin_obs, p.k_star);
  }
  const double ratio0 = std::clamp(0.8 * kmin_obs, 1e-6, 0.99);

  // knee: speed where K* crosses half-way between 1 and the smallest value
  std::vector<BarreeConwayPoint> sorted = pts;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.speed < b.speed; });
  const double half = 0.5 * (1.0 + kmin_obs);
  double knee = sorted[sorted.size() / 2].speed;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].k_star <= half && sorted[i - 1].k_star > half) {
      knee = std::sqrt(sorted[i].speed * sorted[i - 1].speed);
      break;
    }
  }
  const double lt0 = mu / (rho * knee);

  detail::BcModel model{&pts, rho, mu};
  std::vector<Eigen::Vector4d> starts;
  for (double sl : {1.0, 0.1, 10.0}) {
    for (double ef : {1.0, 0.5, 2.0}) {
      starts.push_back(detail::bc_pack(ratio0, lt0 * sl, ef, ef));
    }
  }
  starts.push_back(detail::bc_pack(0.5 * ratio0, lt0, 1.0, 2.0));
  starts.push_back(detail::bc_pack(0.5 * ratio0, lt0, 2.0, 1.0));

  std::optional<detail::LmResult> best;
  for (const auto& s : starts) {
    const auto res = detail::levenberg_marquardt(model, s, opt);
    if (!std::isfinite(res.cost)) continue;
    if (!best || res.cost < best->cost) best = res;
  }
  BarreeConwayFit fit;
  if (!best) throw AnalysisError("Barree-Conway fit produced no finite candidate");
  const auto& x = best->x;
  const double ratio = 1.0 / (1.0 + std::exp(-x[0]));
  fit.params = {ratio * k_darcy, k_darcy, std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
  fit.residual_norm = std::sqrt(best->cost);
  fit.iterations = best->iterations;
  fit.converged = best->converged;
  for (const auto& p : pts) fit.predicted.push_back(fit.params.normalized(p.speed, rho, mu));
  if (!fit.converged) {
    throw FitError("Barree-Conway fit did not converge within " +
                       std::to_string(opt.max_iterations) + " iterations",
                   fit);
  }
  return fit;
}

}  // namespace porelbm
