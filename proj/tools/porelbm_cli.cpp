// porelbm command-line driver: run, sweep, fit, verify.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <porelbm/config.hpp>
#include <porelbm/study.hpp>
#include <porelbm/verify.hpp>

namespace fs = std::filesystem;
using namespace porelbm;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUnstable = 2;

struct CommonOptions {
  std::string config;
  std::string profile;
  std::string output = "porelbm_out";
  int threads = 0;
  std::uint64_t max_steps = 0;
  std::vector<std::string> set;
};

/// Resolve a config path against the working directory, then PORELBM_CONFIG_ROOT.
std::string resolve_config(const std::string& path) {
  if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("PORELBM_CONFIG_ROOT")) {
    const auto p = fs::path(root) / path;
    if (fs::exists(p)) return p.string();
  }
  return path;
}

/// "a.b.c=value" into a JSON merge patch; the value is parsed as JSON when it can be.
Json parse_override(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
  const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json patch = Json::object();
  Json* node = &patch;
  std::stringstream ks(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  return patch;
}

struct LoadedConfig {
  Json json;
  std::string base_dir;
};

LoadedConfig load_config(const CommonOptions& o) {
  LoadedConfig lc;
  Json file = Json::object();
  const std::string path = resolve_config(o.config);
  if (!path.empty()) {
    file = load_json_file(path);
    lc.base_dir = fs::absolute(path).parent_path().string();
  }
  Json over = Json::object();
  for (const auto& s : o.set) over.merge_patch(parse_override(s));
  if (o.threads > 0) over["threads"] = o.threads;
  if (o.max_steps > 0) over["control"]["max_steps"] = o.max_steps;
  lc.json = layered_config(file, over, o.profile);
  return lc;
}

std::vector<std::string> summary_columns() {
  return {"converged[-]", "failed[-]", "steps[dt]",  "radius[dx]",     "length[dx]",
          "solid_fraction[-]", "viscosity[dx^2/dt]", "delta_rho[rho0]", "F_D[lu]",
          "U[dx/dt]",   "grad_P[lu]", "C_D[-]",     "K[dx^2]",        "Re_p[-]",
          "fallback_links[-]"};
}

std::vector<std::string> summary_cells(const CaseSummary& s) {
  return {std::to_string(s.converged ? 1 : 0), std::to_string(s.failed ? 1 : 0),
          std::to_string(s.steps), format_double(s.radius), format_double(s.length),
          format_double(s.solid_fraction), format_double(s.viscosity), format_double(s.delta_rho),
          format_double(s.force), format_double(s.speed), format_double(s.grad_p),
          format_double(s.c_d), format_double(s.k_app), format_double(s.re_p),
          std::to_string(s.fallback_links)};
}

/// One configured run with observables, field dumps and checkpoints in @p dir.
CaseSummary run_to_directory(const Json& cfg, const std::string& base_dir, const fs::path& dir) {
  fs::create_directories(dir);
  const auto sc = simulation_config_from_json(cfg, base_dir);
  const std::string hash = config_hash(cfg);
  {
    std::ofstream os(dir / "config.json");
    os << cfg.dump(2) << "\n";
  }
  auto sim = make_simulation(sc);
  sim.set_threads(cfg.value("threads", 1));
  perturb_density(sim, cfg.value("initial_noise", 0.0), cfg.value("seed", std::uint64_t{0}));
  const auto& out = cfg.at("output");
  const std::uint64_t field_every = out.value("field_every", std::uint64_t{0});
  const std::uint64_t checkpoint_every = out.value("checkpoint_every", std::uint64_t{0});
  if (out.contains("restart") && !out["restart"].get<std::string>().empty()) {
    sim.load_checkpoint(out["restart"].get<std::string>());
  }

  const double mu = kRho0 * sc.collision.viscosity();
  const double radius = characteristic_radius(sc.geometry);
  const double per_sphere = 1.0 / static_cast<double>(sphere_count(sc.geometry));
  const int axis = sc.drive.axis;
  CsvWriter obs((dir / "observables.csv").string(),
                {"step[dt]", "F_D[lu]", "U[dx/dt]", "grad_P[lu]", "C_D[-]", "mass[rho0 dx^3]"}, hash);
  auto observer = [&](const Simulation& s, const ObservableSample& o) {
    const double f = o.force[axis] * per_sphere;
    const double cd = o.speed > 0.0 && radius > 0.0 ? drag_coefficient(f, mu, o.speed, radius) : 0.0;
    obs.row(std::vector<double>{static_cast<double>(o.step), f, o.velocity[axis],
                                std::abs(o.pressure_gradient), cd, o.mass});
    if (field_every > 0 && o.step % field_every == 0) {
      write_vtk((dir / ("fields_" + std::to_string(o.step) + ".vtk")).string(), s);
    }
    if (checkpoint_every > 0 && o.step % checkpoint_every == 0) {
      s.save_checkpoint((dir / "checkpoint.bin").string());
    }
  };
  const auto res = run(sim, sc.control, observer);
  obs.flush();
  if (out.value("final_fields", false) || res.failed) write_vtk((dir / "fields_final.vtk").string(), sim);
  const auto summary = summarize(sim, res, sc.geometry);
  CsvWriter sum((dir / "summary.csv").string(), summary_columns(), hash);
  sum.row(summary_cells(summary));
  std::cerr << sim.links().diagnostics.report() << "\n";
  return summary;
}

void print_summary(const CaseSummary& s) {
  std::cout << "converged=" << s.converged << " steps=" << s.steps << " C_D=" << format_double(s.c_d)
            << " K=" << format_double(s.k_app) << " Re_p=" << format_double(s.re_p) << "\n";
  if (s.failed) std::cout << "failure: " << s.failure << "\n";
}

int cmd_run(const CommonOptions& o) {
  const auto lc = load_config(o);
  const auto s = run_to_directory(lc.json, lc.base_dir, o.output);
  print_summary(s);
  return s.failed ? kExitUnstable : 0;
}

/// Reference drag, or nothing when the geometry is not a single-sphere cell.
std::optional<double> reference_drag_for(const Json& cfg, const ReferenceDragTable* table) {
  if (!table || cfg["geometry"].value("type", "single_sphere") != "single_sphere") return std::nullopt;
  const double chi = cfg["geometry"].value("solid_fraction", 0.6);
  if (chi < table->chi_min() || chi > table->chi_max()) return std::nullopt;
  return (*table)(chi);
}

int cmd_sweep(const CommonOptions& o, std::string axis, std::vector<double> values) {
  const auto lc = load_config(o);
  const Json& base = lc.json;
  if (axis.empty() && base.contains("sweep")) axis = base["sweep"].value("axis", "");
  if (values.empty() && base.contains("sweep")) values = base["sweep"].value("values", std::vector<double>{});
  if (values.size() < 2) throw ConfigError("a sweep needs at least two values");
  const fs::path root(o.output);
  fs::create_directories(root);

  std::optional<ReferenceDragTable> table;
  try {
    table = ReferenceDragTable::load(default_reference_table_path());
  } catch (const std::exception& e) {
    std::cerr << "reference table unavailable: " << e.what() << "\n";
  }
  const std::string hash = config_hash(base);
  int failures = 0;

  if (axis == "reynolds") {
    const auto sc = simulation_config_from_json(base, lc.base_dir);
    ReynoldsSweepOptions opt;
    opt.threads = base.value("threads", 1);
    opt.on_point = [](const CaseSummary& s) { print_summary(s); };
    const auto res = reynolds_sweep(sc, values, opt);
    const double mu = kRho0 * sc.collision.viscosity();
    CsvWriter w((root / "sweep.csv").string(),
                {"Re_p_target[-]", "Re_p[-]", "Re_K[-]", "U[dx/dt]", "grad_P[lu]", "K_app[dx^2]",
                 "K_star[-]", "F_K[-]", "C_F_point[-]", "C_D[-]", "converged[-]"},
                hash);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i >= res.points.size()) {
        ++failures;
        continue;
      }
      const auto& s = res.points[i];
      failures += s.converged && !s.failed ? 0 : 1;
      if (s.failed || !(s.speed > 0.0)) continue;
      const auto fr = friction_factor({{s.speed, s.grad_p}}, res.k_darcy, mu, kRho0).front();
      w.row(std::vector<double>{values[i], s.re_p, fr.re_k, s.speed, s.grad_p, s.k_app,
                                s.k_app / res.k_darcy, fr.f_k,
                                pointwise_forchheimer_constant({s.speed, s.grad_p}, mu, kRho0, res.k_darcy),
                                s.c_d, s.converged ? 1.0 : 0.0});
    }
    std::cout << "K_D=" << format_double(res.k_darcy) << "\n";
    return failures ? kExitFailure : 0;
  }

  CsvWriter w((root / "sweep.csv").string(),
              {"sweep_" + axis + "[-]", "radius[dx]", "viscosity[dx^2/dt]", "C_D[-]", "C_D_ref[-]", "rel_error[-]",
               "log10_abs_error[-]", "K[dx^2]", "K_ref[dx^2]", "K_over_K_ref[-]", "Re_p[-]", "U[dx/dt]",
               "grad_P[lu]", "converged[-]", "failed[-]"},
              hash);
  for (std::size_t i = 0; i < values.size(); ++i) {
    Json cfg = base;
    cfg.erase("sweep");
    const double v = values[i];
    if (axis == "radius") {
      cfg["geometry"]["radius"] = v;
      cfg["geometry"].erase("edge");
    } else if (axis == "displacement") {
      const int a = cfg["drive"].value("axis", 0);
      cfg["geometry"]["offset"][a] = v;
    } else if (axis == "viscosity") {
      cfg["collision"]["viscosity"] = v;
    } else {
      throw ConfigError("unknown sweep axis '" + axis + "' (radius, displacement, viscosity, reynolds)");
    }
    std::ostringstream name;
    name << "point_" << std::setw(3) << std::setfill('0') << i;
    CaseSummary s;
    try {
      s = run_to_directory(cfg, lc.base_dir, root / name.str());
    } catch (const std::exception& e) {
      s.failed = true;
      s.failure = e.what();
    }
    print_summary(s);
    if (s.failed || !s.converged) ++failures;
    const auto ref = reference_drag_for(cfg, table ? &*table : nullptr);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double err = nan, k_ref = nan;
    if (ref && s.c_d > 0.0) {
      err = s.c_d / *ref - 1.0;
      k_ref = permeability_from_drag(*ref, s.radius, s.length);
    }
    w.row(std::vector<double>{v, s.radius, s.viscosity, s.c_d, ref.value_or(nan), err,
                              std::log10(std::abs(err)), s.k_app, k_ref, s.k_app / k_ref, s.re_p,
                              s.speed, s.grad_p, s.converged ? 1.0 : 0.0, s.failed ? 1.0 : 0.0});
    w.flush();
  }
  return failures ? kExitFailure : 0;
}

int cmd_fit(const std::vector<std::string>& inputs, const std::string& output, double viscosity,
            double diameter, std::optional<double> k_darcy, double re_max) {
  std::vector<FlowPoint> pts;
  for (const auto& path : inputs) {
    const auto t = read_csv(path);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      bool ok = true;
      try {
        ok = t.number(r, "converged") != 0.0;
      } catch (const std::runtime_error&) {
      }
      const FlowPoint p{t.number(r, "U"), t.number(r, "grad_P")};
      if (ok && p.speed > 0.0 && p.grad_p > 0.0) pts.push_back(p);
    }
  }
  if (pts.empty()) throw AnalysisError("no usable points in the input tables");
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.speed < b.speed; });
  const double mu = kRho0 * viscosity;
  // Darcy permeability from the slowest point unless given
  const double kd = k_darcy.value_or(darcy_permeability(mu, pts.front().speed, pts.front().grad_p));

  fs::create_directories(output);
  std::ofstream rep(fs::path(output) / "fit_report.txt");
  auto both = [&](const std::string& line) {
    rep << line << "\n";
    std::cout << line << "\n";
  };
  both("points: " + std::to_string(pts.size()));
  both("K_D: " + format_double(kd));

  std::vector<FlowPoint> window;
  for (const auto& p : pts) {
    const double re = reynolds_number(kRho0, p.speed, diameter, mu);
    if (re <= re_max) window.push_back(p);
  }
  if (window.size() >= 3) {
    try {
      const auto f = forchheimer_fit(window, mu, kRho0, kd);
      both("forchheimer (K_D fixed): beta=" + format_double(f.beta) + " C_F=" + format_double(f.c_f) +
           " residual=" + format_double(f.residual_norm));
      const auto g = forchheimer_fit(window, mu, kRho0);
      both("forchheimer (free): K_D=" + format_double(g.k_darcy) + " beta=" + format_double(g.beta) +
           " C_F=" + format_double(g.c_f) + " residual=" + format_double(g.residual_norm));
    } catch (const AnalysisError& e) {
      both(std::string("forchheimer: ") + e.what());
    }
  } else {
    both("forchheimer: fewer than three points in the Reynolds window");
  }

  std::vector<BarreeConwayPoint> bc;
  for (const auto& p : window) bc.push_back({p.speed, darcy_permeability(mu, p.speed, p.grad_p) / kd});
  std::optional<BarreeConwayFit> bcf;
  if (bc.size() >= 4) {
    try {
      bcf = barree_conway_fit(bc, kd, kRho0, mu);
    } catch (const FitError& e) {
      bcf = e.best();
      both(std::string("barree-conway: ") + e.what() + " (best candidate reported)");
    } catch (const AnalysisError& e) {
      both(std::string("barree-conway: ") + e.what());
    }
    if (bcf) {
      const auto& q = bcf->params;
      both("barree-conway: K_min=" + format_double(q.k_min) + " K_D=" + format_double(q.k_darcy) +
           " l_T=" + format_double(q.l_t) + " E=" + format_double(q.e) + " F=" + format_double(q.f) +
           " residual=" + format_double(bcf->residual_norm));
    }
  } else {
    both("barree-conway: fewer than four points in the Reynolds window");
  }

  const auto fr = friction_factor(pts, kd, mu, kRho0);
  CsvWriter w((fs::path(output) / "fit_points.csv").string(),
              {"U[dx/dt]", "grad_P[lu]", "Re_p[-]", "Re_K[-]", "F_K[-]", "F_K_Re_K[-]", "K_star[-]",
               "K_star_model[-]", "C_F_point[-]"},
              hex64(fnv1a64(format_double(kd) + format_double(mu))));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const double model = bcf ? bcf->params.normalized(p.speed, kRho0, mu)
                             : std::numeric_limits<double>::quiet_NaN();
    w.row(std::vector<double>{p.speed, p.grad_p, reynolds_number(kRho0, p.speed, diameter, mu),
                              fr[i].re_k, fr[i].f_k, fr[i].f_k * fr[i].re_k,
                              darcy_permeability(mu, p.speed, p.grad_p) / kd, model,
                              pointwise_forchheimer_constant(p, mu, kRho0, kd)});
  }
  return 0;
}

int cmd_verify() {
  bool ok = true;
  for (const auto& r : run_verification()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << format_double(r.value)
              << " tol=" << format_double(r.tolerance);
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitFailure;
}

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config, "JSON configuration (relative paths also tried under $PORELBM_CONFIG_ROOT)");
  app->add_option("-p,--profile", o.profile, "named regime profile: darcy, laminar, unsteady, transition, turbulent, turbulent-fine");
  app->add_option("-o,--output", o.output, "output directory");
  app->add_option("-t,--threads", o.threads, "worker threads");
  app->add_option("--max-steps", o.max_steps, "step limit per run");
  app->add_option("--set", o.set, "override a config entry, e.g. --set collision.viscosity=0.05");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"porelbm: D3Q19 lattice Boltzmann flow through periodic sphere packs"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  auto* run_cmd = app.add_subcommand("run", "single run to convergence");
  add_common(run_cmd, run_opt);

  CommonOptions sweep_opt;
  std::string axis;
  std::vector<double> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per value of a swept parameter");
  add_common(sweep_cmd, sweep_opt);
  sweep_cmd->add_option("-a,--axis", axis, "radius, displacement, viscosity or reynolds");
  sweep_cmd->add_option("-v,--values", values, "values of the swept parameter")->delimiter(',');

  std::vector<std::string> fit_inputs;
  std::string fit_output = "porelbm_fit";
  double fit_nu = 0.0, fit_diameter = 1.0, fit_re_max = 1e300;
  std::optional<double> fit_k;
  auto* fit_cmd = app.add_subcommand("fit", "Forchheimer, Barree-Conway and friction-factor fits");
  fit_cmd->add_option("inputs", fit_inputs, "summary or sweep CSV files")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("-o,--output", fit_output, "output directory");
  fit_cmd->add_option("--viscosity", fit_nu, "kinematic viscosity of the runs")->required();
  fit_cmd->add_option("--diameter", fit_diameter, "sphere diameter for Re_p");
  fit_cmd->add_option("--k-darcy", fit_k, "Darcy permeability (default: slowest point)");
  fit_cmd->add_option("--re-max", fit_re_max, "upper Re_p of the fit window");

  app.add_subcommand("verify", "built-in invariant checks");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run_opt);
    if (*sweep_cmd) return cmd_sweep(sweep_opt, axis, values);
    if (*fit_cmd) return cmd_fit(fit_inputs, fit_output, fit_nu, fit_diameter, fit_k, fit_re_max);
    return cmd_verify();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
