#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include <porelbm/engine.hpp>

using namespace porelbm;

namespace {

/**
 * Straightforward array-of-structures stepper with explicit ghost layers
 * along the flow axis; SBB walls and TRT collision only.
 */
class ReferenceStepper {
 public:
  ReferenceStepper(const FlagField& flags, double omega_plus, double omega_minus, double drho)
      : flags_(flags), wp_(omega_plus), wm_(omega_minus), drho_(drho), f_(flags.shape.cells()) {
    for (std::size_t c = 0; c < f_.size(); ++c)
      for (int k = 0; k < kQ; ++k) f_[c][k] = flags.fluid(c) ? kD3Q19.w[k] : 0.0;
  }

  void step() {
    const auto& sh = flags_.shape;
    // padded copy along x: index 0 and nx+1 are the ghosts
    const int px = sh.nx + 2;
    std::vector<Populations> pad(static_cast<std::size_t>(px) * sh.ny * sh.nz);
    std::vector<char> solid(pad.size());
    auto pidx = [&](int x, int y, int z) { return (static_cast<std::size_t>(z) * sh.ny + y) * px + x; };
    for (int z = 0; z < sh.nz; ++z)
      for (int y = 0; y < sh.ny; ++y) {
        for (int x = 0; x < sh.nx; ++x) {
          pad[pidx(x + 1, y, z)] = f_[sh.index(x, y, z)];
          solid[pidx(x + 1, y, z)] = flags_.solid(sh.index(x, y, z));
        }
        const auto g = periodic_pressure_exchange({f_[sh.index(0, y, z)]},
                                                  {f_[sh.index(sh.nx - 1, y, z)]}, drho_);
        pad[pidx(0, y, z)] = g.left[0];
        pad[pidx(sh.nx + 1, y, z)] = g.right[0];
        solid[pidx(0, y, z)] = flags_.solid(sh.index(sh.nx - 1, y, z));
        solid[pidx(sh.nx + 1, y, z)] = flags_.solid(sh.index(0, y, z));
      }
    std::vector<Populations> next(f_.size());
    for (int z = 0; z < sh.nz; ++z)
      for (int y = 0; y < sh.ny; ++y)
        for (int x = 0; x < sh.nx; ++x) {
          const std::size_t c = sh.index(x, y, z);
          if (flags_.solid(c)) {
            next[c] = f_[c];
            continue;
          }
          Populations g;
          for (int k = 0; k < kQ; ++k) {
            const auto& e = kD3Q19.e[k];
            const std::size_t s = pidx(x + 1 - e[0], sh.wrap(1, y - e[1]), sh.wrap(2, z - e[2]));
            g[k] = solid[s] ? f_[c][opposite(k)] : pad[s][k];
          }
          const auto m = moments(g);
          next[c] = relax_trt(g, equilibrium(m.rho, m.u), wp_, wm_);
        }
    f_ = std::move(next);
  }

  const Populations& cell(std::size_t c) const { return f_[c]; }

 private:
  FlagField flags_;
  double wp_, wm_, drho_;
  std::vector<Populations> f_;
};

Simulation sphere_sim(double drho, WallScheme scheme = WallScheme::CLI,
                      CollisionConfig col = CollisionConfig::trt(0.1, 0.1875), double r = 3.0) {
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell(r, 0.5);
  cfg.collision = col;
  cfg.wall_scheme = scheme;
  cfg.drive = {0, drho};
  return make_simulation(cfg);
}

}  // namespace

TEST(Engine, MatchesTheGhostLayerReferenceStepper) {
  const auto col = CollisionConfig::trt(0.07, 0.2);
  auto sim = sphere_sim(2e-3, WallScheme::SBB, col);
  ReferenceStepper ref(sim.flags(), col.omega_plus, col.omega_minus(), 2e-3);
  for (int i = 0; i < 40; ++i) {
    sim.step();
    ref.step();
  }
  double err = 0.0;
  for (std::size_t c = 0; c < sim.shape().cells(); ++c) {
    if (!sim.flags().fluid(c)) continue;
    for (int k = 0; k < kQ; ++k) err = std::max(err, std::abs(sim.field().at(k, c) - ref.cell(c)[k]));
  }
  EXPECT_LT(err, 1e-15);
}

TEST(Engine, UniformEquilibriumIsAFixedPoint) {
  for (auto col : {CollisionConfig::srt(0.1), CollisionConfig::trt(0.1, 0.25), CollisionConfig::mrt(0.1)}) {
    FlagField flags(GridShape{5, 4, 3});
    auto links = build_wall_links(flags, ChannelWalls{flags.shape, 1, -1.0, 100.0}, WallScheme::SBB);
    Simulation sim(flags, links, col, {0, 0.0});
    const Vec3 u{0.02, -0.01, 0.005};
    sim.initialize(1.0, u);
    const auto feq = equilibrium(1.0, u);
    sim.advance(10);
    double err = 0.0;
    for (std::size_t c = 0; c < flags.shape.cells(); ++c)
      for (int k = 0; k < kQ; ++k) err = std::max(err, std::abs(sim.field().at(k, c) - feq[k]));
    EXPECT_LT(err, 1e-15);
  }
}

TEST(Engine, ZeroDriveFromRestStaysAtRest) {
  auto sim = sphere_sim(0.0);
  sim.advance(50);
  const auto u = sim.mean_velocity();
  for (double c : u) EXPECT_EQ(c, 0.0);
}

TEST(Engine, MassBudgetMatchesInjection) {
  // exact for bounce-back walls; interpolated schemes exchange mass with the wall
  auto sim = sphere_sim(1e-3, WallScheme::SBB);
  double before = sim.total_mass();
  for (int i = 0; i < 30; ++i) {
    sim.step();
    const double after = sim.total_mass();
    EXPECT_NEAR(after - before, sim.last_step().injected_mass, 1e-14 * after);
    before = after;
  }
}

TEST(Engine, PeriodicBoxConservesMass) {
  FlagField flags(GridShape{6, 6, 6});
  auto links = build_wall_links(flags, ChannelWalls{flags.shape, 1, -1.0, 100.0}, WallScheme::SBB);
  Simulation sim(flags, links, CollisionConfig::mrt(0.05), {0, 0.0});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.01, 0.01);
  for (std::size_t c = 0; c < flags.shape.cells(); ++c)
    sim.field().set_cell(c, equilibrium(1.0 + d(rng), {d(rng), d(rng), d(rng)}));
  const double m0 = sim.total_mass();
  for (int i = 0; i < 20; ++i) {
    sim.step();
    EXPECT_NEAR(sim.total_mass(), m0, 1e-13 * m0);
  }
}

TEST(Engine, RestStateHasNoForce) {
  auto sim = sphere_sim(0.0, WallScheme::MR);
  sim.step();
  for (double f : sim.last_step().force) EXPECT_LT(std::abs(f), 1e-14);
}

TEST(Engine, SteadyForceBalancesThePressureDrop) {
  for (auto scheme : {WallScheme::CLI, WallScheme::SBB}) {
    SimulationConfig cfg;
    cfg.geometry = single_sphere_cell(4.5, 0.6);
    cfg.collision = CollisionConfig::trt(0.1, 0.1875);
    cfg.wall_scheme = scheme;
    cfg.drive = {0, 1e-5};
    auto sim = make_simulation(cfg);
    RunControl ctl;
    ctl.window_steps = 200;
    ctl.tolerance = 1e-9;
    ctl.max_steps = 20000;
    const auto res = run(sim, ctl);
    ASSERT_TRUE(res.converged);
    const double n = sim.shape().nx;
    const double expected = 1e-5 * kCs2 * n * n;
    EXPECT_NEAR(res.mean_force[0], expected, 5e-3 * expected) << to_string(scheme);
    // the centred sphere feels no transverse force
    EXPECT_LT(std::abs(res.mean_force[1]), 1e-10 * expected);
    EXPECT_LT(std::abs(res.mean_force[2]), 1e-10 * expected);
  }
}

TEST(Engine, ForceBalanceHoldsForASphereOnTheSeam) {
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell_with_edge(10, 0.6, {5.0, 0.0, 0.0});
  cfg.collision = CollisionConfig::trt(0.1, 0.1875);
  cfg.drive = {0, 1e-5};
  auto sim = make_simulation(cfg);
  RunControl ctl;
  ctl.window_steps = 200;
  ctl.tolerance = 1e-9;
  ctl.max_steps = 20000;
  const auto res = run(sim, ctl);
  ASSERT_TRUE(res.converged);
  const double expected = 1e-5 * kCs2 * 100.0;
  EXPECT_NEAR(res.mean_force[0], expected, 5e-3 * expected);
}

TEST(Engine, DarcyLinearityInTheStokesRegime) {
  auto run_u = [](double drho) {
    auto sim = sphere_sim(drho);
    RunControl ctl;
    ctl.window_steps = 200;
    ctl.tolerance = 1e-9;
    ctl.max_steps = 20000;
    const auto res = run(sim, ctl);
    EXPECT_TRUE(res.converged);
    return res.mean_speed;
  };
  const double u1 = run_u(1e-6), u2 = run_u(2e-6);
  EXPECT_NEAR(u2 / u1, 2.0, 2e-3);
}

TEST(Engine, SingleThreadRunsAreBitIdentical) {
  auto a = sphere_sim(1e-4, WallScheme::QIBB);
  auto b = sphere_sim(1e-4, WallScheme::QIBB);
  a.advance(30);
  b.advance(30);
  EXPECT_EQ(a.field().read_level(), b.field().read_level());
  EXPECT_EQ(a.sample().force, b.sample().force);
}

TEST(Engine, ThreadCountDoesNotChangeResults) {
  auto a = sphere_sim(1e-4);
  auto b = sphere_sim(1e-4);
  b.set_threads(4);
  a.advance(20);
  b.advance(20);
  EXPECT_EQ(a.field().read_level(), b.field().read_level());
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.sample().force[k], b.sample().force[k], 1e-12 * std::abs(a.sample().force[0]));
}

TEST(Engine, CheckpointRoundTrip) {
  auto a = sphere_sim(1e-4, WallScheme::IEBB);
  a.advance(15);
  const auto path = (std::filesystem::temp_directory_path() / "porelbm_ckpt_test.bin").string();
  a.save_checkpoint(path);
  auto b = sphere_sim(1e-4, WallScheme::IEBB);
  b.load_checkpoint(path);
  EXPECT_EQ(b.time_step(), 15u);
  a.advance(10);
  b.advance(10);
  EXPECT_EQ(a.field().read_level(), b.field().read_level());
  auto other = sphere_sim(1e-4, WallScheme::IEBB, CollisionConfig::trt(0.1, 0.1875), 4.0);
  EXPECT_THROW(other.load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
  EXPECT_THROW(b.load_checkpoint(path), std::runtime_error);
}

TEST(Engine, UnstableRunIsReported) {
  // an absurd drive on a tiny sphere drives the flow supersonic
  SimulationConfig cfg;
  cfg.geometry = single_sphere_cell(2.0, 0.1);
  cfg.collision = CollisionConfig::trt(0.005, 0.25);
  cfg.drive = {0, 0.5};
  auto sim = make_simulation(cfg);
  RunControl ctl;
  ctl.max_steps = 5000;
  const auto res = run(sim, ctl);
  EXPECT_TRUE(res.failed);
  EXPECT_NE(res.failure.find("unstable"), std::string::npos);
}

class NoiseDecay : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(NoiseDecay, DensityNoiseDoesNotGrow) {
  const auto [op, nu] = GetParam();
  const CollisionConfig col = op == 0   ? CollisionConfig::srt(nu)
                              : op == 1 ? CollisionConfig::trt(nu, 0.1875)
                                        : CollisionConfig::mrt(nu);
  FlagField flags(GridShape{8, 8, 8});
  auto links = build_wall_links(flags, ChannelWalls{flags.shape, 1, -1.0, 100.0}, WallScheme::SBB);
  Simulation sim(flags, links, col, {0, 0.0});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1e-6, 1e-6);
  for (std::size_t c = 0; c < flags.shape.cells(); ++c) sim.field().set_cell(c, equilibrium(1.0 + d(rng), {0, 0, 0}));
  // acoustic energy of the fluctuation about the conserved mean state
  const double mean = sim.total_mass() / static_cast<double>(flags.shape.cells());
  auto energy = [&] {
    double s = 0.0;
    for (std::size_t c = 0; c < flags.shape.cells(); ++c) {
      const auto m = sim.macro(c);
      s += kCs2 * std::pow(m.rho - mean, 2) + m.u[0] * m.u[0] + m.u[1] * m.u[1] + m.u[2] * m.u[2];
    }
    return std::sqrt(s);
  };
  auto rho_norm = [&] {
    double s = 0.0;
    for (std::size_t c = 0; c < flags.shape.cells(); ++c) s += std::pow(sim.macro(c).rho - mean, 2);
    return std::sqrt(s);
  };
  const double e0 = energy(), r0 = rho_norm();
  double prev = e0;
  for (int block = 0; block < 100; ++block) {
    sim.advance(10);
    const double e = energy();
    // below 1e-5 e0 the field sits on its round-off plateau
    if (prev < 1e-5 * e0) {
      EXPECT_LT(e, 1e-5 * e0) << "after " << (block + 1) * 10 << " steps";
      continue;
    }
    EXPECT_LE(e, prev * (1.0 + 1e-9)) << "after " << (block + 1) * 10 << " steps";
    prev = e;
  }
  EXPECT_LT(rho_norm(), r0);
}

INSTANTIATE_TEST_SUITE_P(Operators, NoiseDecay,
                         ::testing::Combine(::testing::Values(0, 1, 2), ::testing::Values(0.029, 0.45)));

TEST(FlowThroughTime, Examples) {
  EXPECT_DOUBLE_EQ(flow_through_time(32, 0.01), 3200.0);
  EXPECT_DOUBLE_EQ(flow_through_time(32, 0.02), 1600.0);
  EXPECT_DOUBLE_EQ(flow_through_time(10, 0.005), 2.0 * flow_through_time(10, 0.01));
  EXPECT_THROW(flow_through_time(32, 0.0), std::domain_error);
}

TEST(ConvergenceMonitor, FiresOnlyAfterTwoQuietWindows) {
  ConvergenceMonitor m(4, 1e-6);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(m.add(1.0));
  for (int i = 0; i < 3; ++i) EXPECT_FALSE(m.add(1.0));
  EXPECT_TRUE(m.add(1.0));
  ConvergenceMonitor g(2, 1e-6);
  for (int i = 0; i < 20; ++i) g.add(static_cast<double>(i));
  EXPECT_FALSE(g.converged());
  EXPECT_EQ(g.windows_completed(), 10u);
}

TEST(Run, StokesSphereConverges) {
  auto sim = sphere_sim(1e-5);
  RunControl ctl;
  ctl.window_steps = 200;
  ctl.tolerance = 1e-8;
  ctl.max_steps = 20000;
  const auto res = run(sim, ctl);
  EXPECT_TRUE(res.converged);
  EXPECT_FALSE(res.failed);
  EXPECT_LT(res.steps, ctl.max_steps);
  EXPECT_GT(res.mean_speed, 0.0);
  EXPECT_EQ(res.series.size(), res.steps / ctl.cadence);
}
