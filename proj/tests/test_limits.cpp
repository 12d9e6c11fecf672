#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "islands/error.hpp"
#include "islands/limits.hpp"
#include "islands/verify.hpp"
#include "oracles.hpp"

using namespace islands;

namespace {

const Grid1D kFine = Grid1D::centered(6.0, 12000);

// Random single-component unit-volume profile: (x-a)(b-x) times a positive modulation.
Profile random_island(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = 0.5 + 4.0 * u(rng), a = -0.5 * w, b = 0.5 * w;
  const double c1 = 0.4 * (u(rng) - 0.5), c2 = 0.4 * (u(rng) - 0.5), p = 0.2 + 2.0 * u(rng);
  const Grid1D g = Grid1D::centered(w + 1.0, 1500);
  Profile q = Profile::sample(g, [&](double x) {
    if (x <= a || x >= b) return 0.0;
    const double t = (x - a) / w;
    return std::pow(t * (1.0 - t), p) * (1.0 + c1 * std::cos(2 * oracle::kPi * t) + c2 * std::sin(6 * t));
  });
  return Profile(g, project_volume(q.heights(), g.dx(), 1.0));
}

MinimizeResult solve(double V, SurfaceEnergyKind k, std::size_t restarts = 2) {
  FlowConfig c;
  c.kind = k;
  c.restarts = restarts;
  return minimize(V, c, Grid1D::centered(default_window_width(k.tag, V), default_cells(k.tag, V)));
}

}  // namespace

TEST_CASE("limit minimizers from the oracle constant") {
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  CHECK(p.ell == doctest::Approx(oracle::ell).epsilon(1e-12));
  CHECK(p.ell == doctest::Approx(1.1569).epsilon(1e-3));
  CHECK(p.energy == doctest::Approx(3.75 / std::pow(p.ell, 3)));
  const LimitShape r = limit_minimizer(LimitKind::Rectangle, oracle::C_W);
  CHECK(r.ell == doctest::Approx(1.9459).epsilon(1e-3));
  CHECK(r.energy == doctest::Approx(std::pow(2.0, 5.0 / 3.0) * std::cbrt(oracle::C_W)).epsilon(1e-12));
  CHECK(r.energy == doctest::Approx(2.055).epsilon(1e-3));
  CHECK(limit_minimizer(LimitKind::Parabola, 9.0 / 16.0).ell == 1.0);
  CHECK_THROWS_AS(limit_minimizer(LimitKind::Parabola, 0.0), InvalidParameter);
  CHECK_THROWS_AS(limit_minimizer(LimitKind::Rectangle, -1.0), InvalidParameter);

  const auto j = nlohmann::json::parse(limit_shape_json(p));
  CHECK(j["kind"] == "parabola");
  CHECK(j["ell"].get<double>() == p.ell);
}

TEST_CASE("reduced energy of the sampled limit shapes") {
  const auto ss = SurfaceEnergyKind::small_slope(), tv = SurfaceEnergyKind::large_slope(0.0);
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  CHECK(reduced_energy(p.sample(kFine), oracle::C_W, ss) == doctest::Approx(p.energy).epsilon(2e-3));
  const LimitShape r = limit_minimizer(LimitKind::Rectangle, oracle::C_W);
  CHECK(reduced_energy(r.sample(kFine), oracle::C_W, tv) == doctest::Approx(r.energy).epsilon(2e-3));

  // Two half-volume parabolas far apart cost more than one.
  const Grid1D g = Grid1D::centered(12.0, 12000);
  const double l = p.ell * std::pow(0.5, 0.2);
  Profile two = Profile::sample(g, [&](double x) {
    auto half = [&](double y) { return 0.5 * 0.75 / (l * l * l) * std::max(0.0, l * l - y * y); };
    return half(x - 3.0) + half(x + 3.0);
  });
  two = Profile(g, project_volume(two.heights(), g.dx(), 1.0));
  CHECK(reduced_energy(p.sample(g), oracle::C_W, ss) < reduced_energy(two, oracle::C_W, ss));

  CHECK_THROWS_AS(reduced_energy(Profile::sample(g, [](double x) { return std::abs(x) < 1 ? 2.0 : 0.0; }),
                                 oracle::C_W, ss),
                  InvalidInput);
}

TEST_CASE("parabola solves the limit Euler-Lagrange equation") {
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  const double lam = 1.5 / std::pow(p.ell, 3);
  const double dx = 1e-3;
  for (double x = -0.9 * p.ell; x < 0.9 * p.ell; x += 0.1) {
    const double d2 = (p(x + dx) - 2 * p(x) + p(x - dx)) / (dx * dx);
    CHECK(d2 == doctest::Approx(-lam).epsilon(1e-6));
  }
}

TEST_CASE("global minimality spot check") {
  std::mt19937_64 rng(17);
  const auto ss = SurfaceEnergyKind::small_slope(), tv = SurfaceEnergyKind::large_slope(0.0);
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  const double gp = reduced_energy(p.sample(kFine), oracle::C_W, ss);
  const double g_rect_best = 3.0 * std::cbrt(oracle::C_W);  // rectangle of base C_W^{-1/3}
  double min_small = 1e300, min_large = 1e300;
  for (int t = 0; t < 500; ++t) {
    const Profile q = random_island(rng);
    min_small = std::min(min_small, reduced_energy(q, oracle::C_W, ss));
    min_large = std::min(min_large, reduced_energy(q, oracle::C_W, tv));
  }
  CHECK(gp <= min_small);
  CHECK(g_rect_best <= min_large + 1e-9);
  // The rectangle of the closed-form base is not the cheapest rectangle.
  LimitShape r = limit_minimizer(LimitKind::Rectangle, oracle::C_W);
  LimitShape r2 = r;
  r2.ell = std::cbrt(1.0 / oracle::C_W);
  CHECK(reduced_energy(r2.sample(kFine), oracle::C_W, tv) < reduced_energy(r.sample(kFine), oracle::C_W, tv));
}

TEST_CASE("stability gaps") {
  const double L = 1.7, V = 2.3;
  // Small slope: grid [-L, L], parabola comparator.
  const Grid1D gs(-L, L, 4000);
  Profile hmin = Profile::sample(gs, [&](double x) { return 0.75 * V / (L * L * L) * (L * L - x * x); });
  hmin = Profile(gs, project_volume(hmin.heights(), gs.dx(), V));
  const double g0 = stability_gap(hmin, L, V, SurfaceKind::SmallSlope);
  CHECK(g0 >= -1e-8);
  CHECK(g0 <= 1e-5);

  std::vector<double> bump(hmin.values());
  for (std::size_t i = 0; i < bump.size(); ++i) {
    const double x = gs.x(i);
    bump[i] += 0.05 * std::sin(oracle::kPi * x / L) * (L * L - x * x);  // odd: volume neutral
  }
  CHECK(stability_gap(gs, bump, L, V, SurfaceKind::SmallSlope) >= 0.0);

  // Large slope: grid [0, L], the flat comparator itself gives 0.
  const Grid1D gl(0.0, L, 50);
  const std::vector<double> flat(gl.n_nodes(), V / L);
  CHECK(std::abs(stability_gap(gl, flat, L, V, SurfaceKind::LargeSlope)) <= 1e-12);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double ws = 1e300, wl = 1e300;
  for (int t = 0; t < 1000; ++t) {
    const double Lr = 0.3 + 3.0 * u(rng), Vr = 0.1 + 5.0 * u(rng);
    const auto cells = static_cast<std::size_t>(4 + 300 * u(rng));
    const Grid1D a(-Lr, Lr, cells), b(0.0, Lr, cells);
    auto h = random_bumps(a.n_nodes(), rng);
    double f = Vr / volume(h, a.dx());
    for (double& v : h) v *= f;
    ws = std::min(ws, stability_gap(a, h, Lr, Vr, SurfaceKind::SmallSlope));
    auto k = random_bumps(b.n_nodes(), rng);
    const double lift = u(rng);
    for (double& v : k) v += lift;
    f = Vr / volume(k, b.dx());
    for (double& v : k) v *= f;
    wl = std::min(wl, stability_gap(b, k, Lr, Vr, SurfaceKind::LargeSlope));
  }
  CHECK(ws >= -1e-8);
  CHECK(wl >= -1e-8);

  // Constraint violations.
  CHECK_THROWS_AS(stability_gap(hmin, L, 2.0 * V, SurfaceKind::SmallSlope), InvalidInput);
  CHECK_THROWS_AS(stability_gap(hmin, 2.0 * L, V, SurfaceKind::SmallSlope), InvalidInput);
  CHECK_THROWS_AS(stability_gap(gl, flat, L, V, SurfaceKind::SmallSlope), InvalidInput);
  CHECK_THROWS_AS(stability_gap(gs, hmin.values(), L, V, SurfaceKind::LargeSlope), InvalidInput);
}

TEST_CASE("constrained comparator") {
  // Exact parabola above the level: distance vanishes.
  const Grid1D g = Grid1D::centered(4.0, 4000);
  const Profile par = Profile::sample(g, [](double x) { return std::max(0.0, 0.6 * (1.0 - x * x)); });
  const auto d = constrained_distance(par, SurfaceKind::SmallSlope, 0.0);
  CHECK(d.a == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(d.b == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d.distance <= 1e-6);

  // Flat top: large-slope comparator is the plateau itself, up to the
  // one-cell ramps of the sampled box.
  const Profile box = Profile::sample(g, [](double x) { return std::abs(x) < 1.0 ? 0.8 : 0.0; });
  const double db = constrained_distance(box, SurfaceKind::LargeSlope).distance;
  CHECK(db <= 2.0 * g.dx());
  const Grid1D g2 = Grid1D::centered(4.0, 8000);
  const Profile box2 = Profile::sample(g2, [](double x) { return std::abs(x) < 1.0 ? 0.8 : 0.0; });
  CHECK(constrained_distance(box2, SurfaceKind::LargeSlope).distance < 0.6 * db);

  // Largest component is selected.
  const Profile twin = Profile::sample(g, [](double x) {
    return std::max(0.0, 1.0 - 4.0 * (x - 1.2) * (x - 1.2)) + std::max(0.0, 1.0 - (x + 0.5) * (x + 0.5));
  });
  const auto t = constrained_distance(twin, SurfaceKind::SmallSlope);
  CHECK(t.b < 0.6);
  CHECK_THROWS_AS(constrained_distance(Profile::zero(g), SurfaceKind::SmallSlope), NotApplicable);
}

TEST_CASE("aligned distance") {
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  const Grid1D g(-2.0, 4.0, 6000);
  // Shifted copy: alignment removes the translation.
  const Profile shifted = Profile::sample(g, [&](double x) { return p(x - 0.7); });
  CHECK(center_of_mass(shifted) == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(aligned_distance(shifted, p, SurfaceKind::SmallSlope) <= 1e-5);
  const LimitShape r = limit_minimizer(LimitKind::Rectangle, oracle::C_W);
  LimitShape other = r;
  other.ell = 1.5;
  // L1 distance of two centred rectangles of unit mass and bases b1 < b2: 2 (1 - b1/b2).
  const Profile rs = other.sample(Grid1D::centered(5.0, 50000));
  CHECK(aligned_distance(rs, r, SurfaceKind::LargeSlope) ==
        doctest::Approx(2.0 * (1.0 - 1.5 / r.ell)).epsilon(2e-3));
}

TEST_CASE("decay fit") {
  ConvergenceRecord rec;
  for (double a : {2.0, 3.0, 4.0, 5.0}) {
    rec.abscissae.push_back(a);
    rec.distances.push_back(0.3 * std::exp(-0.7 * a));
    rec.volumes.push_back(std::pow(a, 5));
    rec.global_distances.push_back(0.0);
  }
  const DecayFit f = decay_fit(rec);
  CHECK(f.C0 == doctest::Approx(0.3));
  CHECK(f.C1 == doctest::Approx(0.7));
  CHECK(f.monotone);
  CHECK(f.quality_ok);

  ConvergenceRecord flat = rec;
  flat.distances.assign(4, 0.01);
  const DecayFit g = decay_fit(flat);
  CHECK(std::abs(g.C1) <= 1e-12);
  CHECK_FALSE(g.quality_ok);

  ConvergenceRecord few = rec;
  few.distances.pop_back();
  few.abscissae.pop_back();
  CHECK_THROWS_AS(decay_fit(few), InvalidInput);

  std::ostringstream os;
  write_convergence_csv(os, rec);
  CHECK(os.str().rfind("V,distance_constrained,distance_global,rate_abscissa\n", 0) == 0);
}

TEST_CASE("rescaled minimizers") {
  const MinimizeResult r = solve(1e4, SurfaceEnergyKind::small_slope());
  const Profile ht = rescaled_profile(r, SurfaceKind::SmallSlope);
  CHECK(std::abs(volume(ht) - 1.0) <= 1e-6);
  CHECK(rescaled_energy(r, SurfaceKind::SmallSlope) ==
        doctest::Approx(std::pow(1e4, -0.8) * r.breakdown.total).epsilon(1e-12));
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  CHECK(aligned_distance(ht, p, SurfaceKind::SmallSlope) <= 0.15);

  CHECK_THROWS_AS(rescaled_profile(solve(1.0, SurfaceEnergyKind::small_slope(), 1), SurfaceKind::SmallSlope),
                  NotApplicable);
}

TEST_CASE("distance to the limit decreases with volume") {
  std::vector<MinimizeResult> rs;
  for (double e : {3.0, 3.5, 4.0, 4.5}) rs.push_back(solve(std::pow(10.0, e), SurfaceEnergyKind::small_slope()));
  const LimitShape p = limit_minimizer(LimitKind::Parabola, oracle::C_W);
  const ConvergenceRecord rec = convergence_record(rs, SurfaceKind::SmallSlope, p);
  for (std::size_t i = 1; i < rec.volumes.size(); ++i) {
    CHECK(rec.global_distances[i] < rec.global_distances[i - 1]);
    CHECK(rec.abscissae[i] == doctest::Approx(std::pow(rec.volumes[i], 0.2)));
  }
  const DecayFit f = decay_fit(rec);
  CHECK(f.C1 > 0.0);
  CHECK(f.monotone);
}
