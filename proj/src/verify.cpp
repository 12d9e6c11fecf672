#include "islands/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include <fmt/format.h>

#include "islands/elastic.hpp"
#include "islands/error.hpp"
#include "islands/limits.hpp"
#include "islands/optimizer.hpp"
#include "islands/scaling.hpp"

namespace islands {

std::vector<double> random_bumps(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> h(n, 0.0);
  const int k = 1 + static_cast<int>(u(rng) * 4.0);
  for (int b = 0; b < k; ++b) {
    const double c = 0.15 + 0.7 * u(rng), w = 0.05 + 0.3 * u(rng), a = 0.1 + u(rng);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n - 1);
      h[i] += a * std::max(0.0, 1.0 - std::abs(x - c) / w);
    }
  }
  if (std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; })) h[n / 2] = 1.0;
  return h;
}

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct Suite {
  VerifyOptions opt;
  std::mt19937_64 rng;
  std::optional<MinimizeResult> small, large;

  explicit Suite(const VerifyOptions& o) : opt(o), rng(o.seed) {}

  FlowConfig flow(SurfaceEnergyKind k) const {
    FlowConfig c;
    c.kind = k;
    c.restarts = opt.restarts;
    c.seed = opt.seed;
    c.flip_el_sign = opt.flip_el_sign;
    return c;
  }
  // V = 1e4 small slope at dx = 0.075; the EL residual needs the contact region resolved.
  const MinimizeResult& small_run() {
    if (!small) small = minimize(1e4, flow(SurfaceEnergyKind::small_slope()), Grid1D::centered(120.0, 1600));
    return *small;
  }
  const MinimizeResult& large_run() {
    if (!large) {
      const double V = 1e4;
      large = minimize(V, flow(SurfaceEnergyKind::large_slope()),
                       Grid1D::centered(default_window_width(SurfaceKind::LargeSlope, V),
                                        default_cells(SurfaceKind::LargeSlope, V)));
    }
    return *large;
  }

  CheckResult rescaling() {
    double worst = 0.0, worst_e = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Grid1D g(-3.0, 5.0, 64);
      const Profile p(g, random_bumps(g.n_nodes(), rng));
      const double lam = 0.3 + 3.0 * std::uniform_real_distribution<double>(0, 1)(rng);
      const Profile pi = rescale_isotropic(p, lam), pa = rescale_anisotropic(p, lam);
      const auto ss = SurfaceEnergyKind::small_slope(), tv = SurfaceEnergyKind::large_slope(0.0);
      worst = std::max({worst, rel(volume(pi) * lam * lam, volume(p)),
                        rel(surface_energy(pi, ss) * lam, surface_energy(p, ss)),
                        rel(surface_energy(pi, tv) * lam, surface_energy(p, tv)),
                        rel(volume(pa), volume(p)),
                        rel(surface_energy(pa, ss) / (lam * lam * lam), surface_energy(p, ss)),
                        rel(surface_energy(pa, tv) / lam, surface_energy(p, tv))});
      if (t < 3) {
        MeshControl m;
        m.layers = 8;
        m.h_floor = 1e-9;
        const double e0 = solve_elastic(p, m).energy;
        m.h_floor /= lam;
        worst_e = std::max(worst_e, rel(solve_elastic(pi, m).energy * lam * lam, e0));
      }
    }
    return {"rescaling", worst <= 1e-12 && worst_e <= 1e-8,
            fmt::format("volume/surface identities {:.2e} (<= 1e-12), elastic {:.2e} (<= 1e-8)", worst,
                        worst_e)};
  }

  CheckResult volume_check() {
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      auto h = random_bumps(101, rng);
      std::normal_distribution<double> nd(0.0, 0.2);
      for (std::size_t i = 1; i + 1 < h.size(); ++i) h[i] += nd(rng);
      const double V = 0.5 + 10.0 * std::uniform_real_distribution<double>(0, 1)(rng);
      try {
        worst = std::max(worst, rel(volume(project_volume(h, 0.1, V), 0.1), V));
      } catch (const EmptyFilm&) {
      }
    }
    return {"volume", worst <= 1e-10, fmt::format("projection volume error {:.2e} (<= 1e-10)", worst)};
  }

  CheckResult interpolation() {
    double worst = 1e300;
    for (int t = 0; t < 200; ++t) {
      const Grid1D g(0.0, 1.0, 128);
      worst = std::min(worst, interpolation_gap(Profile(g, random_bumps(g.n_nodes(), rng))));
    }
    // Extremizer (1 - |x|)^2 on a fine grid.
    const Profile ex = Profile::sample(Grid1D(-1.5, 1.5, 30000), [](double x) {
      const double r = std::max(0.0, 1.0 - std::abs(x));
      return r * r;
    });
    const double tight = interpolation_gap(ex);
    return {"interpolation", worst >= 0.0 && std::abs(tight) <= 1e-4,
            fmt::format("min gap {:.3e} (>= 0), extremizer gap {:.2e} (<= 1e-4)", worst, tight)};
  }

  CheckResult el_residual() {
    const auto& r = small_run();
    return {"el-residual", r.el_residual_rel <= 0.05,
            fmt::format("V=1e4 small slope, dx=0.075: relative EL residual {:.4f} (<= 0.05)",
                        r.el_residual_rel)};
  }

  CheckResult balance() {
    const auto& s = small_run();
    const auto& l = large_run();
    const double bs = s.dy_energy / s.breakdown.S, bl = l.dy_energy / l.breakdown.S;
    return {"balance", std::abs(bs - 0.75) <= 0.05 && std::abs(bl - 0.25) <= 0.05,
            fmt::format("dy-energy/S = {:.4f} small (0.75 +- 0.05), {:.4f} large (0.25 +- 0.05)", bs,
                        bl)};
  }

  CheckResult lambda() {
    const double gs = lagrange_identity_gap(small_run()), gl = lagrange_identity_gap(large_run());
    return {"lambda", gs <= 0.05 && gl <= 0.05,
            fmt::format("lambda V = total - S/2 gap {:.4f} small, {:.4f} large (<= 0.05)", gs, gl)};
  }

  CheckResult concavity() {
    FlowConfig c = flow(SurfaceEnergyKind::small_slope());
    const auto vols = logspace(1e2, 1e3, 4);
    const SweepResult s = sweep(c.kind, vols, c);
    const std::size_t conv = static_cast<std::size_t>(std::count(s.converged.begin(), s.converged.end(), 1));
    const double g = concavity_gap(s), b = beta_monotonicity_gap(s);
    return {"concavity", conv == vols.size() && g <= 0.02 && b <= 0.02,
            fmt::format("V in [1e2, 1e3]: {} / {} converged, concavity gap {:.4f}, beta increase {:.4f} "
                        "(<= 0.02)",
                        conv, vols.size(), g, b)};
  }

  CheckResult stability() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double ws = 1e300, wl = 1e300;
    for (int t = 0; t < 1000; ++t) {
      const double L = 0.5 + 3.0 * u(rng), V = 0.1 + 10.0 * u(rng);
      const auto cells = static_cast<std::size_t>(8 + 200 * u(rng));
      {
        const Grid1D g(-L, L, cells);
        auto h = random_bumps(g.n_nodes(), rng);
        if (t % 2) {  // near the equality case: small perturbation of the parabola
          const double amp = std::pow(10.0, -4.0 * u(rng));
          for (std::size_t i = 1; i + 1 < h.size(); ++i)
            h[i] = L * L - g.x(i) * g.x(i) + amp * h[i];
        }
        const double f = V / volume(h, g.dx());
        for (double& v : h) v *= f;
        ws = std::min(ws, stability_gap(g, h, L, V, SurfaceKind::SmallSlope));
      }
      {
        const Grid1D g(0.0, L, cells);
        auto h = random_bumps(g.n_nodes(), rng);
        const double lift = t % 2 ? 1.0 : u(rng);
        if (t % 2)  // near the flat comparator
          for (double& v : h) v *= std::pow(10.0, -4.0 * u(rng));
        for (double& v : h) v += lift;
        const double f = V / volume(h, g.dx());
        for (double& v : h) v *= f;
        wl = std::min(wl, stability_gap(g, h, L, V, SurfaceKind::LargeSlope));
      }
    }
    return {"stability", ws >= -1e-8 && wl >= -1e-8,
            fmt::format("min gap over 1000 inputs: {:.3e} small, {:.3e} large (>= -1e-8)", ws, wl)};
  }
};

}  // namespace

const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names{"rescaling", "volume",  "interpolation", "el-residual",
                                              "balance",   "lambda",  "concavity",     "stability"};
  return names;
}

std::vector<CheckResult> run_verify(const VerifyOptions& opt) {
  const auto& names = verify_check_names();
  for (const auto& n : opt.only)
    if (std::find(names.begin(), names.end(), n) == names.end())
      throw InvalidParameter("verify: unknown check '" + n + "'");
  Suite s(opt);
  const std::vector<std::pair<std::string, std::function<CheckResult()>>> table{
      {"rescaling", [&] { return s.rescaling(); }},
      {"volume", [&] { return s.volume_check(); }},
      {"interpolation", [&] { return s.interpolation(); }},
      {"el-residual", [&] { return s.el_residual(); }},
      {"balance", [&] { return s.balance(); }},
      {"lambda", [&] { return s.lambda(); }},
      {"concavity", [&] { return s.concavity(); }},
      {"stability", [&] { return s.stability(); }},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, fn] : table) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), name) == opt.only.end())
      continue;
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("error: ") + e.what()});
    }
  }
  return out;
}

}  // namespace islands
