#include "islands/limits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "islands/error.hpp"

namespace islands {

namespace {

// 4-point Gauss-Legendre on [a, b]; exact through degree 7.
template <class F>
double gauss(double a, double b, F&& f) {
  static constexpr std::array<double, 4> x{-0.8611363115940526, -0.3399810435848563,
                                           0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> w{0.3478548451374538, 0.6521451548625461,
                                           0.6521451548625461, 0.3478548451374538};
  const double m = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += w[k] * f(m + r * x[k]);
  return r * s;
}

// Exact int_0^len |p + (q - p) t / len| dt.
double abs_linear(double p, double q, double len) {
  if (p * q >= 0.0) return 0.5 * len * (std::abs(p) + std::abs(q));
  const double t = p / (p - q);
  return 0.5 * len * (t * std::abs(p) + (1.0 - t) * std::abs(q));
}

// Piecewise-linear evaluation, zero outside the grid.
double interp(const Grid1D& g, std::span<const double> h, double x) {
  if (x <= g.x_min() || x >= g.x_max()) return 0.0;
  const double u = (x - g.x_min()) / g.dx();
  const auto i = std::min(static_cast<std::size_t>(u), g.n_cells() - 1);
  const double t = u - static_cast<double>(i);
  return (1.0 - t) * h[i] + t * h[i + 1];
}

void check_volume(double v, double V, const char* who) {
  if (!(std::abs(v - V) <= 1e-9 * std::max(1.0, std::abs(V))))
    throw InvalidInput(std::string(who) + ": volume constraint violated");
}

}  // namespace

const char* to_string(LimitKind k) { return k == LimitKind::Parabola ? "parabola" : "rectangle"; }

double LimitShape::operator()(double x) const {
  if (kind == LimitKind::Parabola) {
    const double l3 = ell * ell * ell;
    return std::abs(x) < ell ? 0.75 / l3 * (ell * ell - x * x) : 0.0;
  }
  return std::abs(x) < 0.5 * ell ? 1.0 / ell : 0.0;
}

Profile LimitShape::sample(const Grid1D& grid) const {
  Profile p = Profile::sample(grid, [this](double x) { return (*this)(x); });
  return Profile(grid, project_volume(p.heights(), grid.dx(), 1.0));
}

LimitShape limit_minimizer(LimitKind kind, double C_W) {
  if (!(C_W > 0.0) || !std::isfinite(C_W)) throw InvalidParameter("limit_minimizer: C_W must be positive");
  LimitShape s;
  s.kind = kind;
  s.C_W = C_W;
  if (kind == LimitKind::Parabola) {
    s.ell = std::pow(9.0 / (16.0 * C_W), 0.2);
    s.energy = 3.75 / (s.ell * s.ell * s.ell);
  } else {
    s.ell = std::cbrt(2.0 / C_W);
    s.energy = std::pow(2.0, 5.0 / 3.0) * std::cbrt(C_W);
  }
  return s;
}

double reduced_energy(const Profile& p, double C_W, SurfaceEnergyKind kind, double h_floor) {
  check_volume(volume(p), 1.0, "reduced_energy");
  const auto h = p.heights();
  const double dx = p.grid().dx();
  double sum = 0.0, run = 0.0;
  for (std::size_t c = 0; c + 1 < h.size(); ++c) {
    if (h[c] > h_floor || h[c + 1] > h_floor) {
      run += dx;
    } else {
      sum += run * run;
      run = 0.0;
    }
  }
  sum += run * run;
  return C_W * sum + surface_energy(p, kind);
}

Profile rescaled_profile(const MinimizeResult& res, SurfaceKind kind) {
  if (res.wetting) throw NotApplicable("rescaled_profile: wetting-regime minimizer");
  const double V = res.breakdown.V;
  if (!(V > 0.0)) throw InvalidInput("rescaled_profile: empty profile");
  const bool large = kind == SurfaceKind::LargeSlope;
  const double len = large ? std::cbrt(V) : std::pow(V, 0.4);  // horizontal
  const double hgt = large ? std::pow(V, 2.0 / 3.0) : std::pow(V, 0.6);  // vertical
  const Grid1D& g = res.profile.grid();
  Grid1D ng(g.x_min() / len, g.x_max() / len, g.n_cells());
  std::vector<double> h(res.profile.values());
  for (double& v : h) v /= hgt;
  return Profile(ng, std::move(h));
}

double rescaled_energy(const MinimizeResult& res, SurfaceKind kind) {
  const Profile ht = rescaled_profile(res, kind);
  const double V = res.breakdown.V;
  const bool large = kind == SurfaceKind::LargeSlope;
  const double f = large ? std::pow(V, -2.0 / 3.0) : std::pow(V, -0.8);
  const SurfaceEnergyKind sk = large ? SurfaceEnergyKind::large_slope(0.0) : SurfaceEnergyKind{kind};
  return f * res.breakdown.E + surface_energy(ht, sk);
}

double stability_gap(const Grid1D& grid, std::span<const double> h, double L, double V,
                     SurfaceKind kind) {
  if (!(L > 0.0) || !(V > 0.0)) throw InvalidInput("stability_gap: L and V must be positive");
  if (h.size() != grid.n_nodes()) throw InvalidInput("stability_gap: size mismatch");
  for (double v : h)
    if (!(v >= 0.0)) throw InvalidInput("stability_gap: heights must be nonnegative");
  const double tol = 1e-12 * L;
  const double dx = grid.dx();
  const std::size_t n = h.size();
  check_volume(volume(h, dx), V, "stability_gap");

  if (kind == SurfaceKind::LargeSlope) {
    if (std::abs(grid.x_min()) > tol || std::abs(grid.x_max() - L) > tol)
      throw InvalidInput("stability_gap: grid must be [0, L]");
    double tv = h.front() + h.back();
    for (std::size_t i = 0; i + 1 < n; ++i) tv += std::abs(h[i + 1] - h[i]);
    const double c = V / L;
    double dist = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) dist += abs_linear(h[i] - c, h[i + 1] - c, dx);
    return tv - 2.0 * c - dist / L;
  }
  if (kind != SurfaceKind::SmallSlope) throw InvalidParameter("stability_gap: small or large slope only");
  if (std::abs(grid.x_min() + L) > tol || std::abs(grid.x_max() - L) > tol)
    throw InvalidInput("stability_gap: grid must be [-L, L]");
  if (h.front() != 0.0 || h.back() != 0.0) throw InvalidInput("stability_gap: h(+-L) must vanish");
  const double a = 0.75 * V / (L * L * L);
  auto hmin = [&](double x) { return a * (L * L - x * x); };
  double dist = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double x0 = grid.x(i), x1 = grid.x(i + 1);
    dist += gauss(x0, x1, [&](double x) {
      const double t = (x - x0) / dx;
      const double d = (1.0 - t) * h[i] + t * h[i + 1] - hmin(x);
      return d * d;
    });
  }
  const double s = surface_energy(h, dx, SurfaceEnergyKind::small_slope());
  return s - 1.5 * V * V / (L * L * L) - dist / (4.0 * L * L);
}

double stability_gap(const Profile& p, double L, double V, SurfaceKind kind) {
  return stability_gap(p.grid(), p.heights(), L, V, kind);
}

double center_of_mass(const Profile& p) {
  const auto h = p.heights();
  const auto& g = p.grid();
  double m = 0.0, mx = 0.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    const double x0 = g.x(i), x1 = g.x(i + 1);
    m += 0.5 * g.dx() * (h[i] + h[i + 1]);
    mx += g.dx() / 6.0 * (h[i] * (2.0 * x0 + x1) + h[i + 1] * (x0 + 2.0 * x1));
  }
  if (!(m > 0.0)) throw InvalidInput("center_of_mass: empty profile");
  return mx / m;
}

ComparatorDistance constrained_distance(const Profile& ht, SurfaceKind kind, double s) {
  const auto h = ht.heights();
  const auto& g = ht.grid();
  const std::size_t n = h.size();
  // Largest run of nodes above s.
  std::size_t best_lo = 0, best_hi = 0, lo = 0;
  bool inside = false, found = false;
  double best_len = -1.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const bool above = i < n && h[i] > s;
    if (above && !inside) lo = i;
    if (!above && inside) {
      const double len = g.x(i - 1) - g.x(lo);
      if (len > best_len) {
        best_len = len;
        best_lo = lo;
        best_hi = i - 1;
        found = true;
      }
    }
    inside = above;
  }
  if (!found) throw NotApplicable("constrained_distance: level set is empty");

  // Crossing points (ends are zero, so both neighbours exist and lie at or below s).
  ComparatorDistance out;
  const std::size_t il = best_lo - 1, ir = best_hi + 1;
  out.a = g.x(il) + g.dx() * (s - h[il]) / (h[best_lo] - h[il]);
  out.b = g.x(best_hi) + g.dx() * (h[best_hi] - s) / (h[best_hi] - h[ir]);

  // Pieces: [a, x_lo], grid cells inside, [x_hi, b].
  std::vector<double> xs{out.a};
  for (std::size_t i = best_lo; i <= best_hi; ++i) xs.push_back(g.x(i));
  xs.push_back(out.b);
  auto f = [&](double x) { return interp(g, h, x) - s; };
  for (std::size_t k = 0; k + 1 < xs.size(); ++k)
    out.mass += 0.5 * (xs[k + 1] - xs[k]) * (f(xs[k]) + f(xs[k + 1]));

  const double w = out.b - out.a;
  if (kind == SurfaceKind::LargeSlope) {
    const double c = out.mass / w;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k)
      out.distance += abs_linear(f(xs[k]) - c, f(xs[k + 1]) - c, xs[k + 1] - xs[k]);
    return out;
  }
  const double q = 6.0 * out.mass / (w * w * w);
  double d2 = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double x0 = xs[k], x1 = xs[k + 1], f0 = f(x0), f1 = f(x1);
    d2 += gauss(x0, x1, [&](double x) {
      const double t = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
      const double d = (1.0 - t) * f0 + t * f1 - q * (x - out.a) * (out.b - x);
      return d * d;
    });
  }
  out.distance = std::sqrt(d2);
  return out;
}

double aligned_distance(const Profile& ht, const LimitShape& shape, SurfaceKind kind) {
  const auto& g = ht.grid();
  const auto h = ht.heights();
  const double xc = center_of_mass(ht);
  // Breakpoints in the aligned frame: shifted grid nodes and the shape's kinks.
  std::vector<double> xs;
  for (std::size_t i = 0; i < g.n_nodes(); ++i) xs.push_back(g.x(i) - xc);
  const double r = shape.half_support();
  xs.push_back(-r);
  xs.push_back(r);
  std::sort(xs.begin(), xs.end());
  const bool l1 = kind == SurfaceKind::LargeSlope;
  auto diff = [&](double x) { return interp(g, h, x + xc) - shape(x); };
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double x0 = xs[k], x1 = xs[k + 1];
    if (!(x1 > x0)) continue;
    if (l1 && shape.kind == LimitKind::Rectangle) {
      // Both sides linear on the piece.
      const double e = 1e-12 * (x1 - x0);
      acc += abs_linear(diff(x0 + e), diff(x1 - e), x1 - x0);
      continue;
    }
    // Smooth integrand (or |smooth|): subdivide for the L^1 kink.
    const int sub = l1 ? 8 : 1;
    for (int j = 0; j < sub; ++j) {
      const double a = x0 + (x1 - x0) * j / sub, b = x0 + (x1 - x0) * (j + 1) / sub;
      acc += gauss(a, b, [&](double x) {
        const double d = diff(x);
        return l1 ? std::abs(d) : d * d;
      });
    }
  }
  return l1 ? acc : std::sqrt(acc);
}

ConvergenceRecord convergence_record(std::span<const MinimizeResult> results, SurfaceKind kind,
                                     const LimitShape& shape, double s) {
  ConvergenceRecord rec;
  rec.kind = kind;
  for (const auto& r : results) {
    const Profile ht = rescaled_profile(r, kind);
    const double V = r.breakdown.V;
    rec.volumes.push_back(V);
    rec.distances.push_back(constrained_distance(ht, kind, s).distance);
    rec.global_distances.push_back(aligned_distance(ht, shape, kind));
    rec.abscissae.push_back(kind == SurfaceKind::LargeSlope ? std::cbrt(V) : std::pow(V, 0.2));
  }
  return rec;
}

DecayFit decay_fit(const ConvergenceRecord& rec) {
  const std::size_t n = rec.distances.size();
  if (n < 4 || rec.abscissae.size() != n) throw InvalidInput("decay_fit: need >= 4 volumes");
  double ma = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rec.distances[i] > 0.0)) throw InvalidInput("decay_fit: distances must be positive");
    ma += rec.abscissae[i] / static_cast<double>(n);
    ml += std::log(rec.distances[i]) / static_cast<double>(n);
  }
  double saa = 0.0, sal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (rec.abscissae[i] - ma) * (rec.abscissae[i] - ma);
    sal += (rec.abscissae[i] - ma) * (std::log(rec.distances[i]) - ml);
  }
  if (!(saa > 0.0)) throw InvalidInput("decay_fit: abscissae coincide");
  DecayFit f;
  const double slope = sal / saa;
  f.C1 = -slope;
  f.C0 = std::exp(ml - slope * ma);
  f.monotone = true;
  for (std::size_t i = 1; i < n; ++i)
    if (!(rec.distances[i] < rec.distances[i - 1])) f.monotone = false;
  // "Clearly positive": the fit removes at least 1% of log-distance per unit abscissa.
  f.quality_ok = f.monotone && f.C1 > 1e-2;
  return f;
}

void write_convergence_csv(std::ostream& os, const ConvergenceRecord& rec) {
  os << "V,distance_constrained,distance_global,rate_abscissa\n";
  os.precision(17);
  for (std::size_t i = 0; i < rec.volumes.size(); ++i)
    os << rec.volumes[i] << ',' << rec.distances[i] << ',' << rec.global_distances[i] << ','
       << rec.abscissae[i] << '\n';
}

std::string limit_shape_json(const LimitShape& shape) {
  nlohmann::json j{{"kind", to_string(shape.kind)},
                   {"ell", shape.ell},
                   {"C_W", shape.C_W},
                   {"energy", shape.energy}};
  return j.dump(2);
}

}  // namespace islands
