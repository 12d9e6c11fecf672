#include "islands/profile.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "islands/error.hpp"

namespace islands {

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_cells)
    : x_min_(x_min), x_max_(x_max), n_cells_(n_cells) {
  if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw InvalidParameter("Grid1D: need finite x_min < x_max");
  if (n_cells < 2) throw InvalidParameter("Grid1D: need at least 2 cells");
  dx_ = (x_max - x_min) / static_cast<double>(n_cells);
}

Grid1D Grid1D::centered(double width, std::size_t n_cells) {
  return Grid1D(-0.5 * width, 0.5 * width, n_cells);
}

SurfaceEnergyKind SurfaceEnergyKind::large_slope(double eps) {
  if (!(eps >= 0.0)) throw InvalidParameter("eps_tv must be >= 0");
  return {SurfaceKind::LargeSlope, eps};
}

const char* to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::SmallSlope: return "small-slope";
    case SurfaceKind::LargeSlope: return "large-slope";
    case SurfaceKind::Exact: return "exact";
  }
  return "?";
}

SurfaceKind parse_surface_kind(const std::string& s) {
  if (s == "small-slope" || s == "small") return SurfaceKind::SmallSlope;
  if (s == "large-slope" || s == "large") return SurfaceKind::LargeSlope;
  if (s == "exact") return SurfaceKind::Exact;
  throw InvalidParameter("unknown surface kind '" + s + "'");
}

Profile::Profile(Grid1D grid, std::vector<double> heights)
    : grid_(grid), h_(std::move(heights)) {
  if (h_.size() != grid_.n_nodes())
    throw InvalidInput("Profile: height count does not match grid");
  for (double v : h_)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidInput("Profile: heights must be finite and nonnegative");
  if (h_.front() != 0.0 || h_.back() != 0.0)
    throw InvalidInput("Profile: heights must vanish at the window ends");
}

Profile Profile::zero(const Grid1D& grid) {
  return Profile(grid, std::vector<double>(grid.n_nodes(), 0.0));
}

Profile Profile::sample(const Grid1D& grid, const std::function<double(double)>& f) {
  std::vector<double> h(grid.n_nodes());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, f(grid.x(i)));
  h.front() = h.back() = 0.0;
  return Profile(grid, std::move(h));
}

double volume(std::span<const double> h, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) s += h[i] + h[i + 1];
  return 0.5 * dx * s;
}

double volume(const Profile& p) { return volume(p.heights(), p.grid().dx()); }

double surface_energy(std::span<const double> h, double dx, SurfaceEnergyKind kind) {
  double s = 0.0;
  const std::size_t n = h.size();
  switch (kind.tag) {
    case SurfaceKind::SmallSlope:
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = h[i + 1] - h[i];
        s += d * d;
      }
      return s / dx;
    case SurfaceKind::LargeSlope:
      if (kind.eps_tv == 0.0) {
        for (std::size_t i = 0; i + 1 < n; ++i) s += std::abs(h[i + 1] - h[i]);
        return s;
      } else {
        const double e2 = kind.eps_tv * kind.eps_tv * dx * dx;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double d = h[i + 1] - h[i];
          // sqrt(d^2+e^2)-e, written to avoid cancellation for small d
          s += d * d / (std::sqrt(d * d + e2) + kind.eps_tv * dx);
        }
        return std::max(0.0, s);
      }
    case SurfaceKind::Exact:
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = h[i + 1] - h[i];
        s += d * d / (std::sqrt(dx * dx + d * d) + dx);
      }
      return s;
  }
  return s;
}

double surface_energy(const Profile& p, SurfaceEnergyKind kind) {
  return surface_energy(p.heights(), p.grid().dx(), kind);
}

double sup_norm(const Profile& p) {
  const auto h = p.heights();
  return *std::max_element(h.begin(), h.end());
}

double interpolation_gap(const Profile& p) {
  const double v = volume(p);
  const double s = surface_energy(p, SurfaceEnergyKind::small_slope());
  if (!(v > 0.0) || !(s > 0.0))
    throw UndefinedGap("interpolation_gap: profile has zero volume or zero slope energy");
  return std::cbrt(9.0 / 16.0 * v * s) - sup_norm(p);
}

Profile rescale_isotropic(const Profile& p, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidParameter("rescale_isotropic: lambda must be positive");
  const Grid1D& g = p.grid();
  Grid1D ng(g.x_min() / lambda, g.x_max() / lambda, g.n_cells());
  std::vector<double> h(p.values());
  for (double& v : h) v /= lambda;
  return Profile(ng, std::move(h));
}

Profile rescale_anisotropic(const Profile& p, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidParameter("rescale_anisotropic: lambda must be positive");
  const Grid1D& g = p.grid();
  Grid1D ng(g.x_min() / lambda, g.x_max() / lambda, g.n_cells());
  std::vector<double> h(p.values());
  for (double& v : h) v *= lambda;
  return Profile(ng, std::move(h));
}

PhysicalScaling rescale_physical(double e0, double d) {
  if (!(e0 > 0.0) || !(d > 0.0))
    throw InvalidParameter("rescale_physical: e0 and d must be positive");
  const double e2 = e0 * e0;
  return {e2 * e2 * d, 1.0 / e2};
}

SurfaceDerivatives surface_derivatives(std::span<const double> h, double dx,
                                       SurfaceEnergyKind kind) {
  const std::size_t n = h.size();
  SurfaceDerivatives out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                         std::vector<double>(n > 0 ? n - 1 : 0, 0.0)};
  // Every variant is a sum of per-cell terms phi(d_c), d_c = h[c+1]-h[c].
  for (std::size_t c = 0; c + 1 < n; ++c) {
    const double d = h[c + 1] - h[c];
    double dphi = 0.0, d2phi = 0.0;
    switch (kind.tag) {
      case SurfaceKind::SmallSlope:
        dphi = 2.0 * d / dx;
        d2phi = 2.0 / dx;
        break;
      case SurfaceKind::LargeSlope:
        if (kind.eps_tv == 0.0) {
          dphi = (d > 0) - (d < 0);
        } else {
          const double e2 = kind.eps_tv * kind.eps_tv * dx * dx;
          const double r = std::sqrt(d * d + e2);
          dphi = d / r;
          d2phi = e2 / (r * r * r);
        }
        break;
      case SurfaceKind::Exact: {
        const double r = std::sqrt(d * d + dx * dx);
        dphi = d / r;
        d2phi = dx * dx / (r * r * r);
        break;
      }
    }
    out.grad[c + 1] += dphi;
    out.grad[c] -= dphi;
    out.diag[c] += d2phi;
    out.diag[c + 1] += d2phi;
    out.off[c] -= d2phi;
  }
  return out;
}

void write_profile_csv(std::ostream& os, const Profile& p) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "x,h\n";
  for (std::size_t i = 0; i < p.size(); ++i) os << p.grid().x(i) << ',' << p[i] << '\n';
  os.precision(old);
}

Profile read_profile_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("profile csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,h") throw InvalidInput("profile csv: expected header 'x,h'");
  std::vector<double> xs, hs;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    double x, h;
    char comma;
    if (!(ls >> x >> comma >> h) || comma != ',')
      throw InvalidInput("profile csv: malformed row '" + line + "'");
    xs.push_back(x);
    hs.push_back(h);
  }
  if (xs.size() < 3) throw InvalidInput("profile csv: need at least 3 nodes");
  Grid1D g(xs.front(), xs.back(), xs.size() - 1);
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::abs(xs[i] - g.x(i)) > 1e-9 * std::max(1.0, g.length()))
      throw InvalidInput("profile csv: nodes are not uniformly spaced");
  return Profile(g, std::move(hs));
}

}  // namespace islands
