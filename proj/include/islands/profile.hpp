#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace islands {

class Grid1D {
 public:
  Grid1D(double x_min, double x_max, std::size_t n_cells);

  // Symmetric window [-width/2, width/2].
  static Grid1D centered(double width, std::size_t n_cells);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double length() const { return x_max_ - x_min_; }
  double dx() const { return dx_; }
  std::size_t n_cells() const { return n_cells_; }
  std::size_t n_nodes() const { return n_cells_ + 1; }
  double x(std::size_t i) const { return x_min_ + dx_ * static_cast<double>(i); }

  bool operator==(const Grid1D&) const = default;

 private:
  double x_min_, x_max_;
  std::size_t n_cells_;
  double dx_;
};

enum class SurfaceKind { SmallSlope, LargeSlope, Exact };

struct SurfaceEnergyKind {
  SurfaceKind tag = SurfaceKind::SmallSlope;
  double eps_tv = 0.0;  // LargeSlope smoothing only

  static SurfaceEnergyKind small_slope() { return {SurfaceKind::SmallSlope, 0.0}; }
  static SurfaceEnergyKind large_slope(double eps = 0.0);
  static SurfaceEnergyKind exact() { return {SurfaceKind::Exact, 0.0}; }
};

const char* to_string(SurfaceKind k);
SurfaceKind parse_surface_kind(const std::string& s);

// Nonnegative piecewise-linear height function vanishing at both window ends.
class Profile {
 public:
  Profile(Grid1D grid, std::vector<double> heights);
  Profile() : Profile(Grid1D(0.0, 1.0, 2), std::vector<double>(3, 0.0)) {}

  static Profile zero(const Grid1D& grid);
  // Samples f at the nodes; negative samples and the two end values are set to 0.
  static Profile sample(const Grid1D& grid, const std::function<double(double)>& f);

  const Grid1D& grid() const { return grid_; }
  std::span<const double> heights() const { return h_; }
  const std::vector<double>& values() const { return h_; }
  double operator[](std::size_t i) const { return h_[i]; }
  std::size_t size() const { return h_.size(); }

 private:
  Grid1D grid_;
  std::vector<double> h_;
};

double volume(const Profile& p);
double volume(std::span<const double> h, double dx);
double surface_energy(const Profile& p, SurfaceEnergyKind kind);
double surface_energy(std::span<const double> h, double dx, SurfaceEnergyKind kind);

double sup_norm(const Profile& p);
// (9/16)^{1/3} V^{1/3} S_s^{1/3} - sup h; nonnegative for every H^1 profile.
double interpolation_gap(const Profile& p);

Profile rescale_isotropic(const Profile& p, double lambda);
Profile rescale_anisotropic(const Profile& p, double lambda);

struct PhysicalScaling {
  double volume;
  double energy_factor;
};
PhysicalScaling rescale_physical(double e0, double d);

// Gradient (w.r.t. nodal heights) and tridiagonal Hessian of the discrete surface
// energy.  For LargeSlope with eps_tv == 0 the Hessian vanishes and the gradient
// is a subgradient (sign pattern).
struct SurfaceDerivatives {
  std::vector<double> grad;
  std::vector<double> diag;
  std::vector<double> off;  // off[i] couples i and i+1
};
SurfaceDerivatives surface_derivatives(std::span<const double> h, double dx,
                                       SurfaceEnergyKind kind);

void write_profile_csv(std::ostream& os, const Profile& p);
Profile read_profile_csv(std::istream& is);

}  // namespace islands
