#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "islands/optimizer.hpp"
#include "islands/profile.hpp"

namespace islands {

enum class LimitKind { Parabola, Rectangle };
const char* to_string(LimitKind k);

// Unit-volume limit shape.  Parabola: (3/4) l^{-3} (l^2 - x^2)_+, l the half-width.
// Rectangle: height 1/l on [-l/2, l/2], l the base.
struct LimitShape {
  LimitKind kind = LimitKind::Parabola;
  double ell = 1.0;
  double C_W = 0.0;
  double energy = 0.0;  // closed-form value of the reduced functional

  double operator()(double x) const;
  double half_support() const { return kind == LimitKind::Parabola ? ell : 0.5 * ell; }
  // Nodal samples rescaled to unit trapezoid volume.
  Profile sample(const Grid1D& grid) const;
};

// Parabola: l = (9 / (16 C_W))^{1/5}, energy 4 C_W l^2 + (3/2) l^{-3} = 3.75 l^{-3}.
// Rectangle: base 2^{1/3} C_W^{-1/3}, energy C_W b^2 + 2/b = 2^{5/3} C_W^{1/3}.
LimitShape limit_minimizer(LimitKind kind, double C_W);

// C_W * sum of squared component lengths of {h > h_floor} plus the surface
// energy; a component spans every cell with a positive end.
double reduced_energy(const Profile& p, double C_W, SurfaceEnergyKind kind, double h_floor = 0.0);

// Small slope: V^{-3/5} h(V^{2/5} x).  Large slope: V^{-2/3} h(V^{1/3} x).
Profile rescaled_profile(const MinimizeResult& res, SurfaceKind kind);
// V^{-4/5} E + S(h~) (small slope), V^{-2/3} E + S(h~) (large slope).
double rescaled_energy(const MinimizeResult& res, SurfaceKind kind);

// Excess surface energy over the constrained minimizer minus the distance term.
//   SmallSlope: grid [-L, L], h(+-L) = 0, volume V;
//     int h'^2 - 3V^2/(2L^3) - (1/(4L^2)) int |h - h_min|^2, h_min the parabola.
//   LargeSlope: grid [0, L], h extended by zero outside, volume V;
//     TV(h) - 2V/L - (1/L) int |h - V/L|.
// Integrals are exact for the piecewise-linear interpolant.
double stability_gap(const Grid1D& grid, std::span<const double> h, double L, double V,
                     SurfaceKind kind);
double stability_gap(const Profile& p, double L, double V, SurfaceKind kind);

// Distance of h~ to the comparator on the largest component (a, b) of {h~ > s}:
// same mass on (a, b), boundary value s, minimal surface energy there (a
// parabola for SmallSlope, a flat top for LargeSlope).  L^2 resp. L^1.
struct ComparatorDistance {
  double a = 0.0, b = 0.0;
  double mass = 0.0;  // int_a^b (h~ - s)
  double distance = 0.0;
};
ComparatorDistance constrained_distance(const Profile& ht, SurfaceKind kind, double s = 0.1);

// L^2 (SmallSlope) or L^1 (LargeSlope) distance over R after shifting the
// centre of mass of ht to 0.
double aligned_distance(const Profile& ht, const LimitShape& shape, SurfaceKind kind);
double center_of_mass(const Profile& p);

struct ConvergenceRecord {
  SurfaceKind kind = SurfaceKind::SmallSlope;
  std::vector<double> volumes;
  std::vector<double> distances;         // to the constrained comparator
  std::vector<double> global_distances;  // to the aligned limit shape
  std::vector<double> abscissae;         // V^{1/5} or V^{1/3}
};

ConvergenceRecord convergence_record(std::span<const MinimizeResult> results, SurfaceKind kind,
                                     const LimitShape& shape, double s = 0.1);

struct DecayFit {
  double C0 = 0.0, C1 = 0.0;  // distance ~ C0 exp(-C1 a)
  bool monotone = false;      // distances strictly decreasing
  bool quality_ok = false;    // monotone and C1 clearly positive
};
// Least squares of log distance against the abscissa.
DecayFit decay_fit(const ConvergenceRecord& rec);

void write_convergence_csv(std::ostream& os, const ConvergenceRecord& rec);
std::string limit_shape_json(const LimitShape& shape);

}  // namespace islands
