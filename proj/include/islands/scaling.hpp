#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "islands/optimizer.hpp"
#include "islands/profile.hpp"

namespace islands {

struct SweepOptions {
  std::size_t jobs = 0;         // 0 = hardware concurrency
  double window = 0.0;          // 0 = default_window_width per volume
  std::size_t cells = 0;        // 0 = default_cells per volume
  double theta = 0.02;          // wetting detection margin
  double mesh_slack = 0.0;      // added to theta
};

// Bracket [lo, hi] around the first volume with beta < 1 - theta - slack.
struct WettingBracket {
  bool found = false;
  double lo = 0.0, hi = 0.0;
  double estimate = 0.0;     // midpoint
  double uncertainty = 0.0;  // bracket width
};

struct SweepResult {
  SurfaceKind kind = SurfaceKind::SmallSlope;
  std::vector<double> volumes;
  std::vector<double> E, S, totals, betas, lambdas, maxheights, supports;
  std::vector<char> converged, wetting;
  std::vector<MinimizeResult> results;
  std::optional<double> fitted_exponent;  // top decade of converged volumes
  std::size_t fit_points = 0;
  WettingBracket vbar;
};

// Minimizes every volume (parallel work queue, results merged by index).
SweepResult sweep(SurfaceEnergyKind kind, std::span<const double> volumes, const FlowConfig& cfg,
                  const SweepOptions& opt = {});

// Rebuilds the derived fields (fit, bracket) from the per-volume columns;
// sweep() calls this, tests use it on synthetic data.
void finalize_sweep(SweepResult& r, double theta = 0.02, double mesh_slack = 0.0);

std::vector<double> logspace(double lo, double hi, std::size_t n);

// Least-squares slope of log y on log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Largest normalized concavity defect 2 (chord_i - F_i) / F_i over interior
// points, with chord_i the linear interpolant of the two neighbours at V_i.
// On a uniform grid this is (F_{i+1} + F_{i-1} - 2 F_i) / F_i.
double concavity_gap(const SweepResult& s);

// Log-log slope of max h over the converged island points of the top decade.
double maxheight_law(const SweepResult& s);

// Largest relative increase of beta between consecutive converged points.
double beta_monotonicity_gap(const SweepResult& s);

enum class Construction { ThinLayer, Pyramid, BoxLargeSlope };

struct Construction3D {
  Construction kind;
  double V = 0.0;
  double L = 0.0, H = 0.0, eps = 0.0;
  double E_analytic = 0.0, S_analytic = 0.0, total = 0.0;
};

// Closed-form 3D upper-bound constructions.
//   ThinLayer: u=(x,y), E = 2V, S = 4(sqrt(V eps) + eps^2), L from the exact volume.
//   Pyramid:   L = V^{2/7}, H = 3V^{3/7}/4, S = 4H^2, E = 8L^3.
//   BoxLargeSlope: square base L = V^{1/4}, H = V^{1/2}; u = (x,y)(1 - z/L)_+ gives
//              E = (5/6) L^3, total variation of h is 4 L H = 4 V^{3/4}.
Construction3D construct_3d(Construction kind, double V, double eps = 0.0);
const char* to_string(Construction k);

void write_sweep_csv(std::ostream& os, const SweepResult& s);
std::string sweep_summary_json(const SweepResult& s);
// Log-log chart of total vs V with the fitted line over the top decade.
void write_loglog_svg(std::ostream& os, const SweepResult& s);

}  // namespace islands
