#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "islands/profile.hpp"

namespace islands {

enum class LinearBackend { Direct, ConjugateGradient };

// Mirrored: quads left of the window centre are cut along the diagonal that is
// short under upward shear, right of it the mirror image, so the topology never
// depends on the heights.  Shortest picks
// the shorter diagonal per quad (better shaped, but flips as heights move).
enum class DiagonalRule { Mirrored, Shortest };

struct MeshControl {
  std::size_t layers = 32;    // n_y on every non-void column line
  double grading = 2.0;       // layer k sits at height (k/n_y)^grading * h
  double h_floor = 0.0;       // absolute; lines at or below are void (single substrate node)
  DiagonalRule diagonals = DiagonalRule::Mirrored;
  LinearBackend backend = LinearBackend::Direct;
  double cg_tol = 1e-12;
  long cg_max_iters = 20000;
};

// h_floor = 1e-6 V^{3/5}, the default void cutoff for a film of volume V.
double default_h_floor(double volume);

struct SubgraphMesh {
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> tri_cell;        // profile cell owning each triangle
  std::vector<int> node_line;       // grid line of each node
  std::vector<double> node_frac;    // y / h(line), 0 on the substrate
  // Top-edge nodes of wedge cells also ride on the short line: y = frac h(line) + frac2 h(line2).
  std::vector<int> node_line2;
  std::vector<double> node_frac2;
  std::vector<char> dirichlet;      // substrate nodes carry u = x
  std::vector<int> top_node;        // per grid line, -1 where the line is not meshed
  std::vector<int> base_node;       // per grid line, -1 where the line is not meshed
  std::size_t layers = 0;

  // Column lines with h above the floor get layers+1 nodes; lines at or below
  // the floor adjacent to a positive line get a single substrate node.  Cells
  // whose lower side is under a tenth of the taller one are meshed as wedges
  // with extra free nodes on the top edge.
  // End heights may be nonzero (vertical walls with natural conditions).
  static SubgraphMesh build(const Grid1D& grid, std::span<const double> h,
                            const MeshControl& ctl);
};

struct SolverStats {
  long iterations = 0;
  double relative_residual = 0.0;
  std::size_t unknowns = 0;
};

struct ElasticSolution {
  SubgraphMesh mesh;
  std::vector<double> nodal_values;
  double energy = 0.0;
  double dx_energy = 0.0;
  double dy_energy = 0.0;
  std::vector<double> top_trace_gradsq;  // per grid line, 0 where not meshed
  std::vector<double> bottom_flux;       // per grid line, d_y u at y=0
  std::vector<double> line_heights;      // copy of the meshed heights
  double dx = 0.0;
  SolverStats stats;
};

ElasticSolution solve_elastic(const Profile& p, const MeshControl& ctl);
// Same, for arbitrary nonnegative line heights (walls allowed at the ends).
ElasticSolution solve_elastic(const Grid1D& grid, std::span<const double> h,
                              const MeshControl& ctl);

// Exact derivative of the discrete energy with respect to each line height
// (nodes on a line move proportionally to their layer fraction).  Zero on void
// and unmeshed lines.
std::vector<double> shape_gradient(const ElasticSolution& sol);

// V - \int d_y u h'(x); equals the energy for zero-end profiles.
double bottom_flux_energy(const ElasticSolution& sol);

// dy_energy / surface energy.
double balance_ratio(const ElasticSolution& sol, const Profile& p, SurfaceEnergyKind kind);

struct CorrectorResult {
  std::vector<double> truncation_heights;
  std::vector<double> energies;
  double extrapolated = 0.0;
  double error_estimate = 0.0;
};

// Unit-width strip [0,1]x[0,L] per truncation; E(inf) - E(L) ~ A exp(-2 pi L).
CorrectorResult corrector_cw(std::span<const double> truncations, const MeshControl& ctl,
                             std::size_t cells = 256);

void write_solution_csv(std::ostream& os, const ElasticSolution& sol);

}  // namespace islands
