#include "islands/elastic.hpp"

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "islands/error.hpp"

#include <lapacke.h>

extern "C" void openblas_set_num_threads(int);
extern "C" void dpbtf2_(const char*, const int*, const int*, double*, const int*, int*);

namespace islands {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct TriGeom {
  double area;
  double gx[3], gy[3];  // gradients of the three hat functions
};

TriGeom geometry(const SubgraphMesh& m, const std::array<int, 3>& t) {
  const auto& p0 = m.nodes[t[0]];
  const auto& p1 = m.nodes[t[1]];
  const auto& p2 = m.nodes[t[2]];
  const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  TriGeom g;
  g.area = 0.5 * std::abs(det);
  const double inv = 1.0 / det;
  g.gx[0] = (p1[1] - p2[1]) * inv;
  g.gy[0] = (p2[0] - p1[0]) * inv;
  g.gx[1] = (p2[1] - p0[1]) * inv;
  g.gy[1] = (p0[0] - p2[0]) * inv;
  g.gx[2] = (p0[1] - p1[1]) * inv;
  g.gy[2] = (p1[0] - p0[0]) * inv;
  return g;
}

void element_gradient(const SubgraphMesh& m, const std::vector<double>& u, std::size_t t,
                      const TriGeom& g, double& ux, double& uy) {
  ux = uy = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double ua = u[m.triangles[t][a]];
    ux += ua * g.gx[a];
    uy += ua * g.gy[a];
  }
}

}  // namespace

constexpr double kWedgeRatio = 0.1;

double default_h_floor(double volume) { return 1e-6 * std::pow(std::max(volume, 0.0), 0.6); }

SubgraphMesh SubgraphMesh::build(const Grid1D& grid, std::span<const double> h,
                                 const MeshControl& ctl) {
  if (h.size() != grid.n_nodes()) throw InvalidInput("mesh: height count does not match grid");
  if (ctl.layers < 1) throw InvalidParameter("mesh: need at least one layer");
  if (!(ctl.grading > 0.0)) throw InvalidParameter("mesh: grading must be positive");
  const std::size_t n = h.size();
  const std::size_t ny = ctl.layers;
  std::vector<char> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = h[i] > ctl.h_floor;
  auto eff = [&](std::size_t i) { return pos[i] ? h[i] : 0.0; };

  std::vector<double> frac(ny + 1);
  for (std::size_t k = 0; k <= ny; ++k)
    frac[k] = std::pow(static_cast<double>(k) / static_cast<double>(ny), ctl.grading);
  frac[ny] = 1.0;

  // A cell whose short side is far below its tall side is a wedge: layer
  // strips run from the tall line to free nodes on the sloped top edge, with a
  // fan foot under the short line.  Matching layers across such a cell would
  // tie the free surface to the substrate value and lock the energy.
  std::vector<char> wedge(n, 0);
  for (std::size_t c = 0; c + 1 < n; ++c) {
    const double lo = std::min(eff(c), eff(c + 1)), hi = std::max(eff(c), eff(c + 1));
    wedge[c] = hi > 0.0 && lo <= kWedgeRatio * hi;
  }

  SubgraphMesh m;
  m.layers = ny;
  m.top_node.assign(n, -1);
  m.base_node.assign(n, -1);
  std::vector<int> first(n, -1);       // index of layer-0 node on each line
  std::vector<int> edge_first(n, -1);  // first top-edge node of each wedge cell
  for (std::size_t i = 0; i < n; ++i) {
    const bool meshed = pos[i] || (i > 0 && pos[i - 1]) || (i + 1 < n && pos[i + 1]);
    if (meshed) {
      first[i] = static_cast<int>(m.nodes.size());
      const std::size_t count = pos[i] ? ny + 1 : 1;
      for (std::size_t k = 0; k < count; ++k) {
        m.nodes.push_back({grid.x(i), pos[i] ? frac[k] * h[i] : 0.0});
        m.node_line.push_back(static_cast<int>(i));
        m.node_frac.push_back(pos[i] ? frac[k] : 0.0);
        m.node_line2.push_back(-1);
        m.node_frac2.push_back(0.0);
        m.dirichlet.push_back(k == 0);
      }
      m.base_node[i] = first[i];
      m.top_node[i] = first[i] + static_cast<int>(count) - 1;
    }
    if (i + 1 < n && wedge[i]) {
      // top-edge nodes sit between the two lines in the numbering (band width)
      const std::size_t tall = eff(i) >= eff(i + 1) ? i : i + 1;
      const std::size_t lo = tall == i ? i + 1 : i;
      edge_first[i] = static_cast<int>(m.nodes.size());
      for (std::size_t k = 1; k < ny; ++k) {
        m.nodes.push_back({grid.x(lo) + (grid.x(tall) - grid.x(lo)) * frac[k],
                           (1.0 - frac[k]) * eff(lo) + frac[k] * h[tall]});
        m.node_line.push_back(static_cast<int>(tall));
        m.node_frac.push_back(frac[k]);
        m.node_line2.push_back(pos[lo] ? static_cast<int>(lo) : -1);
        m.node_frac2.push_back(pos[lo] ? 1.0 - frac[k] : 0.0);
        m.dirichlet.push_back(0);
      }
    }
  }
  if (m.nodes.empty()) throw EmptyFilm("mesh: every column is below the void cutoff");

  auto dist2 = [&](int a, int b) {
    const double dx = m.nodes[a][0] - m.nodes[b][0], dy = m.nodes[a][1] - m.nodes[b][1];
    return dx * dx + dy * dy;
  };
  auto add = [&](int a, int b, int c, std::size_t cell) {
    m.triangles.push_back({a, b, c});
    m.tri_cell.push_back(static_cast<int>(cell));
  };
  for (std::size_t c = 0; c + 1 < n; ++c) {
    if (wedge[c]) {
      const std::size_t tall = eff(c) >= eff(c + 1) ? c : c + 1;
      const std::size_t lo = tall == c ? c + 1 : c;
      const int t0 = first[tall];
      const int lo_top = m.top_node[lo];
      auto edge = [&](std::size_t k) {
        if (k == 0) return lo_top;
        if (k == ny) return t0 + static_cast<int>(ny);
        return edge_first[c] + static_cast<int>(k) - 1;
      };
      for (std::size_t k = 0; k < ny; ++k) {
        const int a = t0 + static_cast<int>(k);
        add(edge(k), a, edge(k + 1), c);
        if (k + 1 < ny) add(a, a + 1, edge(k + 1), c);
      }
      if (pos[lo])
        for (std::size_t k = 0; k < ny; ++k)
          add(first[lo] + static_cast<int>(k), first[lo] + static_cast<int>(k) + 1, t0, c);
    } else if (pos[c] && pos[c + 1]) {
      for (std::size_t k = 0; k < ny; ++k) {
        const int a = first[c] + static_cast<int>(k), b = first[c + 1] + static_cast<int>(k);
        const int cc = a + 1, d = b + 1;
        const bool use_bc = ctl.diagonals == DiagonalRule::Shortest
                                ? dist2(b, cc) < dist2(a, d)
                                : 2 * c + 1 < n - 1;
        if (!use_bc) {
          add(a, b, d, c);
          add(a, d, cc, c);
        } else {
          add(a, b, cc, c);
          add(b, d, cc, c);
        }
      }
    }
  }
  if (m.triangles.empty()) throw EmptyFilm("mesh: every column is below the void cutoff");
  return m;
}

ElasticSolution solve_elastic(const Grid1D& grid, std::span<const double> h,
                              const MeshControl& ctl) {
  ElasticSolution sol;
  sol.mesh = SubgraphMesh::build(grid, h, ctl);
  sol.dx = grid.dx();
  const SubgraphMesh& m = sol.mesh;
  const std::size_t nn = m.nodes.size();

  sol.line_heights.assign(h.size(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] > ctl.h_floor) sol.line_heights[i] = h[i];

  std::vector<int> index(nn, -1);
  int nfree = 0;
  for (std::size_t v = 0; v < nn; ++v)
    if (!m.dirichlet[v]) index[v] = nfree++;

  std::vector<double>& u = sol.nodal_values;
  u.assign(nn, 0.0);
  for (std::size_t v = 0; v < nn; ++v)
    if (m.dirichlet[v]) u[v] = m.nodes[v][0];

  std::vector<TriGeom> geo(m.triangles.size());
  for (std::size_t t = 0; t < geo.size(); ++t) geo[t] = geometry(m, m.triangles[t]);

  if (nfree > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.triangles.size() * 9);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      const auto& tri = m.triangles[t];
      const TriGeom& g = geo[t];
      for (int a = 0; a < 3; ++a) {
        const int ia = index[tri[a]];
        if (ia < 0) continue;
        for (int b = 0; b < 3; ++b) {
          const double k = g.area * (g.gx[a] * g.gx[b] + g.gy[a] * g.gy[b]);
          const int ib = index[tri[b]];
          if (ib >= 0)
            trip.emplace_back(ia, ib, k);
          else
            rhs[ia] -= k * u[tri[b]];
        }
      }
    }
    SpMat K(nfree, nfree);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd x;
    const double bnorm = std::max(rhs.norm(), std::numeric_limits<double>::min());
    if (ctl.backend == LinearBackend::Direct) {
      // Line-major numbering makes K banded; LAPACK band Cholesky.  Solves are
      // already parallel across jobs, so BLAS stays single-threaded.
      static const bool single_threaded = [] {
        openblas_set_num_threads(1);
        return true;
      }();
      (void)single_threaded;
      int kd = 0;
      for (const auto& tr : trip) kd = std::max(kd, tr.col() - tr.row());
      const int ldab = kd + 1;
      std::vector<double> ab(static_cast<std::size_t>(ldab) * nfree, 0.0);
      for (const auto& tr : trip)
        if (tr.row() <= tr.col())
          ab[static_cast<std::size_t>(kd + tr.row() - tr.col()) +
             static_cast<std::size_t>(tr.col()) * ldab] += tr.value();
      // The blocked OpenBLAS factorization reports spurious non-positive
      // pivots once the band is wider than its block size; the unblocked
      // kernel is exact there.
      int info = 0;
      if (kd <= 64)
        info = LAPACKE_dpbtrf_work(LAPACK_COL_MAJOR, 'U', nfree, kd, ab.data(), ldab);
      else
        dpbtf2_("U", &nfree, &kd, ab.data(), &ldab, &info);
      if (info != 0) throw SolverFailure("elastic: band Cholesky factorization failed", 0, 0.0);
      auto apply_inverse = [&](Eigen::VectorXd& v) {
        LAPACKE_dpbtrs_work(LAPACK_COL_MAJOR, 'U', nfree, kd, 1, ab.data(), ldab, v.data(), nfree);
      };
      x = rhs;
      apply_inverse(x);
      sol.stats.iterations = 1;
      // iterative refinement keeps the relative residual at roundoff level
      for (int r = 0; r < 3; ++r) {
        Eigen::VectorXd res = rhs - K * x;
        sol.stats.relative_residual = res.norm() / bnorm;
        if (sol.stats.relative_residual <= 1e-13) break;
        apply_inverse(res);
        x += res;
        ++sol.stats.iterations;
      }
    } else {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                               Eigen::DiagonalPreconditioner<double>>
          cg;
      cg.setTolerance(ctl.cg_tol);
      cg.setMaxIterations(ctl.cg_max_iters);
      cg.compute(K);
      x = cg.solve(rhs);
      sol.stats.iterations = cg.iterations();
    }
    sol.stats.relative_residual = (rhs - K * x).norm() / bnorm;
    sol.stats.unknowns = static_cast<std::size_t>(nfree);
    if (!std::isfinite(sol.stats.relative_residual) || sol.stats.relative_residual > 1e-10)
      throw SolverFailure("elastic: linear solve did not reach 1e-10 relative residual",
                          sol.stats.iterations, sol.stats.relative_residual);
    for (std::size_t v = 0; v < nn; ++v)
      if (index[v] >= 0) u[v] = x[index[v]];
  }

  const std::size_t nl = h.size();
  sol.top_trace_gradsq.assign(nl, 0.0);
  sol.bottom_flux.assign(nl, 0.0);
  std::vector<double> top_area(nl, 0.0), base_area(nl, 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom& g = geo[t];
    double ux, uy;
    element_gradient(m, u, t, g, ux, uy);
    sol.dx_energy += g.area * ux * ux;
    sol.dy_energy += g.area * uy * uy;
    for (int a = 0; a < 3; ++a) {
      const int v = m.triangles[t][a];
      const int line = m.node_line[v];
      if (v == m.top_node[line] && sol.line_heights[line] > 0.0) {
        sol.top_trace_gradsq[line] += g.area * (ux * ux + uy * uy);
        top_area[line] += g.area;
      }
      if (v == m.base_node[line]) {
        sol.bottom_flux[line] += g.area * uy;
        base_area[line] += g.area;
      }
    }
  }
  for (std::size_t i = 0; i < nl; ++i) {
    if (top_area[i] > 0.0) sol.top_trace_gradsq[i] /= top_area[i];
    if (base_area[i] > 0.0) sol.bottom_flux[i] /= base_area[i];
  }
  sol.energy = sol.dx_energy + sol.dy_energy;
  return sol;
}

ElasticSolution solve_elastic(const Profile& p, const MeshControl& ctl) {
  if (!(volume(p) > 0.0)) throw EmptyFilm("solve_elastic: profile has zero volume");
  return solve_elastic(p.grid(), p.heights(), ctl);
}

std::vector<double> shape_gradient(const ElasticSolution& sol) {
  const SubgraphMesh& m = sol.mesh;
  std::vector<double> g(m.top_node.size(), 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom geo = geometry(m, m.triangles[t]);
    double ux, uy;
    element_gradient(m, sol.nodal_values, t, geo, ux, uy);
    const double a = geo.area * (ux * ux - uy * uy), b = -2.0 * geo.area * ux * uy;
    for (int k = 0; k < 3; ++k) {
      const int v = m.triangles[t][k];
      const double d = a * geo.gy[k] + b * geo.gx[k];
      g[m.node_line[v]] += m.node_frac[v] * d;
      if (m.node_line2[v] >= 0) g[m.node_line2[v]] += m.node_frac2[v] * d;
    }
  }
  return g;
}

double bottom_flux_energy(const ElasticSolution& sol) {
  const SubgraphMesh& m = sol.mesh;
  const auto& h = sol.line_heights;
  double flux = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const TriGeom geo = geometry(m, m.triangles[t]);
    double ux, uy;
    element_gradient(m, sol.nodal_values, t, geo, ux, uy);
    const int c = m.tri_cell[t];
    flux += geo.area * uy * (h[c + 1] - h[c]) / sol.dx;
  }
  return volume(h, sol.dx) - flux;
}

double balance_ratio(const ElasticSolution& sol, const Profile& p, SurfaceEnergyKind kind) {
  const double s = surface_energy(p, kind);
  if (!(s > 0.0)) throw UndefinedGap("balance_ratio: surface energy vanishes");
  return sol.dy_energy / s;
}

CorrectorResult corrector_cw(std::span<const double> truncations, const MeshControl& ctl,
                             std::size_t cells) {
  if (truncations.size() < 2)
    throw InvalidParameter("corrector_cw: need at least two truncation heights");
  for (std::size_t j = 0; j < truncations.size(); ++j) {
    if (!(truncations[j] > 0.0)) throw InvalidParameter("corrector_cw: heights must be positive");
    if (j > 0 && !(truncations[j] > truncations[j - 1]))
      throw InvalidParameter("corrector_cw: heights must be increasing");
  }
  CorrectorResult r;
  r.truncation_heights.assign(truncations.begin(), truncations.end());
  const Grid1D strip(0.0, 1.0, cells);
  MeshControl c = ctl;
  c.h_floor = 0.0;
  for (double L : truncations) {
    std::vector<double> h(strip.n_nodes(), L);
    r.energies.push_back(solve_elastic(strip, h, c).energy);
  }
  // Least squares for E_j = E_inf - A exp(-2 pi L_j).
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  const std::size_t m = truncations.size();
  for (std::size_t j = 0; j < m; ++j) {
    const double q = -std::exp(-2.0 * M_PI * truncations[j]);
    s11 += 1.0;
    s12 += q;
    s22 += q * q;
    b1 += r.energies[j];
    b2 += q * r.energies[j];
  }
  const double det = s11 * s22 - s12 * s12;
  r.extrapolated = (b1 * s22 - b2 * s12) / det;
  const double amp = (s11 * b2 - s12 * b1) / det;
  double rss = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double e = r.extrapolated - amp * std::exp(-2.0 * M_PI * truncations[j]) - r.energies[j];
    rss += e * e;
  }
  r.error_estimate = std::abs(r.extrapolated - r.energies.back()) + std::sqrt(rss / m);
  return r;
}

void write_solution_csv(std::ostream& os, const ElasticSolution& sol) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "x,y,u\n";
  for (std::size_t v = 0; v < sol.mesh.nodes.size(); ++v)
    os << sol.mesh.nodes[v][0] << ',' << sol.mesh.nodes[v][1] << ',' << sol.nodal_values[v]
       << '\n';
  os.precision(old);
}

}  // namespace islands
