#include "islands/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <deque>

#include "islands/error.hpp"

namespace islands {

namespace {

constexpr double kCW = 0.27137725722041835;  // 7 zeta(3) / pi^3

struct State {
  std::vector<double> h;
  ElasticSolution sol;
  double E = 0.0, S = 0.0, obj = 0.0;
};

// Solves the tridiagonal system (diag, off) x = b; rows with fixed[i] reduce to x_i = 0.
std::vector<double> solve_tridiag(const std::vector<double>& diag, const std::vector<double>& off,
                                  const std::vector<char>& fixed, const std::vector<double>& b) {
  const std::size_t n = diag.size();
  std::vector<double> c(n, 0.0), d(n, 0.0), x(n, 0.0);
  auto a_at = [&](std::size_t i) { return fixed[i] ? 1.0 : diag[i]; };
  auto off_at = [&](std::size_t i) { return (fixed[i] || fixed[i + 1]) ? 0.0 : off[i]; };
  auto b_at = [&](std::size_t i) { return fixed[i] ? 0.0 : b[i]; };
  double m = a_at(0);
  c[0] = n > 1 ? off_at(0) / m : 0.0;
  d[0] = b_at(0) / m;
  for (std::size_t i = 1; i < n; ++i) {
    const double lo = off_at(i - 1);
    m = a_at(i) - lo * c[i - 1];
    c[i] = i + 1 < n ? off_at(i) / m : 0.0;
    d[i] = (b_at(i) - lo * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

class Flow {
 public:
  Flow(double V, const FlowConfig& cfg, const Grid1D& grid)
      : V_(V), cfg_(cfg), grid_(grid), dx_(grid.dx()), n_(grid.n_nodes()) {
    mesh_ = cfg.mesh;
    if (mesh_.h_floor == 0.0) mesh_.h_floor = default_h_floor(V);
    mu_ = cfg.penalty_mu > 0.0 ? cfg.penalty_mu : 4.0 * std::min(1.0, std::pow(V, -0.2));
    tau0_ = cfg.tau > 0.0 ? cfg.tau : 0.1 * dx_ * dx_;
  }

  double floor() const { return mesh_.h_floor; }
  MeshControl mesh() const { return mesh_; }

  // Zero nodes next to the support are meshed as ghost columns of height
  // 2 h_floor: their shape derivative is the one-sided cost of spreading,
  // which near an island edge is several times the thin-film density.
  State evaluate(std::vector<double> h, SurfaceEnergyKind kind, bool ghosts = true) const {
    State s;
    if (ghosts) {
      std::vector<double> hm(h);
      for (std::size_t i = 1; i + 1 < n_; ++i)
        if (h[i] == 0.0 && (h[i - 1] > 0.0 || h[i + 1] > 0.0)) hm[i] = 2.0 * mesh_.h_floor;
      s.sol = solve_elastic(grid_, hm, mesh_);
    } else {
      s.sol = solve_elastic(grid_, h, mesh_);
    }
    s.E = s.sol.energy;
    s.S = surface_energy(h, dx_, kind);
    s.obj = s.E + s.S;
    if (cfg_.volume_mode == VolumeMode::Penalty) s.obj += mu_ * std::abs(volume(h, dx_) - V_);
    s.h = std::move(h);
    return s;
  }

  // Derivative of E+S w.r.t. nodal heights; substrate-level lines take the
  // thin-film density 1 for the elastic part.
  std::vector<double> gradient(const State& s, SurfaceEnergyKind kind) const {
    std::vector<double> g = shape_gradient(s.sol);
    const SurfaceDerivatives sd = surface_derivatives(s.h, dx_, kind);
    for (std::size_t i = 0; i < n_; ++i) {
      if (s.sol.line_heights[i] == 0.0) g[i] = dx_;  // isolated zero nodes: thin film
      g[i] += sd.grad[i];
    }
    g.front() = g.back() = 0.0;
    return g;
  }

  // Heights at or below the void cutoff become exactly zero so that the state
  // and its mesh agree; projection may lift a node back over the cutoff, hence
  // the repeat.
  std::vector<double> snap(std::vector<double> h) const {
    for (int pass = 0; pass < 5; ++pass) {
      bool again = false;
      for (double& v : h)
        if (v > 0.0 && v <= mesh_.h_floor) v = 0.0;
      if (cfg_.volume_mode == VolumeMode::Projection) {
        h = project_volume(h, dx_, V_);
        for (double v : h) again = again || (v > 0.0 && v <= mesh_.h_floor);
      }
      if (!again) break;
    }
    return h;
  }

  // Nodes this close to the void cutoff cannot move down without being snapped
  // to zero, so they are treated as resting on the bound.
  bool at_bound(double v) const { return v <= 2.0 * mesh_.h_floor; }

  struct Kkt {
    double lambda = 0.0, residual = 0.0;
  };

  // Relative stationarity defect.  Total-variation subgradients are measures,
  // so for LargeSlope the defect on the support is taken in a negative norm
  // (running integral of the residual); the sign conditions at bound nodes are
  // always checked pointwise.
  Kkt kkt(const State& s, const std::vector<double>& g) const {
    double sw = 0.0, sg = 0.0;
    for (std::size_t i = 1; i + 1 < n_; ++i)
      if (!at_bound(s.h[i])) {
        sw += dx_;
        sg += g[i];
      }
    Kkt k;
    if (sw == 0.0) return k;
    k.lambda = sg / sw;
    const double scale = std::max(std::abs(k.lambda), 1e-3);
    const bool weak = cfg_.kind.tag == SurfaceKind::LargeSlope;
    double r2 = 0.0, z2 = 0.0, F = 0.0, f2 = 0.0;
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      const double r = g[i] / dx_ - k.lambda;
      if (at_bound(s.h[i])) {
        // only the edge of the meshed support can advance; bound nodes inside
        // a sub-floor film are void
        if (!at_bound(s.h[i - 1]) || !at_bound(s.h[i + 1]))
          z2 += dx_ * std::min(0.0, r) * std::min(0.0, r);
        continue;
      }
      r2 += dx_ * r * r;
      F += dx_ * r;
      f2 += dx_ * F * F;
    }
    k.residual = weak ? std::max(std::sqrt(f2) / (sw * std::sqrt(sw)), std::sqrt(z2 / sw)) / scale
                      : std::sqrt((r2 + z2) / sw) / scale;
    return k;
  }

  struct Pair {
    std::vector<double> s, y;
  };

  // Projected quasi-Newton step.  The inverse Hessian is L-BFGS seeded with
  // M^{-1}, M = W/tau + Hess S + diag(curv); nodes pinned at zero are removed
  // and the direction is made volume-neutral (projection) or penalty-optimal.
  std::vector<double> direction(const State& s, const std::vector<double>& g, double tau,
                                SurfaceEnergyKind kind, double lambda_hint,
                                const std::vector<double>& curv,
                                const std::deque<Pair>& mem) const {
    const SurfaceDerivatives sd = surface_derivatives(s.h, dx_, kind);
    std::vector<double> diag(n_), w(n_, dx_);
    for (std::size_t i = 0; i < n_; ++i) diag[i] = dx_ / tau + sd.diag[i] + curv[i];
    std::vector<char> fixed(n_, 1);
    for (std::size_t i = 1; i + 1 < n_; ++i) fixed[i] = at_bound(s.h[i]) && g[i] / dx_ >= lambda_hint;
    const double vol = volume(s.h, dx_);

    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
      double r = 0.0;
      for (std::size_t i = 0; i < n_; ++i)
        if (!fixed[i]) r += a[i] * b[i];
      return r;
    };
    auto apply_h = [&](const std::vector<double>& v) {
      std::vector<double> q(v);
      std::vector<double> alpha(mem.size()), rho(mem.size());
      for (std::size_t k = mem.size(); k-- > 0;) {
        rho[k] = 1.0 / dot(mem[k].y, mem[k].s);
        if (!std::isfinite(rho[k]) || rho[k] <= 0.0) rho[k] = 0.0;
        alpha[k] = rho[k] * dot(mem[k].s, q);
        for (std::size_t i = 0; i < n_; ++i) q[i] -= alpha[k] * mem[k].y[i];
      }
      std::vector<double> r = solve_tridiag(diag, sd.off, fixed, q);
      for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = rho[k] * dot(mem[k].y, r);
        for (std::size_t i = 0; i < n_; ++i) r[i] += mem[k].s[i] * (alpha[k] - beta);
      }
      for (std::size_t i = 0; i < n_; ++i)
        if (fixed[i]) r[i] = 0.0;
      return r;
    };

    std::vector<double> p(n_, 0.0);
    for (int pass = 0; pass < 4; ++pass) {
      const auto hg = apply_h(g);
      const auto hw = apply_h(w);
      const double wg = dot(w, hg), ww = dot(w, hw);
      double lambda = ww > 0.0 ? (V_ - vol + wg) / ww : 0.0;
      if (cfg_.volume_mode == VolumeMode::Penalty) lambda = std::clamp(lambda, -mu_, mu_);
      bool changed = false;
      for (std::size_t i = 0; i < n_; ++i) {
        p[i] = fixed[i] ? 0.0 : lambda * hw[i] - hg[i];
        if (!fixed[i] && at_bound(s.h[i]) && p[i] <= 0.0) {
          fixed[i] = 1;
          changed = true;
        }
      }
      if (!changed) break;
    }
    // A bound node whose reduced gradient asks it to grow but which the coupled
    // metric pinned gets the diagonally scaled steepest-descent component;
    // otherwise the support could never advance past it.
    for (std::size_t i = 1; i + 1 < n_; ++i)
      if (at_bound(s.h[i]) && g[i] / dx_ < lambda_hint && p[i] <= 0.0)
        p[i] = (lambda_hint * dx_ - g[i]) / diag[i];
    return p;
  }

  std::vector<double> step_to(const State& s, const std::vector<double>& p, double alpha) const {
    std::vector<double> h(n_);
    for (std::size_t i = 0; i < n_; ++i) h[i] = std::max(0.0, s.h[i] + alpha * p[i]);
    h.front() = h.back() = 0.0;
    return snap(std::move(h));
  }

  struct Outcome {
    State state;
    std::size_t iterations = 0;
    std::size_t violations = 0;
    bool converged = false;
    bool aborted = false;
    double max_volume_error = 0.0;
    Kkt kkt;
    SurfaceEnergyKind final_kind;
    std::vector<double> totals;
  };

  double objective(const std::vector<double>& h, double E, SurfaceEnergyKind kind) const {
    double o = E + surface_energy(h, dx_, kind);
    if (cfg_.volume_mode == VolumeMode::Penalty) o += mu_ * std::abs(volume(h, dx_) - V_);
    return o;
  }

  Outcome run(std::vector<double> h0, double abort_above) const {
    Outcome out;
    std::vector<SurfaceEnergyKind> stages;
    if (cfg_.kind.tag == SurfaceKind::LargeSlope && cfg_.kind.eps_tv == 0.0) {
      const double mh = *std::max_element(h0.begin(), h0.end());
      for (double e = mh / 10.0; e > 1e-4 * mh; e *= 0.5)
        stages.push_back(SurfaceEnergyKind::large_slope(e));
      stages.push_back(SurfaceEnergyKind::large_slope(1e-4 * mh));
    } else {
      stages.push_back(cfg_.kind);
    }
    const std::size_t stage_budget =
        stages.size() == 1 ? cfg_.max_iters
                           : std::max<std::size_t>(60, 2 * cfg_.max_iters / stages.size());

    State s = evaluate(std::move(h0), stages.front());
    double tau = tau0_;
    std::vector<double> curv(n_, 0.0);
    for (std::size_t st = 0; st < stages.size() && !out.aborted; ++st) {
      const SurfaceEnergyKind kind = stages[st];
      const bool last = st + 1 == stages.size();
      s.S = surface_energy(s.h, dx_, kind);
      s.obj = objective(s.h, s.E, kind);
      out.final_kind = kind;
      std::deque<Pair> mem;
      std::vector<double> prev_h, prev_g, prev_ge;
      std::vector<double> history;
      for (std::size_t it_stage = 0;; ++it_stage) {
        const auto g = gradient(s, kind);
        std::vector<double> ge(g);
        {
          const SurfaceDerivatives sd = surface_derivatives(s.h, dx_, kind);
          for (std::size_t i = 0; i < n_; ++i) ge[i] -= sd.grad[i];
        }
        if (!prev_h.empty()) {
          Pair pr{std::vector<double>(n_), std::vector<double>(n_)};
          double sy = 0.0, ss = 0.0, yy = 0.0, smax = 0.0;
          for (std::size_t i = 0; i < n_; ++i) {
            pr.s[i] = s.h[i] - prev_h[i];
            pr.y[i] = g[i] - prev_g[i];
            sy += pr.s[i] * pr.y[i];
            ss += pr.s[i] * pr.s[i];
            yy += pr.y[i] * pr.y[i];
            smax = std::max(smax, std::abs(pr.s[i]));
          }
          // Per-node secant curvature of the elastic part: walls of large-slope
          // islands carry almost no surface stiffness.
          for (std::size_t i = 1; i + 1 < n_; ++i)
            if (std::abs(pr.s[i]) > 1e-3 * smax && s.h[i] > 0.0)
              curv[i] = std::max(0.0, (ge[i] - prev_ge[i]) / pr.s[i]);
          if (sy > 1e-10 * std::sqrt(ss * yy)) {
            mem.push_back(std::move(pr));
            if (mem.size() > cfg_.memory) mem.pop_front();
          }
        }
        prev_h = s.h;
        prev_g = g;
        prev_ge = std::move(ge);

        out.kkt = kkt(s, g);
        const double tol = last ? cfg_.tol_residual : 5.0 * cfg_.tol_residual;
        if (out.kkt.residual <= tol) {
          out.converged = last;
          break;
        }
        history.push_back(s.obj);
        if (history.size() > 25 && history[history.size() - 26] - s.obj <= 1e-10 * std::abs(s.obj)) {
          out.converged = last && out.kkt.residual <= 10.0 * cfg_.tol_residual;
          break;
        }
        if (it_stage >= stage_budget || out.iterations >= cfg_.max_iters) break;
        if (out.iterations == 50 && s.obj > abort_above) {
          out.aborted = true;
          break;
        }

        const auto p = direction(s, g, tau, kind, out.kkt.lambda, curv, mem);
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30 && !accepted; ++ls, alpha *= 0.5) {
          std::vector<double> h = step_to(s, p, alpha);
          double pred = 0.0;
          for (std::size_t i = 0; i < n_; ++i) pred += (g[i] - out.kkt.lambda * dx_) * (h[i] - s.h[i]);
          if (cfg_.volume_mode == VolumeMode::Penalty) {
            pred = 0.0;
            for (std::size_t i = 0; i < n_; ++i) pred += g[i] * (h[i] - s.h[i]);
          }
          State t;
          try {
            t = evaluate(std::move(h), kind);
          } catch (const EmptyFilm&) {
            continue;
          }
          if (t.obj <= s.obj && t.obj <= s.obj + 1e-4 * std::min(pred, 0.0)) {
            if (cfg_.volume_mode == VolumeMode::Projection)
              out.max_volume_error =
                  std::max(out.max_volume_error, std::abs(volume(t.h, dx_) - V_) / V_);
            s = std::move(t);
            accepted = true;
          }
        }
        alpha *= 2.0;
        ++out.iterations;
        out.totals.push_back(s.obj);
        if (cfg_.observer)
          cfg_.observer({out.iterations, st, kind.eps_tv, s.obj, out.kkt.residual, out.kkt.lambda,
                         alpha * tau, accepted});
        if (accepted) {
          tau = alpha == 1.0 ? std::min(2.0 * tau, 1e12 * tau0_) : std::max(alpha * tau, tau0_);
        } else if (mem.empty()) {
          out.converged = last && out.kkt.residual <= 10.0 * cfg_.tol_residual;
          break;
        } else {
          mem.clear();  // stale curvature pairs; retry with the plain preconditioner
          prev_h.clear();
          tau = tau0_;
        }
      }
    }
    out.state = std::move(s);
    return out;
  }

  std::vector<std::pair<std::string, std::vector<double>>> starts() const {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    const double W = grid_.length() - 2.0 * dx_;
    const double c = 0.5 * (grid_.x_min() + grid_.x_max());
    auto shape = [&](const std::function<double(double)>& f) {
      std::vector<double> h(n_, 0.0);
      for (std::size_t i = 1; i + 1 < n_; ++i) h[i] = std::max(0.0, f(grid_.x(i) - c));
      return snap(project_volume(h, dx_, V_));
    };
    const bool large = cfg_.kind.tag == SurfaceKind::LargeSlope;
    const double half_par =
        std::min(0.5 * W, std::pow(9.0 / (16.0 * kCW), 0.2) * std::pow(V_, 0.4));
    const double half_tent = std::min(0.5 * W, std::max(2.0 * dx_, std::pow(V_, 0.4)));
    const double half_box =
        std::min(0.5 * W, std::max(1.5 * dx_, 0.5 * std::pow(V_, 1.0 / 3.0) *
                                                   (large ? std::cbrt(1.0 / kCW) : 1.0)));
    auto parabola = [&] {
      return shape([&](double x) { return half_par * half_par - x * x; });
    };
    auto tent = [&] { return shape([&](double x) { return half_tent - std::abs(x); }); };
    auto flat = [&] {
      std::vector<double> h(n_, 1.0);
      h.front() = h.back() = 0.0;
      return project_volume(h, dx_, V_);
    };
    auto box = [&] { return shape([&](double x) { return std::abs(x) <= half_box ? 1.0 : 0.0; }); };
    if (large) {
      out.emplace_back("box", box());
      out.emplace_back("parabola", parabola());
      out.emplace_back("flat", flat());
      out.emplace_back("tent", tent());
    } else {
      out.emplace_back("parabola", parabola());
      out.emplace_back("tent", tent());
      out.emplace_back("flat", flat());
      out.emplace_back("box", box());
    }
    return out;
  }

  std::vector<double> perturb(const std::vector<double>& h, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> xi(n_);
    for (double& v : xi) v = nd(rng);
    std::vector<double> out(h);
    for (std::size_t i = 1; i + 1 < n_; ++i) {
      const double smooth = (xi[i - 1] + 2.0 * xi[i] + xi[i + 1]) / 4.0;
      out[i] = h[i] * std::max(0.0, 1.0 + 0.25 * smooth);
    }
    return project_volume(out, dx_, V_);
  }

  MinimizeResult finish(Outcome& o, const std::string& name) const;

 private:
  double V_;
  FlowConfig cfg_;
  Grid1D grid_;
  double dx_;
  std::size_t n_;
  MeshControl mesh_;
  double mu_ = 0.0, tau0_ = 0.0;
};

MinimizeResult Flow::finish(Outcome& o, const std::string& name) const {
  const SurfaceEnergyKind report =
      cfg_.kind.tag == SurfaceKind::LargeSlope ? SurfaceEnergyKind::large_slope(0.0) : cfg_.kind;
  auto true_objective = [&](const State& st) {
    const double S = surface_energy(st.h, dx_, report);
    const double pen = cfg_.volume_mode == VolumeMode::Penalty ? mu_ * std::abs(volume(st.h, dx_) - V_) : 0.0;
    return st.E + S + pen;
  };
  State s = evaluate(o.state.h, o.final_kind, false);

  // The last TV stage still smooths spikes far below eps, so stray one-node
  // satellites can survive the flow.  Drop every component but the heaviest
  // when that lowers the unsmoothed objective.
  {
    std::vector<std::pair<std::size_t, std::size_t>> comps;
    for (std::size_t i = 0; i < n_; ++i) {
      if (s.h[i] <= 0.0) continue;
      std::size_t j = i;
      while (j + 1 < n_ && s.h[j + 1] > 0.0) ++j;
      comps.emplace_back(i, j);
      i = j;
    }
    if (comps.size() > 1) {
      auto mass = [&](const std::pair<std::size_t, std::size_t>& c) {
        double m = 0.0;
        for (std::size_t i = c.first; i <= c.second; ++i) m += s.h[i];
        return m;
      };
      const auto keep = *std::max_element(comps.begin(), comps.end(),
                                          [&](const auto& a, const auto& b) { return mass(a) < mass(b); });
      std::vector<double> h(n_, 0.0);
      for (std::size_t i = keep.first; i <= keep.second; ++i) h[i] = s.h[i];
      if (cfg_.volume_mode == VolumeMode::Projection) h = project_volume(h, dx_, V_);
      State t = evaluate(h, o.final_kind, false);
      if (true_objective(t) < true_objective(s)) s = std::move(t);
    }
  }

  MinimizeResult r;
  r.profile = Profile(grid_, s.h);
  r.breakdown.E = s.E;
  r.breakdown.S = surface_energy(s.h, dx_, report);
  r.breakdown.total = r.breakdown.E + r.breakdown.S;
  r.breakdown.V = volume(s.h, dx_);
  r.breakdown.beta = r.breakdown.total / r.breakdown.V;
  r.objective = cfg_.volume_mode == VolumeMode::Penalty
                    ? r.breakdown.total + mu_ * std::abs(r.breakdown.V - V_)
                    : r.breakdown.total;
  r.dy_energy = s.sol.dy_energy;
  r.iterations = o.iterations;
  r.descent_violations = o.violations;
  r.converged = o.converged;
  r.kkt_residual = o.kkt.residual;
  r.lambda_kkt = o.kkt.lambda;
  r.max_volume_error = o.max_volume_error;
  r.seed = cfg_.seed;
  r.start = name;
  r.accepted_totals = o.totals;

  // Pointwise EL quantity |grad u|^2(top element) + (dS/dh)/dx on the support.
  const SurfaceDerivatives sd = surface_derivatives(s.h, dx_, o.final_kind);
  double sh = 0.0, shq = 0.0, sw = 0.0;
  std::vector<double> q(n_, 0.0);
  for (std::size_t i = 1; i + 1 < n_; ++i) {
    if (s.sol.line_heights[i] == 0.0) continue;
    const double curv = sd.grad[i] / dx_;
    q[i] = s.sol.top_trace_gradsq[i] + (cfg_.flip_el_sign ? -curv : curv);
    sh += s.h[i];
    shq += s.h[i] * q[i];
    sw += dx_;
  }
  r.lambda = sh > 0.0 ? shq / sh : 0.0;
  double r2 = 0.0;
  for (std::size_t i = 1; i + 1 < n_; ++i)
    if (s.sol.line_heights[i] > 0.0) r2 += dx_ * (q[i] - r.lambda) * (q[i] - r.lambda);
  r.el_residual = std::sqrt(r2);
  r.el_residual_rel =
      sw > 0.0 ? r.el_residual / (std::max(std::abs(r.lambda), 1e-12) * std::sqrt(sw)) : 0.0;

  std::size_t cells = 0;
  double slope = 0.0;
  const auto& lh = s.sol.line_heights;
  for (std::size_t c = 0; c + 1 < n_; ++c) {
    const bool a = lh[c] > 0.0, b = lh[c + 1] > 0.0;
    if (a || b) ++cells;
    if (a != b) slope = std::max(slope, std::abs(lh[c + 1] - lh[c]) / dx_);
  }
  r.support_length = static_cast<double>(cells) * dx_;
  r.contact_slope = slope;
  r.wetting = lh[1] > 0.0 || lh[n_ - 2] > 0.0;
  return r;
}

}  // namespace

std::vector<double> project_volume(std::span<const double> h, double dx, double V) {
  std::vector<double> out(h.begin(), h.end());
  for (int pass = 0; pass < 5; ++pass) {
    for (double& v : out) v = std::max(0.0, v);
    const double vol = volume(out, dx);
    if (!(vol > 0.0)) throw EmptyFilm("project_volume: nothing left to rescale");
    if (std::abs(vol - V) <= 1e-14 * V) break;
    const double f = V / vol;
    for (double& v : out) v *= f;
  }
  return out;
}

MinimizeResult minimize(double V, const FlowConfig& cfg, const Grid1D& window) {
  if (!(V > 0.0) || !std::isfinite(V)) throw InvalidParameter("minimize: V must be positive");
  if (!(cfg.tol_residual > 0.0)) throw InvalidParameter("minimize: tol_residual must be positive");
  if (cfg.tau < 0.0) throw InvalidParameter("minimize: tau must be positive");
  if (cfg.penalty_mu < 0.0) throw InvalidParameter("minimize: penalty mu must be positive");
  Flow flow(V, cfg, window);

  std::vector<std::pair<std::string, std::vector<double>>> queue;
  for (std::size_t k = 0; k < cfg.initial.size(); ++k) {
    if (!(cfg.initial[k].grid() == window))
      throw InvalidInput("minimize: warm start lives on a different grid");
    queue.emplace_back("warm" + std::to_string(k),
                       project_volume(cfg.initial[k].heights(), window.dx(), V));
  }
  for (auto& s : flow.starts()) queue.push_back(std::move(s));

  const std::size_t total_starts = std::max<std::size_t>(1, cfg.restarts) + cfg.initial.size();
  std::optional<MinimizeResult> best;
  for (std::size_t k = 0; k < total_starts; ++k) {
    std::string name;
    std::vector<double> h0;
    if (k < queue.size()) {
      name = queue[k].first;
      h0 = queue[k].second;
    } else {
      name = "random" + std::to_string(k - queue.size());
      h0 = flow.perturb(best->profile.values(), cfg.seed * 0x9E3779B97F4A7C15ULL + k);
    }
    const double abort = best ? 1.1 * best->objective : std::numeric_limits<double>::infinity();
    auto out = flow.run(std::move(h0), abort);
    if (out.aborted) continue;
    MinimizeResult r = flow.finish(out, name);
    if (!best || r.objective < best->objective) best = std::move(r);
  }
  return *best;
}

double lagrange_identity_gap(const MinimizeResult& res) {
  const auto& b = res.breakdown;
  return std::abs(res.lambda * b.V - (b.total - 0.5 * b.S)) / b.total;
}

bool support_bound_check(const MinimizeResult& res) {
  if (!(res.lambda < 1.0) || res.wetting)
    throw NotApplicable("support_bound_check: wetting regime (lambda >= 1)");
  const double bound = res.lambda * res.breakdown.S / (1.0 - res.lambda);
  return res.support_length <= 1.2 * bound;
}

std::size_t connectedness(const Profile& p, double h_floor) {
  std::size_t count = 0;
  bool inside = false;
  for (double v : p.heights()) {
    const bool pos = v > h_floor;
    if (pos && !inside) ++count;
    inside = pos;
  }
  return count;
}

double default_window_width(SurfaceKind kind, double V) {
  const double w = kind == SurfaceKind::LargeSlope ? 8.0 * std::cbrt(V) : 8.0 * std::pow(V, 0.4);
  return std::max(32.0, w);
}

std::size_t default_cells(SurfaceKind kind, double V) {
  // dx ~ 0.3 resolves the contact region; multiples of 128, within [256, 2048]
  const double w = default_window_width(kind, V);
  const auto blocks = static_cast<std::size_t>(std::ceil(w / 0.3 / 128.0));
  return std::clamp<std::size_t>(128 * blocks, 256, 2048);
}

}  // namespace islands
