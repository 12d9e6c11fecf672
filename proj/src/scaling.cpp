#include "islands/scaling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "islands/error.hpp"

namespace islands {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Indices of converged island points within a decade of the largest such V.
std::vector<std::size_t> top_decade(const SweepResult& s) {
  std::vector<std::size_t> idx;
  double vmax = 0.0;
  for (std::size_t i = 0; i < s.volumes.size(); ++i)
    if (s.converged[i] && !s.wetting[i]) vmax = std::max(vmax, s.volumes[i]);
  if (vmax == 0.0) return idx;
  for (std::size_t i = 0; i < s.volumes.size(); ++i)
    if (s.converged[i] && !s.wetting[i] && s.volumes[i] >= vmax / 10.0 * (1.0 - 1e-12))
      idx.push_back(i);
  return idx;
}

void resize(SweepResult& r, std::size_t n) {
  for (auto* v : {&r.E, &r.S, &r.totals, &r.betas, &r.lambdas, &r.maxheights, &r.supports})
    v->assign(n, kNaN);
  r.converged.assign(n, 0);
  r.wetting.assign(n, 0);
  r.results.assign(n, MinimizeResult{});
}

}  // namespace

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw InvalidParameter("logspace: need 0 < lo <= hi, n >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("loglog_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) throw InvalidParameter("loglog_slope: abscissae coincide");
  return sxy / sxx;
}

void finalize_sweep(SweepResult& r, double theta, double mesh_slack) {
  for (std::size_t i = 1; i < r.volumes.size(); ++i)
    if (!(r.volumes[i] > r.volumes[i - 1]))
      throw InvalidInput("sweep: volumes must be strictly increasing");

  const auto idx = top_decade(r);
  r.fit_points = idx.size();
  r.fitted_exponent.reset();
  if (idx.size() >= 2) {
    std::vector<double> x, y;
    for (auto i : idx) {
      x.push_back(r.volumes[i]);
      y.push_back(r.totals[i]);
    }
    r.fitted_exponent = loglog_slope(x, y);
  }

  r.vbar = {};
  const double cut = 1.0 - theta - mesh_slack;
  for (std::size_t i = 0; i < r.volumes.size(); ++i) {
    if (!(r.betas[i] < cut)) continue;
    r.vbar.found = true;
    r.vbar.lo = i > 0 ? r.volumes[i - 1] : 0.0;
    r.vbar.hi = r.volumes[i];
    r.vbar.estimate = 0.5 * (r.vbar.lo + r.vbar.hi);
    r.vbar.uncertainty = r.vbar.hi - r.vbar.lo;
    break;
  }
}

SweepResult sweep(SurfaceEnergyKind kind, std::span<const double> volumes, const FlowConfig& cfg,
                  const SweepOptions& opt) {
  if (volumes.empty()) throw InvalidParameter("sweep: empty volume list");
  for (double V : volumes)
    if (!(V > 0.0) || !std::isfinite(V)) throw InvalidParameter("sweep: volumes must be positive");
  for (std::size_t i = 1; i < volumes.size(); ++i)
    if (!(volumes[i] > volumes[i - 1]))
      throw InvalidParameter("sweep: volumes must be strictly increasing");

  SweepResult r;
  r.kind = kind.tag;
  r.volumes.assign(volumes.begin(), volumes.end());
  const std::size_t n = volumes.size();
  resize(r, n);

  FlowConfig base = cfg;
  base.kind = kind;
  base.observer = nullptr;  // not thread-safe in general

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const double V = r.volumes[i];
      const double w = opt.window > 0.0 ? opt.window : default_window_width(kind.tag, V);
      const std::size_t c = opt.cells > 0 ? opt.cells : default_cells(kind.tag, V);
      try {
        MinimizeResult m = minimize(V, base, Grid1D::centered(w, c));
        const auto& b = m.breakdown;
        r.E[i] = b.E;
        r.S[i] = b.S;
        r.totals[i] = b.total;
        r.betas[i] = b.beta;
        r.lambdas[i] = m.lambda;
        r.maxheights[i] = sup_norm(m.profile);
        r.supports[i] = m.support_length;
        r.converged[i] = m.converged;
        r.wetting[i] = m.wetting;
        r.results[i] = std::move(m);
      } catch (const SolverFailure&) {
        // left unconverged, NaN columns
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };

  std::size_t jobs = opt.jobs > 0 ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (err) std::rethrow_exception(err);

  finalize_sweep(r, opt.theta, opt.mesh_slack);
  return r;
}

double concavity_gap(const SweepResult& s) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.volumes.size(); ++i)
    if (s.converged[i] && std::isfinite(s.totals[i])) idx.push_back(i);
  if (idx.size() < 3) throw InvalidParameter("concavity_gap: need >= 3 converged volumes");
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
    const double v0 = s.volumes[idx[k - 1]], v1 = s.volumes[idx[k]], v2 = s.volumes[idx[k + 1]];
    const double f0 = s.totals[idx[k - 1]], f1 = s.totals[idx[k]], f2 = s.totals[idx[k + 1]];
    const double t = (v1 - v0) / (v2 - v0);
    const double chord = (1.0 - t) * f0 + t * f2;
    gap = std::max(gap, 2.0 * (chord - f1) / f1);
  }
  return gap;
}

double maxheight_law(const SweepResult& s) {
  const auto idx = top_decade(s);
  if (idx.size() < 2) throw InvalidParameter("maxheight_law: need >= 2 converged island volumes");
  std::vector<double> x, y;
  for (auto i : idx) {
    x.push_back(s.volumes[i]);
    y.push_back(s.maxheights[i]);
  }
  return loglog_slope(x, y);
}

double beta_monotonicity_gap(const SweepResult& s) {
  double gap = 0.0, prev = kNaN;
  for (std::size_t i = 0; i < s.volumes.size(); ++i) {
    if (!s.converged[i] || !std::isfinite(s.betas[i])) continue;
    if (std::isfinite(prev)) gap = std::max(gap, (s.betas[i] - prev) / prev);
    prev = s.betas[i];
  }
  return gap;
}

const char* to_string(Construction k) {
  switch (k) {
    case Construction::ThinLayer: return "thin-layer";
    case Construction::Pyramid: return "pyramid";
    case Construction::BoxLargeSlope: return "box-large-slope";
  }
  return "?";
}

Construction3D construct_3d(Construction kind, double V, double eps) {
  if (!(V > 0.0) || !std::isfinite(V)) throw InvalidParameter("construct_3d: V must be positive");
  Construction3D c{kind, V};
  switch (kind) {
    case Construction::ThinLayer: {
      if (!(eps > 0.0)) throw InvalidParameter("construct_3d: thin layer needs eps > 0");
      // Square plateau of side 2L, height eps, with linear ramps of width eps:
      // volume 4 eps L^2 + 4 eps^2 L + (4/3) eps^3.
      const double v0 = 4.0 / 3.0 * eps * eps * eps;
      if (V < v0) throw InvalidParameter("construct_3d: V below the ramp volume 4 eps^3 / 3");
      const double a = 4.0 * eps, b = 4.0 * eps * eps, cc = v0 - V;
      c.L = (-b + std::sqrt(b * b - 4.0 * a * cc)) / (2.0 * a);
      c.H = eps;
      c.eps = eps;
      c.E_analytic = 2.0 * V;
      c.S_analytic = 4.0 * (std::sqrt(V * eps) + eps * eps);
      break;
    }
    case Construction::Pyramid:
      c.L = std::pow(V, 2.0 / 7.0);
      c.H = 0.75 * std::pow(V, 3.0 / 7.0);
      c.E_analytic = 8.0 * c.L * c.L * c.L;
      c.S_analytic = 4.0 * c.H * c.H;
      break;
    case Construction::BoxLargeSlope:
      c.L = std::pow(V, 0.25);
      c.H = std::sqrt(V);
      c.E_analytic = 5.0 / 6.0 * c.L * c.L * c.L;
      c.S_analytic = 4.0 * c.L * c.H;
      break;
  }
  c.total = c.E_analytic + c.S_analytic;
  return c;
}

void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << "V,E,S,total,beta,lambda,maxh,support,converged\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.volumes.size(); ++i)
    os << s.volumes[i] << ',' << s.E[i] << ',' << s.S[i] << ',' << s.totals[i] << ','
       << s.betas[i] << ',' << s.lambdas[i] << ',' << s.maxheights[i] << ',' << s.supports[i]
       << ',' << (s.converged[i] ? 1 : 0) << '\n';
}

std::string sweep_summary_json(const SweepResult& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["volumes"] = s.volumes;
  j["fit_points"] = s.fit_points;
  j["fitted_exponent"] = s.fitted_exponent ? nlohmann::json(*s.fitted_exponent) : nlohmann::json();
  j["converged"] = std::count(s.converged.begin(), s.converged.end(), 1);
  nlohmann::json vb;
  vb["found"] = s.vbar.found;
  if (s.vbar.found) {
    vb["lo"] = s.vbar.lo;
    vb["hi"] = s.vbar.hi;
    vb["estimate"] = s.vbar.estimate;
    vb["uncertainty"] = s.vbar.uncertainty;
  }
  j["vbar"] = vb;
  try {
    j["maxheight_exponent"] = maxheight_law(s);
  } catch (const InvalidParameter&) {
    j["maxheight_exponent"] = nullptr;
  }
  try {
    j["concavity_gap"] = concavity_gap(s);
  } catch (const InvalidParameter&) {
    j["concavity_gap"] = nullptr;
  }
  j["beta_monotonicity_gap"] = beta_monotonicity_gap(s);
  return j.dump(2);
}

void write_loglog_svg(std::ostream& os, const SweepResult& s) {
  constexpr double W = 640, H = 480, pad = 60;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < s.volumes.size(); ++i)
    if (std::isfinite(s.totals[i]) && s.totals[i] > 0.0)
      pts.emplace_back(std::log10(s.volumes[i]), std::log10(s.totals[i]));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (pts.empty()) {
    os << "</svg>\n";
    return;
  }
  double x0 = pts.front().first, x1 = x0, y0 = pts.front().second, y1 = y0;
  for (auto [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad); };
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
     << H - pad << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">log10 V</text>\n"
     << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
     << ")\" text-anchor=\"middle\">log10 total</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (auto [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
  os << "\"/>\n";
  for (auto [x, y] : pts)
    os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  if (s.fitted_exponent) {
    const auto idx = top_decade(s);
    const double xa = std::log10(s.volumes[idx.front()]), xb = std::log10(s.volumes[idx.back()]);
    double c = 0.0;
    for (auto i : idx) c += std::log10(s.totals[i]) - *s.fitted_exponent * std::log10(s.volumes[i]);
    c /= static_cast<double>(idx.size());
    os << "<line x1=\"" << px(xa) << "\" y1=\"" << py(c + *s.fitted_exponent * xa) << "\" x2=\""
       << px(xb) << "\" y2=\"" << py(c + *s.fitted_exponent * xb)
       << "\" stroke=\"firebrick\" stroke-dasharray=\"6 4\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - pad << "\" y=\"" << pad << "\" text-anchor=\"end\">slope "
       << *s.fitted_exponent << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace islands
