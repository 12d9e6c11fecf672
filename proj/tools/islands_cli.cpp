// islands: solve / sweep / corrector / limit / verify.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "islands/elastic.hpp"
#include "islands/error.hpp"
#include "islands/limits.hpp"
#include "islands/optimizer.hpp"
#include "islands/scaling.hpp"
#include "islands/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace islands;

namespace {

constexpr double kCW = 0.27137725722041835;  // 7 zeta(3) / pi^3

struct RunConfig {
  std::string command;
  std::string kind = "small-slope";
  std::optional<double> volume;
  std::vector<double> volumes;
  double window = 0.0;  // 0 = auto
  std::size_t cells = 0;
  std::size_t layers = 32;
  double tol = 2e-3;
  std::size_t max_iters = 3000;
  std::size_t restarts = 4;
  std::uint64_t seed = 1;
  std::size_t jobs = 0;
  std::string out = "out";
  double penalty_mu = 0.0;  // > 0 switches to penalty mode
  std::vector<double> truncations{1.0, 2.0, 3.0};
  std::size_t corrector_cells = 256;
  double cw = kCW;
  std::vector<std::string> checks;
  bool flip_el_sign = false;
};

json to_json(const RunConfig& c) {
  json j{{"command", c.command},     {"kind", c.kind},
         {"volumes", c.volumes},     {"window", c.window},
         {"cells", c.cells},         {"layers", c.layers},
         {"tol", c.tol},             {"max_iters", c.max_iters},
         {"restarts", c.restarts},   {"seed", c.seed},
         {"jobs", c.jobs},           {"out", c.out},
         {"penalty_mu", c.penalty_mu}, {"truncations", c.truncations},
         {"corrector_cells", c.corrector_cells}, {"cw", c.cw},
         {"checks", c.checks},       {"flip_el_sign", c.flip_el_sign}};
  j["volume"] = c.volume ? json(*c.volume) : json();
  return j;
}

void merge_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw InvalidParameter("config: top level must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") c.kind = v.get<std::string>();
    else if (k == "volume") c.volume = v.is_null() ? std::nullopt : std::optional(v.get<double>());
    else if (k == "volumes") c.volumes = v.get<std::vector<double>>();
    else if (k == "window") c.window = v.get<double>();
    else if (k == "cells") c.cells = v.get<std::size_t>();
    else if (k == "layers") c.layers = v.get<std::size_t>();
    else if (k == "tol") c.tol = v.get<double>();
    else if (k == "max_iters") c.max_iters = v.get<std::size_t>();
    else if (k == "restarts") c.restarts = v.get<std::size_t>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "jobs") c.jobs = v.get<std::size_t>();
    else if (k == "out") c.out = v.get<std::string>();
    else if (k == "penalty_mu") c.penalty_mu = v.get<double>();
    else if (k == "truncations") c.truncations = v.get<std::vector<double>>();
    else if (k == "corrector_cells") c.corrector_cells = v.get<std::size_t>();
    else if (k == "cw") c.cw = v.get<double>();
    else if (k == "checks") c.checks = v.get<std::vector<std::string>>();
    else if (k == "flip_el_sign") c.flip_el_sign = v.get<bool>();
    else if (k == "command") continue;
    else throw InvalidParameter("config: unknown key '" + k + "'");
  }
}

SurfaceEnergyKind energy_kind(const RunConfig& c) {
  switch (parse_surface_kind(c.kind)) {
    case SurfaceKind::SmallSlope: return SurfaceEnergyKind::small_slope();
    case SurfaceKind::LargeSlope: return SurfaceEnergyKind::large_slope();
    case SurfaceKind::Exact: return SurfaceEnergyKind::exact();
  }
  return {};
}

FlowConfig flow_config(const RunConfig& c) {
  if (c.layers < 1) throw InvalidParameter("--layers must be >= 1");
  FlowConfig f;
  f.kind = energy_kind(c);
  f.tol_residual = c.tol;
  f.max_iters = c.max_iters;
  f.restarts = c.restarts;
  f.seed = c.seed;
  f.mesh.layers = c.layers;
  f.flip_el_sign = c.flip_el_sign;
  if (c.penalty_mu > 0.0) {
    f.volume_mode = VolumeMode::Penalty;
    f.penalty_mu = c.penalty_mu;
  }
  return f;
}

Grid1D window_for(const RunConfig& c, SurfaceKind k, double V) {
  const double w = c.window > 0.0 ? c.window : default_window_width(k, V);
  const std::size_t n = c.cells > 0 ? c.cells : default_cells(k, V);
  return Grid1D::centered(w, n);
}

// Writes `name` and name.manifest.json beside it.
void emit(const RunConfig& c, const std::string& name, const std::string& body) {
  fs::create_directories(c.out);
  const fs::path p = fs::path(c.out) / name;
  std::ofstream(p) << body;
  json m{{"file", name}, {"config", to_json(c)}};
  std::ofstream(fs::path(c.out) / (name + ".manifest.json")) << m.dump(2) << '\n';
}

json result_json(const MinimizeResult& r) {
  const auto& b = r.breakdown;
  return json{{"V", b.V},
              {"E", b.E},
              {"S", b.S},
              {"total", b.total},
              {"beta", b.beta},
              {"lambda", r.lambda},
              {"lambda_kkt", r.lambda_kkt},
              {"el_residual", r.el_residual},
              {"el_residual_rel", r.el_residual_rel},
              {"kkt_residual", r.kkt_residual},
              {"contact_slope", r.contact_slope},
              {"support_length", r.support_length},
              {"max_height", sup_norm(r.profile)},
              {"dy_energy", r.dy_energy},
              {"balance_ratio", b.S > 0.0 ? r.dy_energy / b.S : 0.0},
              {"lambda_identity_gap", lagrange_identity_gap(r)},
              {"objective", r.objective},
              {"iterations", r.iterations},
              {"descent_violations", r.descent_violations},
              {"max_volume_error", r.max_volume_error},
              {"converged", r.converged},
              {"wetting", r.wetting},
              {"seed", r.seed},
              {"start", r.start}};
}

std::string profile_svg(const Profile& p) {
  constexpr double W = 720, H = 300, pad = 30;
  const auto& g = p.grid();
  const double top = std::max(sup_norm(p), 1e-300);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<polyline fill=\"#cfe0f0\" "
        "stroke=\"steelblue\" points=\"";
  for (std::size_t i = 0; i < p.size(); ++i)
    os << pad + (g.x(i) - g.x_min()) / g.length() * (W - 2 * pad) << ','
       << H - pad - p[i] / top * (H - 2 * pad) << ' ';
  os << "\"/>\n</svg>\n";
  return os.str();
}

int cmd_solve(const RunConfig& c) {
  if (!c.volume) throw InvalidParameter("solve: --volume is required");
  const FlowConfig f = flow_config(c);
  const MinimizeResult r = minimize(*c.volume, f, window_for(c, f.kind.tag, *c.volume));
  json j = result_json(r);
  j["kind"] = to_string(f.kind.tag);
  emit(c, "result.json", j.dump(2) + "\n");
  std::ostringstream csv;
  csv.precision(17);
  write_profile_csv(csv, r.profile);
  emit(c, "profile.csv", csv.str());
  emit(c, "profile.svg", profile_svg(r.profile));
  std::cout << "V=" << r.breakdown.V << " total=" << r.breakdown.total << " beta=" << r.breakdown.beta
            << " lambda=" << r.lambda << (r.wetting ? " wetting" : "")
            << (r.converged ? " converged" : " NOT converged") << '\n';
  return r.converged ? 0 : 2;
}

int cmd_sweep(const RunConfig& c) {
  if (c.volumes.empty()) throw InvalidParameter("sweep: empty volume list");
  const FlowConfig f = flow_config(c);
  SweepOptions o;
  o.jobs = c.jobs;
  o.window = c.window;
  o.cells = c.cells;
  const SweepResult s = sweep(f.kind, c.volumes, f, o);
  std::ostringstream csv, svg;
  write_sweep_csv(csv, s);
  write_loglog_svg(svg, s);
  emit(c, "sweep.csv", csv.str());
  emit(c, "fit.json", sweep_summary_json(s) + "\n");
  emit(c, "loglog.svg", svg.str());
  std::cout << "fitted exponent: "
            << (s.fitted_exponent ? std::to_string(*s.fitted_exponent) : std::string("n/a")) << " ("
            << s.fit_points << " points)\n";
  const bool all = std::all_of(s.converged.begin(), s.converged.end(), [](char v) { return v; });
  return all ? 0 : 2;
}

int cmd_corrector(const RunConfig& c) {
  MeshControl m;
  m.layers = c.layers;
  const CorrectorResult r = corrector_cw(c.truncations, m, c.corrector_cells);
  json j{{"truncation_heights", r.truncation_heights},
         {"energies", r.energies},
         {"extrapolated", r.extrapolated},
         {"error_estimate", r.error_estimate},
         {"cells", c.corrector_cells},
         {"layers", c.layers}};
  emit(c, "corrector.json", j.dump(2) + "\n");
  std::cout << "C_W = " << r.extrapolated << " +- " << r.error_estimate << '\n';
  return 0;
}

int cmd_limit(const RunConfig& c) {
  const SurfaceKind k = parse_surface_kind(c.kind);
  if (k == SurfaceKind::Exact) throw InvalidParameter("limit: small-slope or large-slope only");
  const LimitShape shape =
      limit_minimizer(k == SurfaceKind::SmallSlope ? LimitKind::Parabola : LimitKind::Rectangle, c.cw);
  json j = json::parse(limit_shape_json(shape));
  int code = 0;
  if (!c.volumes.empty()) {
    const FlowConfig f = flow_config(c);
    std::vector<MinimizeResult> rs;
    for (double V : c.volumes) {
      rs.push_back(minimize(V, f, window_for(c, k, V)));
      if (!rs.back().converged) code = 2;
    }
    const ConvergenceRecord rec = convergence_record(rs, k, shape);
    std::ostringstream csv;
    write_convergence_csv(csv, rec);
    emit(c, "convergence.csv", csv.str());
    if (rec.volumes.size() >= 4) {
      const DecayFit d = decay_fit(rec);
      j["decay_fit"] = {{"C0", d.C0}, {"C1", d.C1}, {"monotone", d.monotone}, {"quality_ok", d.quality_ok}};
    }
  }
  emit(c, "limit.json", j.dump(2) + "\n");
  std::cout << to_string(shape.kind) << ": ell=" << shape.ell << " energy=" << shape.energy << '\n';
  return code;
}

int cmd_verify(const RunConfig& c) {
  VerifyOptions o;
  o.only = c.checks;
  o.flip_el_sign = c.flip_el_sign;
  o.seed = c.seed;
  const auto results = run_verify(o);
  bool ok = true;
  json j = json::array();
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.pass;
    j.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  emit(c, "verify.json", j.dump(2) + "\n");
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epitaxial island energy minimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> kind, out;
  std::optional<double> volume, window, tol, penalty_mu, cw;
  std::optional<std::vector<double>> volumes, truncations;
  std::optional<std::size_t> cells, layers, max_iters, restarts, jobs, corrector_cells;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> checks;
  bool flip = false;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON config file (flags override it)");
    s->add_option("--kind", kind, "small-slope | large-slope | exact");
    s->add_option("--volume", volume, "film volume");
    s->add_option("--volumes", volumes, "volume list")->delimiter(',');
    s->add_option("--window", window, "window width (default: per-volume rule)");
    s->add_option("--cells", cells, "grid cells (default: per-volume rule)");
    s->add_option("--layers", layers, "mesh layers per column");
    s->add_option("--tol", tol, "relative KKT tolerance");
    s->add_option("--max-iters", max_iters, "iteration budget per start");
    s->add_option("--restarts", restarts, "number of starts");
    s->add_option("--seed", seed, "random seed");
    s->add_option("--jobs", jobs, "sweep workers (default: all cores)");
    s->add_option("--out", out, "output directory");
    s->add_option("--penalty-mu", penalty_mu, "penalty weight; > 0 switches to penalty mode");
    s->add_flag("--flip-el-sign", flip)->group("");  // mutation testing
  };
  auto* solve = app.add_subcommand("solve", "minimize one volume");
  auto* sweep_cmd = app.add_subcommand("sweep", "volume sweep and exponent fit");
  auto* corr = app.add_subcommand("corrector", "corrector constant C_W");
  auto* limit = app.add_subcommand("limit", "limit shape and convergence record");
  auto* verify = app.add_subcommand("verify", "invariant suite");
  for (auto* s : {solve, sweep_cmd, corr, limit, verify}) common(s);
  corr->add_option("--truncations", truncations, "strip heights")->delimiter(',');
  corr->add_option("--corrector-cells", corrector_cells, "cells across the unit strip");
  limit->add_option("--cw", cw, "corrector constant");
  verify->add_option("--checks", checks, "subset of checks")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig c;
    c.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw InvalidParameter("config: cannot open " + config_path);
      merge_json(c, json::parse(in));
    }
    if (kind) c.kind = *kind;
    if (out) c.out = *out;
    if (volume) c.volume = *volume;
    if (volumes) c.volumes = *volumes;
    if (window) c.window = *window;
    if (tol) c.tol = *tol;
    if (penalty_mu) c.penalty_mu = *penalty_mu;
    if (cw) c.cw = *cw;
    if (truncations) c.truncations = *truncations;
    if (cells) c.cells = *cells;
    if (layers) c.layers = *layers;
    if (max_iters) c.max_iters = *max_iters;
    if (restarts) c.restarts = *restarts;
    if (jobs) c.jobs = *jobs;
    if (corrector_cells) c.corrector_cells = *corrector_cells;
    if (seed) c.seed = *seed;
    if (checks) c.checks = *checks;
    if (flip) c.flip_el_sign = true;
    parse_surface_kind(c.kind);

    if (c.command == "solve") return cmd_solve(c);
    if (c.command == "sweep") return cmd_sweep(c);
    if (c.command == "corrector") return cmd_corrector(c);
    if (c.command == "limit") return cmd_limit(c);
    return cmd_verify(c);
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
}
