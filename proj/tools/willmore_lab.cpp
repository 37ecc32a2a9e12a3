#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "willmore/willmore.hpp"

using namespace willmore;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi2 = 2.0 * std::numbers::pi * std::numbers::pi;

// Accepts plain numbers and "sqrtX" / "sqrt(X)".
double parse_real(const std::string& s) {
  std::string t = s;
  bool root = false;
  if (t.rfind("sqrt", 0) == 0) {
    root = true;
    t = t.substr(4);
    if (t.size() >= 2 && t.front() == '(' && t.back() == ')') t = t.substr(1, t.size() - 2);
  }
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ValidationError("not a number: " + s);
  }
  if (used != t.size()) throw ValidationError("not a number: " + s);
  if (root) {
    if (x < 0.0) throw ValidationError("square root of a negative number: " + s);
    x = std::sqrt(x);
  }
  return x;
}

std::string fixed(double x, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

bool has_output(const RunConfig& c) { return !c.output_dir.empty(); }
fs::path out_path(const RunConfig& c, const std::string& name) { return fs::path(c.output_dir) / name; }

// Unit K-perp direction (C^0 norm 1) on the frame's angle grid.
Field kperp_direction(const CliffordFrame& frame, std::uint64_t seed) {
  Field v = frame.project_Kperp(random_smooth_field(frame.grid(), seed).values);
  const double m = v.abs().maxCoeff();
  if (!(m > 0.0)) throw NumericalError("degenerate random direction");
  return v / m;
}

// ---------------------------------------------------------------- energy

int cmd_energy(const RunConfig& c) {
  const std::vector<int> ns{16, 24, 32, 48};
  std::vector<double> es;
  for (int n : ns) es.push_back(willmore_energy(revolution_torus(c.R, c.r, angle_grid(n))));
  const double best = es.back();
  std::cout << "energy " << fixed(best) << "\n";
  std::cout << "n,energy,diff_to_finest\n";
  CsvTable table({"n", "energy", "diff_to_finest"});
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double d = std::abs(es[k] - best);
    std::cout << ns[k] << "," << fixed(es[k]) << "," << (k + 1 == ns.size() ? std::string("0") : sci(d)) << "\n";
    table.row({CsvTable::cell(ns[k]), CsvTable::cell(es[k]), CsvTable::cell(d)});
  }
  if (has_output(c)) {
    write_text(out_path(c, "energy.csv"), table.str(c));
    Json j = document(c, "energy");
    j["energy"] = best;
    j["excess_over_2pi2"] = best - kTwoPi2;
    write_json(out_path(c, "energy.json"), j);
  }
  return 0;
}

// ---------------------------------------------------------------- spectrum

int cmd_spectrum(const RunConfig& c) {
  const double lambda = coercivity_lambda(c.cutoff);
  CsvTable table({"m", "n", "mu", "sigma", "h2_weight", "kernel"});
  int zero_rows = 0;
  for (const ModeRow& r : mode_table(c.cutoff)) {
    table.row({CsvTable::cell(r.m), CsvTable::cell(r.n), CsvTable::cell(r.mu), CsvTable::cell(r.sigma),
               CsvTable::cell(r.h), CsvTable::cell(r.kernel ? 1 : 0)});
    if (r.sigma == 0.0) ++zero_rows;
  }
  const KernelCrossCheck kc = kernel_cross_check(clifford_chart_grid(c.n), c.seed);
  std::cout << "modes " << table.size() << " zero_rows " << zero_rows << "\n";
  std::cout << "lambda " << fixed(lambda) << "\n";
  std::cout << "kernel_dim " << kc.kernel_dim << " generator_rank " << kc.generator_rank << " max_angle "
            << sci(kc.max_angle) << " joint_rank_with_random " << kc.joint_rank_with_random << "\n";
  if (has_output(c)) {
    write_text(out_path(c, "spectrum.csv"), table.str(c));
    Json j = document(c, "spectrum");
    j["lambda"] = lambda;
    j["zero_rows"] = zero_rows;
    j["kernel_dim"] = kc.kernel_dim;
    j["generator_rank"] = kc.generator_rank;
    j["principal_angles"] = kc.angles;
    j["max_angle"] = kc.max_angle;
    j["joint_rank_with_random"] = kc.joint_rank_with_random;
    write_json(out_path(c, "spectrum.json"), j);
  }
  return 0;
}

// ---------------------------------------------------------------- flow

Immersion flow_start(const RunConfig& c, const CliffordFrame& frame) {
  if (c.start == "clifford") return frame.base();
  if (c.start == "perturbed") {
    const Field v = c.amplitude * kperp_direction(frame, c.seed);
    return exp_normal(frame.base(), frame.geom(), v);
  }
  if (c.start == "mobius") return apply_immersion(random_mobius(c.seed, c.epsilon), frame.base());
  throw ValidationError("unknown flow start '" + c.start + "' (perturbed, clifford, mobius)");
}

int cmd_flow(const RunConfig& c) {
  c.flow.validate();
  if (c.snapshot_every < 0) throw ValidationError("snapshot_every must be non-negative");
  const CliffordFrame frame = CliffordFrame::revolution(c.n);
  const Immersion f0 = flow_start(c, frame);
  FlowObserver snap;
  if (c.snapshot_every > 0 && has_output(c))
    snap = [&](const FlowState& s) {
      if (s.step % c.snapshot_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshots/step_%08ld.obj", s.step);
        write_obj(out_path(c, name), s.immersion, &c);
      }
    };
  const FlowRun run = run_flow(f0, c.flow, frame, snap);
  const FlowCertificate& cert = run.certificate;
  const std::string status = cert.converged ? "CONVERGED" : "INCONCLUSIVE";

  std::cout << "status " << status << " (" << to_string(cert.reason) << ")\n";
  std::cout << "steps " << cert.steps << " rejections " << cert.rejections << " regraphs " << cert.regraphs << "\n";
  std::cout << "energy " << fixed(cert.energy) << " excess " << sci(cert.energy - kTwoPi2) << " grad_norm "
            << sci(cert.grad_norm) << "\n";
  if (cert.decomposed)
    std::cout << "certificate |u| " << sci(cert.u.norm()) << " v_c0 " << sci(cert.v_c0) << " v_c2 " << sci(cert.v_c2)
              << " residual " << sci(cert.residual) << "\n";
  else
    std::cout << "certificate unavailable: " << cert.decomposition_error << "\n";
  std::cout << "wall_seconds " << fixed(cert.wall_seconds, 2) << "\n";

  if (has_output(c)) {
    CsvTable trace({"step", "time", "energy", "grad_norm", "dt", "residual"});
    for (const TraceRecord& r : run.trace.records)
      trace.row({CsvTable::cell(r.step), CsvTable::cell(r.time), CsvTable::cell(r.energy), CsvTable::cell(r.grad_norm),
                 CsvTable::cell(r.dt), CsvTable::cell(r.residual)});
    write_text(out_path(c, "trace.csv"), trace.str(c));
    Json j = document(c, "flow_certificate");
    j["status"] = status;
    j["converged"] = cert.converged;
    j["stop_reason"] = to_string(cert.reason);
    j["energy"] = cert.energy;
    j["excess_over_2pi2"] = cert.energy - kTwoPi2;
    j["grad_norm"] = cert.grad_norm;
    j["steps"] = cert.steps;
    j["rejections"] = cert.rejections;
    j["regraphs"] = cert.regraphs;
    j["flow_time"] = cert.time;
    j["max_relative_energy_increase"] = run.trace.max_relative_increase;
    j["decomposed"] = cert.decomposed;
    j["decomposition_error"] = cert.decomposition_error;
    j["u"] = vector_json(cert.u);
    j["v_c0"] = cert.v_c0;
    j["v_c2"] = cert.v_c2;
    j["v_h2"] = cert.v_h2;
    j["residual"] = cert.residual;
    write_json(out_path(c, "certificate.json"), j);
    // Wall time varies between runs, so it lives outside the certificate.
    Json t;
    t["format_version"] = kFormatVersion;
    t["wall_seconds"] = cert.wall_seconds;
    write_json(out_path(c, "timing.json"), t);
    write_obj(out_path(c, "final.obj"), run.final_state.immersion, &c);
  }
  return cert.decomposed ? 0 : 3;
}

// ---------------------------------------------------------------- mesh / decompose

int cmd_mesh(const RunConfig& c) {
  const CliffordFrame frame = CliffordFrame::revolution(c.n);
  const Field v = c.amplitude * kperp_direction(frame, c.seed);
  Immersion f = exp_normal(frame.base(), frame.geom(), v);
  if (c.epsilon > 0.0) f = apply_immersion(random_mobius(c.seed, c.epsilon), f);
  const ScalarField vs{frame.grid(), v};
  const double c0 = vs.max_abs(), c2 = c2_norm(vs), h2 = frame.h2_norm(v);
  std::cout << "v_c0 " << sci(c0) << " v_c2 " << sci(c2) << " v_h2 " << sci(h2) << "\n";
  if (has_output(c)) {
    write_obj(out_path(c, "mesh.obj"), f, &c);
    Json j = document(c, "mesh");
    j["v_c0"] = c0;
    j["v_c2"] = c2;
    j["v_h2"] = h2;
    write_json(out_path(c, "mesh.json"), j);
  }
  return 0;
}

int cmd_decompose(const RunConfig& c) {
  if (c.input.empty()) throw ValidationError("decompose needs --input <mesh.obj>");
  const Immersion sigma = read_obj(c.input);
  if (sigma.grid.n_u != sigma.grid.n_v || sigma.grid.period_u != 2.0 * std::numbers::pi ||
      sigma.grid.period_v != 2.0 * std::numbers::pi)
    throw ValidationError("decompose expects a square mesh on the 2pi x 2pi angle grid");
  const CliffordFrame frame = CliffordFrame::revolution(sigma.grid.n_u);
  DecomposeOptions opt;
  opt.tol = c.tol;
  opt.delta = c.delta;
  opt.max_iterations = c.max_iterations;
  const Decomposition d = decompose(frame, sigma, opt);
  std::cout << "iterations " << d.iterations << " residual " << sci(d.residual) << " reconstruction "
            << sci(d.reconstruction_error) << "\n";
  std::cout << "|u| " << sci(d.u.norm()) << " v_c0 " << sci(d.v_c0) << " v_c2 " << sci(d.v_c2) << " v_h2 "
            << sci(d.v_h2) << "\n";
  if (has_output(c)) {
    Json j = document(c, "decomposition");
    j["u"] = vector_json(d.u);
    j["v_c0"] = d.v_c0;
    j["v_c2"] = d.v_c2;
    j["v_h2"] = d.v_h2;
    j["residual"] = d.residual;
    j["iterations"] = d.iterations;
    j["residual_history"] = d.residual_history;
    j["reconstruction_error"] = d.reconstruction_error;
    j["initial_c2"] = d.initial_c2;
    write_json(out_path(c, "decomposition.json"), j);
  }
  return 0;
}

// ---------------------------------------------------------------- gapscan

double loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const int k = static_cast<int>(t.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < k; ++i) {
    const double x = std::log(t[i]), z = std::log(std::abs(y[i]));
    sx += x;
    sy += z;
    sxx += x * x;
    sxy += x * z;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

int cmd_gapscan(const RunConfig& c) {
  if (c.count < 1) throw ValidationError("gapscan needs at least one direction");
  if (c.amplitudes.size() < 2) throw ValidationError("gapscan needs at least two amplitudes");
  for (double t : c.amplitudes)
    if (!(t > 0.0)) throw ValidationError("gapscan amplitudes must be positive");
  const ParamGrid grid = clifford_chart_grid(c.n);
  const CliffordSpectralModel model(grid);
  // Focal bound of the Clifford torus in S^3 (principal curvatures +-1).
  const double bound = 0.9 * std::atan(1.0);
  std::vector<ScalarField> dirs;
  for (int k = 0; k < c.count; ++k) dirs.push_back(gap_direction(model, c.seed + k));
  for (double t : c.amplitudes)
    if (t >= bound) throw ValidationError("gapscan amplitude exceeds the focal bound");
  const double lambda = coercivity_lambda(c.cutoff);
  const std::vector<GapRow> rows = gap_scan(dirs, c.amplitudes);

  CsvTable table({"direction", "t", "excess", "quadratic", "remainder", "h2_norm2", "lower_bound"});
  Json summary = Json::array();
  bool all_ok = true;
  for (int k = 0; k < c.count; ++k) {
    std::vector<GapRow> mine;
    for (const GapRow& r : rows) {
      if (r.direction != k) continue;
      table.row({CsvTable::cell(r.direction), CsvTable::cell(r.t), CsvTable::cell(r.excess),
                 CsvTable::cell(r.quadratic), CsvTable::cell(r.remainder), CsvTable::cell(r.h2_norm2),
                 CsvTable::cell(0.25 * lambda * r.t * r.t * r.h2_norm2)});
      mine.push_back(r);
    }
    const GapFit fit = fit_gap_rows(mine, lambda);
    const bool ok = gap_ok(fit);
    all_ok = all_ok && ok;
    std::cout << "direction " << k << " loglog_slope " << fixed(fit.slope, 3) << " t^2_defect " << sci(fit.relative_c2)
              << " t^3_coeff " << fixed(fit.c3, 3) << " excess/lower_bound " << fixed(fit.min_excess_ratio, 3)
              << (ok ? " ok" : " FAIL") << "\n";
    Json d;
    d["direction"] = k;
    d["loglog_slope"] = fit.slope;
    d["relative_t2_defect"] = fit.relative_c2;
    d["t3_coefficient"] = fit.c3;
    d["t4_coefficient"] = fit.c4;
    d["min_excess_over_lower_bound"] = fit.min_excess_ratio;
    d["ok"] = ok;
    summary.push_back(d);
  }
  std::cout << "lambda " << fixed(lambda) << "\n";
  if (has_output(c)) {
    write_text(out_path(c, "gapscan.csv"), table.str(c));
    Json j = document(c, "gapscan");
    j["lambda"] = lambda;
    j["second_variation_scale"] = kSecondVariationScale;
    j["directions"] = summary;
    j["all_ok"] = all_ok;
    write_json(out_path(c, "gapscan.json"), j);
  }
  return 0;
}

// ---------------------------------------------------------------- invariance

int cmd_invariance(const RunConfig& c) {
  if (c.count < 1) throw ValidationError("invariance needs at least one seed");
  const Immersion base = revolution_torus(std::numbers::sqrt2, 1.0, angle_grid(c.n));
  const double w0 = willmore_energy(base);
  CsvTable table({"seed", "energy", "deviation"});
  double worst = 0.0;
  for (int k = 0; k < c.count; ++k) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(k);
    const double w = willmore_energy(apply_immersion(random_mobius(seed, c.epsilon), base));
    worst = std::max(worst, std::abs(w - kTwoPi2));
    table.row({std::to_string(seed), CsvTable::cell(w), CsvTable::cell(w - kTwoPi2)});
    std::cout << "seed " << seed << " energy " << fixed(w) << " deviation " << sci(w - kTwoPi2) << "\n";
  }
  std::cout << "base_energy " << fixed(w0) << " max_deviation " << sci(worst) << "\n";
  if (has_output(c)) {
    write_text(out_path(c, "invariance.csv"), table.str(c));
    Json j = document(c, "invariance");
    j["base_energy"] = w0;
    j["max_deviation"] = worst;
    write_json(out_path(c, "invariance.json"), j);
  }
  return 0;
}

// Looks for --config before CLI11 runs, so that explicit flags override the file.
RunConfig initial_config(int argc, char** argv, bool& from_file) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    std::string path;
    if (a == "--config" && i + 1 < argc) path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw ValidationError("cannot open config " + path);
      std::stringstream ss;
      ss << in.rdbuf();
      from_file = true;
      return RunConfig::parse(ss.str());
    }
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  bool from_file = false;
  try {
    cfg = initial_config(argc, argv, from_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Willmore energy experiments around the Clifford torus"};
  app.require_subcommand(1);
  std::string config_path;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON run config (flags override it)");
    s->add_option("--out", cfg.output_dir, "output directory");
  };
  auto flow_opts = [&](CLI::App* s) {
    s->add_option("--dt-init", cfg.flow.dt_init);
    s->add_option("--dt-min", cfg.flow.dt_min);
    s->add_option("--dt-max", cfg.flow.dt_max);
    s->add_option("--safety", cfg.flow.safety);
    s->add_option("--grad-tol", cfg.flow.grad_tol);
    s->add_option("--energy-tol", cfg.flow.energy_tol);
    s->add_option("--max-steps", cfg.flow.max_steps);
    s->add_option("--regraph-every", cfg.flow.regraph_every);
    s->add_option("--gauge-fixing", cfg.flow.gauge_fixing);
    s->add_option("--stages", cfg.flow.stages);
    s->add_option("--dealias", cfg.flow.dealias);
    s->add_option("--snapshot-every", cfg.snapshot_every, "OBJ snapshot every k accepted steps");
  };

  std::vector<std::string> torus;
  auto* energy = app.add_subcommand("energy", "energy of a revolution torus with a convergence table");
  energy->add_option("--torus", torus, "radii R r (accepts sqrtX)")->expected(2);
  common(energy);

  auto* spectrum = app.add_subcommand("spectrum", "second-variation mode table, lambda, kernel cross-check");
  spectrum->add_option("--cutoff,-M", cfg.cutoff);
  spectrum->add_option("--n", cfg.n, "grid for the kernel cross-check");
  spectrum->add_option("--seed", cfg.seed);
  common(spectrum);

  auto* flow = app.add_subcommand("flow", "Willmore flow with a convergence certificate");
  flow->add_option("--n", cfg.n);
  flow->add_option("--seed", cfg.seed);
  flow->add_option("--amplitude", cfg.amplitude);
  flow->add_option("--epsilon", cfg.epsilon);
  flow->add_option("--start", cfg.start, "perturbed | clifford | mobius");
  flow_opts(flow);
  common(flow);

  auto* mesh = app.add_subcommand("mesh", "export Exp(T_Cl, amplitude v) (optionally Moebius-moved) as OBJ");
  mesh->add_option("--n", cfg.n);
  mesh->add_option("--seed", cfg.seed);
  mesh->add_option("--amplitude", cfg.amplitude);
  mesh->add_option("--epsilon", cfg.epsilon);
  common(mesh);

  auto* decompose_cmd = app.add_subcommand("decompose", "split a mesh into Moebius gauge and K-perp graph");
  decompose_cmd->add_option("--input", cfg.input);
  decompose_cmd->add_option("--tol", cfg.tol);
  decompose_cmd->add_option("--delta", cfg.delta);
  decompose_cmd->add_option("--max-iterations", cfg.max_iterations);
  common(decompose_cmd);

  auto* gapscan = app.add_subcommand("gapscan", "energy excess against the quadratic model in S^3");
  gapscan->add_option("--n", cfg.n);
  gapscan->add_option("--seed", cfg.seed);
  gapscan->add_option("--directions", cfg.count);
  gapscan->add_option("--amplitudes", cfg.amplitudes);
  gapscan->add_option("--cutoff,-M", cfg.cutoff);
  common(gapscan);

  auto* invariance = app.add_subcommand("invariance", "energy of random Moebius images of T_Cl");
  invariance->add_option("--n", cfg.n);
  invariance->add_option("--seed", cfg.seed);
  invariance->add_option("--seeds", cfg.count);
  invariance->add_option("--epsilon", cfg.epsilon);
  common(invariance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (sub == energy) {
      if (!torus.empty()) {
        cfg.R = parse_real(torus[0]);
        cfg.r = parse_real(torus[1]);
      }
      return cmd_energy(cfg);
    }
    if (sub == spectrum) return cmd_spectrum(cfg);
    if (sub == flow) return cmd_flow(cfg);
    if (sub == mesh) return cmd_mesh(cfg);
    if (sub == decompose_cmd) return cmd_decompose(cfg);
    if (sub == gapscan) return cmd_gapscan(cfg);
    if (sub == invariance) {
      // Standalone defaults: n = 64, epsilon = 0.2.
      if (!from_file && !invariance->count("--epsilon")) cfg.epsilon = 0.2;
      if (!from_file && !invariance->count("--n")) cfg.n = 64;
      return cmd_invariance(cfg);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
