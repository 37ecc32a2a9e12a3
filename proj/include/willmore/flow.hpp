#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "willmore/clifford_spectral.hpp"
#include "willmore/graph_normalization.hpp"
#include "willmore/mobius.hpp"
#include "willmore/random.hpp"
#include "willmore/surface.hpp"

namespace willmore {

// Calibrated once on the (sqrt2, 1) torus at n = 32: forward Euler on the
// dealiased flow stays stable for dt <= 0.09 h^4 (h the smallest ambient
// grid spacing). Multi-stage steps scale this by beta(s) / 2.
inline constexpr double kStabilityConstant = 0.08;

struct FlowConfig {
  double dt_init = 1e-4;
  double dt_min = 1e-12;
  double dt_max = 1e-2;
  double safety = 0.9;        // dt grows by 1/safety after 5 accepted steps in a row
  double grad_tol = 1e-2;     // stop when the L2 norm of W' falls below this
  double energy_tol = 1e-14;  // ... or when the relative energy drop over 50 steps does
  long max_steps = 200000;
  int regraph_every = 1000;   // accepted steps between regraphs; 0 disables
  bool gauge_fixing = true;
  int stages = 16;            // Runge-Kutta-Chebyshev stages (second order)
  double dealias = 2.0 / 3.0; // keep modes |m| <= dealias * n/2 in the velocity
  double stability_c = kStabilityConstant;

  void validate() const {
    if (!(dt_min > 0.0) || !(dt_init >= dt_min) || !(dt_max >= dt_init))
      throw ValidationError("flow config needs 0 < dt_min <= dt_init <= dt_max");
    if (!(safety > 0.0 && safety < 1.0)) throw ValidationError("safety factor must lie in (0, 1)");
    if (!(grad_tol > 0.0) || !(energy_tol > 0.0)) throw ValidationError("tolerances must be positive");
    if (max_steps < 0 || regraph_every < 0) throw ValidationError("step counts must be non-negative");
    if (stages < 2) throw ValidationError("the Runge-Kutta-Chebyshev scheme needs at least 2 stages");
    if (!(dealias > 0.0 && dealias <= 1.0)) throw ValidationError("dealias fraction must lie in (0, 1]");
    if (!(stability_c > 0.0)) throw ValidationError("stability constant must be positive");
  }
};

// Coefficients of the s-stage second-order Runge-Kutta-Chebyshev method with
// damping 2/13 (Sommeijer, Shampine, Verwer). Real stability interval
// [-beta, 0] with beta ~ 0.65 s^2.
struct RkcCoefficients {
  int s = 0;
  double beta = 0.0;
  std::vector<double> mu, nu, mu_tilde, gamma_tilde;  // indexed by stage j

  explicit RkcCoefficients(int stages) : s(stages) {
    const double w0 = 1.0 + (2.0 / 13.0) / (s * s);
    std::vector<double> T(s + 1), dT(s + 1), ddT(s + 1);
    T[0] = 1.0;
    T[1] = w0;
    dT[0] = 0.0;
    dT[1] = 1.0;
    ddT[0] = ddT[1] = 0.0;
    for (int j = 2; j <= s; ++j) {
      T[j] = 2.0 * w0 * T[j - 1] - T[j - 2];
      dT[j] = 2.0 * T[j - 1] + 2.0 * w0 * dT[j - 1] - dT[j - 2];
      ddT[j] = 4.0 * dT[j - 1] + 2.0 * w0 * ddT[j - 1] - ddT[j - 2];
    }
    const double w1 = dT[s] / ddT[s];
    beta = (1.0 + w0) / w1;
    std::vector<double> b(s + 1), a(s + 1);
    for (int j = 2; j <= s; ++j) b[j] = ddT[j] / (dT[j] * dT[j]);
    b[0] = b[1] = b[2];
    for (int j = 0; j <= s; ++j) a[j] = 1.0 - b[j] * T[j];
    mu.assign(s + 1, 0.0);
    nu.assign(s + 1, 0.0);
    mu_tilde.assign(s + 1, 0.0);
    gamma_tilde.assign(s + 1, 0.0);
    mu_tilde[1] = b[1] * w1;
    for (int j = 2; j <= s; ++j) {
      mu[j] = 2.0 * b[j] * w0 / b[j - 1];
      nu[j] = -b[j] / b[j - 2];
      mu_tilde[j] = 2.0 * b[j] * w1 / b[j - 1];
      gamma_tilde[j] = -a[j - 1] * mu_tilde[j];
    }
  }
};

struct FlowState {
  double time = 0.0;
  Immersion immersion;
  GeometryCache geom;
  double dt = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  long step = 0;
  int streak = 0;       // consecutive accepted steps since the last dt change
  long rejections = 0;

  static FlowState initial(const Immersion& f, const FlowConfig& cfg);
};

// Normal speed of the flow: the dealiased Willmore gradient.
inline Field flow_speed(const GeometryCache& g, double dealias) {
  Field w = willmore_gradient(g);
  if (dealias < 1.0) w = spectral(g.grid).truncate(w, dealias);
  return w;
}

inline double l2_norm(const GeometryCache& g, const Field& f) { return std::sqrt(g.integrate(f.square())); }

inline FlowState FlowState::initial(const Immersion& f, const FlowConfig& cfg) {
  if (f.ambient != Ambient::R3) throw ValidationError("the flow runs on R^3 immersions");
  cfg.validate();
  FlowState st;
  st.immersion = f;
  st.geom = geometry(f);
  st.dt = cfg.dt_init;
  st.energy = willmore_energy(st.geom);
  st.grad_norm = l2_norm(st.geom, flow_speed(st.geom, cfg.dealias));
  return st;
}

inline double min_ambient_spacing(const Immersion& f) {
  const Spectral& sp = spectral(f.grid);
  Field gu = Field::Zero(f.grid.n_u, f.grid.n_v), gv = gu;
  for (int c = 0; c < f.dim(); ++c) {
    auto [du, dv] = sp.gradient(f.x[c]);
    gu += du.square();
    gv += dv.square();
  }
  return std::min(gu.sqrt().minCoeff() * f.grid.du(), gv.sqrt().minCoeff() * f.grid.dv());
}

// dt <= c h^4 beta(s)/2, capped by dt_max.
inline double stable_dt(const Immersion& f, const FlowConfig& cfg) {
  const double h = min_ambient_spacing(f);
  const RkcCoefficients rkc(cfg.stages);
  return std::min(cfg.dt_max, cfg.stability_c * std::pow(h, 4) * 0.5 * rkc.beta);
}

namespace detail {

inline std::vector<Field> normal_velocity(const GeometryCache& g, double dealias) {
  const Field w = flow_speed(g, dealias);
  std::vector<Field> vel(3);
  for (int c = 0; c < 3; ++c) vel[c] = -w * g.normal[c];
  return vel;
}

// One RKC2 step of f' = -W'(f) nu from (f0, g0).
inline Immersion rkc_step(const Immersion& f0, const GeometryCache& g0, double dt, const RkcCoefficients& k,
                          double dealias) {
  const std::vector<Field> F0 = normal_velocity(g0, dealias);
  Immersion prev2 = f0;
  Immersion prev1 = f0;
  for (int c = 0; c < 3; ++c) prev1.x[c] = f0.x[c] + (k.mu_tilde[1] * dt) * F0[c];
  for (int j = 2; j <= k.s; ++j) {
    const std::vector<Field> Fj = normal_velocity(geometry(prev1), dealias);
    Immersion next = f0;
    const double w0 = 1.0 - k.mu[j] - k.nu[j];
    for (int c = 0; c < 3; ++c)
      next.x[c] = w0 * f0.x[c] + k.mu[j] * prev1.x[c] + k.nu[j] * prev2.x[c] + (k.mu_tilde[j] * dt) * Fj[c] +
                  (k.gamma_tilde[j] * dt) * F0[c];
    prev2 = std::move(prev1);
    prev1 = std::move(next);
  }
  return prev1;
}

}  // namespace detail

// One accepted step: propose, reject and halve dt while the energy would rise
// by more than 1e-12 relative, grow dt after 5 acceptances in a row.
inline FlowState flow_step(const FlowState& state, const FlowConfig& cfg) {
  const RkcCoefficients rkc(cfg.stages);
  const double cap = stable_dt(state.immersion, cfg);
  FlowState next = state;
  double dt = std::min(state.dt, cap);
  for (;;) {
    if (dt < cfg.dt_min) throw StepCollapse("time step fell below dt_min");
    std::optional<GeometryCache> g;
    Immersion candidate;
    try {
      candidate = detail::rkc_step(state.immersion, state.geom, dt, rkc, cfg.dealias);
      g = geometry(candidate);
    } catch (const ImmersionDegenerate&) {
      g.reset();
    }
    const double energy = g ? willmore_energy(*g) : std::numeric_limits<double>::infinity();
    if (std::isfinite(energy) && energy - state.energy <= 1e-12 * std::abs(state.energy)) {
      next.immersion = std::move(candidate);
      next.geom = std::move(*g);
      next.energy = energy;
      next.grad_norm = l2_norm(next.geom, flow_speed(next.geom, cfg.dealias));
      next.time = state.time + dt;
      next.step = state.step + 1;
      next.streak = state.streak + 1;
      next.dt = dt;
      if (next.streak >= 5) {
        next.dt = std::min(dt / cfg.safety, std::max(cap, cfg.dt_min));
        next.streak = 0;
      }
      return next;
    }
    dt *= 0.5;
    next.streak = 0;
    ++next.rejections;
  }
}

struct RegraphResult {
  FlowState state;
  Decomposition decomposition;
  double shape_change = 0.0;  // max distance between the graph reconstruction and the input's interpolant
};

// Replace the immersion by Exp_{Phi_u(T_Cl)}(v) on the frame's grid.
// With gauge fixing, the translation and dilation parts of Phi_u are undone.
inline RegraphResult regraph(const FlowState& state, const CliffordFrame& frame, bool gauge_fixing,
                             const FlowConfig& cfg = {}, const DecomposeOptions& opt = {}) {
  RegraphResult out;
  out.decomposition = decompose(frame, state.immersion, opt);
  const Decomposition& d = out.decomposition;
  const GeometryCache gb = geometry(d.gauge_base);
  Immersion f = exp_normal(d.gauge_base, gb, d.v.values);
  out.shape_change = d.reconstruction_error;
  if (gauge_fixing) {
    const Eigen::VectorXd a = frame.generator_coefficients(d.u);
    const MobiusMap undo({Translation{-Vec3(a.segment<3>(0))}, Dilation{std::exp(-a(6))}});
    f = apply_immersion(undo, f);
  }
  out.state = state;
  out.state.immersion = std::move(f);
  out.state.geom = geometry(out.state.immersion);
  out.state.energy = willmore_energy(out.state.geom);
  out.state.grad_norm = l2_norm(out.state.geom, flow_speed(out.state.geom, cfg.dealias));
  return out;
}

struct TraceRecord {
  long step = 0;
  double time = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double dt = 0.0;
  double residual = std::numeric_limits<double>::quiet_NaN();  // decomposition residual when sampled
};

struct FlowTrace {
  std::vector<TraceRecord> records;
  double max_relative_increase = -std::numeric_limits<double>::infinity();  // over accepted steps
};

enum class FlowStatus { Converged, Inconclusive };
enum class StopReason { GradTol, EnergyPlateau, MaxSteps };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::GradTol: return "grad_tol";
    case StopReason::EnergyPlateau: return "energy_plateau";
    case StopReason::MaxSteps: return "max_steps";
  }
  return {};
}

struct FlowCertificate {
  bool converged = false;
  StopReason reason = StopReason::MaxSteps;
  double energy = 0.0;
  double grad_norm = 0.0;
  long steps = 0;
  long rejections = 0;
  int regraphs = 0;
  double time = 0.0;
  double wall_seconds = 0.0;
  bool decomposed = false;
  std::string decomposition_error;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  double v_c0 = std::numeric_limits<double>::quiet_NaN();
  double v_c2 = std::numeric_limits<double>::quiet_NaN();
  double v_h2 = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
};

struct FlowRun {
  FlowTrace trace;
  FlowState final_state;
  FlowCertificate certificate;
};

using FlowObserver = std::function<void(const FlowState&)>;

// Loop flow_step until grad_norm <= grad_tol, an energy plateau, or max_steps;
// regraph every regraph_every accepted steps; certify the end state by
// decomposing it over the Clifford torus.
inline FlowRun run_flow(const Immersion& f0, const FlowConfig& cfg, const CliffordFrame& frame,
                        const FlowObserver& on_accept = {}) {
  const auto wall0 = std::chrono::steady_clock::now();
  FlowRun run;
  FlowState st = FlowState::initial(f0, cfg);
  run.trace.records.push_back({0, 0.0, st.energy, st.grad_norm, st.dt});
  int regraphs = 0;
  std::optional<StopReason> reason;
  std::vector<double> window;  // energies of the last 51 accepted states
  window.push_back(st.energy);
  if (st.grad_norm <= cfg.grad_tol) reason = StopReason::GradTol;
  while (!reason) {
    if (st.step >= cfg.max_steps) {
      reason = StopReason::MaxSteps;
      break;
    }
    FlowState next = flow_step(st, cfg);
    run.trace.max_relative_increase =
        std::max(run.trace.max_relative_increase, (next.energy - st.energy) / std::abs(st.energy));
    st = std::move(next);
    TraceRecord rec{st.step, st.time, st.energy, st.grad_norm, st.dt};
    if (cfg.regraph_every > 0 && st.step % cfg.regraph_every == 0) {
      RegraphResult rg = regraph(st, frame, cfg.gauge_fixing, cfg);
      rec.residual = rg.decomposition.residual;
      st = std::move(rg.state);
      ++regraphs;
    }
    run.trace.records.push_back(rec);
    if (on_accept) on_accept(st);
    window.push_back(st.energy);
    if (window.size() > 51) window.erase(window.begin());
    if (st.grad_norm <= cfg.grad_tol) reason = StopReason::GradTol;
    else if (window.size() == 51 && window.front() - window.back() <= cfg.energy_tol * std::abs(window.back()))
      reason = StopReason::EnergyPlateau;
  }

  FlowCertificate& cert = run.certificate;
  cert.reason = *reason;
  cert.converged = *reason != StopReason::MaxSteps;
  cert.energy = st.energy;
  cert.grad_norm = st.grad_norm;
  cert.steps = st.step;
  cert.rejections = st.rejections;
  cert.regraphs = regraphs;
  cert.time = st.time;
  try {
    const Decomposition d = decompose(frame, st.immersion);
    cert.decomposed = true;
    cert.u = d.u;
    cert.v_c0 = d.v_c0;
    cert.v_c2 = d.v_c2;
    cert.v_h2 = d.v_h2;
    cert.residual = d.residual;
  } catch (const NumericalError& e) {
    cert.decomposition_error = e.what();
  }
  cert.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  run.final_state = std::move(st);
  return run;
}

// ---- gap scan: second-order energy model around the Clifford torus ----

struct GapRow {
  int direction = 0;
  double t = 0.0;
  double excess = 0.0;        // W(Exp(t v)) - 2 pi^2
  double quadratic = 0.0;     // (t^2 / 2) * W''(v, v), W'' = w2_form / 2
  double remainder = 0.0;     // excess - quadratic
  double h2_norm2 = 0.0;      // |v|_{H^2}^2
  double w2 = 0.0;            // w2_form(v, v)
};

// The second differential of the S^3 energy ∫(1 + H^2) with H the half
// trace is half of the form (Δ+2)(Δ+4); see the constant-mode test.
inline constexpr double kSecondVariationScale = 0.5;

// Geodesic normal offset of the Clifford chart in S^3 by t*v for each
// direction and amplitude.
inline std::vector<GapRow> gap_scan(const std::vector<ScalarField>& directions, const std::vector<double>& amplitudes) {
  std::vector<GapRow> rows;
  const double two_pi2 = 2.0 * std::numbers::pi * std::numbers::pi;
  for (std::size_t d = 0; d < directions.size(); ++d) {
    const ScalarField& v = directions[d];
    const CliffordSpectralModel model(v.grid);
    const Immersion base = clifford_torus_s3(v.grid);
    const GeometryCache g = geometry(base);
    const double w2 = model.w2_form(v, v);
    const double h2 = model.h2_inner(v, v);
    for (double t : amplitudes) {
      GapRow r;
      r.direction = static_cast<int>(d);
      r.t = t;
      r.excess = willmore_energy(exp_normal(base, g, t * v.values)) - two_pi2;
      r.quadratic = 0.5 * t * t * kSecondVariationScale * w2;
      r.remainder = r.excess - r.quadratic;
      r.h2_norm2 = h2;
      r.w2 = w2;
      rows.push_back(r);
    }
  }
  return rows;
}

// A direction passes when its leftover t^2 coefficient is below this fraction
// of the model coefficient.
inline constexpr double kGapSecondOrderTolerance = 1e-4;
// Remainder order 3 within 20%.
inline constexpr double kGapSlopeFloor = 2.4;

// Remainder fit over the amplitudes of one direction.
// slope: least-squares log-log slope of |remainder|. The exact fit
// remainder = c t^2 + a t^3 + b t^4 (three or more amplitudes) gives the
// leftover second-order coefficient c; third order means c ~ 0 relative to
// the model coefficient W''/2.
struct GapFit {
  double slope = 0.0;
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double relative_c2 = 0.0;  // |c2| / (quadratic / t^2)
  double min_excess_ratio = 0.0;  // min over t of excess / ((lambda/4) t^2 |v|_{H^2}^2)
};

inline GapFit fit_gap_rows(const std::vector<GapRow>& rows, double lambda) {
  if (rows.size() < 3) throw ValidationError("remainder fit needs at least three amplitudes");
  GapFit fit;
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd A(k, 3);
  Eigen::VectorXd y(k), lx(k), ly(k);
  fit.min_excess_ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) {
    const double t = rows[i].t;
    // scaled columns keep the least-squares system well conditioned
    A(i, 0) = 1.0;
    A(i, 1) = t;
    A(i, 2) = t * t;
    y(i) = rows[i].remainder / (t * t);
    lx(i) = std::log(std::abs(t));
    ly(i) = std::log(std::abs(rows[i].remainder));
    fit.min_excess_ratio =
        std::min(fit.min_excess_ratio, rows[i].excess / (0.25 * lambda * t * t * rows[i].h2_norm2));
  }
  // exact for remainder = c2 t^2 + c3 t^3 + c4 t^4 at three amplitudes
  const Eigen::Vector3d coef = A.colPivHouseholderQr().solve(y);
  fit.c2 = coef(0);
  fit.c3 = coef(1);
  fit.c4 = coef(2);
  fit.relative_c2 = std::abs(fit.c2) / (0.5 * kSecondVariationScale * rows[0].w2);
  const double mx = lx.mean(), my = ly.mean();
  fit.slope = ((lx.array() - mx) * (ly.array() - my)).sum() / (lx.array() - mx).square().sum();
  return fit;
}

inline bool gap_ok(const GapFit& f) {
  return f.slope >= kGapSlopeFloor && f.relative_c2 <= kGapSecondOrderTolerance && f.min_excess_ratio >= 1.0;
}

// K-perp direction with |v|_{C^2} = 1 built from a seeded smooth field.
inline ScalarField gap_direction(const CliffordSpectralModel& model, std::uint64_t seed) {
  ScalarField v = model.project_Kperp(random_smooth_field(model.grid(), seed));
  v.values /= c2_norm(v);
  return v;
}

}  // namespace willmore
