#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "willmore/clifford_spectral.hpp"
#include "willmore/mobius.hpp"
#include "willmore/surface.hpp"

namespace willmore {

// Largest |principal curvature| over the grid.
inline double max_principal_curvature(const GeometryCache& g) {
  return (g.H.abs() + (0.5 * g.A0_norm2.max(0.0)).sqrt()).maxCoeff();
}

// Largest admissible |w| for a normal graph over this base.
inline double focal_bound(const GeometryCache& g) {
  const double kmax = max_principal_curvature(g);
  if (g.ambient == Ambient::S3) return 0.9 * std::atan2(1.0, kmax);  // geodesic focal distance
  return 0.9 / kmax;
}

// R^3: f + w nu. S^3: geodesic offset cos(w) f + sin(w) nu.
inline Immersion exp_normal(const Immersion& base, const GeometryCache& g, const Field& w) {
  require_same_grid(base.grid, g.grid);
  if (w.abs().maxCoeff() >= focal_bound(g)) throw FocalRadiusExceeded("normal offset reaches the focal radius");
  Immersion out = base;
  if (base.ambient == Ambient::R3) {
    for (int c = 0; c < 3; ++c) out.x[c] = base.x[c] + w * g.normal[c];
  } else {
    const Field cw = w.cos(), sw = w.sin();
    for (int c = 0; c < 4; ++c) out.x[c] = cw * base.x[c] + sw * g.normal[c];
  }
  return out;
}

inline Immersion exp_normal(const Immersion& base, const ScalarField& w) {
  require_same_grid(base.grid, w.grid);
  return exp_normal(base, geometry(base), w.values);
}

// max of |w| and all first and second chart derivatives.
inline double c2_norm(const ScalarField& w) {
  const auto d = spectral(w.grid).derivatives(w.values);
  return std::max({w.values.abs().maxCoeff(), d.u.abs().maxCoeff(), d.v.abs().maxCoeff(), d.uu.abs().maxCoeff(),
                   d.uv.abs().maxCoeff(), d.vv.abs().maxCoeff()});
}

struct GraphResult {
  ScalarField w;
  Field foot_u, foot_v;    // parameters on the target where each normal line lands
  double max_residual = 0.0;
};

// For every base grid point x with normal nu, solve target(q) = x + w nu for
// (q, w) by Newton on the trigonometric interpolant of the target.
inline GraphResult graph_over(const Immersion& base, const GeometryCache& g, const Immersion& target) {
  if (base.ambient != Ambient::R3 || target.ambient != Ambient::R3)
    throw ValidationError("graph_over works on R^3 immersions");
  const TrigInterpolant interp(target.grid, target.x);
  const ParamGrid& tg = target.grid;
  const double bound = focal_bound(g);
  const int nu = base.grid.n_u, nv = base.grid.n_v;
  GraphResult out{ScalarField::zeros(base.grid), Field(nu, nv), Field(nu, nv), 0.0};

  const int nt = tg.size();
  Eigen::Matrix3Xd tpts(3, nt);
  for (int j = 0; j < tg.n_v; ++j)
    for (int i = 0; i < tg.n_u; ++i) tpts.col(i + tg.n_u * j) = Vec3(target.x[0](i, j), target.x[1](i, j), target.x[2](i, j));

  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      const Vec3 x(base.x[0](i, j), base.x[1](i, j), base.x[2](i, j));
      const Vec3 n(g.normal[0](i, j), g.normal[1](i, j), g.normal[2](i, j));
      Eigen::Index best = 0;
      (tpts.colwise() - x).colwise().squaredNorm().minCoeff(&best);
      double qu = tg.u(static_cast<int>(best % tg.n_u));
      double qv = tg.v(static_cast<int>(best / tg.n_u));
      double w = (tpts.col(best) - x).dot(n);

      auto residual = [&](double a, double b, double ww, TrigInterpolant::Sample* s) {
        TrigInterpolant::Sample smp = interp.eval(a, b);
        const Vec3 r = Vec3(smp.value(0), smp.value(1), smp.value(2)) - x - ww * n;
        if (s) *s = std::move(smp);
        return r;
      };
      TrigInterpolant::Sample smp;
      Vec3 r = residual(qu, qv, w, &smp);
      const double scale = 1.0 + x.norm();
      bool converged = false;
      for (int it = 0; it < 50; ++it) {
        if (r.norm() <= 1e-13 * scale) {
          converged = true;
          break;
        }
        Eigen::Matrix3d J;
        J.col(0) = smp.d_u.head<3>();
        J.col(1) = smp.d_v.head<3>();
        J.col(2) = -n;
        const Vec3 step = J.partialPivLu().solve(-r);
        double damp = 1.0;
        bool improved = false;
        for (int k = 0; k < 12; ++k, damp *= 0.5) {
          TrigInterpolant::Sample trial;
          const Vec3 rt = residual(qu + damp * step(0), qv + damp * step(1), w + damp * step(2), &trial);
          if (rt.norm() < r.norm() || rt.norm() <= 1e-13 * scale) {
            qu += damp * step(0);
            qv += damp * step(1);
            w += damp * step(2);
            r = rt;
            smp = std::move(trial);
            improved = true;
            break;
          }
        }
        if (!improved) {
          converged = r.norm() <= 1e-11 * scale;
          break;
        }
      }
      if (!converged || !std::isfinite(w) || std::abs(w) >= bound)
        throw NotInNeighborhood("target is not a normal graph over the base near grid point (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
      out.w.values(i, j) = w;
      out.foot_u(i, j) = qu;
      out.foot_v(i, j) = qv;
      out.max_residual = std::max(out.max_residual, r.norm());
    }
  return out;
}

inline ScalarField graph_over(const Immersion& base, const Immersion& target) {
  return graph_over(base, geometry(base), target).w;
}

// Kernel machinery of the second variation expressed on an arbitrary R^3
// parametrization of the Clifford torus. Normal speeds w on the R^3 surface
// correspond to speeds c*w on its stereographic preimage in S^3; the kernel
// modes there are the eight Fourier modes with mu in {2, 4}, written as
// functions of the S^3 point so no flat chart is needed.
class CliffordFrame {
 public:
  explicit CliffordFrame(Immersion base) : base_(std::move(base)) {
    if (base_.ambient != Ambient::R3) throw ValidationError("Clifford frame needs an R^3 parametrization");
    geom_ = geometry(base_);
    s3_ = stereo_to_s3(base_);
    s3geom_ = geometry(s3_);
    const ParamGrid& grid = base_.grid;
    transport_ = Field(grid.n_u, grid.n_v);
    for (int j = 0; j < grid.n_v; ++j)
      for (int i = 0; i < grid.n_u; ++i) {
        const Vec3 x(base_.x[0](i, j), base_.x[1](i, j), base_.x[2](i, j));
        const Vec3 n(geom_.normal[0](i, j), geom_.normal[1](i, j), geom_.normal[2](i, j));
        const Vec4 pushed = stereo_to_s3_push(x, n);
        double dot = 0.0;
        for (int k = 0; k < 4; ++k) dot += pushed(k) * s3geom_.normal[k](i, j);
        transport_(i, j) = dot;
      }
    if (std::abs(willmore_energy(geom_) - 2.0 * std::numbers::pi * std::numbers::pi) > 1e-6)
      throw ValidationError("Clifford frame base is not a Clifford torus");

    constexpr double r2 = std::numbers::sqrt2;
    const Field ca = r2 * s3_.x[0], sa = r2 * s3_.x[1], cb = r2 * s3_.x[2], sb = r2 * s3_.x[3];
    const std::array<Field, 8> modes = {ca, sa, cb, sb, ca * cb, ca * sb, sa * cb, sa * sb};
    const std::array<double, 8> mu = {2, 2, 2, 2, 4, 4, 4, 4};
    for (int k = 0; k < 8; ++k) {
      weight_[k] = (1.0 + mu[k]) * (1.0 + mu[k]);
      const double norm2 = weight_[k] * s3geom_.integrate(modes[k].square());
      kernel_[k] = modes[k] / std::sqrt(norm2);
    }
    // Quadrature Gram matrix; identity up to the grid's integration error.
    Eigen::MatrixXd gram(8, 8);
    for (int k = 0; k < 8; ++k)
      for (int l = 0; l < 8; ++l) gram(k, l) = weight_[k] * s3geom_.integrate(kernel_[k] * kernel_[l]);
    gram_ = gram.partialPivLu();

    Eigen::MatrixXd G(8, 10);
    const auto gens = conformal_generators();
    for (int gi = 0; gi < 10; ++gi) G.col(gi) = coefficients(normal_component(gens[gi], base_, geom_));
    gen_to_kernel_ = G;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (int k = 0; k < s.size(); ++k)
      if (s(k) > 1e-8 * s(0)) inv(k) = 1.0 / s(k);
    generator_rank_ = static_cast<int>((inv.array() != 0.0).count());
    kernel_to_gen_ = svd.matrixV().leftCols(s.size()) * inv.asDiagonal() * svd.matrixU().transpose();
  }

  static CliffordFrame revolution(int n) { return CliffordFrame(revolution_torus(std::numbers::sqrt2, 1.0, angle_grid(n))); }

  const Immersion& base() const { return base_; }
  const GeometryCache& geom() const { return geom_; }
  const GeometryCache& s3_geom() const { return s3geom_; }
  const ParamGrid& grid() const { return base_.grid; }
  const Field& transport() const { return transport_; }
  int generator_rank() const { return generator_rank_; }
  // 8 x 10: kernel coefficients of each generator's normal speed.
  const Eigen::MatrixXd& generator_matrix() const { return gen_to_kernel_; }

  // H^2-orthonormal kernel basis as S^3 speeds on this grid.
  const std::array<Field, 8>& kernel_s3() const { return kernel_; }

  // Kernel coefficients from <c w, e_k>_{H^2} = (1+mu_k)^2 ∫ c w e_k dmu_S3,
  // solved against the Gram matrix so that project_K is exactly idempotent.
  Eigen::VectorXd coefficients(const Field& w_r3) const {
    const Field ws = transport_ * w_r3;
    Eigen::VectorXd c(8);
    for (int k = 0; k < 8; ++k) c(k) = weight_[k] * s3geom_.integrate(ws * kernel_[k]);
    return gram_.solve(c);
  }

  // R^3 normal speed whose S^3 image is sum_k u_k e_k.
  Field kernel_field(const Eigen::VectorXd& u) const {
    Field f = Field::Zero(grid().n_u, grid().n_v);
    for (int k = 0; k < 8; ++k) f += u(k) * kernel_[k];
    return f / transport_;
  }

  Field project_K(const Field& w_r3) const { return kernel_field(coefficients(w_r3)); }
  Field project_Kperp(const Field& w_r3) const { return w_r3 - project_K(w_r3); }

  double h2_norm(const Field& w_r3) const {
    const Field ws = transport_ * w_r3;
    const Field lw = ws - laplace_beltrami(s3geom_, ws);
    return std::sqrt(s3geom_.integrate(lw.square()));
  }

  // Finite Moebius map whose motion of the base has normal speed t * sum u_k e_k
  // to first order: minimum-norm generator coefficients, then translation ∘
  // rotation ∘ dilation ∘ special conformal (special conformal acts first).
  MobiusMap mobius_from_kernel(const Eigen::VectorXd& u, double t = 1.0) const {
    if (u.size() != 8) throw ValidationError("kernel coefficient vector must have 8 entries");
    Field s3_speed = Field::Zero(grid().n_u, grid().n_v);
    for (int k = 0; k < 8; ++k) s3_speed += (t * u(k)) * kernel_[k];
    if (s3_speed.abs().maxCoeff() > 0.2) throw ValidationError("kernel motion too large for mobius_from_kernel");
    return mobius_from_generators(kernel_to_gen_ * (t * u));
  }

  // Generator coefficients -> finite map (ordering as conformal_generators()).
  static MobiusMap mobius_from_generators(const Eigen::VectorXd& a) {
    std::vector<MobiusPrimitive> steps;
    const Vec3 special = a.segment<3>(7);
    if (special.norm() > 0.0) {
      const SphereInversion inv{Vec3::Zero(), 1.0};
      steps.push_back(inv);
      steps.push_back(Translation{0.5 * special});
      steps.push_back(inv);
    }
    if (a(6) != 0.0) steps.push_back(Dilation{std::exp(a(6))});
    const Vec3 rot = a.segment<3>(3);
    if (rot.norm() > 0.0) steps.push_back(Rotation{rot.normalized(), rot.norm()});
    const Vec3 tr = a.segment<3>(0);
    if (tr.norm() > 0.0) steps.push_back(Translation{tr});
    return MobiusMap(std::move(steps));
  }

  Eigen::VectorXd generator_coefficients(const Eigen::VectorXd& u) const { return kernel_to_gen_ * u; }

 private:
  Immersion base_;
  GeometryCache geom_;
  Immersion s3_;
  GeometryCache s3geom_;
  Field transport_;
  std::array<Field, 8> kernel_;
  std::array<double, 8> weight_{};
  Eigen::PartialPivLU<Eigen::MatrixXd> gram_;
  Eigen::MatrixXd gen_to_kernel_, kernel_to_gen_;
  int generator_rank_ = 0;
};

struct DecomposeOptions {
  double tol = 1e-10;      // stop when the kernel residual |P_K v|_{H^2} <= tol
  double delta = 0.3;      // admissible C^2 size of the initial graph function (half the observed failure radius)
  int max_iterations = 30;
};

struct Decomposition {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);  // kernel coefficients
  MobiusMap phi;                                 // Phi_u
  Immersion gauge_base;                          // Phi_u(T_Cl) on the frame grid
  ScalarField v;                                 // K-perp graph function over gauge_base
  double residual = 0.0;                         // |P_K v|_{H^2}
  int iterations = 0;
  std::vector<double> residual_history;
  double reconstruction_error = 0.0;
  double initial_c2 = 0.0;
  double v_c0 = 0.0, v_c2 = 0.0, v_h2 = 0.0;
};

// Write sigma = Exp_{Phi_u(T_Cl)}(v) with P_K v = 0 via u <- u + P_K(v(u)),
// the Newton iteration with the derivative frozen at -Id_K.
inline Decomposition decompose(const CliffordFrame& frame, const Immersion& sigma, const DecomposeOptions& opt = {}) {
  Decomposition d;
  const ScalarField w0 = graph_over(frame.base(), frame.geom(), sigma).w;
  d.initial_c2 = c2_norm(w0);
  if (d.initial_c2 > opt.delta)
    throw NotInNeighborhood("input is farther than delta from the Clifford torus in C^2");

  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const MobiusMap phi = frame.mobius_from_kernel(u);
    Immersion base = apply_immersion(phi, frame.base());
    const GeometryCache g = geometry(base);
    GraphResult gr = graph_over(base, g, sigma);
    const Eigen::VectorXd F = frame.coefficients(gr.w.values);
    const double res = F.norm();
    d.residual_history.push_back(res);
    if (res <= opt.tol) {
      d.u = u;
      d.phi = phi;
      d.v = std::move(gr.w);
      d.residual = res;
      d.iterations = it;
      d.reconstruction_error = gr.max_residual;
      d.gauge_base = std::move(base);
      d.v_c0 = d.v.max_abs();
      d.v_c2 = c2_norm(d.v);
      d.v_h2 = frame.h2_norm(d.v.values);
      return d;
    }
    u += F;
  }
  throw NoConvergence("decomposition did not converge within the iteration limit");
}

}  // namespace willmore
