#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "willmore/grid.hpp"
#include "willmore/spectral.hpp"

namespace willmore {

enum class Ambient { R3, S3 };

inline int ambient_dim(Ambient a) { return a == Ambient::R3 ? 3 : 4; }

// Map of the torus into R^3 or S^3 (unit sphere in R^4), sampled on a grid.
struct Immersion {
  ParamGrid grid;
  Ambient ambient = Ambient::R3;
  std::vector<Field> x;  // one field per ambient coordinate

  Immersion() = default;
  Immersion(const ParamGrid& g, Ambient a, std::vector<Field> coords)
      : grid(g), ambient(a), x(std::move(coords)) {
    if (static_cast<int>(x.size()) != ambient_dim(a))
      throw ValidationError("immersion coordinate count does not match ambient space");
    for (const Field& c : x)
      if (c.rows() != g.n_u || c.cols() != g.n_v) throw ValidationError("immersion shape does not match grid");
  }

  int dim() const { return ambient_dim(ambient); }

  Eigen::VectorXd point(int i, int j) const {
    Eigen::VectorXd p(dim());
    for (int c = 0; c < dim(); ++c) p(c) = x[c](i, j);
    return p;
  }
  void set_point(int i, int j, const Eigen::VectorXd& p) {
    for (int c = 0; c < dim(); ++c) x[c](i, j) = p(c);
  }

  // Largest deviation of |position| from 1 (meaningful for S^3).
  double sphere_defect() const {
    Field r2 = Field::Zero(grid.n_u, grid.n_v);
    for (const Field& c : x) r2 += c.square();
    return (r2.sqrt() - 1.0).abs().maxCoeff();
  }
};

// Max pointwise distance between two immersions sampled on the same grid.
inline double max_distance(const Immersion& a, const Immersion& b) {
  require_same_grid(a.grid, b.grid);
  Field d2 = Field::Zero(a.grid.n_u, a.grid.n_v);
  for (int c = 0; c < a.dim(); ++c) d2 += (a.x[c] - b.x[c]).square();
  return std::sqrt(d2.maxCoeff());
}

inline Immersion revolution_torus(double R, double r, const ParamGrid& grid) {
  if (!(r > 0.0) || !(R > r)) throw ValidationError("revolution torus needs R > r > 0");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (std::abs(grid.period_u - two_pi) > 1e-12 || std::abs(grid.period_v - two_pi) > 1e-12)
    throw ValidationError("revolution torus needs grid periods (2pi, 2pi)");
  std::vector<Field> x(3, Field(grid.n_u, grid.n_v));
  for (int j = 0; j < grid.n_v; ++j)
    for (int i = 0; i < grid.n_u; ++i) {
      const double u = grid.u(i), v = grid.v(j);
      const double rho = R + r * std::cos(v);
      x[0](i, j) = rho * std::cos(u);
      x[1](i, j) = rho * std::sin(u);
      x[2](i, j) = r * std::sin(v);
    }
  return {grid, Ambient::R3, std::move(x)};
}

inline void require_clifford_chart(const ParamGrid& grid) {
  constexpr double period = std::numbers::sqrt2 * std::numbers::pi;
  if (std::abs(grid.period_u - period) > 1e-12 || std::abs(grid.period_v - period) > 1e-12)
    throw ValidationError("Clifford chart needs grid periods (sqrt2*pi, sqrt2*pi)");
}

// (cos(√2a), sin(√2a), cos(√2b), sin(√2b))/√2: flat, isometric chart.
inline Immersion clifford_torus_s3(const ParamGrid& grid) {
  require_clifford_chart(grid);
  constexpr double s = std::numbers::sqrt2;
  std::vector<Field> x(4, Field(grid.n_u, grid.n_v));
  for (int j = 0; j < grid.n_v; ++j)
    for (int i = 0; i < grid.n_u; ++i) {
      const double a = s * grid.u(i), b = s * grid.v(j);
      x[0](i, j) = std::cos(a) / s;
      x[1](i, j) = std::sin(a) / s;
      x[2](i, j) = std::cos(b) / s;
      x[3](i, j) = std::sin(b) / s;
    }
  return {grid, Ambient::S3, std::move(x)};
}

struct GeometryCache {
  ParamGrid grid;
  Ambient ambient = Ambient::R3;
  Field g11, g12, g22;        // first fundamental form
  Field gi11, gi12, gi22;     // its inverse
  Field area_element;         // sqrt(det g)
  std::vector<Field> normal;  // unit normal (tangent to S^3 when ambient = S3)
  Field A11, A12, A22;        // second fundamental form
  Field H;                    // half trace g^ij A_ij
  Field A_norm2;              // |A|^2
  Field A0_norm2;             // |A°|^2 = |A|^2 - 2H^2
  Field gauss;                // intrinsic Gauss curvature (includes +1 on S^3)

  double area() const { return area_element.sum() * grid.cell_area(); }
  double integrate(const Field& f) const { return (f * area_element).sum() * grid.cell_area(); }

  double min_det_ratio() const {
    const Field det = area_element.square();
    return det.minCoeff() / det.maxCoeff();
  }
};

namespace detail {

inline std::array<Field, 3> cross3(const std::vector<Field>& a, const std::vector<Field>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Field det3(const Field& a0, const Field& a1, const Field& a2, const Field& b0, const Field& b1,
                  const Field& b2, const Field& c0, const Field& c1, const Field& c2) {
  return a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0);
}

// Vector orthogonal to a, b, c in R^4 (cofactor expansion of det[e; a; b; c]).
inline std::array<Field, 4> cross4(const std::vector<Field>& a, const std::vector<Field>& b,
                                   const std::vector<Field>& c) {
  return {det3(a[1], a[2], a[3], b[1], b[2], b[3], c[1], c[2], c[3]),
          -det3(a[0], a[2], a[3], b[0], b[2], b[3], c[0], c[2], c[3]),
          det3(a[0], a[1], a[3], b[0], b[1], b[3], c[0], c[1], c[3]),
          -det3(a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2])};
}

}  // namespace detail

// Spectral first/second derivatives -> fundamental forms and curvatures.
// On S^3 the normal is orthogonal to the position, so A_ij = f_ij . nu is the
// second fundamental form for the S^3 connection (the f-component of f_ij,
// which the S^3 connection removes, has no normal part).
inline GeometryCache geometry(const Immersion& f) {
  const Spectral& sp = spectral(f.grid);
  const int dim = f.dim();
  std::vector<Field> fu(dim), fv(dim), fuu(dim), fuv(dim), fvv(dim);
  for (int c = 0; c < dim; ++c) {
    auto d = sp.derivatives(f.x[c]);
    fu[c] = std::move(d.u);
    fv[c] = std::move(d.v);
    fuu[c] = std::move(d.uu);
    fuv[c] = std::move(d.uv);
    fvv[c] = std::move(d.vv);
  }

  GeometryCache g;
  g.grid = f.grid;
  g.ambient = f.ambient;
  const int nu = f.grid.n_u, nv = f.grid.n_v;
  g.g11 = g.g12 = g.g22 = Field::Zero(nu, nv);
  for (int c = 0; c < dim; ++c) {
    g.g11 += fu[c] * fu[c];
    g.g12 += fu[c] * fv[c];
    g.g22 += fv[c] * fv[c];
  }
  const Field det = g.g11 * g.g22 - g.g12 * g.g12;
  const double mean_det = det.mean();
  if (!(mean_det > 0.0) || !(det.minCoeff() >= 1e-10 * mean_det) || !det.allFinite())
    throw ImmersionDegenerate("metric determinant degenerates on the grid");
  g.area_element = det.sqrt();
  g.gi11 = g.g22 / det;
  g.gi12 = -g.g12 / det;
  g.gi22 = g.g11 / det;

  g.normal.assign(dim, Field());
  if (dim == 3) {
    auto n = detail::cross3(fu, fv);
    const Field len = (n[0].square() + n[1].square() + n[2].square()).sqrt();
    for (int c = 0; c < 3; ++c) g.normal[c] = n[c] / len;
  } else {
    auto n = detail::cross4(f.x, fu, fv);
    const Field len = (n[0].square() + n[1].square() + n[2].square() + n[3].square()).sqrt();
    for (int c = 0; c < 4; ++c) g.normal[c] = n[c] / len;
  }

  g.A11 = g.A12 = g.A22 = Field::Zero(nu, nv);
  for (int c = 0; c < dim; ++c) {
    g.A11 += fuu[c] * g.normal[c];
    g.A12 += fuv[c] * g.normal[c];
    g.A22 += fvv[c] * g.normal[c];
  }
  g.H = 0.5 * (g.gi11 * g.A11 + 2.0 * g.gi12 * g.A12 + g.gi22 * g.A22);
  // |A|^2 = tr((g^-1 A)^2)
  const Field s11 = g.gi11 * g.A11 + g.gi12 * g.A12;
  const Field s12 = g.gi11 * g.A12 + g.gi12 * g.A22;
  const Field s21 = g.gi12 * g.A11 + g.gi22 * g.A12;
  const Field s22 = g.gi12 * g.A12 + g.gi22 * g.A22;
  g.A_norm2 = s11 * s11 + 2.0 * s12 * s21 + s22 * s22;
  g.A0_norm2 = g.A_norm2 - 2.0 * g.H.square();
  g.gauss = (g.A11 * g.A22 - g.A12 * g.A12) / det;
  if (f.ambient == Ambient::S3) g.gauss += 1.0;
  return g;
}

// R^3: integral of H^2. S^3: integral of (1 + H^2), which equals the R^3
// energy of any stereographic image.
inline double willmore_energy(const GeometryCache& g) {
  Field integrand = g.H.square();
  if (g.ambient == Ambient::S3) integrand += 1.0;
  return g.integrate(integrand);
}

inline double willmore_energy(const Immersion& f) { return willmore_energy(geometry(f)); }

inline Field laplace_beltrami(const GeometryCache& g, const Field& phi) {
  const Spectral& sp = spectral(g.grid);
  auto [pu, pv] = sp.gradient(phi);
  const Field flux_u = g.area_element * (g.gi11 * pu + g.gi12 * pv);
  const Field flux_v = g.area_element * (g.gi12 * pu + g.gi22 * pv);
  return (sp.d_u(flux_u) + sp.d_v(flux_v)) / g.area_element;
}

inline ScalarField laplace_beltrami(const GeometryCache& g, const ScalarField& phi) {
  require_same_grid(g.grid, phi.grid);
  return {g.grid, laplace_beltrami(g, phi.values)};
}

// g(grad phi, grad psi)
inline Field gradient_dot(const GeometryCache& g, const Field& phi, const Field& psi) {
  const Spectral& sp = spectral(g.grid);
  auto [pu, pv] = sp.gradient(phi);
  auto [qu, qv] = sp.gradient(psi);
  return g.gi11 * pu * qu + g.gi12 * (pu * qv + pv * qu) + g.gi22 * pv * qv;
}

// Normal speed DH + |A°|^2 H. With this sign and the normal of geometry(),
// d/dt W(f + t phi nu) = integral of W' phi dmu (checked in the tests), so
// moving along -W' nu decreases the energy.
inline Field willmore_gradient(const GeometryCache& g) {
  return laplace_beltrami(g, g.H) + g.A0_norm2 * g.H;
}

inline ScalarField willmore_gradient(const Immersion& f) {
  const GeometryCache g = geometry(f);
  return {f.grid, willmore_gradient(g)};
}

}  // namespace willmore
