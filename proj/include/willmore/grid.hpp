#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "willmore/errors.hpp"

namespace willmore {

using Field = Eigen::ArrayXXd;  // rows index u, columns index v

// Uniform periodic samples u_i = i * period_u / n_u (endpoint excluded).
struct ParamGrid {
  int n_u = 0;
  int n_v = 0;
  double period_u = 0.0;
  double period_v = 0.0;

  double du() const { return period_u / n_u; }
  double dv() const { return period_v / n_v; }
  double u(int i) const { return i * du(); }
  double v(int j) const { return j * dv(); }
  double cell_area() const { return du() * dv(); }
  int size() const { return n_u * n_v; }

  bool operator==(const ParamGrid&) const = default;
};

inline ParamGrid make_grid(int n_u, int n_v, double period_u, double period_v) {
  auto check_n = [](int n, const char* name) {
    if (n < 8 || n % 2 != 0)
      throw ValidationError(std::string(name) + " must be even and >= 8, got " + std::to_string(n));
  };
  check_n(n_u, "n_u");
  check_n(n_v, "n_v");
  if (!(period_u > 0.0) || !(period_v > 0.0) || !std::isfinite(period_u) || !std::isfinite(period_v))
    throw ValidationError("grid periods must be positive");
  return ParamGrid{n_u, n_v, period_u, period_v};
}

// Grid of the flat Clifford chart in S^3: both periods sqrt(2)*pi.
inline ParamGrid clifford_chart_grid(int n) {
  return make_grid(n, n, std::numbers::sqrt2 * std::numbers::pi, std::numbers::sqrt2 * std::numbers::pi);
}

inline ParamGrid angle_grid(int n) {
  return make_grid(n, n, 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
}

struct ScalarField {
  ParamGrid grid;
  Field values;

  ScalarField() = default;
  ScalarField(const ParamGrid& g, Field vals) : grid(g), values(std::move(vals)) {
    if (values.rows() != g.n_u || values.cols() != g.n_v)
      throw ValidationError("scalar field shape does not match grid");
  }

  static ScalarField zeros(const ParamGrid& g) { return {g, Field::Zero(g.n_u, g.n_v)}; }
  static ScalarField constant(const ParamGrid& g, double c) { return {g, Field::Constant(g.n_u, g.n_v, c)}; }

  template <class Fn>
  static ScalarField sample(const ParamGrid& g, Fn&& fn) {
    Field vals(g.n_u, g.n_v);
    for (int j = 0; j < g.n_v; ++j)
      for (int i = 0; i < g.n_u; ++i) vals(i, j) = fn(g.u(i), g.v(j));
    return {g, std::move(vals)};
  }

  double max_abs() const { return values.abs().maxCoeff(); }
};

inline void require_same_grid(const ParamGrid& a, const ParamGrid& b) {
  if (!(a == b)) throw ValidationError("grid mismatch");
}

}  // namespace willmore
