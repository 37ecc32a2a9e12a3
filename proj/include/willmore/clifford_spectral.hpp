#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <string>
#include <vector>

#include "willmore/mobius.hpp"
#include "willmore/random.hpp"
#include "willmore/surface.hpp"

namespace willmore {

// One row of the Fourier mode table of the second variation on the Clifford
// torus. m, n count periods of the flat chart (wavenumber sqrt2*m).
struct ModeRow {
  int m = 0;
  int n = 0;
  double mu = 0.0;     // Laplace eigenvalue 2(m^2 + n^2)
  double sigma = 0.0;  // (2 - mu)(4 - mu)
  double h = 0.0;      // H^2 weight (1 + mu)^2
  bool kernel = false;
};

inline double laplace_eigenvalue(int m, int n) { return 2.0 * (m * m + n * n); }
inline double form_eigenvalue(double mu) { return (2.0 - mu) * (4.0 - mu); }
inline double h2_weight(double mu) { return (1.0 + mu) * (1.0 + mu); }
inline bool is_kernel_mode(double mu) { return mu == 2.0 || mu == 4.0; }

inline std::vector<ModeRow> mode_table(int cutoff) {
  std::vector<ModeRow> rows;
  for (int m = -cutoff; m <= cutoff; ++m)
    for (int n = -cutoff; n <= cutoff; ++n) {
      const double mu = laplace_eigenvalue(m, n);
      rows.push_back({m, n, mu, form_eigenvalue(mu), h2_weight(mu), is_kernel_mode(mu)});
    }
  return rows;
}

// min sigma/h over non-kernel modes with |m|, |n| <= cutoff.
inline double coercivity_lambda(int cutoff) {
  if (cutoff < 3) throw ValidationError("coercivity cutoff must be >= 3");
  double best = std::numeric_limits<double>::infinity();
  for (const ModeRow& r : mode_table(cutoff))
    if (!r.kernel) best = std::min(best, r.sigma / r.h);
  return best;
}

// The second variation (Δ+2)(Δ+4) of the Willmore energy at the Clifford
// torus, diagonalized by Fourier modes of the flat S^3 chart. Holds the
// H^2 structure <u,v> = ∫(1-Δ)u (1-Δ)v dμ and the 8-dim kernel K.
class CliffordSpectralModel {
 public:
  explicit CliffordSpectralModel(const ParamGrid& grid) : grid_(grid) {
    require_clifford_chart(grid);
    const Spectral& sp = spectral(grid);
    laplacian_ = sp.laplacian_symbol();
    const Eigen::ArrayXXd mu = -laplacian_;
    sigma_ = (2.0 - mu) * (4.0 - mu);
    area_ = grid.period_u * grid.period_v;
    build_kernel_basis();
  }

  const ParamGrid& grid() const { return grid_; }
  double area() const { return area_; }
  // Flat-chart Laplacian symbol: -mu per mode.
  const Eigen::ArrayXXd& laplacian_symbol() const { return laplacian_; }
  const Eigen::ArrayXXd& sigma_symbol() const { return sigma_; }

  ScalarField w2_apply(const ScalarField& u) const {
    check(u);
    return {grid_, spectral(grid_).apply_symbol(u.values, sigma_)};
  }

  Field laplacian(const Field& u) const { return spectral(grid_).apply_symbol(u, laplacian_); }

  double integrate(const Field& f) const { return f.sum() * grid_.cell_area(); }

  double w2_form(const ScalarField& u, const ScalarField& v) const {
    check(u);
    check(v);
    return integrate((laplacian(u.values) + 2.0 * u.values) * (laplacian(v.values) + 4.0 * v.values));
  }

  double h2_inner(const ScalarField& u, const ScalarField& v) const {
    check(u);
    check(v);
    return integrate((u.values - laplacian(u.values)) * (v.values - laplacian(v.values)));
  }
  double h2_norm(const ScalarField& u) const { return std::sqrt(std::max(0.0, h2_inner(u, u))); }

  // cos a, sin a, cos b, sin b, then the four products (a, b = sqrt2 * chart
  // coordinates), each normalized in H^2.
  const std::vector<ScalarField>& kernel_basis() const { return kernel_; }

  Eigen::VectorXd kernel_coefficients(const ScalarField& u) const {
    Eigen::VectorXd c(8);
    for (int k = 0; k < 8; ++k) c(k) = h2_inner(u, kernel_[k]);
    return c;
  }

  ScalarField kernel_field(const Eigen::VectorXd& coeffs) const {
    Field f = Field::Zero(grid_.n_u, grid_.n_v);
    for (int k = 0; k < 8; ++k) f += coeffs(k) * kernel_[k].values;
    return {grid_, f};
  }

  ScalarField project_K(const ScalarField& u) const { return kernel_field(kernel_coefficients(u)); }
  ScalarField project_Kperp(const ScalarField& u) const {
    return {grid_, u.values - project_K(u).values};
  }

 private:
  void check(const ScalarField& u) const {
    if (!(u.grid == grid_)) throw ValidationError("field is not on this Clifford chart grid");
  }

  void build_kernel_basis() {
    constexpr double s = std::numbers::sqrt2;
    using Fn = double (*)(double, double);
    const std::array<Fn, 8> modes = {
        [](double a, double) { return std::cos(s * a); },
        [](double a, double) { return std::sin(s * a); },
        [](double, double b) { return std::cos(s * b); },
        [](double, double b) { return std::sin(s * b); },
        [](double a, double b) { return std::cos(s * a) * std::cos(s * b); },
        [](double a, double b) { return std::cos(s * a) * std::sin(s * b); },
        [](double a, double b) { return std::sin(s * a) * std::cos(s * b); },
        [](double a, double b) { return std::sin(s * a) * std::sin(s * b); },
    };
    kernel_.clear();
    for (Fn fn : modes) {
      ScalarField e = ScalarField::sample(grid_, fn);
      e.values /= h2_norm(e);
      kernel_.push_back(std::move(e));
    }
  }

  ParamGrid grid_;
  Eigen::ArrayXXd laplacian_, sigma_;
  double area_ = 0.0;
  std::vector<ScalarField> kernel_;
};

// Factor c with w_S3 = c * w_R3 for a normal speed w_R3 on the stereographic
// image of the Clifford chart; equals ±(1 - p4), the inverse conformal factor.
inline Field chart_transport_factor(const ParamGrid& grid) {
  const Immersion s3 = clifford_torus_s3(grid);
  const Immersion r3 = stereo_to_r3(s3);
  const GeometryCache gs = geometry(s3);
  const GeometryCache gr = geometry(r3);
  Field c(grid.n_u, grid.n_v);
  for (int j = 0; j < grid.n_v; ++j)
    for (int i = 0; i < grid.n_u; ++i) {
      const Vec3 x(r3.x[0](i, j), r3.x[1](i, j), r3.x[2](i, j));
      const Vec3 n(gr.normal[0](i, j), gr.normal[1](i, j), gr.normal[2](i, j));
      const Vec4 pushed = stereo_to_s3_push(x, n);
      double dot = 0.0;
      for (int k = 0; k < 4; ++k) dot += pushed(k) * gs.normal[k](i, j);
      c(i, j) = dot;
    }
  return c;
}

// Normal speeds on the S^3 Clifford chart of the ten conformal fields of R^3,
// transported through stereographic projection.
inline std::vector<ScalarField> transported_generator_fields(const ParamGrid& grid) {
  const Immersion s3 = clifford_torus_s3(grid);
  const Immersion r3 = stereo_to_r3(s3);
  const GeometryCache gs = geometry(s3);
  std::vector<ScalarField> out;
  for (const ConformalField& X : conformal_generators()) {
    Field w(grid.n_u, grid.n_v);
    for (int j = 0; j < grid.n_v; ++j)
      for (int i = 0; i < grid.n_u; ++i) {
        const Vec3 x(r3.x[0](i, j), r3.x[1](i, j), r3.x[2](i, j));
        const Vec4 V = stereo_to_s3_push(x, X(x));
        double dot = 0.0;
        for (int k = 0; k < 4; ++k) dot += V(k) * gs.normal[k](i, j);
        w(i, j) = dot;
      }
    out.emplace_back(grid, std::move(w));
  }
  return out;
}

namespace detail {

inline Eigen::MatrixXd stack_columns(const std::vector<ScalarField>& fields) {
  const Eigen::Index n = fields.front().values.size();
  Eigen::MatrixXd M(n, static_cast<Eigen::Index>(fields.size()));
  for (std::size_t k = 0; k < fields.size(); ++k)
    M.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(fields[k].values.data(), n);
  return M;
}

// Orthonormal basis of the column span, dropping singular values below
// rel_tol * sigma_max.
inline Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& M, double rel_tol, int* rank = nullptr) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  int r = 0;
  while (r < s.size() && s(r) > rel_tol * s(0)) ++r;
  if (rank) *rank = r;
  return svd.matrixU().leftCols(r);
}

}  // namespace detail

inline int numerical_rank(const std::vector<ScalarField>& fields, double rel_tol = 1e-8) {
  int r = 0;
  detail::orthonormal_span(detail::stack_columns(fields), rel_tol, &r);
  return r;
}

// Principal angles between span(A) and span(B), computed from sines so small
// angles keep full relative precision.
inline std::vector<double> principal_angles(const std::vector<ScalarField>& A, const std::vector<ScalarField>& B,
                                            double rel_tol = 1e-8) {
  const Eigen::MatrixXd Qa = detail::orthonormal_span(detail::stack_columns(A), rel_tol);
  const Eigen::MatrixXd Qb = detail::orthonormal_span(detail::stack_columns(B), rel_tol);
  const Eigen::MatrixXd residual = Qb - Qa * (Qa.transpose() * Qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  std::vector<double> angles;
  for (Eigen::Index k = svd.singularValues().size(); k-- > 0;)
    angles.push_back(std::asin(std::min(1.0, svd.singularValues()(k))));
  return angles;
}

struct KernelCrossCheck {
  int kernel_dim = 0;
  int generator_rank = 0;
  std::vector<double> angles;  // ascending
  double max_angle = 0.0;
  int joint_rank_with_random = 0;
};

inline KernelCrossCheck kernel_cross_check(const ParamGrid& grid, std::uint64_t control_seed = 11) {
  const CliffordSpectralModel model(grid);
  const auto gens = transported_generator_fields(grid);
  KernelCrossCheck r;
  r.kernel_dim = numerical_rank(model.kernel_basis());
  r.generator_rank = numerical_rank(gens);
  r.angles = principal_angles(model.kernel_basis(), gens);
  std::sort(r.angles.begin(), r.angles.end());
  r.max_angle = r.angles.empty() ? 0.0 : r.angles.back();
  auto joint = model.kernel_basis();
  joint.push_back(random_smooth_field(grid, control_seed));
  r.joint_rank_with_random = numerical_rank(joint);
  return r;
}

}  // namespace willmore
