#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "willmore/grid.hpp"

namespace willmore {

using Spectrum = Eigen::ArrayXXcd;  // full n_u x n_v coefficient table

// Fourier machinery for one periodic grid, backed by FFTW real transforms.
// Spectra use the mean-normalized convention field(x) = sum_k c_k e^{ikx},
// so c_00 is the grid average. Plans use FFTW_ESTIMATE, which makes every
// transform bit-reproducible from run to run.
class Spectral {
 public:
  using Half = Eigen::ArrayXXcd;  // (n_u/2 + 1) x n_v, Hermitian half

  explicit Spectral(const ParamGrid& grid) : grid_(grid) {
    const int nu = grid.n_u, nv = grid.n_v, nh = nu / 2 + 1;
    m_u_ = mode_indices(nu);
    m_v_ = mode_indices(nv);
    k_u_ = m_u_.cast<double>() * (2.0 * std::numbers::pi / grid.period_u);
    k_v_ = m_v_.cast<double>() * (2.0 * std::numbers::pi / grid.period_v);
    real_buf_.reset(fftw_alloc_real(static_cast<std::size_t>(nu) * nv));
    cplx_buf_.reset(fftw_alloc_complex(static_cast<std::size_t>(nh) * nv));
    // Eigen's column-major (n_u x n_v) array is a row-major [n_v][n_u] array.
    fwd_ = fftw_plan_dft_r2c_2d(nv, nu, real_buf_.get(), cplx_buf_.get(), FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_2d(nv, nu, cplx_buf_.get(), real_buf_.get(), FFTW_ESTIMATE);

    const std::complex<double> I(0.0, 1.0);
    ik_u_ = Eigen::ArrayXcd(nh);
    for (int i = 0; i < nh; ++i) ik_u_(i) = (i == nu / 2) ? 0.0 : I * k_u_(i);
    ik_v_ = Eigen::ArrayXcd(nv);
    for (int j = 0; j < nv; ++j) ik_v_(j) = (j == nv / 2) ? 0.0 : I * k_v_(j);
  }
  ~Spectral() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const ParamGrid& grid() const { return grid_; }

  // Angular wavenumbers 2*pi*m/period; the Nyquist entry carries m = +n/2.
  const Eigen::ArrayXd& k_u() const { return k_u_; }
  const Eigen::ArrayXd& k_v() const { return k_v_; }
  const Eigen::ArrayXi& m_u() const { return m_u_; }
  const Eigen::ArrayXi& m_v() const { return m_v_; }

  Half forward_half(const Field& f) const {
    const int nu = grid_.n_u, nv = grid_.n_v, nh = nu / 2 + 1;
    std::copy(f.data(), f.data() + f.size(), real_buf_.get());
    fftw_execute(fwd_);
    Half out(nh, nv);
    auto* src = reinterpret_cast<std::complex<double>*>(cplx_buf_.get());
    std::copy(src, src + static_cast<std::size_t>(nh) * nv, out.data());
    return out / (static_cast<double>(nu) * nv);
  }

  Field inverse_half(const Half& c) const {
    const int nu = grid_.n_u, nv = grid_.n_v;
    auto* dst = reinterpret_cast<std::complex<double>*>(cplx_buf_.get());
    std::copy(c.data(), c.data() + c.size(), dst);
    fftw_execute(inv_);
    Field out(nu, nv);
    std::copy(real_buf_.get(), real_buf_.get() + out.size(), out.data());
    return out;
  }

  Spectrum forward(const Field& f) const {
    const int nu = grid_.n_u, nv = grid_.n_v, nh = nu / 2 + 1;
    const Half h = forward_half(f);
    Spectrum out(nu, nv);
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nh; ++i) out(i, j) = h(i, j);
      for (int i = nh; i < nu; ++i) out(i, j) = std::conj(h(nu - i, (nv - j) % nv));
    }
    return out;
  }

  // The input must be Hermitian (spectrum of a real field).
  Field inverse(const Spectrum& c) const { return inverse_half(c.topRows(grid_.n_u / 2 + 1)); }

  // Symbol of the flat Laplacian d_uu + d_vv on the full table (Nyquist kept).
  Eigen::ArrayXXd laplacian_symbol() const {
    Eigen::ArrayXXd s(grid_.n_u, grid_.n_v);
    for (int j = 0; j < grid_.n_v; ++j)
      for (int i = 0; i < grid_.n_u; ++i) s(i, j) = -(k_u_(i) * k_u_(i) + k_v_(j) * k_v_(j));
    return s;
  }

  struct Derivatives {
    Field u, v, uu, uv, vv;
  };

  // First derivatives drop the Nyquist mode; pure second derivatives keep it.
  Derivatives derivatives(const Field& f) const {
    const Half c = forward_half(f);
    const int nh = grid_.n_u / 2 + 1;
    const Eigen::ArrayXd ku2 = k_u_.head(nh).square();
    const Eigen::ArrayXd kv2 = k_v_.square();
    return {inverse_half(c.colwise() * ik_u_), inverse_half(c.rowwise() * ik_v_.transpose()),
            inverse_half(c.colwise() * (-ku2).cast<std::complex<double>>()),
            inverse_half((c.colwise() * ik_u_).rowwise() * ik_v_.transpose()),
            inverse_half(c.rowwise() * (-kv2).cast<std::complex<double>>().transpose())};
  }

  std::pair<Field, Field> gradient(const Field& f) const {
    const Half c = forward_half(f);
    return {inverse_half(c.colwise() * ik_u_), inverse_half(c.rowwise() * ik_v_.transpose())};
  }

  Field d_u(const Field& f) const { return inverse_half(forward_half(f).colwise() * ik_u_); }
  Field d_v(const Field& f) const { return inverse_half(forward_half(f).rowwise() * ik_v_.transpose()); }

  // Multiply each mode by a real symbol given on the full table; the symbol
  // must be even under k -> -k.
  Field apply_symbol(const Field& f, const Eigen::ArrayXXd& symbol) const {
    const int nh = grid_.n_u / 2 + 1;
    return inverse_half(forward_half(f) * symbol.topRows(nh).cast<std::complex<double>>());
  }

  // Zero every mode with |m_u| > keep * n_u/2 or |m_v| > keep * n_v/2.
  Field truncate(const Field& f, double keep) const {
    Half c = forward_half(f);
    const double cu = keep * grid_.n_u / 2.0, cv = keep * grid_.n_v / 2.0;
    for (int j = 0; j < grid_.n_v; ++j)
      for (int i = 0; i < c.rows(); ++i)
        if (std::abs(m_u_(i)) > cu || std::abs(m_v_(j)) > cv) c(i, j) = 0.0;
    return inverse_half(c);
  }

 private:
  struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
  };

  static Eigen::ArrayXi mode_indices(int n) {
    Eigen::ArrayXi m(n);
    for (int i = 0; i < n; ++i) m(i) = (i <= n / 2) ? i : i - n;
    return m;
  }

  ParamGrid grid_;
  Eigen::ArrayXd k_u_, k_v_;
  Eigen::ArrayXi m_u_, m_v_;
  Eigen::ArrayXcd ik_u_, ik_v_;
  std::unique_ptr<double, FftwFree> real_buf_;
  std::unique_ptr<fftw_complex, FftwFree> cplx_buf_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

// Per-thread cache so repeated calls on one grid reuse plans and buffers.
inline const Spectral& spectral(const ParamGrid& grid) {
  using Key = std::tuple<int, int, double, double>;
  thread_local std::map<Key, std::unique_ptr<Spectral>> cache;
  const Key key{grid.n_u, grid.n_v, grid.period_u, grid.period_v};
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<Spectral>(grid);
  return *slot;
}

// Band-limited trigonometric interpolant of one or more fields on a grid;
// the Nyquist mode is evaluated as a cosine so the interpolant is real.
class TrigInterpolant {
 public:
  TrigInterpolant(const ParamGrid& grid, const std::vector<Field>& fields) : grid_(grid) {
    const Spectral& sp = spectral(grid);
    coeffs_.reserve(fields.size());
    for (const Field& f : fields) coeffs_.push_back(sp.forward(f).matrix());
    k_u_ = sp.k_u();
    k_v_ = sp.k_v();
  }

  const ParamGrid& grid() const { return grid_; }
  int components() const { return static_cast<int>(coeffs_.size()); }

  struct Sample {
    Eigen::VectorXd value, d_u, d_v;
  };

  Sample eval(double u, double v) const {
    Eigen::VectorXcd bu, bu_d, bv, bv_d;
    basis(u, k_u_, grid_.n_u, bu, bu_d);
    basis(v, k_v_, grid_.n_v, bv, bv_d);
    const int nc = components();
    Sample s{Eigen::VectorXd(nc), Eigen::VectorXd(nc), Eigen::VectorXd(nc)};
    for (int c = 0; c < nc; ++c) {
      const Eigen::VectorXcd t = coeffs_[c] * bv;
      const Eigen::VectorXcd t_d = coeffs_[c] * bv_d;
      s.value(c) = (bu.transpose() * t).value().real();
      s.d_u(c) = (bu_d.transpose() * t).value().real();
      s.d_v(c) = (bu.transpose() * t_d).value().real();
    }
    return s;
  }

 private:
  static void basis(double x, const Eigen::ArrayXd& k, int n, Eigen::VectorXcd& b, Eigen::VectorXcd& db) {
    b.resize(n);
    db.resize(n);
    const std::complex<double> I(0.0, 1.0);
    for (int m = 0; m < n; ++m) {
      if (m == n / 2) {
        b(m) = std::cos(k(m) * x);
        db(m) = -k(m) * std::sin(k(m) * x);
      } else {
        b(m) = std::exp(I * (k(m) * x));
        db(m) = I * k(m) * b(m);
      }
    }
  }

  ParamGrid grid_;
  std::vector<Eigen::MatrixXcd> coeffs_;
  Eigen::ArrayXd k_u_, k_v_;
};

}  // namespace willmore
