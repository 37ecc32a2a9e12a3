#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "willmore/grid.hpp"

namespace willmore {

// Uniform doubles in [-1, 1) from a seed. Built directly on mt19937_64 bits
// so the stream does not depend on the standard library's distributions.
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed) : rng_(seed) {}

  double operator()() { return 2.0 * (static_cast<double>(rng_() >> 11) * 0x1.0p-53) - 1.0; }

  Eigen::Vector3d unit_vector() {
    for (;;) {
      Eigen::Vector3d v((*this)(), (*this)(), (*this)());
      const double n = v.norm();
      if (n > 0.1 && n <= 1.0) return v / n;
    }
  }

 private:
  std::mt19937_64 rng_;
};

// Random real trigonometric polynomial with modes |m_u|, |m_v| <= max_mode
// (counted in units of the grid's fundamental frequency), amplitudes decaying
// like 1/(1 + m^2 + n^2), normalized to max |value| = 1.
inline ScalarField random_smooth_field(const ParamGrid& grid, std::uint64_t seed, int max_mode = 3) {
  SeededUniform rnd(seed);
  const double wu = 2.0 * std::numbers::pi / grid.period_u;
  const double wv = 2.0 * std::numbers::pi / grid.period_v;
  Field f = Field::Zero(grid.n_u, grid.n_v);
  for (int m = 0; m <= max_mode; ++m)
    for (int n = -max_mode; n <= max_mode; ++n) {
      if (m == 0 && n < 0) continue;
      const double amp = 1.0 / (1.0 + m * m + n * n);
      const double a = amp * rnd(), b = amp * rnd();
      for (int j = 0; j < grid.n_v; ++j)
        for (int i = 0; i < grid.n_u; ++i) {
          const double phase = m * wu * grid.u(i) + n * wv * grid.v(j);
          f(i, j) += a * std::cos(phase) + b * std::sin(phase);
        }
    }
  return {grid, f / f.abs().maxCoeff()};
}

}  // namespace willmore
