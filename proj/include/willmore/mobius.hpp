#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "willmore/random.hpp"
#include "willmore/surface.hpp"

namespace willmore {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

struct Translation {
  Vec3 offset;
};
struct Rotation {
  Vec3 axis;  // unit
  double angle;
};
struct Dilation {
  double scale;  // > 0
};
struct SphereInversion {
  Vec3 center;
  double radius;
};

using MobiusPrimitive = std::variant<Translation, Rotation, Dilation, SphereInversion>;

inline Vec3 rotate(const Vec3& axis, double angle, const Vec3& p) {
  const double c = std::cos(angle), s = std::sin(angle);
  return c * p + s * axis.cross(p) + (1.0 - c) * axis.dot(p) * axis;
}

// Finite Moebius map of R^3 stored as primitives in application order:
// steps[0] acts first.
class MobiusMap {
 public:
  MobiusMap() = default;
  explicit MobiusMap(std::vector<MobiusPrimitive> steps, double exclusion_radius = 1e-3)
      : steps_(std::move(steps)), rho_min_(exclusion_radius) {}

  static MobiusMap identity() { return {}; }

  const std::vector<MobiusPrimitive>& steps() const { return steps_; }
  double exclusion_radius() const { return rho_min_; }
  void set_exclusion_radius(double r) { rho_min_ = r; }
  bool is_identity() const { return steps_.empty(); }

  // this ∘ first
  MobiusMap after(const MobiusMap& first) const {
    std::vector<MobiusPrimitive> s = first.steps_;
    s.insert(s.end(), steps_.begin(), steps_.end());
    return MobiusMap(std::move(s), std::min(rho_min_, first.rho_min_));
  }

  MobiusMap then(const MobiusPrimitive& p) const {
    MobiusMap m = *this;
    m.steps_.push_back(p);
    return m;
  }

  MobiusMap inverse() const {
    std::vector<MobiusPrimitive> s;
    s.reserve(steps_.size());
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) s.push_back(invert(*it));
    return MobiusMap(std::move(s), rho_min_);
  }

  Vec3 apply(const Vec3& p) const {
    Vec3 q = p;
    for (const auto& step : steps_) q = apply_step(step, q, rho_min_);
    return q;
  }

  // Preimages of the inversion centers (finite ones only).
  std::vector<Vec3> exclusion_set() const {
    std::vector<Vec3> out;
    for (std::size_t k = 0; k < steps_.size(); ++k) {
      const auto* inv = std::get_if<SphereInversion>(&steps_[k]);
      if (!inv) continue;
      Vec3 q = inv->center;
      bool finite = true;
      for (std::size_t m = k; m-- > 0;) {
        const auto back = invert(steps_[m]);
        if (const auto* bi = std::get_if<SphereInversion>(&back)) {
          if ((q - bi->center).norm() < 1e-300) {
            finite = false;
            break;
          }
        }
        q = apply_step(back, q, 0.0);
      }
      if (finite) out.push_back(q);
    }
    return out;
  }

  static MobiusPrimitive invert(const MobiusPrimitive& p) {
    return std::visit(
        [](const auto& s) -> MobiusPrimitive {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Translation>) return Translation{-s.offset};
          else if constexpr (std::is_same_v<T, Rotation>) return Rotation{s.axis, -s.angle};
          else if constexpr (std::is_same_v<T, Dilation>) return Dilation{1.0 / s.scale};
          else return s;
        },
        p);
  }

  static Vec3 apply_step(const MobiusPrimitive& step, const Vec3& q, double rho_min) {
    return std::visit(
        [&](const auto& s) -> Vec3 {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Translation>) return q + s.offset;
          else if constexpr (std::is_same_v<T, Rotation>) return rotate(s.axis, s.angle, q);
          else if constexpr (std::is_same_v<T, Dilation>) return s.scale * q;
          else {
            const Vec3 d = q - s.center;
            const double r2 = d.squaredNorm();
            if (!(r2 > rho_min * rho_min) || r2 == 0.0)
              throw InversionSingularity("point within exclusion radius of an inversion center");
            return s.center + (s.radius * s.radius / r2) * d;
          }
        },
        step);
  }

 private:
  std::vector<MobiusPrimitive> steps_;
  double rho_min_ = 1e-3;
};

inline MobiusMap compose(const MobiusMap& outer, const MobiusMap& inner) { return outer.after(inner); }

inline Vec3 apply(const MobiusMap& m, const Vec3& p) { return m.apply(p); }

inline Immersion apply_immersion(const MobiusMap& m, const Immersion& f) {
  if (f.ambient != Ambient::R3) throw ValidationError("Moebius maps act on R^3 immersions");
  Immersion out = f;
  for (int j = 0; j < f.grid.n_v; ++j)
    for (int i = 0; i < f.grid.n_u; ++i) {
      const Vec3 q = m.apply(Vec3(f.x[0](i, j), f.x[1](i, j), f.x[2](i, j)));
      out.x[0](i, j) = q(0);
      out.x[1](i, j) = q(1);
      out.x[2](i, j) = q(2);
    }
  return out;
}

// Translation(eps a) ∘ Rotation(axis, eps theta) ∘ Dilation(e^{eps s}) ∘ C,
// where C = I ∘ Translation(eps b) ∘ I conjugates a translation by the
// inversion I in the sphere of radius 4 about a center c with |c| = 4, so
// every inversion center stays at distance > 1 from the Clifford torus.
inline MobiusMap random_mobius(std::uint64_t seed, double eps) {
  if (!(eps >= 0.0) || eps > 0.5) throw ValidationError("random_mobius magnitude must lie in [0, 0.5]");
  if (eps == 0.0) return MobiusMap::identity();
  SeededUniform rnd(seed);
  const Vec3 a(rnd(), rnd(), rnd());
  const Vec3 axis = rnd.unit_vector();
  const double theta = rnd();
  const double s = rnd();
  const Vec3 c = 4.0 * rnd.unit_vector();
  const Vec3 b(rnd(), rnd(), rnd());
  const SphereInversion inv{c, 4.0};
  return MobiusMap({inv, Translation{eps * b}, inv, Dilation{std::exp(eps * s)}, Rotation{axis, eps * theta},
                    Translation{eps * a}});
}

// ---- stereographic projection from the pole (0,0,0,1) ----
// stereo_to_r3(p) = (p1, p2, p3) / (1 - p4); the origin of R^3 goes to the
// antipode (0,0,0,-1). The Clifford chart of S^3 projects onto the
// revolution torus with radii (sqrt2, 1).

inline Vec4 stereo_to_s3(const Vec3& x) {
  const double r2 = x.squaredNorm();
  const double s = r2 + 1.0;
  return Vec4(2.0 * x(0) / s, 2.0 * x(1) / s, 2.0 * x(2) / s, (r2 - 1.0) / s);
}

inline Vec3 stereo_to_r3(const Vec4& p) {
  const double d = 1.0 - p(3);
  if (!(d > 1e-12)) throw PoleSingularity("stereographic projection of the pole");
  return p.head<3>() / d;
}

// Differential of stereo_to_s3 at x applied to a vector X.
inline Vec4 stereo_to_s3_push(const Vec3& x, const Vec3& X) {
  const double s = x.squaredNorm() + 1.0;
  const double xX = x.dot(X);
  Vec4 out;
  out.head<3>() = 2.0 * X / s - 4.0 * xX * x / (s * s);
  out(3) = 4.0 * xX / (s * s);
  return out;
}

inline Immersion stereo_to_s3(const Immersion& f) {
  if (f.ambient != Ambient::R3) throw ValidationError("expected an R^3 immersion");
  std::vector<Field> x(4, Field(f.grid.n_u, f.grid.n_v));
  for (int j = 0; j < f.grid.n_v; ++j)
    for (int i = 0; i < f.grid.n_u; ++i) {
      const Vec4 p = stereo_to_s3(Vec3(f.x[0](i, j), f.x[1](i, j), f.x[2](i, j)));
      for (int c = 0; c < 4; ++c) x[c](i, j) = p(c);
    }
  return {f.grid, Ambient::S3, std::move(x)};
}

inline Immersion stereo_to_r3(const Immersion& f) {
  if (f.ambient != Ambient::S3) throw ValidationError("expected an S^3 immersion");
  std::vector<Field> x(3, Field(f.grid.n_u, f.grid.n_v));
  for (int j = 0; j < f.grid.n_v; ++j)
    for (int i = 0; i < f.grid.n_u; ++i) {
      const Vec3 q = stereo_to_r3(Vec4(f.x[0](i, j), f.x[1](i, j), f.x[2](i, j), f.x[3](i, j)));
      for (int c = 0; c < 3; ++c) x[c](i, j) = q(c);
    }
  return {f.grid, Ambient::R3, std::move(x)};
}

// Stereographic image of the flat Clifford chart: the revolution torus
// (sqrt2, 1) in a conformal parametrization sharing the S^3 chart's grid.
inline Immersion clifford_torus_r3(const ParamGrid& grid) { return stereo_to_r3(clifford_torus_s3(grid)); }

// ---- infinitesimal Moebius transformations ----

enum class GeneratorKind { Translation, Rotation, Dilation, SpecialConformal };

struct ConformalField {
  GeneratorKind kind = GeneratorKind::Translation;
  int axis = 0;  // 0..2, unused for dilation

  Vec3 operator()(const Vec3& p) const {
    const Vec3 e = Vec3::Unit(axis);
    switch (kind) {
      case GeneratorKind::Translation: return e;
      case GeneratorKind::Rotation: return e.cross(p);
      case GeneratorKind::Dilation: return p;
      case GeneratorKind::SpecialConformal: return 0.5 * p.squaredNorm() * e - p.dot(e) * p;
    }
    return Vec3::Zero();
  }

  std::string name() const {
    static const char* axes = "xyz";
    switch (kind) {
      case GeneratorKind::Translation: return std::string("translation_") + axes[axis];
      case GeneratorKind::Rotation: return std::string("rotation_") + axes[axis];
      case GeneratorKind::Dilation: return "dilation";
      case GeneratorKind::SpecialConformal: return std::string("special_") + axes[axis];
    }
    return {};
  }

  // Exact one-parameter subgroup exp(t X). The special conformal flow is
  // I ∘ Translation(t e / 2) ∘ I with I the unit inversion about 0.
  MobiusMap flow(double t) const {
    const Vec3 e = Vec3::Unit(axis);
    switch (kind) {
      case GeneratorKind::Translation: return MobiusMap({Translation{t * e}});
      case GeneratorKind::Rotation: return MobiusMap({Rotation{e, t}});
      case GeneratorKind::Dilation: return MobiusMap({Dilation{std::exp(t)}});
      case GeneratorKind::SpecialConformal: {
        const SphereInversion inv{Vec3::Zero(), 1.0};
        return MobiusMap({inv, Translation{0.5 * t * e}, inv});
      }
    }
    return {};
  }
};

// Ordering: translations x,y,z; rotations x,y,z; dilation; special x,y,z.
inline std::array<ConformalField, 10> conformal_generators() {
  using K = GeneratorKind;
  return {ConformalField{K::Translation, 0},      ConformalField{K::Translation, 1},
          ConformalField{K::Translation, 2},      ConformalField{K::Rotation, 0},
          ConformalField{K::Rotation, 1},         ConformalField{K::Rotation, 2},
          ConformalField{K::Dilation, 0},         ConformalField{K::SpecialConformal, 0},
          ConformalField{K::SpecialConformal, 1}, ConformalField{K::SpecialConformal, 2}};
}

inline Field normal_component(const ConformalField& X, const Immersion& f, const GeometryCache& g) {
  if (f.ambient != Ambient::R3) throw ValidationError("conformal fields act on R^3 immersions");
  Field w(f.grid.n_u, f.grid.n_v);
  for (int j = 0; j < f.grid.n_v; ++j)
    for (int i = 0; i < f.grid.n_u; ++i) {
      const Vec3 v = X(Vec3(f.x[0](i, j), f.x[1](i, j), f.x[2](i, j)));
      w(i, j) = v(0) * g.normal[0](i, j) + v(1) * g.normal[1](i, j) + v(2) * g.normal[2](i, j);
    }
  return w;
}

inline ScalarField normal_component(const ConformalField& X, const Immersion& f) {
  return {f.grid, normal_component(X, f, geometry(f))};
}

}  // namespace willmore
