#include <gtest/gtest.h>

#include "willmore/clifford_spectral.hpp"
#include "willmore/graph_normalization.hpp"
#include "willmore/random.hpp"

using namespace willmore;

namespace {
constexpr double kS = 1.4142135623730951;  // sqrt 2: chart frequency
ScalarField mode(const ParamGrid& g, double (*fn)(double, double)) { return ScalarField::sample(g, fn); }
}  // namespace

TEST(ModeTable, EigenvaluesAndKernel) {
  int zero = 0;
  for (const ModeRow& r : mode_table(8)) {
    EXPECT_EQ(r.mu, 2.0 * (r.m * r.m + r.n * r.n));
    EXPECT_EQ(r.sigma, (2.0 - r.mu) * (4.0 - r.mu));
    EXPECT_EQ(r.h, (1.0 + r.mu) * (1.0 + r.mu));
    EXPECT_EQ(r.sigma == 0.0, r.kernel);
    if (!r.kernel) EXPECT_GT(r.sigma, 0.0);
    zero += r.kernel;
  }
  EXPECT_EQ(zero, 8);  // four signed pairs at mu = 2, four at mu = 4: 8 real modes
}

TEST(Coercivity, LambdaValueAndStability) {
  EXPECT_NEAR(coercivity_lambda(3), 24.0 / 81.0, 1e-15);
  for (int M = 4; M <= 16; ++M) EXPECT_EQ(coercivity_lambda(M), coercivity_lambda(4));
  EXPECT_THROW(coercivity_lambda(2), ValidationError);
  EXPECT_EQ(form_eigenvalue(0.0) / h2_weight(0.0), 8.0);
}

TEST(W2, ApplyOnModes) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const ScalarField k1 = mode(g, [](double a, double) { return std::cos(kS * a); });
  const ScalarField k2 = mode(g, [](double a, double b) { return std::cos(kS * (a + b)); });
  const ScalarField one = ScalarField::constant(g, 1.0);
  // roundoff in high modes is amplified by sigma ~ mu^2
  EXPECT_LT(M.w2_apply(k1).max_abs(), 1e-9);
  EXPECT_LT(M.w2_apply(k2).max_abs(), 1e-9);
  EXPECT_LT((M.w2_apply(one).values - 8.0).abs().maxCoeff(), 1e-12);
  const ScalarField m8 = mode(g, [](double a, double) { return std::sin(2 * kS * a); });  // mu = 8
  EXPECT_LT((M.w2_apply(m8).values - 24.0 * m8.values).abs().maxCoeff(), 1e-10);
}

// Oracle: the same operator assembled from laplace_beltrami on the S^3
// geometry, (Delta + |A|^2)(Delta + |A|^2 + 2).
TEST(W2, MatchesLaplaceBeltramiAssembly) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const GeometryCache geo = geometry(clifford_torus_s3(g));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Field u = random_smooth_field(g, seed).values;
    const Field inner = laplace_beltrami(geo, u) + geo.A_norm2 * u + 2.0 * u;
    const Field outer = laplace_beltrami(geo, inner) + geo.A_norm2 * inner;
    EXPECT_LT((outer - M.w2_apply({g, u}).values).abs().maxCoeff(), 1e-9);
  }
}

TEST(W2, FormValuesSymmetryAndParseval) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const ScalarField one = ScalarField::constant(g, 1.0);
  EXPECT_NEAR(M.w2_form(one, one), 16.0 * M_PI * M_PI, 1e-10);
  EXPECT_NEAR(M.area(), 2.0 * M_PI * M_PI, 1e-13);
  const ScalarField u = random_smooth_field(g, 4), v = random_smooth_field(g, 5);
  EXPECT_NEAR(M.w2_form(u, v), M.w2_form(v, u), 1e-10);
  for (const auto& k : M.kernel_basis()) EXPECT_NEAR(M.w2_form(k, u), 0.0, 1e-10);
  // Parseval with mean-normalized coefficients
  const auto c = spectral(g).forward(u.values);
  const double parseval = M.area() * (M.sigma_symbol() * c.abs2()).sum();
  EXPECT_NEAR(M.w2_form(u, u), parseval, 1e-9 * std::abs(parseval));
}

TEST(W2, PositiveSemidefinite) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ScalarField u = random_smooth_field(g, seed, 4);
    EXPECT_GE(M.w2_form(u, u), -1e-10);
  }
}

TEST(Kernel, BasisIsOrthonormalAndProjectorsComplementary) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const auto& K = M.kernel_basis();
  ASSERT_EQ(K.size(), 8u);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) EXPECT_NEAR(M.h2_inner(K[a], K[b]), a == b ? 1.0 : 0.0, 1e-12);
  for (const auto& k : K) EXPECT_LT((M.project_K(k).values - k.values).abs().maxCoeff(), 1e-12);
  const ScalarField one = ScalarField::constant(g, 1.0);
  EXPECT_LT((M.project_Kperp(one).values - 1.0).abs().maxCoeff(), 1e-12);
  const ScalarField u = random_smooth_field(g, 9);
  const ScalarField pk = M.project_K(u), pp = M.project_Kperp(u);
  EXPECT_LT((pk.values + pp.values - u.values).abs().maxCoeff(), 1e-12);
  EXPECT_LT(M.project_K(pp).max_abs(), 1e-12);
  EXPECT_LT((M.project_K(pk).values - pk.values).abs().maxCoeff(), 1e-12);
}

// A form value of zero forces the field into K.
TEST(Kernel, ZeroFormMeansKernel) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  Eigen::VectorXd c(8);
  c << 0.3, -1.0, 0.2, 0.5, 0.0, 0.7, -0.4, 0.1;
  const ScalarField k = M.kernel_field(c);
  EXPECT_NEAR(M.w2_form(k, k), 0.0, 1e-10);
  EXPECT_LE(M.h2_norm(M.project_Kperp(k)), 1e-8 * M.h2_norm(k));
  EXPECT_LT((M.kernel_coefficients(k) - c).norm(), 1e-12);
}

TEST(Coercivity, HoldsOnRandomKperpFields) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const double lambda = coercivity_lambda(8);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ScalarField v = M.project_Kperp(random_smooth_field(g, 1000 + seed, 6));
    EXPECT_GE(M.w2_form(v, v), lambda * M.h2_inner(v, v) * (1.0 - 1e-12)) << seed;
  }
  // attained by the mu = 8 mode
  const ScalarField m8 = mode(g, [](double a, double) { return std::cos(2 * kS * a); });
  EXPECT_NEAR(M.w2_form(m8, m8) / M.h2_inner(m8, m8), lambda, 1e-12);
}

TEST(Kernel, CrossCheckWithConformalGenerators) {
  const KernelCrossCheck r = kernel_cross_check(clifford_chart_grid(64));
  EXPECT_EQ(r.kernel_dim, 8);
  EXPECT_EQ(r.generator_rank, 8);
  ASSERT_EQ(r.angles.size(), 8u);
  EXPECT_LE(r.max_angle, 1e-6);
  EXPECT_EQ(r.joint_rank_with_random, 9);
}

TEST(Kernel, WrongGridRejected) {
  EXPECT_THROW(CliffordSpectralModel(angle_grid(16)), ValidationError);
  const CliffordSpectralModel M(clifford_chart_grid(16));
  EXPECT_THROW(M.w2_apply(ScalarField::zeros(clifford_chart_grid(32))), ValidationError);
}

// The energy along the geodesic parallel tori is 2 pi^2 / cos 2t exactly, so
// the second derivative at 0 is 16 pi^2 / 2: W'' is half of w2_form.
TEST(SecondVariation, IsHalfTheForm) {
  const ParamGrid g = clifford_chart_grid(32);
  const CliffordSpectralModel M(g);
  const Immersion base = clifford_torus_s3(g);
  const GeometryCache geo = geometry(base);
  const ScalarField one = ScalarField::constant(g, 1.0);
  for (double t : {0.05, 0.1, 0.2}) {
    const double w = willmore_energy(exp_normal(base, geo, t * one.values));
    EXPECT_NEAR(w, 2 * M_PI * M_PI / std::cos(2 * t), 1e-10) << t;
  }
  const double h = 1e-3;
  auto W = [&](double t) { return willmore_energy(exp_normal(base, geo, t * one.values)); };
  const double second = (W(h) - 2 * W(0) + W(-h)) / (h * h);
  EXPECT_NEAR(second / M.w2_form(one, one), 0.5, 1e-5);
  // and for a random K-perp direction
  const ScalarField v = M.project_Kperp(random_smooth_field(g, 77));
  auto Wv = [&](double t) { return willmore_energy(exp_normal(base, geo, t * v.values)); };
  const double sv = (Wv(h) - 2 * Wv(0) + Wv(-h)) / (h * h);
  EXPECT_NEAR(sv / M.w2_form(v, v), 0.5, 1e-4);
}
