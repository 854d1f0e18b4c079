#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mshom/corrector.hpp"

using namespace mshom;

namespace {

double profile(double t) { return 2.0 + std::sin(kTwoPi * t); }

CoefficientSpec base_spec(int scales) {
  CoefficientSpec s;
  s.dim = 2;
  s.scales = scales;
  s.a.base = identity_matrix(1);
  s.b.base = identity_matrix(2);
  s.alpha = 0.5;
  s.beta = 9.0;
  return s;
}

CoefficientSpec layered_spec() {
  CoefficientSpec s = base_spec(1);
  s.a.family = Family::layered;
  s.a.factors = {Factor{1, 0, 2.0, 1.0, 0.0}};
  s.b.family = Family::layered;
  s.b.factors = {Factor{1, 1, 2.0, 1.0, 0.0}};
  return s;
}

/// Deterministic pseudo-random value per integer lattice cell.
double cell_value(const Point& x, double h) {
  const auto i = static_cast<long long>(std::floor(x[0] / h));
  const auto j = static_cast<long long>(std::floor(x[1] / h));
  return 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 2.9 * static_cast<double>(j * j) + 0.3);
}

struct HomRun {
  HomogenizationResult hom;
  WaveProblem coarse;
  WaveTrajectory u0;
};

HomRun homogenized_run(const CoefficientSpec& s, int coarse_n, const ClosedFormData& data, const TimeOptions& t, int cell_n = 32) {
  HomogenizationOptions ho;
  ho.cell_n = {cell_n};
  ho.y_samples = {8};
  HomRun r{homogenize(s, ho), {}, {}};
  r.coarse = setup_homogenized(r.hom, DomainMesh(2, coarse_n), data, t);
  r.u0 = integrate(r.coarse);
  return r;
}

TimeOptions short_time() {
  TimeOptions t;
  t.final_time = 0.125;
  t.dt = 1.0 / 64;
  t.snapshot_stride = 4;
  return t;
}

}  // namespace

// --- cutoff ---------------------------------------------------------------

TEST(Cutoff, HalfWidthLayerIsValid) {
  const DomainMesh mesh(2, 4);
  const Vector tau = cutoff_field(mesh, 0.5);
  EXPECT_DOUBLE_EQ(tau.maxCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(tau[mesh.node({0, 2, 0})], 0.0);
  EXPECT_DOUBLE_EQ(tau[mesh.node({2, 2, 0})], 1.0);
}

TEST(Cutoff, GradientBound) {
  const DomainMesh mesh(2, 20);
  for (double eps : {0.1, 0.15, 0.3}) {
    const Vector tau = cutoff_field(mesh, eps);
    double gmax = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
      const auto nodes = mesh.element_nodes(e);
      for (const Point xi : {Point{0.1, 0.2, 0.0}, Point{0.9, 0.5, 0.0}, Point{0.5, 0.95, 0.0}}) {
        const NodalEval ne = eval_nodal(2, mesh.spacing(), xi);
        Point g{};
        for (int k = 0; k < 4; ++k)
          for (int j = 0; j < 2; ++j) g[static_cast<std::size_t>(j)] += tau[nodes[static_cast<std::size_t>(k)]] * ne.grad[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        gmax = std::max(gmax, std::hypot(g[0], g[1]));
      }
    }
    EXPECT_LE(gmax, 2.0 / eps) << eps;
    EXPECT_GT(gmax, 0.5 / eps) << eps;
  }
}

TEST(Cutoff, LayerTooThinRejected) {
  EXPECT_THROW(cutoff_field(DomainMesh(2, 8), 0.2), ValidationError);
  EXPECT_NO_THROW(cutoff_field(DomainMesh(2, 8), 0.25));
}

TEST(Cutoff, BoundaryLayerMeasure) {
  const DomainMesh mesh(2, 10);
  for (double eps : {0.1, 0.13, 0.37}) {
    const double m = boundary_layer_integral(mesh, [](const Point&) { return 1.0; }, eps);
    EXPECT_NEAR(m, 4.0 * eps - 4.0 * eps * eps, 1e-13) << eps;
  }
}

// --- unfolding / folding -----------------------------------------------------

TEST(Unfold, ConstantField) {
  const ScaleSchedule s{0.25, {}, true};
  const UnfoldedField u = unfold([](const Point&) { return 1.0; }, s, 2, {1.0, 1.0, 0.0}, {3});
  for (double v : u.values) EXPECT_EQ(v, 1.0);
  EXPECT_NEAR(u.integral(), 1.0, 1e-15);
}

TEST(Unfold, PiecewiseConstantIntegralSingleScale) {
  const ScaleSchedule s{0.25, {}, true};
  auto phi = [](const Point& x) { return cell_value(x, 0.25); };
  // exact integral: sum over the 16 lattice cells
  double exact = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) exact += phi({(i + 0.5) / 4, (j + 0.5) / 4, 0.0}) / 16.0;
  const UnfoldedField u = unfold(phi, s, 2, {1.0, 1.0, 0.0}, {2});
  EXPECT_LE(std::abs(u.integral() - exact), 1e-12 * std::abs(exact));
}

TEST(Unfold, PiecewiseConstantIntegralTwoScales) {
  const ScaleSchedule s{0.25, {2}, true};
  auto phi = [](const Point& x) { return cell_value(x, 0.125); };
  double exact = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) exact += phi({(i + 0.5) / 8, (j + 0.5) / 8, 0.0}) / 64.0;
  for (int m1 : {2, 4, 6}) {
    const UnfoldedField u = unfold(phi, s, 2, {1.0, 1.0, 0.0}, {m1, 3});
    EXPECT_LE(std::abs(u.integral() - exact), 1e-12 * std::abs(exact)) << m1;
  }
}

TEST(Unfold, SmoothFieldConvergesUnderRefinement) {
  const ScaleSchedule s{0.25, {}, true};
  auto phi = [](const Point& x) { return x[0] * x[0] + std::sin(kTwoPi * x[0]); };
  double prev = 1.0;
  for (int m : {1, 2, 4, 8}) {
    const double err = std::abs(unfold(phi, s, 2, {1.0, 1.0, 0.0}, {m}).integral() - 1.0 / 3.0);
    EXPECT_LT(err, prev) << m;
    prev = err;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(Unfold, NonIntegerInverseRejected) {
  const ScaleSchedule s{0.3, {}, false};
  EXPECT_THROW(unfold([](const Point&) { return 1.0; }, s, 2, {1.0, 1.0, 0.0}, {2}), ValidationError);
}

TEST(Fold, ConstantProductField) {
  const ScaleSchedule s{0.25, {2}, true};
  const ProductField c = [](const Point&, std::span<const Point>) { return 3.5; };
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Point x{u(rng), u(rng), 0.0};
    EXPECT_NEAR(fold(c, s, 2, {1.0, 1.0, 0.0}, x), 3.5, 1e-13);
  }
}

TEST(Fold, SlowLatticeFieldIsReturned) {
  const ScaleSchedule s{0.25, {}, true};
  const ProductField psi = [](const Point& x, std::span<const Point>) { return cell_value(x, 0.25); };
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Point x{u(rng), u(rng), 0.0};
    EXPECT_NEAR(fold(psi, s, 2, {1.0, 1.0, 0.0}, x), cell_value(x, 0.25), 1e-13);
  }
}

TEST(Fold, FoldOfUnfoldIsIdentityForLatticeFields) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  {
    const ScaleSchedule s{0.25, {}, true};
    auto phi = [](const Point& x) { return cell_value(x, 0.25); };
    const UnfoldedField uf = unfold(phi, s, 2, {1.0, 1.0, 0.0}, {1});
    // brute force over the 4x4 lattice
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 5; ++k) {
          const Point x{(i + u(rng)) / 4, (j + u(rng)) / 4, 0.0};
          EXPECT_EQ(fold(uf, x), phi(x));
        }
  }
  {
    const ScaleSchedule s{0.25, {2}, true};
    auto phi = [](const Point& x) { return cell_value(x, 0.125); };
    const UnfoldedField uf = unfold(phi, s, 2, {1.0, 1.0, 0.0}, {2, 1});
    for (int k = 0; k < 200; ++k) {
      const Point x{u(rng), u(rng), 0.0};
      EXPECT_NEAR(fold(uf, x), phi(x), 1e-15);
    }
  }
}

TEST(Fold, IntegralIdentityForGridFields) {
  // Phi = unfolded lattice field with y-dependent grid refinement; its fold is
  // piecewise constant on cells of size eps_2 / m_2, so a midpoint sum on that
  // grid integrates it exactly.
  const ScaleSchedule s{0.25, {2}, true};
  auto phi = [](const Point& x) { return cell_value(x, 0.0625) + x[0]; };
  const UnfoldedField uf = unfold(phi, s, 2, {1.0, 1.0, 0.0}, {4, 2});
  const int m = 16;  // 1 / (eps_2 / m_2)
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sum += fold(uf, {(i + 0.5) / m, (j + 0.5) / m, 0.0}) / (m * m);
  EXPECT_LE(std::abs(sum - uf.integral()), 1e-12 * std::abs(uf.integral()));
}

TEST(Fold, SmoothIntegralWithinQuadratureTolerance) {
  const ScaleSchedule s{0.25, {2}, true};
  const ProductField phi = [](const Point& x, std::span<const Point> ys) {
    return std::cos(x[0]) * (1.0 + std::sin(kTwoPi * ys[0][1])) + ys[1][0] * ys[1][0];
  };
  // double integral: sin(1) * 1 + 1/3
  const double exact = std::sin(1.0) + 1.0 / 3.0;
  const int m = 256;
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sum += fold(phi, s, 2, {1.0, 1.0, 0.0}, {(i + 0.5) / m, (j + 0.5) / m, 0.0}) / (m * m);
  EXPECT_NEAR(sum, exact, 1e-3);
}

// --- correctors -------------------------------------------------------------

TEST(Corrector, ConstantCoefficientsCollapseExactly) {
  CoefficientSpec s = base_spec(1);
  s.b.base << 2.0, 0.3, 0.3, 1.0;
  s.a.base(0, 0) = 1.5;
  const HomRun r = homogenized_run(s, 8, builtin_data("zero", "mixed", "smooth", 2), short_time(), 8);
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 30; ++k) {
    const Point x{u(rng), u(rng), 0.0};
    const int st = k % static_cast<int>(r.u0.stamps.size());
    const CorrectorValue v = c.at(st, x);
    const EdgeSample vs = sample_edge_field(r.coarse.mesh, r.u0.v[static_cast<std::size_t>(st)], x);
    const EdgeSample us = sample_edge_field(r.coarse.mesh, r.u0.u[static_cast<std::size_t>(st)], x);
    EXPECT_EQ(v.vel[0], vs.value[0]) << st;
    EXPECT_EQ(v.vel[1], vs.value[1]);
    EXPECT_EQ(v.curl[0], us.curl[0]);
  }
}

TEST(Corrector, InitialVelocityEqualsInterpolatedG1) {
  const HomRun r = homogenized_run(layered_spec(), 8, builtin_data("zero", "mixed", "smooth", 2), short_time());
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
  for (const Point x : {Point{0.1, 0.2, 0.0}, Point{0.55, 0.71, 0.0}, Point{0.93, 0.4, 0.0}}) {
    const CorrectorValue v = c.at(0, x);
    const EdgeSample g = sample_edge_field(r.coarse.mesh, r.coarse.g1, x);
    EXPECT_EQ(v.vel[0], g.value[0]);
    EXPECT_EQ(v.vel[1], g.value[1]);
  }
}

TEST(Corrector, LayeredCurlFactor) {
  // 1 + curl_y N = a0 / a(y_1): sqrt(3) / a(y_1) up to the midpoint rule
  CoefficientSpec s = base_spec(1);
  s.a.family = Family::layered;
  s.a.factors = {Factor{1, 0, 2.0, 1.0, 0.0}};
  const int cell_n = 256;
  const HomRun r = homogenized_run(s, 8, builtin_data("zero", "mixed", "smooth", 2), short_time(), cell_n);
  const double eps = 0.25;
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {eps, {}, true});
  const int st = static_cast<int>(r.u0.stamps.size()) - 1;
  const double a0 = r.hom.a0({})(0, 0);
  for (const Point x : {Point{0.1, 0.2, 0.0}, Point{0.55, 0.71, 0.0}, Point{0.93, 0.4, 0.0}, Point{0.3, 0.3, 0.0}}) {
    const double c0 = sample_edge_field(r.coarse.mesh, r.u0.u[static_cast<std::size_t>(st)], x).curl[0];
    const double y = frac(x[0] / eps);
    const double mid = (std::floor(y * cell_n) + 0.5) / cell_n;
    const double q = c.at(st, x).curl[0];
    EXPECT_NEAR(q, c0 * a0 / profile(mid), 1e-8 * std::abs(c0));
    EXPECT_NEAR(q, c0 * std::sqrt(3.0) / profile(y), 0.02 * std::abs(c0));
  }
}

TEST(Corrector, NonzeroInitialDisplacementRefused) {
  const HomRun r = homogenized_run(base_spec(1), 8, builtin_data("cavity", "zero", "zero", 2), short_time(), 4);
  try {
    reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
    FAIL() << "expected refusal";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("g0 = 0"), std::string::npos);
  }
}

TEST(Corrector, CoarseMeshWiderThanEpsilonRefused) {
  const HomRun r = homogenized_run(base_spec(1), 4, builtin_data("zero", "mixed", "zero", 2), short_time(), 4);
  EXPECT_THROW(reconstruct_corrector(r.coarse, r.u0, r.hom, {0.125, {}, true}), ValidationError);
}

TEST(Corrector, IdenticalTrajectoriesGiveZeroError) {
  const HomRun r = homogenized_run(base_spec(1), 8, builtin_data("zero", "mixed", "smooth", 2), short_time(), 4);
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
  const ErrorSeries e = corrector_error(r.coarse, r.u0, c, 2);
  ASSERT_EQ(e.t.size(), r.u0.stamps.size());
  EXPECT_LE(e.max_vel, 1e-13);
  EXPECT_LE(e.max_curl, 1e-13);
}

TEST(Corrector, ConstantCoefficientsAtDiscretizationLevel) {
  const CoefficientSpec s = base_spec(1);
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  std::vector<double> totals;
  for (int coarse : {8, 16}) {
    const HomRun r = homogenized_run(s, coarse, data, short_time(), 4);
    CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
    const WaveProblem fine = setup_fine(s, {0.25, {}, true}, DomainMesh(2, 32), data, short_time());
    const ErrorSeries e = corrector_error(fine, integrate(fine), c);
    totals.push_back(e.max_total);
  }
  // the error is the coarse-mesh discretization error: first order in h0
  EXPECT_LT(totals[0], 1.0);
  EXPECT_LT(totals[1], 0.6 * totals[0]);
}

TEST(Corrector, StampMaxAndPositivity) {
  const CoefficientSpec s = layered_spec();
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const ScaleSchedule sched{0.25, {}, true};
  const HomRun r = homogenized_run(s, 8, data, short_time());
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, sched);
  const WaveProblem fine = setup_fine(s, sched, DomainMesh(2, 32), data, short_time());
  const ErrorSeries e = corrector_error(fine, integrate(fine), c);
  double mv = 0.0, mc = 0.0, mt = 0.0;
  for (std::size_t k = 0; k < e.t.size(); ++k) {
    EXPECT_GE(e.vel[k], 0.0);
    EXPECT_GE(e.curl[k], 0.0);
    mv = std::max(mv, e.vel[k]);
    mc = std::max(mc, e.curl[k]);
    mt = std::max(mt, e.vel[k] + e.curl[k]);
  }
  EXPECT_EQ(e.max_vel, mv);
  EXPECT_EQ(e.max_curl, mc);
  EXPECT_EQ(e.max_total, mt);
}

TEST(Corrector, GridMismatchRejected) {
  const CoefficientSpec s = base_spec(1);
  const auto data = builtin_data("zero", "mixed", "zero", 2);
  const HomRun r = homogenized_run(s, 8, data, short_time(), 4);
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, {0.25, {}, true});
  TimeOptions t = short_time();
  t.snapshot_stride = 2;
  const WaveProblem fine = setup_fine(s, {0.25, {}, true}, DomainMesh(2, 16), data, t);
  EXPECT_THROW(corrector_error(fine, integrate(fine), c), ValidationError);
  const WaveProblem wide = setup_fine(s, {0.25, {}, true}, DomainMesh(2, 32, {2.0, 1.0, 1.0}), data, short_time());
  EXPECT_THROW(corrector_error(wide, integrate(wide), c), ValidationError);
}

TEST(Corrector, ResultIndependentOfWorkerCount) {
  const CoefficientSpec s = layered_spec();
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const ScaleSchedule sched{0.25, {}, true};
  const HomRun r = homogenized_run(s, 8, data, short_time());
  CorrectorField c1 = reconstruct_corrector(r.coarse, r.u0, r.hom, sched);
  CorrectorField c4 = reconstruct_corrector(r.coarse, r.u0, r.hom, sched);
  const WaveProblem fine = setup_fine(s, sched, DomainMesh(2, 32), data, short_time());
  const WaveTrajectory tr = integrate(fine);
  const ErrorSeries a = corrector_error(fine, tr, c1, 1), b = corrector_error(fine, tr, c4, 4);
  EXPECT_EQ(a.vel, b.vel);
  EXPECT_EQ(a.curl, b.curl);
}

TEST(Corrector, CutoffDiagnosticAgreesAwayFromBoundary) {
  const CoefficientSpec s = layered_spec();
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const ScaleSchedule sched{0.25, {}, true};
  const HomRun r = homogenized_run(s, 8, data, short_time());
  CorrectorField plain = reconstruct_corrector(r.coarse, r.u0, r.hom, sched);
  CorrectorOptions o;
  o.cutoff = true;
  CorrectorField cut = reconstruct_corrector(r.coarse, r.u0, r.hom, sched, o);
  const int st = static_cast<int>(r.u0.stamps.size()) - 1;
  const Point inner{0.5, 0.45, 0.0};
  EXPECT_EQ(plain.at(st, inner).vel[0], cut.at(st, inner).vel[0]);
  EXPECT_EQ(plain.at(st, inner).curl[0], cut.at(st, inner).curl[0]);
  // on the boundary only the homogenized part and the eps grad(tau) term remain
  const Point edge{0.0, 0.45, 0.0};
  const CorrectorValue v = cut.at(st, edge);
  const double c0 = sample_edge_field(r.coarse.mesh, r.u0.u[static_cast<std::size_t>(st)], edge).curl[0];
  EXPECT_NE(v.curl[0], plain.at(st, edge).curl[0]);
  EXPECT_TRUE(std::isfinite(v.curl[0]) && std::isfinite(c0));
}

TEST(Corrector, LocalAveragingUsesCubeMeans) {
  const CoefficientSpec s = layered_spec();
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const ScaleSchedule sched{0.25, {}, true};
  const HomRun r = homogenized_run(s, 8, data, short_time());
  CorrectorOptions o;
  o.local_average_exponent = 1.0;  // cubes of side eps
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, sched, o);
  const int st = static_cast<int>(r.u0.stamps.size()) - 1;
  EXPECT_THROW(c.at(st, {0.3, 0.3, 0.0}), ValidationError);
  c.prepare(st);
  // with a = a(y_1) the curl corrector factor is the same at x and x + (0, 0.1)
  // inside one cube, so equal inputs give equal curls
  const double q1 = c.at(st, {0.3, 0.3, 0.0}).curl[0], q2 = c.at(st, {0.3, 0.4, 0.0}).curl[0];
  EXPECT_NEAR(q1, q2, 1e-9 * std::abs(q1));
}

// --- multiscale -------------------------------------------------------------

TEST(Multiscale, SingleScaleComparableToPointwise) {
  const CoefficientSpec s = layered_spec();
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const ScaleSchedule sched{0.0625, {}, true};
  const HomRun r = homogenized_run(s, 16, data, short_time());
  CorrectorField c = reconstruct_corrector(r.coarse, r.u0, r.hom, sched);
  MultiscaleCorrector m(r.coarse, r.u0, r.hom, sched);
  const WaveProblem fine = setup_fine(s, sched, DomainMesh(2, 256), data, short_time());
  const WaveTrajectory tr = integrate(fine);
  const ErrorSeries pe = corrector_error(fine, tr, c, 2);
  const ErrorSeries me = multiscale_corrector_error(fine, tr, m, 2);
  EXPECT_GT(me.max_total, 0.0);
  EXPECT_LE(me.max_total, 2.0 * pe.max_total);
  EXPECT_GE(me.max_total, 0.5 * pe.max_total);
}

TEST(Multiscale, TwoScaleSeparableRuns) {
  CoefficientSpec s = base_spec(2);
  s.b.family = Family::separable_product;
  s.b.factors = {Factor{1, 0, 2.0, 1.0, 0.0}, Factor{2, 1, 2.0, 1.0, 0.0}};
  s.a.family = Family::separable_product;
  s.a.factors = {Factor{1, 1, 2.0, 1.0, 0.0}, Factor{2, 0, 2.0, 1.0, 0.0}};
  HomogenizationOptions ho;
  ho.cell_n = {16};
  ho.y_samples = {8};
  const HomogenizationResult hom = homogenize(s, ho);
  const ScaleSchedule sched{0.5, {2}, true};
  const auto data = builtin_data("zero", "mixed", "smooth", 2);
  const WaveProblem coarse = setup_homogenized(hom, DomainMesh(2, 8), data, short_time());
  const WaveTrajectory u0 = integrate(coarse);
  MultiscaleCorrector m(coarse, u0, hom, sched);
  const WaveProblem fine = setup_fine(s, sched, DomainMesh(2, 32), data, short_time());
  const ErrorSeries e = multiscale_corrector_error(fine, integrate(fine), m, 2);
  EXPECT_EQ(e.vel[0] >= 0.0, true);
  EXPECT_TRUE(std::isfinite(e.max_total));
  EXPECT_GT(e.max_total, 0.0);
}
