#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mshom/cells.hpp"

using namespace mshom;

namespace {

const double kSqrt3 = std::sqrt(3.0);

double profile(double t) { return 2.0 + std::sin(kTwoPi * t); }

CellCoefficient scalar_layered(int m, double scale = 1.0) {
  return [m, scale](const Point& y) { return SymMatrix(scale * profile(y[0]) * identity_matrix(m)); };
}

CellCoefficient constant(const SymMatrix& c) {
  return [c](const Point&) { return c; };
}

CoefficientSpec base_spec(int dim, int scales) {
  CoefficientSpec s;
  s.dim = dim;
  s.scales = scales;
  s.a.base = identity_matrix(dim == 2 ? 1 : dim);
  s.b.base = identity_matrix(dim);
  s.alpha = 1.0;
  s.beta = 9.0;
  return s;
}

/// Midpoint harmonic mean of the profile over N cells (oracle for the 2D
/// curl problem, whose discrete flux is elementwise constant).
double midpoint_harmonic(int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += 1.0 / profile((i + 0.5) / n);
  return n / s;
}

}  // namespace

TEST(ScalarCell, ConstantCoefficientGivesZeroCorrector) {
  SymMatrix b(2, 2);
  b << 2.0, 0.5, 0.5, 1.5;
  const CellMesh mesh(2, 8);
  const auto w = solve_scalar_cell(mesh, constant(b));
  for (const Vector& wk : w) EXPECT_LE(wk.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((scalar_level_tensor(mesh, constant(b), w) - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScalarCell, LayeredClosedForm) {
  const CellMesh mesh(2, 64);
  const auto coef = scalar_layered(2);
  const auto w = solve_scalar_cell(mesh, coef);
  const SymMatrix b0 = scalar_level_tensor(mesh, coef, w);
  EXPECT_NEAR(b0(0, 0), kSqrt3, 5e-4);
  EXPECT_NEAR(b0(1, 1), 2.0, 1e-12);
  EXPECT_NEAR(b0(0, 1), 0.0, 1e-12);
  // dw^1/dy_1 = sqrt(3)/profile - 1 at element centres; w^1 independent of y_2
  double err = 0.0;
  for (int i = 0; i < 64; ++i) {
    const Point y{(i + 0.5) / 64, 0.37, 0.0};
    const Point g = nodal_gradient(mesh, w[0], y);
    err = std::max(err, std::abs(g[0] - (kSqrt3 / profile(y[0]) - 1.0)));
    EXPECT_NEAR(g[1], 0.0, 1e-10);
  }
  EXPECT_LT(err, 2e-3);
  EXPECT_LE(w[1].cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScalarCell, QuadraticConvergenceOfHarmonicMean) {
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const CellMesh mesh(2, n);
    const auto coef = scalar_layered(2);
    const double e = std::abs(scalar_level_tensor(mesh, coef, solve_scalar_cell(mesh, coef))(0, 0) - kSqrt3);
    if (prev > 0.0) {
      EXPECT_GT(prev / e, 3.5);
    }
    prev = e;
  }
}

TEST(ScalarCell, MeanZeroAndReflectionInvariance) {
  const CellMesh mesh(2, 32);
  auto coef = [](const Point& y) {
    SymMatrix m(2, 2);
    m << 2.0 + 0.5 * std::sin(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]), 0.2, 0.2, 2.5 + 0.5 * std::sin(kTwoPi * y[1]);
    return m;
  };
  auto refl = [&](const Point& y) { return coef({1.0 - y[0], 1.0 - y[1], 0.0}); };
  const auto w = solve_scalar_cell(mesh, coef);
  for (const Vector& wk : w) EXPECT_LE(std::abs(wk.mean()), 1e-12);
  const SymMatrix t1 = scalar_level_tensor(mesh, coef, w);
  const SymMatrix t2 = scalar_level_tensor(mesh, refl, solve_scalar_cell(mesh, refl));
  EXPECT_LE((t1 - t2).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE(max_asymmetry(t1), 1e-12);
}

TEST(ScalarCell, SelfConvergenceInEnergy) {
  // smoothed checkerboard; energy-norm differences shrink roughly like h
  auto coef = [](const Point& y) {
    return SymMatrix((2.0 + std::tanh(4.0 * std::sin(kTwoPi * y[0]) * std::sin(kTwoPi * y[1]))) * identity_matrix(2));
  };
  std::vector<double> energy;
  for (int n : {16, 32, 64}) {
    const CellMesh mesh(2, n);
    energy.push_back(scalar_level_tensor(mesh, coef, solve_scalar_cell(mesh, coef))(0, 0));
  }
  // b^0 is an energy minimum, so its error is the squared energy-norm error.
  const double d1 = energy[0] - energy[1], d2 = energy[1] - energy[2];
  EXPECT_GT(d1, 0.0);
  EXPECT_GT(d2, 0.0);
  EXPECT_GT(d1 / d2, 2.5);
}

TEST(CurlCell, ConstantCoefficientGivesZeroCurl) {
  for (int dim : {2, 3}) {
    const int cs = curl_size(dim);
    SymMatrix a = 1.7 * identity_matrix(cs);
    if (cs == 3) a(0, 1) = a(1, 0) = 0.3;
    const CellMesh mesh(dim, dim == 2 ? 8 : 4);
    const auto n = solve_curl_cell(mesh, constant(a));
    for (const Vector& nl : n)
      for (int e = 0; e < mesh.element_count(); ++e) {
        const Point c = edge_curl(mesh, nl, mesh.element_origin(e));
        for (int j = 0; j < cs; ++j) EXPECT_LE(std::abs(c[static_cast<std::size_t>(j)]), 1e-12);
      }
    EXPECT_LE((curl_level_tensor(mesh, constant(a), n) - a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CurlCell, TwoDimensionalConstantFlux) {
  const int n = 64;
  const CellMesh mesh(2, n);
  const auto coef = scalar_layered(1);
  const auto sol = solve_curl_cell(mesh, coef);
  const double hm = midpoint_harmonic(n);
  for (int i = 0; i < n; ++i) {
    const Point y{(i + 0.5) / n, 0.6, 0.0};
    const double c = edge_curl(mesh, sol[0], y)[0];
    EXPECT_NEAR(profile(y[0]) * (1.0 + c), hm, 1e-8);
    EXPECT_NEAR(c, kSqrt3 / profile(y[0]) - 1.0, 1e-3);
  }
  const SymMatrix a0 = curl_level_tensor(mesh, coef, sol);
  EXPECT_NEAR(a0(0, 0), hm, 1e-10);
  EXPECT_NEAR(a0(0, 0), kSqrt3, 1e-4);
}

TEST(CurlCell, HarmonicMeanErrorWithinQuadraticBound) {
  // The discrete flux is elementwise constant, so a^0 is the midpoint-rule
  // harmonic mean; for this analytic profile it converges faster than h^2.
  for (int n : {8, 16, 32, 64}) {
    const CellMesh mesh(2, n);
    const auto coef = scalar_layered(1);
    const double e = std::abs(curl_level_tensor(mesh, coef, solve_curl_cell(mesh, coef))(0, 0) - kSqrt3);
    EXPECT_LE(e, 0.1 / (n * n));
  }
}

TEST(CurlCell, Homogeneity) {
  const CellMesh mesh(2, 16);
  const auto c1 = scalar_layered(1), c2 = scalar_layered(1, 2.0);
  const double a1 = curl_level_tensor(mesh, c1, solve_curl_cell(mesh, c1))(0, 0);
  const double a2 = curl_level_tensor(mesh, c2, solve_curl_cell(mesh, c2))(0, 0);
  EXPECT_NEAR(a2, 2.0 * a1, 1e-10);
}

TEST(CurlCell, ThreeDimensionalLayeredMedium) {
  // layered along y_1: E_1 constant, a E_2 and a E_3 constant, so the
  // effective tensor is diag(arithmetic, harmonic, harmonic).
  const CellMesh mesh(3, 16);
  const auto coef = scalar_layered(3);
  const SymMatrix a0 = curl_level_tensor(mesh, coef, solve_curl_cell(mesh, coef));
  EXPECT_NEAR(a0(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(a0(1, 1), kSqrt3, 1e-2);
  EXPECT_NEAR(a0(2, 2), kSqrt3, 1e-2);
  EXPECT_NEAR(a0(1, 2), 0.0, 1e-8);
  const CellMesh fine(3, 32);
  const SymMatrix a1 = curl_level_tensor(fine, coef, solve_curl_cell(fine, coef));
  EXPECT_LT(std::abs(a1(1, 1) - kSqrt3), std::abs(a0(1, 1) - kSqrt3) / 3.0);
}

TEST(SampleGridTest, InterpolationIsExactOnMultilinearData) {
  const SampleGrid g({{0, 0}, {1, 1}}, {5, 8}, {2.0, 1.0});
  TensorField f{g, {}};
  for (int s = 0; s < g.size(); ++s) {
    Point x{};
    std::vector<Point> ys(1, Point{});
    g.place(s, x, ys);
    f.values.push_back(SymMatrix::Constant(1, 1, x[0]));
  }
  const Point ys[1] = {{0.0, 0.3, 0.0}};
  EXPECT_NEAR(f.at({1.3, 0.0, 0.0}, ys)(0, 0), 1.3, 1e-14);
  EXPECT_NEAR(f.at({2.0, 0.0, 0.0}, ys)(0, 0), 2.0, 1e-14);
  // periodic wrap on y
  const auto w = g.weights({0.0, 0.0, 0.0}, std::span<const Point>(ys, 1));
  double total = 0.0;
  for (const auto& [i, wt] : w) total += wt;
  EXPECT_NEAR(total, 1.0, 1e-15);
  const Point yw[1] = {{0.0, 0.95, 0.0}};
  for (const auto& [i, wt] : g.weights({}, std::span<const Point>(yw, 1))) EXPECT_TRUE(i / 5 == 7 || i / 5 == 0);
}

TEST(Homogenize, SingleScaleConstantCollapses) {
  CoefficientSpec s = base_spec(2, 1);
  s.b.base << 2.0, 0.3, 0.3, 1.0;
  s.a.base(0, 0) = 1.5;
  s.alpha = 0.5;
  HomogenizationOptions opt;
  opt.cell_n = {8};
  const HomogenizationResult r = homogenize(s, opt);
  EXPECT_EQ(r.levels[0].grid.size(), 1);
  EXPECT_LE((r.b0({0.3, 0.7, 0.0}) - s.b.base).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(std::abs(r.a0({}) (0, 0) - 1.5), 1e-10);
}

TEST(Homogenize, SlowDependenceIsSampled) {
  CoefficientSpec s = base_spec(2, 1);
  s.b.family = Family::layered;
  s.b.factors = {Factor{1, 0, 2.0, 1.0, 0.0}};
  s.b.slow_amplitude = 0.2;
  s.beta = 4.0;
  s.alpha = 0.5;
  HomogenizationOptions opt;
  opt.cell_n = {32};
  opt.x_samples = 5;
  const HomogenizationResult r = homogenize(s, opt);
  EXPECT_EQ(r.levels[0].grid.size(), 5);
  // at the sample x_1 = 0.25 the slow factor is 1.2
  const SymMatrix b = r.b0({0.25, 0.0, 0.0});
  const CellMesh mesh(2, 32);
  const auto coef = scalar_layered(2, 1.2);
  const SymMatrix ref = scalar_level_tensor(mesh, coef, solve_scalar_cell(mesh, coef), 2);
  EXPECT_LE((b - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Homogenize, LevelDegeneracy) {
  CoefficientSpec one = base_spec(2, 1);
  one.b.family = Family::layered;
  one.b.factors = {Factor{1, 0, 2.0, 1.0, 0.0}};
  one.a.family = Family::layered;
  one.a.factors = {Factor{1, 1, 2.0, 1.0, 0.0}};
  CoefficientSpec two = one;
  two.scales = 2;
  two.b.factors[0].level = 2;
  two.a.factors[0].level = 2;
  HomogenizationOptions opt;
  opt.cell_n = {32};
  opt.y_samples = {4};
  const auto r1 = homogenize(one, opt);
  const auto r2 = homogenize(two, opt);
  EXPECT_LE((r1.b0({}) - r2.b0({})).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((r1.a0({}) - r2.a0({})).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Homogenize, TwoLevelSeparableMatchesBruteForce) {
  // b = p(y_1[0]) p(y_2[0]) I. Reiterated result: diag(3, 4). Brute force:
  // single-scale homogenization of p(t) p(r t) for integer r, whose
  // harmonic mean differs from 3 only by exponentially small Fourier terms.
  CoefficientSpec s = base_spec(2, 2);
  s.b.family = Family::separable_product;
  s.b.factors = {Factor{1, 0, 2.0, 1.0, 0.0}, Factor{2, 0, 2.0, 1.0, 0.0}};
  HomogenizationOptions opt;
  opt.cell_n = {128, 64};
  opt.y_samples = {64};
  opt.workers = 4;
  const auto r = homogenize(s, opt);
  const SymMatrix b0 = r.b0({});

  const int ratio = 8;
  const CellMesh mesh(2, 256);
  auto brute = [ratio](const Point& y) { return SymMatrix(profile(y[0]) * profile(ratio * y[0]) * identity_matrix(2)); };
  const SymMatrix ref = scalar_level_tensor(mesh, brute, solve_scalar_cell(mesh, brute, {3, 1e-10}), 3);
  EXPECT_NEAR(ref(0, 0), 3.0, 5e-3);
  EXPECT_NEAR(ref(1, 1), 4.0, 1e-10);
  EXPECT_NEAR(b0(0, 0), ref(0, 0), 5e-3);
  EXPECT_NEAR(b0(1, 1), ref(1, 1), 1e-3);
  // level-1 tensor is p(y_1[0]) diag(h, 2)
  const Point ys[1] = {{0.25, 0.0, 0.0}};
  const SymMatrix b1 = r.b_tensor(1).at({}, ys);
  EXPECT_NEAR(b1(1, 1), 6.0, 1e-10);
}

TEST(Homogenize, TensorsWithinBounds) {
  CoefficientSpec s = base_spec(2, 1);
  s.b.family = Family::trigonometric;
  s.b.trig = Factor{1, 0, 2.0, 0.9, 0.0};
  s.b.base << 1.0, 0.2, 0.2, 1.0;
  s.a.family = Family::trigonometric;
  s.a.trig = Factor{1, 0, 2.0, 0.9, 0.0};
  s.alpha = 0.5;
  s.beta = 4.0;
  HomogenizationOptions opt;
  opt.cell_n = {32};
  const auto r = homogenize(s, opt);
  std::mt19937 rng(9);
  std::normal_distribution<double> nd;
  for (const SymMatrix& t : {r.b0({}), r.a0({})}) {
    EXPECT_LE(max_asymmetry(t), 1e-12);
    for (int i = 0; i < 100; ++i) {
      Vec xi(t.rows());
      for (int j = 0; j < t.rows(); ++j) xi[j] = nd(rng);
      const double q = xi.dot(t * xi), nn = xi.squaredNorm();
      EXPECT_GE(q, s.alpha * nn);
      EXPECT_LE(q, s.beta * nn);
    }
  }
}

TEST(Homogenize, BoundViolationReportsLevelAndSample) {
  CoefficientSpec s = base_spec(2, 2);
  s.beta = 3.0;
  try {
    detail::check_tensor(s, 4.0 * identity_matrix(2), "b", 2, 7);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b1"), std::string::npos);
    EXPECT_NE(msg.find("sample 7"), std::string::npos);
  }
  EXPECT_NO_THROW(detail::check_tensor(s, 2.0 * identity_matrix(2), "a", 1, 0));
}

TEST(Homogenize, DumpHasFullPrecisionLines) {
  CoefficientSpec s = base_spec(2, 1);
  s.b.family = Family::layered;
  s.b.factors = {Factor{1, 0, 2.0, 1.0, 0.0}};
  s.beta = 3.0;
  HomogenizationOptions opt;
  opt.cell_n = {16};
  std::ostringstream os;
  homogenize(s, opt).dump(os);
  const std::string text = os.str();
  EXPECT_NE(text.find("b0 sample 0 : "), std::string::npos);
  EXPECT_NE(text.find("a0 sample 0 : 1\n"), std::string::npos);
  std::istringstream is(text);
  std::string tag, word;
  int sample = 0;
  double b00 = 0.0;
  is >> tag >> word >> sample >> word >> b00;
  EXPECT_EQ(tag, "b0");
  const CellMesh mesh(2, 16);
  const auto coef = scalar_layered(2);
  EXPECT_EQ(b00, scalar_level_tensor(mesh, coef, solve_scalar_cell(mesh, coef))(0, 0));
}
