#pragma once

// Multiscale coefficient fields a(x, y_1..y_n), b(x, y_1..y_n) and the scale
// schedule eps_1 > eps_2 > ... > eps_n that turns them into a^eps, b^eps.

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mshom/errors.hpp"
#include "mshom/expression.hpp"
#include "mshom/linalg.hpp"

namespace mshom {

/// Coordinates in R^d; unused trailing entries are zero.
using Point = std::array<double, 3>;

/// Fractional part in [0, 1).
inline double frac(double v) {
  const double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

enum class Family { constant, layered, trigonometric, separable_product, expression };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::constant: return "constant";
    case Family::layered: return "layered";
    case Family::trigonometric: return "trigonometric";
    case Family::separable_product: return "separable-product";
    case Family::expression: return "expression";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "constant") return Family::constant;
  if (s == "layered") return Family::layered;
  if (s == "trigonometric") return Family::trigonometric;
  if (s == "separable-product" || s == "separable_product") return Family::separable_product;
  if (s == "expression") return Family::expression;
  detail::fail_validation("unknown coefficient family '" + s + "'");
}

/// One periodic profile p(t) = mean + amplitude * sin(2 pi t + phase), read at
/// t = y_level[axis] (level is 1-based, axis 0-based).
struct Factor {
  int level = 1;
  int axis = 0;
  double mean = 1.0;
  double amplitude = 0.0;
  double phase = 0.0;

  double operator()(double t) const { return mean + amplitude * std::sin(kTwoPi * t + phase); }
};

/// Scalar profile times a constant symmetric base matrix:
///   constant          : s = 1
///   layered           : s = p(y_l[axis])                 (factors.size() == 1)
///   separable-product : s = prod_f p_f(y_{l_f}[axis_f])
///   trigonometric     : s = mean + amplitude * prod_j sin(2 pi y_l[j] + phase)
///   expression        : s = parsed scalar expression
/// Every family is further multiplied by 1 + slow_amplitude * sin(2 pi x_1).
struct FieldSpec {
  Family family = Family::constant;
  SymMatrix base = SymMatrix::Identity(1, 1);
  std::vector<Factor> factors;
  Factor trig;
  double slow_amplitude = 0.0;
  Expression expression;

  double profile(const Point& x, std::span<const Point> ys, int dim) const {
    double s = 1.0;
    switch (family) {
      case Family::constant:
        break;
      case Family::layered:
      case Family::separable_product:
        for (const Factor& f : factors) s *= f(ys[static_cast<std::size_t>(f.level - 1)][static_cast<std::size_t>(f.axis)]);
        break;
      case Family::trigonometric: {
        const Point& y = ys[static_cast<std::size_t>(trig.level - 1)];
        double prod = 1.0;
        for (int j = 0; j < dim; ++j) prod *= std::sin(kTwoPi * y[static_cast<std::size_t>(j)] + trig.phase);
        s = trig.mean + trig.amplitude * prod;
        break;
      }
      case Family::expression: {
        std::array<std::span<const double>, 8> spans{};
        const std::size_t n = std::min<std::size_t>(ys.size(), spans.size());
        for (std::size_t i = 0; i < n; ++i) spans[i] = std::span<const double>(ys[i].data(), static_cast<std::size_t>(dim));
        s = expression.evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(dim)),
                                std::span<const std::span<const double>>(spans.data(), n));
        break;
      }
    }
    if (slow_amplitude != 0.0) s *= 1.0 + slow_amplitude * std::sin(kTwoPi * x[0]);
    return s;
  }

  /// Variables the field depends on (group 0 = x, group i = y_i).
  std::set<VarRef> variables(int dim) const {
    std::set<VarRef> v;
    switch (family) {
      case Family::constant:
        break;
      case Family::layered:
      case Family::separable_product:
        for (const Factor& f : factors)
          if (f.amplitude != 0.0) v.insert({f.level, f.axis});
        break;
      case Family::trigonometric:
        if (trig.amplitude != 0.0)
          for (int j = 0; j < dim; ++j) v.insert({trig.level, j});
        break;
      case Family::expression:
        v = expression.variables();
        break;
    }
    if (slow_amplitude != 0.0) v.insert({0, 0});
    return v;
  }
};

enum class Which { a, b };

inline const char* which_name(Which w) { return w == Which::a ? "a" : "b"; }

struct CoefficientSpec {
  int dim = 2;
  int scales = 1;
  FieldSpec a;
  FieldSpec b;
  double alpha = 1.0;
  double beta = 1.0;

  /// In 2D the curl is scalar, so a is a 1x1 field; b is always d x d.
  int matrix_size(Which w) const { return (w == Which::a && dim == 2) ? 1 : dim; }
  const FieldSpec& field(Which w) const { return w == Which::a ? a : b; }

  bool depends_on_x() const {
    for (Which w : {Which::a, Which::b})
      for (const VarRef& v : field(w).variables(dim))
        if (v.group == 0) return true;
    return false;
  }

  /// True if either field depends on y_level.
  bool depends_on_level(int level) const {
    for (Which w : {Which::a, Which::b})
      for (const VarRef& v : field(w).variables(dim))
        if (v.group == level) return true;
    return false;
  }

  /// Tensor-product Gauss points per axis for element integrals of these
  /// coefficients: 3 for the trigonometric family, 2 otherwise.
  int quadrature_points() const {
    return (a.family == Family::trigonometric || b.family == Family::trigonometric) ? 3 : 2;
  }

  void validate() const {
    if (dim != 2 && dim != 3) detail::fail_validation("coefficient: dimension must be 2 or 3, got " + std::to_string(dim));
    if (scales < 1 || scales > 8) detail::fail_validation("coefficient: number of scales must be in 1..8");
    if (!(alpha > 0.0) || !(beta >= alpha)) detail::fail_validation("coefficient: need 0 < alpha <= beta");
    for (Which w : {Which::a, Which::b}) {
      const FieldSpec& f = field(w);
      const std::string tag = std::string("coefficient ") + which_name(w) + ": ";
      const int m = matrix_size(w);
      if (f.base.rows() != m || f.base.cols() != m)
        detail::fail_validation(tag + "base matrix must be " + std::to_string(m) + "x" + std::to_string(m));
      if (max_asymmetry(f.base) != 0.0) detail::fail_validation(tag + "base matrix must be symmetric");
      if (f.family == Family::layered && f.factors.size() != 1)
        detail::fail_validation(tag + "layered family takes exactly one profile");
      if (f.family == Family::separable_product && f.factors.empty())
        detail::fail_validation(tag + "separable-product family needs at least one profile");
      for (const Factor& fa : f.factors) {
        if (fa.level < 1 || fa.level > scales) detail::fail_validation(tag + "profile level out of range");
        if (fa.axis < 0 || fa.axis >= dim) detail::fail_validation(tag + "profile axis out of range");
      }
      if (f.family == Family::trigonometric && (f.trig.level < 1 || f.trig.level > scales))
        detail::fail_validation(tag + "trigonometric level out of range");
      if (f.family == Family::expression) {
        if (f.expression.empty()) detail::fail_validation(tag + "expression family needs an expression");
        for (const VarRef& v : f.expression.variables()) {
          if (v.group > scales) detail::fail_validation(tag + "expression references y" + std::to_string(v.group) + " beyond the scale count");
          if (v.axis >= dim) detail::fail_validation(tag + "expression references an axis beyond the dimension");
        }
      }
    }
  }
};

/// Evaluates the field without checking the declared bounds. `ys` must already
/// be reduced to [0,1)^d.
inline SymMatrix eval_unchecked(const CoefficientSpec& spec, const Point& x, std::span<const Point> ys, Which which) {
  const FieldSpec& f = spec.field(which);
  return f.profile(x, ys, spec.dim) * f.base;
}

inline void check_bounds(const CoefficientSpec& spec, const SymMatrix& m, Which which) {
  const EigenRange r = eigen_range(m);
  const double slack = 1e-12 * spec.beta;
  if (r.min < spec.alpha - slack || r.max > spec.beta + slack)
    detail::fail_validation(std::string("coefficient ") + which_name(which) + ": eigenvalues [" + std::to_string(r.min) + ", " +
                            std::to_string(r.max) + "] outside declared bounds [" + std::to_string(spec.alpha) + ", " +
                            std::to_string(spec.beta) + "]");
}

/// a(x, y_1..y_n) or b(x, y_1..y_n); fast points are reduced mod 1.
inline SymMatrix eval_coefficient(const CoefficientSpec& spec, const Point& x, std::span<const Point> ys, Which which) {
  if (static_cast<int>(ys.size()) != spec.scales)
    detail::fail_validation("eval_coefficient: expected " + std::to_string(spec.scales) + " fast points, got " + std::to_string(ys.size()));
  std::array<Point, 8> reduced{};
  if (ys.size() > reduced.size()) detail::fail_validation("eval_coefficient: too many scales");
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (int j = 0; j < spec.dim; ++j) reduced[i][static_cast<std::size_t>(j)] = frac(ys[i][static_cast<std::size_t>(j)]);
  SymMatrix m = eval_unchecked(spec, x, std::span<const Point>(reduced.data(), ys.size()), which);
  check_bounds(spec, m, which);
  return m;
}

/// eps_1 = epsilon, eps_i = eps_{i-1} / r_i.
struct ScaleSchedule {
  double epsilon = 0.25;
  std::vector<int> ratios;  // r_2..r_n
  bool require_integer_inverse = true;

  int scales() const { return static_cast<int>(ratios.size()) + 1; }

  double eps(int level) const {
    double e = epsilon;
    for (int i = 2; i <= level; ++i) e /= ratios[static_cast<std::size_t>(i - 2)];
    return e;
  }

  double finest() const { return eps(scales()); }

  void validate(int expected_scales) const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) detail::fail_validation("scale schedule: epsilon must lie in (0,1)");
    if (scales() != expected_scales)
      detail::fail_validation("scale schedule: " + std::to_string(scales()) + " scales for a coefficient with " +
                              std::to_string(expected_scales));
    for (int r : ratios)
      if (r < 2) detail::fail_validation("scale schedule: ratios must be integers >= 2");
    if (require_integer_inverse) {
      const double inv = 1.0 / epsilon;
      if (std::abs(inv - std::round(inv)) > 1e-9 * inv)
        detail::fail_validation("scale schedule: 1/epsilon must be an integer");
    }
  }
};

/// Fast points x/eps_i mod 1 for every scale.
inline std::array<Point, 8> fast_points(const ScaleSchedule& sched, const Point& x, int dim) {
  std::array<Point, 8> ys{};
  for (int i = 1; i <= sched.scales(); ++i) {
    const double e = sched.eps(i);
    for (int j = 0; j < dim; ++j) ys[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)] = frac(x[static_cast<std::size_t>(j)] / e);
  }
  return ys;
}

/// a^eps(x) or b^eps(x).
inline SymMatrix eval_fine(const CoefficientSpec& spec, const ScaleSchedule& sched, const Point& x, Which which) {
  if (sched.scales() != spec.scales) detail::fail_validation("eval_fine: schedule and coefficient disagree on the number of scales");
  const auto ys = fast_points(sched, x, spec.dim);
  return eval_coefficient(spec, x, std::span<const Point>(ys.data(), static_cast<std::size_t>(spec.scales)), which);
}

struct BoundsScan {
  double alpha_hat;
  double beta_hat;
  bool within_declared;
};

/// Scans both fields on a tensor grid over the variables they depend on
/// (x on [0,1]^d with endpoints, each y_i on the periodic grid k/s) and
/// returns the extreme sampled eigenvalues.
inline BoundsScan validate_bounds(const CoefficientSpec& spec, int samples_per_axis, std::ostream* warn = &std::clog) {
  if (samples_per_axis < 2) detail::fail_validation("validate_bounds: need at least 2 samples per axis");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Which w : {Which::a, Which::b}) {
    const std::vector<VarRef> vars = [&] {
      const auto s = spec.field(w).variables(spec.dim);
      return std::vector<VarRef>(s.begin(), s.end());
    }();
    std::vector<int> idx(vars.size(), 0);
    Point x{};
    std::vector<Point> ys(static_cast<std::size_t>(spec.scales), Point{});
    for (;;) {
      for (std::size_t k = 0; k < vars.size(); ++k) {
        const VarRef& v = vars[k];
        const double t = v.group == 0 ? static_cast<double>(idx[k]) / (samples_per_axis - 1)
                                      : static_cast<double>(idx[k]) / samples_per_axis;
        if (v.group == 0) x[static_cast<std::size_t>(v.axis)] = t;
        else ys[static_cast<std::size_t>(v.group - 1)][static_cast<std::size_t>(v.axis)] = t;
      }
      const EigenRange r = eigen_range(eval_unchecked(spec, x, ys, w));
      lo = std::min(lo, r.min);
      hi = std::max(hi, r.max);
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == samples_per_axis) idx[k++] = 0;
      if (k == idx.size()) break;
    }
  }
  const double slack = 1e-12 * spec.beta;
  const bool ok = lo >= spec.alpha - slack && hi <= spec.beta + slack;
  if (!ok && warn)
    *warn << "warning: sampled eigenvalues [" << lo << ", " << hi << "] leave declared bounds [" << spec.alpha << ", " << spec.beta
          << "]\n";
  return {lo, hi, ok};
}

}  // namespace mshom
