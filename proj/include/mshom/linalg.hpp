#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mshom/errors.hpp"

namespace mshom {

/// Small symmetric matrix (1x1, 2x2 or 3x3) stored without heap allocation.
using SymMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
/// Point or vector in R^d, d <= 3.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline SymMatrix identity_matrix(int m) { return SymMatrix::Identity(m, m); }

inline double max_asymmetry(const SymMatrix& m) { return (m - m.transpose()).cwiseAbs().maxCoeff(); }

/// Eigenvalues of a symmetric matrix of size <= 3 in ascending order, via the
/// closed-form characteristic-polynomial formulas (trigonometric form in 3D).
inline std::array<double, 3> sym_eigenvalues(const SymMatrix& m, int* count = nullptr) {
  std::array<double, 3> ev{0.0, 0.0, 0.0};
  const auto n = m.rows();
  if (count) *count = static_cast<int>(n);
  if (n == 1) {
    ev[0] = m(0, 0);
    return ev;
  }
  if (n == 2) {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double half = 0.5 * (m(0, 0) - m(1, 1));
    const double r = std::hypot(half, 0.5 * (m(0, 1) + m(1, 0)));
    ev[0] = mean - r;
    ev[1] = mean + r;
    return ev;
  }
  if (n != 3) detail::fail_validation("sym_eigenvalues: unsupported size");
  const double a01 = 0.5 * (m(0, 1) + m(1, 0));
  const double a02 = 0.5 * (m(0, 2) + m(2, 0));
  const double a12 = 0.5 * (m(1, 2) + m(2, 1));
  const double off = a01 * a01 + a02 * a02 + a12 * a12;
  const double q = (m(0, 0) + m(1, 1) + m(2, 2)) / 3.0;
  if (off == 0.0) {
    ev = {m(0, 0), m(1, 1), m(2, 2)};
    std::sort(ev.begin(), ev.end());
    return ev;
  }
  const double d0 = m(0, 0) - q, d1 = m(1, 1) - q, d2 = m(2, 2) - q;
  const double p = std::sqrt((d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off) / 6.0);
  // B = (A - qI) / p, r = det(B) / 2
  const double b00 = d0 / p, b11 = d1 / p, b22 = d2 / p;
  const double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
  const double det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(0.5 * det, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + kTwoPi / 3.0);
  ev = {lo, 3.0 * q - hi - lo, hi};
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct EigenRange {
  double min;
  double max;
};

inline EigenRange eigen_range(const SymMatrix& m) {
  int k = 0;
  const auto ev = sym_eigenvalues(m, &k);
  return {ev[0], ev[static_cast<std::size_t>(k - 1)]};
}

}  // namespace mshom
