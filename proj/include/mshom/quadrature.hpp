#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mshom/errors.hpp"

namespace mshom {

/// Gauss-Legendre rule mapped to [0, 1].
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

inline Rule1D gauss_rule(int points) {
  Rule1D r;
  auto push = [&r](double x, double w) {
    r.nodes.push_back(0.5 * (1.0 + x));
    r.weights.push_back(0.5 * w);
  };
  switch (points) {
    case 1:
      push(0.0, 2.0);
      break;
    case 2: {
      const double x = 1.0 / std::sqrt(3.0);
      push(-x, 1.0);
      push(x, 1.0);
      break;
    }
    case 3: {
      const double x = std::sqrt(0.6);
      push(-x, 5.0 / 9.0);
      push(0.0, 8.0 / 9.0);
      push(x, 5.0 / 9.0);
      break;
    }
    case 4: {
      const double s = 2.0 * std::sqrt(1.2);
      const double xa = std::sqrt(3.0 / 7.0 - s / 7.0), xb = std::sqrt(3.0 / 7.0 + s / 7.0);
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
      push(-xb, wb);
      push(-xa, wa);
      push(xa, wa);
      push(xb, wb);
      break;
    }
    case 5: {
      const double s = 2.0 * std::sqrt(10.0 / 7.0);
      const double xa = std::sqrt(5.0 - s) / 3.0, xb = std::sqrt(5.0 + s) / 3.0;
      const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0, wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      push(-xb, wb);
      push(-xa, wa);
      push(0.0, 128.0 / 225.0);
      push(xa, wa);
      push(xb, wb);
      break;
    }
    default:
      detail::fail_validation("gauss_rule: supported orders are 1..5");
  }
  return r;
}

/// Tensor-product rule on the reference cell [0,1]^dim.
struct CellRule {
  int dim = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(weights.size()); }
};

inline CellRule tensor_rule(int dim, int points_per_axis) {
  const Rule1D r = gauss_rule(points_per_axis);
  CellRule out;
  out.dim = dim;
  const int q = r.size();
  const int nz = dim == 3 ? q : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < q; ++i) {
        std::array<double, 3> p{r.nodes[i], r.nodes[j], dim == 3 ? r.nodes[k] : 0.0};
        out.points.push_back(p);
        out.weights.push_back(r.weights[i] * r.weights[j] * (dim == 3 ? r.weights[k] : 1.0));
      }
  return out;
}

}  // namespace mshom
