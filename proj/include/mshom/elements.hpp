#pragma once

// Reference-element shape functions on a d-dimensional box element with
// widths h_j: multilinear nodal (Q1) functions and lowest-order edge
// (Nedelec first-kind) functions. An edge function's degree of freedom is the
// line integral of its tangential component along the edge, so
//   phi_edge = (1/h_k) * prod_{j != k} L_{c_j}(xi_j) * e_k.

#include <array>
#include <vector>

#include "mshom/mesh.hpp"
#include "mshom/quadrature.hpp"

namespace mshom {

/// Number of curl components: 1 in 2D (scalar curl), 3 in 3D.
inline constexpr int curl_size(int dim) { return dim == 2 ? 1 : 3; }

namespace detail {
inline double lin(int bit, double t) { return bit ? t : 1.0 - t; }
inline double dlin(int bit) { return bit ? 1.0 : -1.0; }
}  // namespace detail

struct NodalEval {
  std::array<double, 8> value{};
  std::array<Point, 8> grad{};
};

inline NodalEval eval_nodal(int dim, const Point& h, const Point& xi) {
  NodalEval out;
  for (int v = 0; v < local_node_count(dim); ++v) {
    double val = 1.0;
    for (int j = 0; j < dim; ++j) val *= detail::lin((v >> j) & 1, xi[static_cast<std::size_t>(j)]);
    out.value[static_cast<std::size_t>(v)] = val;
    for (int j = 0; j < dim; ++j) {
      double g = detail::dlin((v >> j) & 1) / h[static_cast<std::size_t>(j)];
      for (int i = 0; i < dim; ++i)
        if (i != j) g *= detail::lin((v >> i) & 1, xi[static_cast<std::size_t>(i)]);
      out.grad[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)] = g;
    }
  }
  return out;
}

struct EdgeEval {
  std::array<Point, 12> value{};
  std::array<Point, 12> curl{};  // 2D: scalar curl in component 0
};

inline EdgeEval eval_edge(int dim, const Point& h, const Point& xi) {
  EdgeEval out;
  for (int l = 0; l < local_edge_count(dim); ++l) {
    const LocalEdge e = local_edge(dim, l);
    const Index3 off = edge_start_offset(dim, e);
    const auto k = static_cast<std::size_t>(e.axis);
    // f = (1/h_k) prod_{j != k} L_{off_j}(xi_j); phi = f e_k
    double f = 1.0 / h[k];
    Point grad{};
    for (int j = 0; j < dim; ++j) {
      if (j == e.axis) continue;
      f *= detail::lin(off[static_cast<std::size_t>(j)], xi[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < dim; ++j) {
      if (j == e.axis) continue;
      double g = detail::dlin(off[static_cast<std::size_t>(j)]) / (h[k] * h[static_cast<std::size_t>(j)]);
      for (int i = 0; i < dim; ++i)
        if (i != e.axis && i != j) g *= detail::lin(off[static_cast<std::size_t>(i)], xi[static_cast<std::size_t>(i)]);
      grad[static_cast<std::size_t>(j)] = g;
    }
    Point& val = out.value[static_cast<std::size_t>(l)];
    val[k] = f;
    Point& c = out.curl[static_cast<std::size_t>(l)];
    if (dim == 2) {
      // curl(f e_x) = -d_y f, curl(f e_y) = d_x f
      c[0] = (e.axis == 0) ? -grad[1] : grad[0];
    } else {
      // curl(f e_k) = grad f x e_k
      Point ek{};
      ek[k] = 1.0;
      c[0] = grad[1] * ek[2] - grad[2] * ek[1];
      c[1] = grad[2] * ek[0] - grad[0] * ek[2];
      c[2] = grad[0] * ek[1] - grad[1] * ek[0];
    }
  }
  return out;
}

/// Shape-function tables at the points of a reference rule, for a mesh of
/// identical elements with widths h.
struct ElementTables {
  int dim = 2;
  Point h{};
  CellRule rule;
  double volume = 1.0;
  std::vector<NodalEval> nodal;
  std::vector<EdgeEval> edge;

  ElementTables(int dim_, const Point& h_, int points_per_axis) : dim(dim_), h(h_), rule(tensor_rule(dim_, points_per_axis)) {
    for (int j = 0; j < dim; ++j) volume *= h[static_cast<std::size_t>(j)];
    for (const auto& xi : rule.points) {
      nodal.push_back(eval_nodal(dim, h, xi));
      edge.push_back(eval_edge(dim, h, xi));
    }
  }

  Point physical(const Point& origin, int q) const {
    Point x{};
    for (int j = 0; j < dim; ++j)
      x[static_cast<std::size_t>(j)] = origin[static_cast<std::size_t>(j)] + rule.points[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
    return x;
  }
};

}  // namespace mshom
