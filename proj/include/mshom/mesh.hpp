#pragma once

// Structured tensor-product grids: the periodic unit cell Y and the box D.
//
// Local numbering on an element (quad/hex), shared by both meshes:
//   nodes : local index v, bit j of v = offset along axis j
//   edges : for axis k = 0..d-1, 2^(d-1) edges parallel to e_k; the corner
//           index c lists the offsets along the remaining axes in increasing
//           axis order (bit 0 = first remaining axis).
// Every edge is oriented along +e_k, so no sign flips appear in assembly.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mshom/coeffs.hpp"
#include "mshom/errors.hpp"

namespace mshom {

using Index3 = std::array<int, 3>;

inline constexpr int local_node_count(int dim) { return 1 << dim; }
inline constexpr int local_edge_count(int dim) { return dim * (1 << (dim - 1)); }

struct LocalEdge {
  int axis;
  int corner;
};

inline LocalEdge local_edge(int dim, int l) {
  const int per_axis = 1 << (dim - 1);
  return {l / per_axis, l % per_axis};
}

/// Offset (0/1 per axis) of the start node of a local edge.
inline Index3 edge_start_offset(int dim, LocalEdge e) {
  Index3 off{0, 0, 0};
  int bit = 0;
  for (int j = 0; j < dim; ++j) {
    if (j == e.axis) continue;
    off[static_cast<std::size_t>(j)] = (e.corner >> bit) & 1;
    ++bit;
  }
  return off;
}

inline int ipow(int base, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

/// Element multi-index from a linear element id (axis 0 fastest).
inline Index3 element_multi_index(int dim, int n, int elem) {
  Index3 c{0, 0, 0};
  for (int j = 0; j < dim; ++j) {
    c[static_cast<std::size_t>(j)] = elem % n;
    elem /= n;
  }
  return c;
}

/// Periodic mesh of the unit cell [0,1)^d with N subdivisions per axis.
class CellMesh {
 public:
  CellMesh() = default;
  CellMesh(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 2 && dim != 3) detail::fail_validation("CellMesh: dimension must be 2 or 3");
    if (n < 1) detail::fail_validation("CellMesh: need N >= 1 subdivisions");
    nd_ = ipow(n, dim);
  }

  int dim() const { return dim_; }
  int subdivisions() const { return n_; }
  double h() const { return 1.0 / n_; }
  Point spacing() const { return {h(), dim_ >= 2 ? h() : 0.0, dim_ == 3 ? h() : 0.0}; }
  int element_count() const { return nd_; }
  int node_count() const { return nd_; }
  int edge_count() const { return dim_ * nd_; }

  /// Node id of a (possibly out-of-range) multi-index, wrapped periodically.
  int node(Index3 i) const {
    int id = 0, stride = 1;
    for (int j = 0; j < dim_; ++j) {
      int v = i[static_cast<std::size_t>(j)] % n_;
      if (v < 0) v += n_;
      id += v * stride;
      stride *= n_;
    }
    return id;
  }

  int edge(int axis, Index3 start) const { return axis * nd_ + node(start); }

  Index3 element_index(int elem) const { return element_multi_index(dim_, n_, elem); }
  int element_id(Index3 c) const { return node(c); }

  std::array<int, 8> element_nodes(int elem) const {
    const Index3 c = element_index(elem);
    std::array<int, 8> out{};
    for (int v = 0; v < local_node_count(dim_); ++v) {
      Index3 p = c;
      for (int j = 0; j < dim_; ++j) p[static_cast<std::size_t>(j)] += (v >> j) & 1;
      out[static_cast<std::size_t>(v)] = node(p);
    }
    return out;
  }

  std::array<int, 12> element_edges(int elem) const {
    const Index3 c = element_index(elem);
    std::array<int, 12> out{};
    for (int l = 0; l < local_edge_count(dim_); ++l) {
      const LocalEdge e = local_edge(dim_, l);
      const Index3 off = edge_start_offset(dim_, e);
      Index3 p = c;
      for (int j = 0; j < dim_; ++j) p[static_cast<std::size_t>(j)] += off[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(l)] = edge(e.axis, p);
    }
    return out;
  }

  Point element_origin(int elem) const {
    const Index3 c = element_index(elem);
    Point o{};
    for (int j = 0; j < dim_; ++j) o[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j)] * h();
    return o;
  }

 private:
  int dim_ = 2;
  int n_ = 1;
  int nd_ = 1;
};

/// Box [0,L_1] x ... x [0,L_d] with N subdivisions per axis. Edges lying in
/// the boundary carry the essential condition u x nu = 0 and are eliminated;
/// the remaining ("free") edges are numbered contiguously in edge order.
class DomainMesh {
 public:
  DomainMesh() = default;
  DomainMesh(int dim, int n, Point extents = {1.0, 1.0, 1.0}) : dim_(dim), n_(n), extents_(extents) {
    if (dim != 2 && dim != 3) detail::fail_validation("DomainMesh: dimension must be 2 or 3");
    if (n < 1) detail::fail_validation("DomainMesh: need N >= 1 subdivisions");
    for (int j = 0; j < dim; ++j)
      if (!(extents[static_cast<std::size_t>(j)] > 0.0)) detail::fail_validation("DomainMesh: extents must be positive");
    if (dim == 2) extents_[2] = 0.0;
    int offset = 0;
    for (int k = 0; k < dim; ++k) {
      axis_offset_[static_cast<std::size_t>(k)] = offset;
      offset += n * ipow(n + 1, dim - 1);
    }
    edge_total_ = offset;
    free_of_edge_.assign(static_cast<std::size_t>(edge_total_), -1);
    for (int e = 0; e < edge_total_; ++e) {
      if (!edge_on_boundary(e)) {
        free_of_edge_[static_cast<std::size_t>(e)] = static_cast<int>(free_edges_.size());
        free_edges_.push_back(e);
      }
    }
    const int nn = ipow(n + 1, dim);
    free_of_node_.assign(static_cast<std::size_t>(nn), -1);
    for (int v = 0; v < nn; ++v) {
      const Index3 p = node_index(v);
      bool interior = true;
      for (int j = 0; j < dim; ++j)
        if (p[static_cast<std::size_t>(j)] == 0 || p[static_cast<std::size_t>(j)] == n) interior = false;
      if (interior) {
        free_of_node_[static_cast<std::size_t>(v)] = static_cast<int>(interior_nodes_.size());
        interior_nodes_.push_back(v);
      }
    }
  }

  int dim() const { return dim_; }
  int subdivisions() const { return n_; }
  const Point& extents() const { return extents_; }
  double h(int axis) const { return extents_[static_cast<std::size_t>(axis)] / n_; }
  Point spacing() const { return {h(0), h(1), dim_ == 3 ? h(2) : 0.0}; }
  double max_h() const {
    double m = 0.0;
    for (int j = 0; j < dim_; ++j) m = std::max(m, h(j));
    return m;
  }
  double element_volume() const {
    double v = 1.0;
    for (int j = 0; j < dim_; ++j) v *= h(j);
    return v;
  }
  int element_count() const { return ipow(n_, dim_); }
  int node_count() const { return ipow(n_ + 1, dim_); }
  int edge_count() const { return edge_total_; }
  int free_edge_count() const { return static_cast<int>(free_edges_.size()); }
  int boundary_edge_count() const { return edge_total_ - free_edge_count(); }
  int interior_node_count() const { return static_cast<int>(interior_nodes_.size()); }

  int node(Index3 i) const {
    int id = 0, stride = 1;
    for (int j = 0; j < dim_; ++j) {
      id += i[static_cast<std::size_t>(j)] * stride;
      stride *= n_ + 1;
    }
    return id;
  }

  Index3 node_index(int v) const {
    Index3 p{0, 0, 0};
    for (int j = 0; j < dim_; ++j) {
      p[static_cast<std::size_t>(j)] = v % (n_ + 1);
      v /= n_ + 1;
    }
    return p;
  }

  Point node_position(int v) const {
    const Index3 p = node_index(v);
    Point x{};
    for (int j = 0; j < dim_; ++j) x[static_cast<std::size_t>(j)] = p[static_cast<std::size_t>(j)] * h(j);
    return x;
  }

  /// Edge id of the edge along `axis` starting at node multi-index `start`.
  int edge(int axis, Index3 start) const {
    int id = 0, stride = 1;
    for (int j = 0; j < dim_; ++j) {
      id += start[static_cast<std::size_t>(j)] * stride;
      stride *= (j == axis) ? n_ : n_ + 1;
    }
    return axis_offset_[static_cast<std::size_t>(axis)] + id;
  }

  /// (axis, start node multi-index) of an edge id.
  std::pair<int, Index3> edge_index(int e) const {
    int axis = dim_ - 1;
    while (axis > 0 && e < axis_offset_[static_cast<std::size_t>(axis)]) --axis;
    int id = e - axis_offset_[static_cast<std::size_t>(axis)];
    Index3 p{0, 0, 0};
    for (int j = 0; j < dim_; ++j) {
      const int range = (j == axis) ? n_ : n_ + 1;
      p[static_cast<std::size_t>(j)] = id % range;
      id /= range;
    }
    return {axis, p};
  }

  bool edge_on_boundary(int e) const {
    const auto [axis, p] = edge_index(e);
    for (int j = 0; j < dim_; ++j) {
      if (j == axis) continue;
      if (p[static_cast<std::size_t>(j)] == 0 || p[static_cast<std::size_t>(j)] == n_) return true;
    }
    return false;
  }

  /// Free (interior) id of an edge, or -1 if it lies on the boundary.
  int free_edge(int e) const { return free_of_edge_[static_cast<std::size_t>(e)]; }
  int edge_of_free(int f) const { return free_edges_[static_cast<std::size_t>(f)]; }
  int interior_node(int v) const { return free_of_node_[static_cast<std::size_t>(v)]; }
  int node_of_interior(int i) const { return interior_nodes_[static_cast<std::size_t>(i)]; }

  Index3 element_index(int elem) const { return element_multi_index(dim_, n_, elem); }

  int element_id(Index3 c) const {
    int id = 0, stride = 1;
    for (int j = 0; j < dim_; ++j) {
      id += c[static_cast<std::size_t>(j)] * stride;
      stride *= n_;
    }
    return id;
  }

  Point element_origin(int elem) const { return element_origin(element_index(elem)); }
  Point element_origin(Index3 c) const {
    Point o{};
    for (int j = 0; j < dim_; ++j) o[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j)] * h(j);
    return o;
  }

  std::array<int, 8> element_nodes(int elem) const { return element_nodes(element_index(elem)); }
  std::array<int, 8> element_nodes(Index3 c) const {
    std::array<int, 8> out{};
    for (int v = 0; v < local_node_count(dim_); ++v) {
      Index3 p = c;
      for (int j = 0; j < dim_; ++j) p[static_cast<std::size_t>(j)] += (v >> j) & 1;
      out[static_cast<std::size_t>(v)] = node(p);
    }
    return out;
  }

  /// Global edge ids of an element in local order.
  std::array<int, 12> element_edges(int elem) const { return element_edges(element_index(elem)); }
  std::array<int, 12> element_edges(Index3 c) const {
    std::array<int, 12> out{};
    for (int l = 0; l < local_edge_count(dim_); ++l) {
      const LocalEdge e = local_edge(dim_, l);
      const Index3 off = edge_start_offset(dim_, e);
      Index3 p = c;
      for (int j = 0; j < dim_; ++j) p[static_cast<std::size_t>(j)] += off[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(l)] = edge(e.axis, p);
    }
    return out;
  }

  /// Free ids of an element's edges in local order (-1 for boundary edges).
  std::array<int, 12> element_free_edges(Index3 c) const {
    auto out = element_edges(c);
    for (int l = 0; l < local_edge_count(dim_); ++l) out[static_cast<std::size_t>(l)] = free_edge(out[static_cast<std::size_t>(l)]);
    return out;
  }
  std::array<int, 12> element_free_edges(int elem) const { return element_free_edges(element_index(elem)); }

 private:
  int dim_ = 2;
  int n_ = 1;
  Point extents_{1.0, 1.0, 1.0};
  std::array<int, 3> axis_offset_{0, 0, 0};
  int edge_total_ = 0;
  std::vector<int> free_of_edge_;
  std::vector<int> free_edges_;
  std::vector<int> free_of_node_;
  std::vector<int> interior_nodes_;
};

struct Location {
  Index3 cell{0, 0, 0};
  Point local{0.0, 0.0, 0.0};
};

namespace detail {
/// Cell along one axis for coordinate t measured in cell widths. Points on an
/// interior face belong to the lower cell.
inline std::pair<int, double> locate_axis(double t, int n) {
  int c = static_cast<int>(std::ceil(t)) - 1;
  if (c < 0) c = 0;
  if (c > n - 1) c = n - 1;
  double local = t - c;
  if (local < 0.0) local = 0.0;
  if (local > 1.0) local = 1.0;
  return {c, local};
}
}  // namespace detail

/// Cell containing x and the local coordinates of x in [0,1]^d.
inline Location locate(const DomainMesh& mesh, const Point& x) {
  Location loc;
  for (int j = 0; j < mesh.dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double L = mesh.extents()[ju];
    const double tol = 1e-12 * L;
    if (x[ju] < -tol || x[ju] > L + tol)
      detail::fail_validation("locate: point outside the mesh extents along axis " + std::to_string(j));
    const auto [c, l] = detail::locate_axis(x[ju] / mesh.h(j), mesh.subdivisions());
    loc.cell[ju] = c;
    loc.local[ju] = l;
  }
  return loc;
}

/// Cell of the unit cell Y containing y in [0,1]^d.
inline Location locate(const CellMesh& mesh, const Point& y) {
  Location loc;
  for (int j = 0; j < mesh.dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (y[ju] < -1e-12 || y[ju] > 1.0 + 1e-12) detail::fail_validation("locate: point outside the unit cell");
    const auto [c, l] = detail::locate_axis(y[ju] * mesh.subdivisions(), mesh.subdivisions());
    loc.cell[ju] = c;
    loc.local[ju] = l;
  }
  return loc;
}

}  // namespace mshom
