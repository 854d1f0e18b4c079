#pragma once

// Global assembly of the scalar stiffness (nodal Q1), curl-curl stiffness and
// vector mass (lowest-order edge elements), plus edge-field utilities:
// interpolation of closed forms, load vectors, point evaluation and norms.

#include <array>
#include <functional>
#include <vector>

#include "mshom/elements.hpp"
#include "mshom/mesh.hpp"
#include "mshom/sparse.hpp"

namespace mshom {

/// Vector field on D: value at x (first dim components used).
using VectorField = std::function<Point(const Point&)>;

namespace detail {

/// Quadrature points per axis for the curl-curl stiffness. In 2D the curl of a
/// lowest-order edge function is constant on each element, so the element
/// matrix only needs the element integral of a; it is taken with the
/// element-midpoint rule.
inline int curl_points(int dim, int points_per_axis) { return dim == 2 ? 1 : points_per_axis; }

template <class Coef>
void scalar_stiffness_element(const ElementTables& t, const Point& origin, Coef&& coef, double* ke) {
  const int nv = local_node_count(t.dim);
  std::fill(ke, ke + nv * nv, 0.0);
  for (int q = 0; q < t.rule.size(); ++q) {
    const SymMatrix b = coef(t.physical(origin, q));
    const double w = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
    const NodalEval& ne = t.nodal[static_cast<std::size_t>(q)];
    for (int i = 0; i < nv; ++i) {
      std::array<double, 3> bg{};
      for (int r = 0; r < t.dim; ++r)
        for (int s = 0; s < t.dim; ++s) bg[static_cast<std::size_t>(r)] += b(r, s) * ne.grad[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      for (int j = i; j < nv; ++j) {
        double v = 0.0;
        for (int r = 0; r < t.dim; ++r) v += bg[static_cast<std::size_t>(r)] * ne.grad[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
        ke[i * nv + j] += w * v;
      }
    }
  }
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < i; ++j) ke[i * nv + j] = ke[j * nv + i];
}

template <class Coef>
void curl_stiffness_element(const ElementTables& t, const Point& origin, Coef&& coef, double* ke) {
  const int ne = local_edge_count(t.dim);
  const int cs = curl_size(t.dim);
  std::fill(ke, ke + ne * ne, 0.0);
  for (int q = 0; q < t.rule.size(); ++q) {
    const SymMatrix a = coef(t.physical(origin, q));
    const double w = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
    const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
    for (int i = 0; i < ne; ++i) {
      std::array<double, 3> ac{};
      for (int r = 0; r < cs; ++r)
        for (int s = 0; s < cs; ++s) ac[static_cast<std::size_t>(r)] += a(r, s) * ee.curl[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      for (int j = i; j < ne; ++j) {
        double v = 0.0;
        for (int r = 0; r < cs; ++r) v += ac[static_cast<std::size_t>(r)] * ee.curl[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
        ke[i * ne + j] += w * v;
      }
    }
  }
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < i; ++j) ke[i * ne + j] = ke[j * ne + i];
}

template <class Coef>
void mass_element(const ElementTables& t, const Point& origin, Coef&& coef, double* ke) {
  const int ne = local_edge_count(t.dim);
  std::fill(ke, ke + ne * ne, 0.0);
  for (int q = 0; q < t.rule.size(); ++q) {
    const SymMatrix b = coef(t.physical(origin, q));
    const double w = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
    const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
    for (int i = 0; i < ne; ++i) {
      std::array<double, 3> bv{};
      for (int r = 0; r < t.dim; ++r)
        for (int s = 0; s < t.dim; ++s) bv[static_cast<std::size_t>(r)] += b(r, s) * ee.value[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      for (int j = i; j < ne; ++j) {
        double v = 0.0;
        for (int r = 0; r < t.dim; ++r) v += bv[static_cast<std::size_t>(r)] * ee.value[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
        ke[i * ne + j] += w * v;
      }
    }
  }
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < i; ++j) ke[i * ne + j] = ke[j * ne + i];
}

}  // namespace detail

/// Discrete gradient: free edges x interior nodes, (G p)_e = p(end) - p(start).
inline SparseMatrix discrete_gradient(const DomainMesh& mesh) {
  std::vector<Eigen::Triplet<double, int>> trip;
  for (int f = 0; f < mesh.free_edge_count(); ++f) {
    const auto [axis, start] = mesh.edge_index(mesh.edge_of_free(f));
    Index3 end = start;
    end[static_cast<std::size_t>(axis)] += 1;
    const int a = mesh.interior_node(mesh.node(start));
    const int b = mesh.interior_node(mesh.node(end));
    if (a >= 0) trip.emplace_back(f, a, -1.0);
    if (b >= 0) trip.emplace_back(f, b, 1.0);
  }
  SparseMatrix g(mesh.free_edge_count(), mesh.interior_node_count());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

/// Periodic discrete gradient: edges x nodes of the cell mesh.
inline SparseMatrix discrete_gradient(const CellMesh& mesh) {
  std::vector<Eigen::Triplet<double, int>> trip;
  for (int axis = 0; axis < mesh.dim(); ++axis)
    for (int v = 0; v < mesh.node_count(); ++v) {
      const Index3 start = element_multi_index(mesh.dim(), mesh.subdivisions(), v);
      Index3 end = start;
      end[static_cast<std::size_t>(axis)] += 1;
      const int e = mesh.edge(axis, start);
      const int a = mesh.node(start), b = mesh.node(end);
      if (a == b) continue;
      trip.emplace_back(e, a, -1.0);
      trip.emplace_back(e, b, 1.0);
    }
  SparseMatrix g(mesh.edge_count(), mesh.node_count());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

/// \int_Y b grad(phi_i) . grad(phi_j) dy on the periodic cell mesh.
template <class Coef>
SparseSymSystem assemble_scalar_stiffness(const CellMesh& mesh, Coef&& coef, int points_per_axis = 2) {
  const ElementTables t(mesh.dim(), mesh.spacing(), points_per_axis);
  const int nv = local_node_count(mesh.dim());
  SymAssembler asmb(mesh.node_count());
  asmb.reserve(static_cast<std::size_t>(mesh.element_count()) * static_cast<std::size_t>(nv * nv));
  std::array<double, 64> ke{};
  for (int e = 0; e < mesh.element_count(); ++e) {
    detail::scalar_stiffness_element(t, mesh.element_origin(e), coef, ke.data());
    const auto dofs = mesh.element_nodes(e);
    asmb.add(dofs.data(), nv, ke.data());
  }
  return {asmb.finish(), Nullspace::constants, 0, nullptr};
}

/// \int_Y a curl(phi_i) . curl(phi_j) dy on the periodic cell mesh.
template <class Coef>
SparseSymSystem assemble_curl_stiffness(const CellMesh& mesh, Coef&& coef, int points_per_axis = 2) {
  const ElementTables t(mesh.dim(), mesh.spacing(), detail::curl_points(mesh.dim(), points_per_axis));
  const int ne = local_edge_count(mesh.dim());
  SymAssembler asmb(mesh.edge_count());
  asmb.reserve(static_cast<std::size_t>(mesh.element_count()) * static_cast<std::size_t>(ne * ne));
  std::array<double, 144> ke{};
  for (int e = 0; e < mesh.element_count(); ++e) {
    detail::curl_stiffness_element(t, mesh.element_origin(e), coef, ke.data());
    const auto dofs = mesh.element_edges(e);
    asmb.add(dofs.data(), ne, ke.data());
  }
  SparseSymSystem sys{asmb.finish(), Nullspace::gradients, 0, nullptr};
  std::vector<Vector> harmonic;
  for (int axis = 0; axis < mesh.dim(); ++axis) {
    Vector h = Vector::Zero(mesh.edge_count());
    h.segment(axis * mesh.node_count(), mesh.node_count()).setConstant(1.0 / std::sqrt(static_cast<double>(mesh.node_count())));
    harmonic.push_back(std::move(h));
  }
  sys.kernel = std::make_shared<KernelProjector>(discrete_gradient(mesh), std::move(harmonic), Nullspace::constants);
  return sys;
}

/// \int_D a curl(phi_i) . curl(phi_j) dx over free (interior) edges.
template <class Coef>
SparseSymSystem assemble_curl_stiffness(const DomainMesh& mesh, Coef&& coef, int points_per_axis = 2) {
  const ElementTables t(mesh.dim(), mesh.spacing(), detail::curl_points(mesh.dim(), points_per_axis));
  const int ne = local_edge_count(mesh.dim());
  SymAssembler asmb(mesh.free_edge_count());
  asmb.reserve(static_cast<std::size_t>(mesh.element_count()) * static_cast<std::size_t>(ne * ne));
  std::array<double, 144> ke{};
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Index3 c = mesh.element_index(e);
    detail::curl_stiffness_element(t, mesh.element_origin(c), coef, ke.data());
    const auto dofs = mesh.element_free_edges(c);
    asmb.add(dofs.data(), ne, ke.data());
  }
  SparseSymSystem sys{asmb.finish(), Nullspace::gradients, mesh.boundary_edge_count(), nullptr};
  sys.kernel = std::make_shared<KernelProjector>(discrete_gradient(mesh), std::vector<Vector>{}, Nullspace::none);
  return sys;
}

/// \int_D b phi_i . phi_j dx over free edges.
template <class Coef>
SparseSymSystem assemble_vector_mass(const DomainMesh& mesh, Coef&& coef, int points_per_axis = 2) {
  const ElementTables t(mesh.dim(), mesh.spacing(), points_per_axis);
  const int ne = local_edge_count(mesh.dim());
  SymAssembler asmb(mesh.free_edge_count());
  asmb.reserve(static_cast<std::size_t>(mesh.element_count()) * static_cast<std::size_t>(ne * ne));
  std::array<double, 144> ke{};
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Index3 c = mesh.element_index(e);
    detail::mass_element(t, mesh.element_origin(c), coef, ke.data());
    const auto dofs = mesh.element_free_edges(c);
    asmb.add(dofs.data(), ne, ke.data());
  }
  return {asmb.finish(), Nullspace::none, mesh.boundary_edge_count(), nullptr};
}

/// Edge interpolant: each free DOF is the tangential line integral of g along
/// its edge (3-point Gauss).
inline Vector interpolate_edges(const DomainMesh& mesh, const VectorField& g) {
  const Rule1D r = gauss_rule(3);
  Vector out(mesh.free_edge_count());
  for (int f = 0; f < mesh.free_edge_count(); ++f) {
    const auto [axis, start] = mesh.edge_index(mesh.edge_of_free(f));
    const Point x0 = mesh.element_origin(start);
    const double len = mesh.h(axis);
    double s = 0.0;
    for (int q = 0; q < r.size(); ++q) {
      Point x = x0;
      x[static_cast<std::size_t>(axis)] += r.nodes[static_cast<std::size_t>(q)] * len;
      s += r.weights[static_cast<std::size_t>(q)] * g(x)[static_cast<std::size_t>(axis)];
    }
    out[f] = s * len;
  }
  return out;
}

/// Load vector \int_D f . phi_i dx over free edges.
inline Vector load_vector(const DomainMesh& mesh, const VectorField& f, int points_per_axis = 2) {
  const ElementTables t(mesh.dim(), mesh.spacing(), points_per_axis);
  const int ne = local_edge_count(mesh.dim());
  Vector out = Vector::Zero(mesh.free_edge_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Index3 c = mesh.element_index(e);
    const Point origin = mesh.element_origin(c);
    const auto dofs = mesh.element_free_edges(c);
    for (int q = 0; q < t.rule.size(); ++q) {
      const Point fx = f(t.physical(origin, q));
      const double w = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
      const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
      for (int l = 0; l < ne; ++l) {
        const int d = dofs[static_cast<std::size_t>(l)];
        if (d < 0) continue;
        double v = 0.0;
        for (int j = 0; j < mesh.dim(); ++j) v += fx[static_cast<std::size_t>(j)] * ee.value[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
        out[d] += w * v;
      }
    }
  }
  return out;
}

/// Value and curl of an edge field at a point inside one element.
struct EdgeSample {
  Point value{};
  Point curl{};  // 2D: scalar curl in component 0
};

/// Evaluates a free-DOF edge field on element `c` at local coordinates xi.
inline EdgeSample sample_edge_field(const DomainMesh& mesh, const Vector& field, const Index3& c, const Point& xi) {
  const EdgeEval ee = eval_edge(mesh.dim(), mesh.spacing(), xi);
  const auto dofs = mesh.element_free_edges(c);
  EdgeSample s;
  for (int l = 0; l < local_edge_count(mesh.dim()); ++l) {
    const int d = dofs[static_cast<std::size_t>(l)];
    if (d < 0) continue;
    const double u = field[d];
    for (int j = 0; j < 3; ++j) {
      s.value[static_cast<std::size_t>(j)] += u * ee.value[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      s.curl[static_cast<std::size_t>(j)] += u * ee.curl[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
    }
  }
  return s;
}

inline EdgeSample sample_edge_field(const DomainMesh& mesh, const Vector& field, const Point& x) {
  const Location loc = locate(mesh, x);
  return sample_edge_field(mesh, field, loc.cell, loc.local);
}

/// L2(D) norm of (u_h - exact) for a free-DOF edge field.
inline double l2_error(const DomainMesh& mesh, const Vector& field, const VectorField& exact, int points_per_axis = 3) {
  const ElementTables t(mesh.dim(), mesh.spacing(), points_per_axis);
  const int ne = local_edge_count(mesh.dim());
  double sum = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Index3 c = mesh.element_index(e);
    const Point origin = mesh.element_origin(c);
    const auto dofs = mesh.element_free_edges(c);
    for (int q = 0; q < t.rule.size(); ++q) {
      Point uh{};
      const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
      for (int l = 0; l < ne; ++l) {
        const int d = dofs[static_cast<std::size_t>(l)];
        if (d < 0) continue;
        for (int j = 0; j < mesh.dim(); ++j) uh[static_cast<std::size_t>(j)] += field[d] * ee.value[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      }
      const Point ex = exact(t.physical(origin, q));
      double d2 = 0.0;
      for (int j = 0; j < mesh.dim(); ++j) {
        const double diff = uh[static_cast<std::size_t>(j)] - ex[static_cast<std::size_t>(j)];
        d2 += diff * diff;
      }
      sum += t.rule.weights[static_cast<std::size_t>(q)] * t.volume * d2;
    }
  }
  return std::sqrt(sum);
}

}  // namespace mshom
