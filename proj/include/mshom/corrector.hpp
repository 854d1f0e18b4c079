#pragma once
// First-order correctors, unfolding/folding operators and homogenization
// error norms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "assembly.hpp"
#include "cells.hpp"
#include "wave.hpp"

namespace mshom {

using ScalarField = std::function<double(const Point&)>;

namespace detail {

inline Vec to_vec(const Point& p, int m) {
  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = p[static_cast<std::size_t>(i)];
  return v;
}

inline Point to_point(const Vec& v) {
  Point p{};
  for (int i = 0; i < v.size(); ++i) p[static_cast<std::size_t>(i)] = v[i];
  return p;
}

inline void require_integer_inverse(const ScaleSchedule& sched) {
  sched.validate(sched.scales());
  const double inv = 1.0 / sched.epsilon;
  if (std::abs(inv - std::round(inv)) > 1e-9 * inv) fail_validation("unfolding: 1/epsilon must be an integer");
}

/// Integral over [lo,hi] (clipped to the mesh box) of f(cell, local, x), using
/// 2-point Gauss on every clipped element piece. Exact for fields that are
/// polynomial of degree <= 3 per axis on each element.
template <std::size_t K, class F>
std::array<double, K> box_integral(const DomainMesh& mesh, const Point& lo, const Point& hi, F&& f) {
  const int d = mesh.dim(), n = mesh.subdivisions();
  const Rule1D g = gauss_rule(2);
  std::array<double, K> sum{};
  Index3 first{0, 0, 0}, last{0, 0, 0};
  Point a{}, b{};
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double h = mesh.h(j), L = mesh.extents()[ju];
    a[ju] = std::clamp(lo[ju], 0.0, L);
    b[ju] = std::clamp(hi[ju], 0.0, L);
    if (b[ju] <= a[ju]) return sum;
    first[ju] = std::clamp(static_cast<int>(std::floor(a[ju] / h)), 0, n - 1);
    last[ju] = std::clamp(static_cast<int>(std::ceil(b[ju] / h)) - 1, 0, n - 1);
  }
  const int npts = ipow(g.size(), d);
  Index3 c = first;
  while (true) {
    Point pa{}, pb{};
    bool empty = false;
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double h = mesh.h(j);
      pa[ju] = std::max(a[ju], c[ju] * h);
      pb[ju] = std::min(b[ju], (c[ju] + 1) * h);
      if (pb[ju] <= pa[ju]) empty = true;
    }
    if (!empty) {
      for (int q = 0; q < npts; ++q) {
        Point x{}, xi{};
        double w = 1.0;
        int rest = q;
        for (int j = 0; j < d; ++j) {
          const auto ju = static_cast<std::size_t>(j);
          const int k = rest % g.size();
          rest /= g.size();
          const double len = pb[ju] - pa[ju];
          x[ju] = pa[ju] + g.nodes[static_cast<std::size_t>(k)] * len;
          xi[ju] = x[ju] / mesh.h(j) - c[ju];
          w *= g.weights[static_cast<std::size_t>(k)] * len;
        }
        const std::array<double, K> v = f(c, xi, x);
        for (std::size_t i = 0; i < K; ++i) sum[i] += w * v[i];
      }
    }
    int j = 0;
    for (; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (++c[ju] <= last[ju]) break;
      c[ju] = first[ju];
    }
    if (j == d) break;
  }
  return sum;
}

inline double ramp(double s, double L, double eps) { return std::clamp(std::min(s / eps, (L - s) / eps), 0.0, 1.0); }

inline double ramp_slope(double s, double L, double eps) {
  const double lo = s / eps, hi = (L - s) / eps;
  if (std::min(lo, hi) >= 1.0 || std::min(lo, hi) <= 0.0) return 0.0;
  return lo <= hi ? 1.0 / eps : -1.0 / eps;
}

/// Quantized key for memoizing time-independent corrector matrices.
using ChainKey = std::array<std::int64_t, 27>;

struct ChainKeyHash {
  std::size_t operator()(const ChainKey& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : k) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

inline constexpr double kKeyScale = 1073741824.0;  // 2^30

inline std::int64_t quantize(double y) { return std::llround(y * kKeyScale); }
inline double dequantize(std::int64_t k) { return static_cast<double>(k) / kKeyScale; }

}  // namespace detail

/// tau = product of 1D ramps: 1 at distance >= eps from the boundary, 0 on it.
inline double cutoff_value(const Point& x, const Point& extents, int dim, double eps) {
  double t = 1.0;
  for (int j = 0; j < dim; ++j) t *= detail::ramp(x[static_cast<std::size_t>(j)], extents[static_cast<std::size_t>(j)], eps);
  return t;
}

inline Point cutoff_gradient(const Point& x, const Point& extents, int dim, double eps) {
  Point g{};
  for (int j = 0; j < dim; ++j) {
    double v = detail::ramp_slope(x[static_cast<std::size_t>(j)], extents[static_cast<std::size_t>(j)], eps);
    for (int i = 0; i < dim; ++i)
      if (i != j) v *= detail::ramp(x[static_cast<std::size_t>(i)], extents[static_cast<std::size_t>(i)], eps);
    g[static_cast<std::size_t>(j)] = v;
  }
  return g;
}

/// Nodal values (all nodes, boundary included) of the cutoff for layer width eps.
inline Vector cutoff_field(const DomainMesh& mesh, double eps) {
  if (!(eps >= 2.0 * mesh.max_h() * (1.0 - 1e-12)))
    detail::fail_validation("cutoff: layer width " + std::to_string(eps) + " is below 2h = " + std::to_string(2.0 * mesh.max_h()));
  Vector tau(mesh.node_count());
  for (int v = 0; v < mesh.node_count(); ++v) tau[v] = cutoff_value(mesh.node_position(v), mesh.extents(), mesh.dim(), eps);
  return tau;
}

/// Integral of phi^2 over the eps-neighbourhood of the boundary.
inline double boundary_layer_integral(const DomainMesh& mesh, const ScalarField& phi, double eps) {
  auto sq = [&](const Index3&, const Point&, const Point& x) {
    const double v = phi(x);
    return std::array<double, 1>{v * v};
  };
  Point lo{}, hi{}, ilo{}, ihi{};
  for (int j = 0; j < mesh.dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    hi[ju] = mesh.extents()[ju];
    ilo[ju] = eps;
    ihi[ju] = mesh.extents()[ju] - eps;
  }
  const double whole = detail::box_integral<1>(mesh, lo, hi, sq)[0];
  const double inner = detail::box_integral<1>(mesh, ilo, ihi, sq)[0];
  return whole - inner;
}

// ---------------------------------------------------------------------------
// Unfolding and folding

/// Samples of T(phi) on macro cells of D^{eps_1} times midpoint grids of Y_1..Y_n.
/// Layout: macro cell (axis 0 fastest), then the Y_1 grid, ..., then the Y_n grid.
struct UnfoldedField {
  int dim = 2;
  ScaleSchedule schedule;
  Point extents{};
  Index3 macro{1, 1, 1};
  std::vector<int> points;  ///< midpoints per axis on each Y_i
  std::vector<double> values;

  int macro_count() const { return macro[0] * (dim >= 2 ? macro[1] : 1) * (dim == 3 ? macro[2] : 1); }
  int grid_size(int level) const { return ipow(points[static_cast<std::size_t>(level - 1)], dim); }

  std::size_t flat(int macro_id, std::span<const int> y_ids) const {
    std::size_t idx = 0, stride = 1;
    idx += static_cast<std::size_t>(macro_id);
    stride *= static_cast<std::size_t>(macro_count());
    for (int i = 1; i <= schedule.scales(); ++i) {
      idx += stride * static_cast<std::size_t>(y_ids[static_cast<std::size_t>(i - 1)]);
      stride *= static_cast<std::size_t>(grid_size(i));
    }
    return idx;
  }

  /// Sum over the product grid times the cell measures; approximates the double integral.
  double integral() const {
    double cell = 1.0;
    for (int j = 0; j < dim; ++j) cell *= schedule.epsilon;
    double w = cell;
    for (int i = 1; i <= schedule.scales(); ++i) w /= grid_size(i);
    double s = 0.0;
    for (double v : values) s += v;
    return w * s;
  }
};

namespace detail {

inline Index3 split_index(int id, int base, int dim) {
  Index3 k{0, 0, 0};
  for (int j = 0; j < dim; ++j) {
    k[static_cast<std::size_t>(j)] = id % base;
    id /= base;
  }
  return k;
}

inline bool inside_box(const Point& z, const Point& extents, int dim) {
  for (int j = 0; j < dim; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double tol = 1e-12 * extents[ju];
    if (z[ju] < -tol || z[ju] > extents[ju] + tol) return false;
  }
  return true;
}

inline Index3 macro_counts(const ScaleSchedule& sched, const Point& extents, int dim) {
  Index3 m{1, 1, 1};
  for (int j = 0; j < dim; ++j)
    m[static_cast<std::size_t>(j)] = std::max(1, static_cast<int>(std::ceil(extents[static_cast<std::size_t>(j)] / sched.epsilon - 1e-9)));
  return m;
}

inline int macro_id(const Index3& c, const Index3& m) { return c[0] + m[0] * (c[1] + m[1] * c[2]); }

/// Macro cell of x and, for i < n, the sub-block index [r_{i+1} {x / eps_i}].
struct LatticePosition {
  Index3 cell{0, 0, 0};
  std::array<Index3, 8> block{};
  Point yn{};
};

inline LatticePosition lattice_position(const ScaleSchedule& sched, const Point& x, int dim, const Index3& macro) {
  LatticePosition p;
  const int n = sched.scales();
  for (int j = 0; j < dim; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    p.cell[ju] = std::clamp(static_cast<int>(std::floor(x[ju] / sched.epsilon)), 0, macro[ju] - 1);
    for (int i = 1; i < n; ++i) {
      const int r = sched.ratios[static_cast<std::size_t>(i - 1)];
      const double y = frac(x[ju] / sched.eps(i));
      p.block[static_cast<std::size_t>(i - 1)][ju] = std::clamp(static_cast<int>(std::floor(r * y)), 0, r - 1);
    }
    p.yn[ju] = frac(x[ju] / sched.finest());
  }
  return p;
}

}  // namespace detail

/// T(phi)(x, y) = phi(eps_1[x/eps_1] + sum_{i>=2} eps_i [r_i y_{i-1}] + eps_n y_n), with phi
/// extended by zero outside D. `points[i]` is the midpoint count per axis on Y_{i+1}.
inline UnfoldedField unfold(const ScalarField& phi, const ScaleSchedule& sched, int dim, const Point& extents,
                            std::vector<int> points) {
  detail::require_integer_inverse(sched);
  const int n = sched.scales();
  if (static_cast<int>(points.size()) != n) detail::fail_validation("unfold: need one grid resolution per scale");
  for (int m : points)
    if (m < 1) detail::fail_validation("unfold: grid resolutions must be positive");
  UnfoldedField u;
  u.dim = dim;
  u.schedule = sched;
  u.extents = extents;
  u.points = std::move(points);
  u.macro = detail::macro_counts(sched, extents, dim);
  std::size_t total = static_cast<std::size_t>(u.macro_count());
  for (int i = 1; i <= n; ++i) total *= static_cast<std::size_t>(u.grid_size(i));
  u.values.assign(total, 0.0);

  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    const int mid = static_cast<int>(rest % static_cast<std::size_t>(u.macro_count()));
    rest /= static_cast<std::size_t>(u.macro_count());
    Index3 mc{0, 0, 0};
    {
      int r = mid;
      for (int j = 0; j < dim; ++j) {
        mc[static_cast<std::size_t>(j)] = r % u.macro[static_cast<std::size_t>(j)];
        r /= u.macro[static_cast<std::size_t>(j)];
      }
    }
    Point z{};
    for (int j = 0; j < dim; ++j) z[static_cast<std::size_t>(j)] = sched.epsilon * mc[static_cast<std::size_t>(j)];
    for (int i = 1; i <= n; ++i) {
      const int gs = u.grid_size(i), m = u.points[static_cast<std::size_t>(i - 1)];
      const Index3 k = detail::split_index(static_cast<int>(rest % static_cast<std::size_t>(gs)), m, dim);
      rest /= static_cast<std::size_t>(gs);
      for (int j = 0; j < dim; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double y = (k[ju] + 0.5) / m;
        if (i < n) {
          const int r = sched.ratios[static_cast<std::size_t>(i - 1)];
          z[ju] += sched.eps(i + 1) * std::floor(r * y);
        } else {
          z[ju] += sched.eps(n) * y;
        }
      }
    }
    u.values[flat] = detail::inside_box(z, extents, dim) ? phi(z) : 0.0;
  }
  return u;
}

/// U(Phi)(x) for Phi sampled on the product grid (piecewise constant per grid cell).
inline double fold(const UnfoldedField& f, const Point& x) {
  const ScaleSchedule& s = f.schedule;
  const int n = s.scales(), d = f.dim;
  const detail::LatticePosition pos = detail::lattice_position(s, x, d, f.macro);
  const int mid = detail::macro_id(pos.cell, f.macro);

  // Per level: list of (grid id, weight) covering the averaged block (i < n)
  // or the single cell containing y_n.
  std::vector<std::vector<std::pair<int, double>>> lists(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const int m = f.points[static_cast<std::size_t>(i - 1)];
    std::array<std::vector<std::pair<int, double>>, 3> axis;
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (i < n) {
        const int r = s.ratios[static_cast<std::size_t>(i - 1)];
        const double lo = static_cast<double>(pos.block[static_cast<std::size_t>(i - 1)][ju]) / r, hi = lo + 1.0 / r;
        for (int k = std::max(0, static_cast<int>(std::floor(lo * m))); k < std::min(m, static_cast<int>(std::ceil(hi * m))); ++k) {
          const double ov = std::min(hi, (k + 1.0) / m) - std::max(lo, static_cast<double>(k) / m);
          if (ov > 0.0) axis[ju].push_back({k, ov * r});
        }
      } else {
        axis[ju].push_back({std::clamp(static_cast<int>(std::floor(pos.yn[ju] * m)), 0, m - 1), 1.0});
      }
    }
    std::vector<std::pair<int, double>> combos{{0, 1.0}};
    int stride = 1;
    for (int j = 0; j < d; ++j) {
      std::vector<std::pair<int, double>> next;
      for (const auto& [id, w] : combos)
        for (const auto& [k, wk] : axis[static_cast<std::size_t>(j)]) next.push_back({id + stride * k, w * wk});
      combos.swap(next);
      stride *= m;
    }
    lists[static_cast<std::size_t>(i - 1)] = std::move(combos);
  }

  double sum = 0.0;
  std::vector<int> ids(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> at(static_cast<std::size_t>(n), 0);
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      const auto& [id, wi] = lists[static_cast<std::size_t>(i)][at[static_cast<std::size_t>(i)]];
      ids[static_cast<std::size_t>(i)] = id;
      w *= wi;
    }
    sum += w * f.values[f.flat(mid, ids)];
    int i = 0;
    for (; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (++at[iu] < lists[iu].size()) break;
      at[iu] = 0;
    }
    if (i == n) break;
  }
  return sum;
}

using ProductField = std::function<double(const Point& x, std::span<const Point> ys)>;

/// U(Phi)(x) for a callable Phi(x, y_1..y_n), integrating t_1..t_n with a
/// Gauss rule of `q` points per axis. Phi vanishes for macro points outside D.
inline double fold(const ProductField& phi, const ScaleSchedule& sched, int dim, const Point& extents, const Point& x, int q = 3) {
  detail::require_integer_inverse(sched);
  const int n = sched.scales();
  const Index3 macro = detail::macro_counts(sched, extents, dim);
  const detail::LatticePosition pos = detail::lattice_position(sched, x, dim, macro);
  const CellRule rule = tensor_rule(dim, q);
  std::array<Point, 8> ys{};
  ys[static_cast<std::size_t>(n - 1)] = pos.yn;
  double sum = 0.0;
  const int per = rule.size();
  int combos = 1;
  for (int i = 0; i < n; ++i) combos *= per;
  for (int c = 0; c < combos; ++c) {
    int rest = c;
    double w = 1.0;
    Point xp{};
    for (int i = 0; i < n; ++i) {
      const int k = rest % per;
      rest /= per;
      w *= rule.weights[static_cast<std::size_t>(k)];
      const Point& t = rule.points[static_cast<std::size_t>(k)];
      for (int j = 0; j < dim; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (i == 0) {
          xp[ju] = sched.epsilon * (pos.cell[ju] + t[ju]);
        } else {
          const int r = sched.ratios[static_cast<std::size_t>(i - 1)];
          ys[static_cast<std::size_t>(i - 1)][ju] = (pos.block[static_cast<std::size_t>(i - 1)][ju] + t[ju]) / r;
        }
      }
    }
    if (!detail::inside_box(xp, extents, dim)) continue;
    sum += w * phi(xp, std::span<const Point>(ys.data(), static_cast<std::size_t>(n)));
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Correctors

struct CorrectorOptions {
  /// Diagnostic: multiply the oscillating terms by the boundary cutoff (single scale only).
  bool cutoff = false;
  /// Exploratory: replace the corrector inputs by averages over cubes of side
  /// eps^s1 (0 disables).
  double local_average_exponent = 0.0;
  /// Evaluate dt u0 and curl u0 from nodal averages of the element values
  /// (Q1 recovery) instead of the raw element fields.
  bool recover = false;
};

struct CorrectorValue {
  Point vel{};
  Point curl{};  // 2D: scalar curl in component 0
};

/// Time-independent matrices of the corrector chains: the velocity corrector is
/// dt u0 + pv (dt u0 - g1), the curl corrector pc curl u0.
struct ChainMatrices {
  SymMatrix pv;
  SymMatrix pc;
};

namespace detail {

class ChainCache {
 public:
  template <class F>
  ChainMatrices get(const ChainKey& k, F&& compute) const {
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(k);
      if (it != map_.end()) return it->second;
    }
    ChainMatrices v = compute();
    std::unique_lock lock(mutex_);
    map_.emplace(k, v);
    return v;
  }

 private:
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<ChainKey, ChainMatrices, ChainKeyHash> map_;
};

/// Coarse-mesh inputs at x: dt u0, dt u0 - g1 and curl u0.
struct CoarseInputs {
  Point dtu{};
  Point s0{};
  Point c0{};
};

inline CoarseInputs coarse_inputs(const DomainMesh& mesh, const Vector& u, const Vector& v, const Vector& g1, const Index3& cell,
                                  const Point& xi) {
  const EdgeEval ee = eval_edge(mesh.dim(), mesh.spacing(), xi);
  const auto dofs = mesh.element_free_edges(cell);
  CoarseInputs in;
  for (int l = 0; l < local_edge_count(mesh.dim()); ++l) {
    const int e = dofs[static_cast<std::size_t>(l)];
    if (e < 0) continue;
    const auto lu = static_cast<std::size_t>(l);
    for (int j = 0; j < 3; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      in.dtu[ju] += v[e] * ee.value[lu][ju];
      in.s0[ju] += (v[e] - g1[e]) * ee.value[lu][ju];
      in.c0[ju] += u[e] * ee.curl[lu][ju];
    }
  }
  return in;
}

/// Nodal recovery of dt u0, dt u0 - g1 and curl u0: each node takes the
/// mean of the values from its adjacent elements; points are then evaluated by
/// Q1 interpolation.
class RecoveredInputs {
 public:
  RecoveredInputs() = default;
  RecoveredInputs(const DomainMesh& mesh, const Vector& u, const Vector& v, const Vector& g1) : mesh_(&mesh) {
    const int d = mesh.dim(), nn = mesh.node_count(), nl = local_node_count(d);
    values_.assign(static_cast<std::size_t>(nn), {});
    std::vector<int> count(static_cast<std::size_t>(nn), 0);
    for (int e = 0; e < mesh.element_count(); ++e) {
      const Index3 c = mesh.element_index(e);
      const auto nodes = mesh.element_nodes(c);
      for (int k = 0; k < nl; ++k) {
        Point xi{};
        for (int j = 0; j < d; ++j) xi[static_cast<std::size_t>(j)] = (k >> j) & 1;
        const CoarseInputs in = coarse_inputs(mesh, u, v, g1, c, xi);
        auto& dst = values_[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])];
        for (int j = 0; j < 3; ++j) {
          dst[0][static_cast<std::size_t>(j)] += in.dtu[static_cast<std::size_t>(j)];
          dst[1][static_cast<std::size_t>(j)] += in.s0[static_cast<std::size_t>(j)];
          dst[2][static_cast<std::size_t>(j)] += in.c0[static_cast<std::size_t>(j)];
        }
        ++count[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])];
      }
    }
    for (int v2 = 0; v2 < nn; ++v2)
      for (auto& f : values_[static_cast<std::size_t>(v2)])
        for (double& x : f) x /= count[static_cast<std::size_t>(v2)];
  }

  bool empty() const { return values_.empty(); }

  CoarseInputs at(const Index3& cell, const Point& xi) const {
    const int d = mesh_->dim();
    const auto nodes = mesh_->element_nodes(cell);
    CoarseInputs in;
    for (int k = 0; k < local_node_count(d); ++k) {
      double w = 1.0;
      for (int j = 0; j < d; ++j) w *= detail::lin((k >> j) & 1, xi[static_cast<std::size_t>(j)]);
      const auto& src = values_[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])];
      for (int j = 0; j < 3; ++j) {
        in.dtu[static_cast<std::size_t>(j)] += w * src[0][static_cast<std::size_t>(j)];
        in.s0[static_cast<std::size_t>(j)] += w * src[1][static_cast<std::size_t>(j)];
        in.c0[static_cast<std::size_t>(j)] += w * src[2][static_cast<std::size_t>(j)];
      }
    }
    return in;
  }

 private:
  const DomainMesh* mesh_ = nullptr;
  std::vector<std::array<Point, 3>> values_;
};

}  // namespace detail

/// Pointwise first-order corrector built from a homogenized trajectory. Holds
/// references: the coarse problem, its trajectory and the homogenization result
/// must outlive it.
class CorrectorField {
 public:
  CorrectorField(const WaveProblem& coarse, const WaveTrajectory& u0, const HomogenizationResult& hom, const ScaleSchedule& sched,
                 CorrectorOptions opt = {})
      : coarse_(&coarse), traj_(&u0), hom_(&hom), sched_(sched), opt_(opt) {
    const int d = coarse.mesh.dim();
    if (hom.spec.dim != d) detail::fail_validation("corrector: homogenization and mesh dimensions differ");
    sched_.validate(hom.spec.scales);
    if (static_cast<int>(hom.levels.size()) != sched_.scales() || hom.levels.empty())
      detail::fail_validation("corrector: missing cell cache (homogenization result has no cell solutions for every scale)");
    for (const LevelData& L : hom.levels)
      if (L.cells.empty() || L.grid.size() != static_cast<int>(L.cells.size())) detail::fail_validation("corrector: missing cell cache");
    if (coarse.data.g0_name != "zero" || (coarse.g0.size() > 0 && coarse.g0.lpNorm<Eigen::Infinity>() > 0.0))
      detail::fail_validation("corrector: requires zero initial displacement g0 = 0; correctors for g0 != 0 are not provided");
    if (u0.u.size() != u0.stamps.size() || u0.v.size() != u0.stamps.size() || u0.stamps.empty())
      detail::fail_validation("corrector: homogenized trajectory has no stored snapshots");
    if (coarse.mesh.max_h() > sched_.epsilon * (1.0 + 1e-12))
      detail::fail_validation("corrector: homogenized mesh width " + std::to_string(coarse.mesh.max_h()) + " exceeds epsilon " +
                              std::to_string(sched_.epsilon));
    if (opt_.cutoff && sched_.scales() != 1) detail::fail_validation("corrector: the cutoff diagnostic is single-scale only");
    if (opt_.local_average_exponent < 0.0 || opt_.local_average_exponent > 1.0)
      detail::fail_validation("corrector: local average exponent must lie in [0,1]");
    x_independent_ = hom.x_independent();
    averages_.resize(u0.stamps.size());
    recovered_.resize(u0.stamps.size());
    if (opt_.local_average_exponent > 0.0) {
      const double side = std::pow(sched_.epsilon, opt_.local_average_exponent);
      for (int j = 0; j < d; ++j)
        cubes_[static_cast<std::size_t>(j)] =
            std::max(1, static_cast<int>(std::lround(coarse.mesh.extents()[static_cast<std::size_t>(j)] / side)));
    }
  }

  int dim() const { return coarse_->mesh.dim(); }
  const std::vector<double>& stamps() const { return traj_->stamps; }
  const ScaleSchedule& schedule() const { return sched_; }
  const HomogenizationResult& homogenization() const { return *hom_; }
  const DomainMesh& coarse_mesh() const { return coarse_->mesh; }

  /// Builds per-stamp caches; must be called before `at` for that stamp when
  /// local averaging is enabled. Not thread-safe.
  void prepare(int stamp) {
    if (opt_.recover && recovered_[static_cast<std::size_t>(stamp)].empty()) {
      const auto su = static_cast<std::size_t>(stamp);
      recovered_[su] = detail::RecoveredInputs(coarse_->mesh, traj_->u[su], traj_->v[su], coarse_->g1);
    }
    if (opt_.local_average_exponent <= 0.0) return;
    auto& avg = averages_[static_cast<std::size_t>(stamp)];
    if (!avg.empty()) return;
    const DomainMesh& mesh = coarse_->mesh;
    const int d = mesh.dim();
    const int count = cubes_[0] * (d >= 2 ? cubes_[1] : 1) * (d == 3 ? cubes_[2] : 1);
    avg.resize(static_cast<std::size_t>(count));
    const Vector &u = traj_->u[static_cast<std::size_t>(stamp)], &v = traj_->v[static_cast<std::size_t>(stamp)];
    for (int id = 0; id < count; ++id) {
      Index3 k{0, 0, 0};
      int rest = id;
      Point lo{}, hi{};
      double vol = 1.0;
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        k[ju] = rest % cubes_[ju];
        rest /= cubes_[ju];
        const double w = mesh.extents()[ju] / cubes_[ju];
        lo[ju] = k[ju] * w;
        hi[ju] = lo[ju] + w;
        vol *= w;
      }
      const auto s = detail::box_integral<6>(mesh, lo, hi, [&](const Index3& c, const Point& xi, const Point&) {
        const detail::CoarseInputs in = detail::coarse_inputs(mesh, u, v, coarse_->g1, c, xi);
        return std::array<double, 6>{in.s0[0], in.s0[1], in.s0[2], in.c0[0], in.c0[1], in.c0[2]};
      });
      for (int j = 0; j < 3; ++j) {
        avg[static_cast<std::size_t>(id)][0][static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)] / vol;
        avg[static_cast<std::size_t>(id)][1][static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(3 + j)] / vol;
      }
    }
  }

  /// Chain matrices at x (memoized by the fast variables when no cell solution depends on x).
  ChainMatrices chain(const Point& x) const {
    const int d = dim(), n = sched_.scales();
    const auto ys = fast_points(sched_, x, d);
    if (!x_independent_) return compute_chain(x, ys);
    detail::ChainKey key{};
    std::array<Point, 8> yq{};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        const std::int64_t k = detail::quantize(ys[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        key[static_cast<std::size_t>(3 * i + j)] = k;
        yq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = detail::dequantize(k);
      }
    return cache_.get(key, [&] { return compute_chain(x, yq); });
  }

  CorrectorValue at(int stamp, const Point& x) const {
    const DomainMesh& mesh = coarse_->mesh;
    const int d = dim(), cs = curl_size(d);
    const Location loc = locate(mesh, x);
    const auto su = static_cast<std::size_t>(stamp);
    detail::CoarseInputs in;
    if (opt_.recover) {
      const auto& rec = recovered_[su];
      if (rec.empty()) detail::fail_validation("corrector: stamp not prepared for recovery");
      in = rec.at(loc.cell, loc.local);
    } else {
      in = detail::coarse_inputs(mesh, traj_->u[su], traj_->v[su], coarse_->g1, loc.cell, loc.local);
    }
    if (opt_.local_average_exponent > 0.0) {
      const auto& avg = averages_[su];
      if (avg.empty()) detail::fail_validation("corrector: stamp not prepared for local averaging");
      int id = 0, stride = 1;
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const int k = std::clamp(static_cast<int>(std::floor(x[ju] / mesh.extents()[ju] * cubes_[ju])), 0, cubes_[ju] - 1);
        id += stride * k;
        stride *= cubes_[ju];
      }
      in.s0 = avg[static_cast<std::size_t>(id)][0];
      in.c0 = avg[static_cast<std::size_t>(id)][1];
    }
    const ChainMatrices m = chain(x);
    const Vec s0 = detail::to_vec(in.s0, d), c0 = detail::to_vec(in.c0, cs);
    CorrectorValue out;
    if (!opt_.cutoff) {
      const Point dv = detail::to_point(m.pv * s0);
      for (int j = 0; j < d; ++j) out.vel[static_cast<std::size_t>(j)] = in.dtu[static_cast<std::size_t>(j)] + dv[static_cast<std::size_t>(j)];
      out.curl = detail::to_point(m.pc * c0);
      return out;
    }
    // tau-weighted oscillating terms plus the eps grad(tau) terms; x-derivatives
    // of u0 and of the cell fields are left out.
    const double eps = sched_.epsilon;
    const double tau = cutoff_value(x, mesh.extents(), d, eps);
    const Point gt = cutoff_gradient(x, mesh.extents(), d, eps);
    const auto ys = fast_points(sched_, x, d);
    const auto cv = hom_->values(1, x, std::span<const Point>(ys.data(), 1));
    double ws = 0.0;
    for (int r = 0; r < d; ++r) ws += cv.w[static_cast<std::size_t>(r)] * in.s0[static_cast<std::size_t>(r)];
    const Point dv = detail::to_point(m.pv * s0);
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      out.vel[ju] = in.dtu[ju] + tau * dv[ju] + eps * gt[ju] * ws;
    }
    const Point dc = detail::to_point((m.pc - SymMatrix::Identity(cs, cs)) * c0);
    for (int j = 0; j < cs; ++j) out.curl[static_cast<std::size_t>(j)] = in.c0[static_cast<std::size_t>(j)] + tau * dc[static_cast<std::size_t>(j)];
    for (int r = 0; r < cs; ++r) {
      const Point& nr = cv.n[static_cast<std::size_t>(r)];
      const double c = eps * in.c0[static_cast<std::size_t>(r)];
      if (d == 2) {
        out.curl[0] += c * (gt[0] * nr[1] - gt[1] * nr[0]);
      } else {
        out.curl[0] += c * (gt[1] * nr[2] - gt[2] * nr[1]);
        out.curl[1] += c * (gt[2] * nr[0] - gt[0] * nr[2]);
        out.curl[2] += c * (gt[0] * nr[1] - gt[1] * nr[0]);
      }
    }
    return out;
  }

 private:
  ChainMatrices compute_chain(const Point& x, const std::array<Point, 8>& ys) const {
    const int d = dim(), cs = curl_size(d), n = sched_.scales();
    SymMatrix pv = SymMatrix::Identity(d, d), pc = SymMatrix::Identity(cs, cs);
    for (int i = 1; i <= n; ++i) {
      const CellDerivatives D = hom_->derivatives(i, x, std::span<const Point>(ys.data(), static_cast<std::size_t>(n)));
      pv = (SymMatrix::Identity(d, d) + D.grad_w) * pv;
      pc = (SymMatrix::Identity(cs, cs) + D.curl_n) * pc;
    }
    pv -= SymMatrix::Identity(d, d);
    return {pv, pc};
  }

  const WaveProblem* coarse_;
  const WaveTrajectory* traj_;
  const HomogenizationResult* hom_;
  ScaleSchedule sched_;
  CorrectorOptions opt_;
  bool x_independent_ = true;
  Index3 cubes_{1, 1, 1};
  std::vector<std::vector<std::array<Point, 2>>> averages_;
  std::vector<detail::RecoveredInputs> recovered_;
  detail::ChainCache cache_;
};

inline CorrectorField reconstruct_corrector(const WaveProblem& coarse, const WaveTrajectory& u0, const HomogenizationResult& hom,
                                            const ScaleSchedule& sched, CorrectorOptions opt = {}) {
  return CorrectorField(coarse, u0, hom, sched, opt);
}

/// Folded multiscale corrector U(dt u0 + sum grad_{y_i} dt u_i) and
/// U(curl u0 + sum curl_{y_i} u_i). Same lifetime rules as CorrectorField.
class MultiscaleCorrector {
 public:
  MultiscaleCorrector(const WaveProblem& coarse, const WaveTrajectory& u0, const HomogenizationResult& hom, const ScaleSchedule& sched)
      : base_(coarse, u0, hom, sched), coarse_(&coarse), traj_(&u0), hom_(&hom), sched_(sched) {
    detail::require_integer_inverse(sched_);
    const int d = coarse.mesh.dim();
    macro_ = detail::macro_counts(sched_, coarse.mesh.extents(), d);
    x_independent_ = hom.x_independent();
    means_.resize(u0.stamps.size());
    // Composite 2-point Gauss on each Y_i sub-block (i < n), one interval per
    // cell element inside the block.
    const Rule1D g = gauss_rule(2);
    for (int i = 1; i < sched_.scales(); ++i) {
      const int r = sched_.ratios[static_cast<std::size_t>(i - 1)];
      const int sub = std::max(1, (hom.levels[static_cast<std::size_t>(i - 1)].mesh.subdivisions() + r - 1) / r);
      std::vector<double> nodes, weights;
      for (int s = 0; s < sub; ++s)
        for (int k = 0; k < g.size(); ++k) {
          nodes.push_back((s + g.nodes[static_cast<std::size_t>(k)]) / sub);
          weights.push_back(g.weights[static_cast<std::size_t>(k)] / sub);
        }
      std::vector<std::pair<Point, double>> pts;
      const int m = static_cast<int>(nodes.size()), total = ipow(m, d);
      for (int id = 0; id < total; ++id) {
        const Index3 k = detail::split_index(id, m, d);
        Point t{};
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
          t[static_cast<std::size_t>(j)] = nodes[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])];
          w *= weights[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])];
        }
        pts.push_back({t, w});
      }
      offsets_.push_back(std::move(pts));
    }
  }

  const std::vector<double>& stamps() const { return traj_->stamps; }
  const DomainMesh& coarse_mesh() const { return coarse_->mesh; }

  /// Macro-cell means of dt u0, dt u0 - g1 and curl u0. Not thread-safe.
  void prepare(int stamp) {
    auto& mean = means_[static_cast<std::size_t>(stamp)];
    if (!mean.empty() || !x_independent_) return;
    const DomainMesh& mesh = coarse_->mesh;
    const int d = mesh.dim();
    const int count = macro_[0] * (d >= 2 ? macro_[1] : 1) * (d == 3 ? macro_[2] : 1);
    mean.resize(static_cast<std::size_t>(count));
    const Vector &u = traj_->u[static_cast<std::size_t>(stamp)], &v = traj_->v[static_cast<std::size_t>(stamp)];
    double vol = 1.0;
    for (int j = 0; j < d; ++j) vol *= sched_.epsilon;
    for (int id = 0; id < count; ++id) {
      Point lo{}, hi{};
      int rest = id;
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const int k = rest % macro_[ju];
        rest /= macro_[ju];
        lo[ju] = k * sched_.epsilon;
        hi[ju] = lo[ju] + sched_.epsilon;
      }
      const auto s = detail::box_integral<9>(mesh, lo, hi, [&](const Index3& c, const Point& xi, const Point&) {
        const detail::CoarseInputs in = detail::coarse_inputs(mesh, u, v, coarse_->g1, c, xi);
        return std::array<double, 9>{in.dtu[0], in.dtu[1], in.dtu[2], in.s0[0], in.s0[1], in.s0[2], in.c0[0], in.c0[1], in.c0[2]};
      });
      for (int f = 0; f < 3; ++f)
        for (int j = 0; j < 3; ++j) mean[static_cast<std::size_t>(id)][static_cast<std::size_t>(f)][static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(3 * f + j)] / vol;
    }
  }

  CorrectorValue at(int stamp, const Point& x) const {
    const DomainMesh& mesh = coarse_->mesh;
    const int d = mesh.dim(), cs = curl_size(d);
    const detail::LatticePosition pos = detail::lattice_position(sched_, x, d, macro_);
    CorrectorValue out;
    if (x_independent_) {
      const auto& mean = means_[static_cast<std::size_t>(stamp)];
      if (mean.empty()) detail::fail_validation("multiscale corrector: stamp not prepared");
      const auto& m = mean[static_cast<std::size_t>(detail::macro_id(pos.cell, macro_))];
      const ChainMatrices q = folded_chain(pos);
      const Point dv = detail::to_point(q.pv * detail::to_vec(m[1], d));
      for (int j = 0; j < d; ++j) out.vel[static_cast<std::size_t>(j)] = m[0][static_cast<std::size_t>(j)] + dv[static_cast<std::size_t>(j)];
      out.curl = detail::to_point(q.pc * detail::to_vec(m[2], cs));
      return out;
    }
    // Slow-variable dependence: integrate over the macro cell as well.
    const Rule1D g = gauss_rule(2);
    const int sub = std::max(1, static_cast<int>(std::lround(sched_.epsilon / mesh.max_h())));
    const int m1 = sub * g.size(), total = ipow(m1, d);
    const auto su = static_cast<std::size_t>(stamp);
    for (int id = 0; id < total; ++id) {
      const Index3 k = detail::split_index(id, m1, d);
      Point xp{};
      double w = 1.0;
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const int s = k[ju] / g.size(), gi = k[ju] % g.size();
        xp[ju] = sched_.epsilon * (pos.cell[ju] + (s + g.nodes[static_cast<std::size_t>(gi)]) / sub);
        w *= g.weights[static_cast<std::size_t>(gi)] / sub;
      }
      if (!detail::inside_box(xp, mesh.extents(), d)) continue;
      const Location loc = locate(mesh, xp);
      const detail::CoarseInputs in = detail::coarse_inputs(mesh, traj_->u[su], traj_->v[su], coarse_->g1, loc.cell, loc.local);
      const ChainMatrices q = integrate_chain(xp, pos);
      const Point dv = detail::to_point(q.pv * detail::to_vec(in.s0, d));
      const Point dc = detail::to_point(q.pc * detail::to_vec(in.c0, cs));
      for (int j = 0; j < 3; ++j) {
        out.vel[static_cast<std::size_t>(j)] += w * (in.dtu[static_cast<std::size_t>(j)] + dv[static_cast<std::size_t>(j)]);
        out.curl[static_cast<std::size_t>(j)] += w * dc[static_cast<std::size_t>(j)];
      }
    }
    return out;
  }

  const CorrectorField& pointwise() const { return base_; }

 private:
  /// Integral over t_2..t_n of the chain matrices at slow point x.
  ChainMatrices integrate_chain(const Point& x, const detail::LatticePosition& pos) const {
    const int d = coarse_->mesh.dim(), cs = curl_size(d), n = sched_.scales();
    ChainMatrices acc{SymMatrix::Zero(d, d), SymMatrix::Zero(cs, cs)};
    std::array<Point, 8> ys{};
    ys[static_cast<std::size_t>(n - 1)] = pos.yn;
    std::vector<std::size_t> at(static_cast<std::size_t>(std::max(0, n - 1)), 0);
    while (true) {
      double w = 1.0;
      for (int i = 1; i < n; ++i) {
        const auto& [t, wt] = offsets_[static_cast<std::size_t>(i - 1)][at[static_cast<std::size_t>(i - 1)]];
        const int r = sched_.ratios[static_cast<std::size_t>(i - 1)];
        for (int j = 0; j < d; ++j)
          ys[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)] =
              (pos.block[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)] + t[static_cast<std::size_t>(j)]) / r;
        w *= wt;
      }
      SymMatrix pv = SymMatrix::Identity(d, d), pc = SymMatrix::Identity(cs, cs);
      for (int i = 1; i <= n; ++i) {
        const CellDerivatives D = hom_->derivatives(i, x, std::span<const Point>(ys.data(), static_cast<std::size_t>(n)));
        pv = (SymMatrix::Identity(d, d) + D.grad_w) * pv;
        pc = (SymMatrix::Identity(cs, cs) + D.curl_n) * pc;
      }
      acc.pv += w * (pv - SymMatrix::Identity(d, d));
      acc.pc += w * pc;
      int i = 0;
      for (; i < n - 1; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        if (++at[iu] < offsets_[iu].size()) break;
        at[iu] = 0;
      }
      if (i == n - 1) break;
    }
    return acc;
  }

  ChainMatrices folded_chain(const detail::LatticePosition& pos) const {
    const int d = coarse_->mesh.dim(), n = sched_.scales();
    detail::ChainKey key{};
    detail::LatticePosition q = pos;
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < d; ++j) key[static_cast<std::size_t>(3 * (i - 1) + j)] = pos.block[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)];
    for (int j = 0; j < d; ++j) {
      const std::int64_t k = detail::quantize(pos.yn[static_cast<std::size_t>(j)]);
      key[static_cast<std::size_t>(24 + j)] = k;
      q.yn[static_cast<std::size_t>(j)] = detail::dequantize(k);
    }
    return cache_.get(key, [&] { return integrate_chain(Point{}, q); });
  }

  CorrectorField base_;
  const WaveProblem* coarse_;
  const WaveTrajectory* traj_;
  const HomogenizationResult* hom_;
  ScaleSchedule sched_;
  Index3 macro_{1, 1, 1};
  bool x_independent_ = true;
  std::vector<std::vector<std::pair<Point, double>>> offsets_;
  std::vector<std::vector<std::array<Point, 3>>> means_;
  detail::ChainCache cache_;
};

// ---------------------------------------------------------------------------
// Error norms

struct StampError {
  double vel = 0.0;
  double curl = 0.0;
};

/// L2(D) norms of (v_h - corrector velocity) and (curl u_h - corrector curl)
/// for one fine state. Elements are summed in fixed chunks so the result does
/// not depend on the worker count.
template <class Field>
StampError stamp_error(const WaveProblem& fine, const Vector& u, const Vector& v, const Field& field, int stamp, int workers = 1) {
  const DomainMesh& mesh = fine.mesh;
  const int d = mesh.dim(), cs = curl_size(d), ne = local_edge_count(d);
  if (u.size() != fine.mass.size() || v.size() != fine.mass.size()) detail::fail_validation("corrector error: state size mismatch");
  for (int j = 0; j < d; ++j)
    if (std::abs(mesh.extents()[static_cast<std::size_t>(j)] - field.coarse_mesh().extents()[static_cast<std::size_t>(j)]) > 1e-12)
      detail::fail_validation("corrector error: grid mismatch (domain extents differ)");
  const ElementTables t(d, mesh.spacing(), fine.quadrature);
  const int elements = mesh.element_count();
  const int chunks = std::min(elements, 256);
  std::vector<std::array<double, 2>> partial(static_cast<std::size_t>(chunks), {0.0, 0.0});
  detail::parallel_for(chunks, workers, [&](int ch) {
    const int begin = static_cast<int>(static_cast<long long>(elements) * ch / chunks);
    const int end = static_cast<int>(static_cast<long long>(elements) * (ch + 1) / chunks);
    double sv = 0.0, sc = 0.0;
    for (int e = begin; e < end; ++e) {
      const Index3 c = mesh.element_index(e);
      const Point origin = mesh.element_origin(c);
      const auto dofs = mesh.element_free_edges(c);
      for (int q = 0; q < t.rule.size(); ++q) {
        const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
        Point vh{}, ch_{};
        for (int l = 0; l < ne; ++l) {
          const int dof = dofs[static_cast<std::size_t>(l)];
          if (dof < 0) continue;
          const auto lu = static_cast<std::size_t>(l);
          for (int j = 0; j < 3; ++j) {
            vh[static_cast<std::size_t>(j)] += v[dof] * ee.value[lu][static_cast<std::size_t>(j)];
            ch_[static_cast<std::size_t>(j)] += u[dof] * ee.curl[lu][static_cast<std::size_t>(j)];
          }
        }
        const CorrectorValue cv = field.at(stamp, t.physical(origin, q));
        double dv = 0.0, dc = 0.0;
        for (int j = 0; j < d; ++j) dv += std::pow(vh[static_cast<std::size_t>(j)] - cv.vel[static_cast<std::size_t>(j)], 2);
        for (int j = 0; j < cs; ++j) dc += std::pow(ch_[static_cast<std::size_t>(j)] - cv.curl[static_cast<std::size_t>(j)], 2);
        const double w = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
        sv += w * dv;
        sc += w * dc;
      }
    }
    partial[static_cast<std::size_t>(ch)] = {sv, sc};
  });
  double sv = 0.0, sc = 0.0;
  for (const auto& p : partial) {
    sv += p[0];
    sc += p[1];
  }
  return {std::sqrt(sv), std::sqrt(sc)};
}

struct ErrorSeries {
  std::vector<double> t;
  std::vector<double> vel;
  std::vector<double> curl;
  double max_vel = 0.0;
  double max_curl = 0.0;
  double max_total = 0.0;  ///< max over stamps of vel + curl

  void push(double time, const StampError& e) {
    t.push_back(time);
    vel.push_back(e.vel);
    curl.push_back(e.curl);
    max_vel = std::max(max_vel, e.vel);
    max_curl = std::max(max_curl, e.curl);
    max_total = std::max(max_total, e.vel + e.curl);
  }
};

namespace detail {
inline void check_stamps(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail_validation("corrector error: grid mismatch (stamp counts " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i])))
      fail_validation("corrector error: grid mismatch (stamp " + std::to_string(i) + " times differ)");
}

template <class Field>
ErrorSeries error_series(const WaveProblem& fine, const WaveTrajectory& tr, Field& field, int workers) {
  check_stamps(tr.stamps, field.stamps());
  if (tr.u.size() != tr.stamps.size() || tr.v.size() != tr.stamps.size())
    fail_validation("corrector error: fine trajectory has no stored snapshots");
  ErrorSeries out;
  for (std::size_t k = 0; k < tr.stamps.size(); ++k) {
    field.prepare(static_cast<int>(k));
    out.push(tr.stamps[k], stamp_error(fine, tr.u[k], tr.v[k], field, static_cast<int>(k), workers));
  }
  return out;
}
}  // namespace detail

/// E_vel and E_curl per stamp (and their maxima) for the pointwise corrector.
inline ErrorSeries corrector_error(const WaveProblem& fine, const WaveTrajectory& fine_traj, CorrectorField& corr, int workers = 1) {
  return detail::error_series(fine, fine_traj, corr, workers);
}

/// Folded-corrector errors; E_ms(t) = vel + curl, its max in `max_total`.
inline ErrorSeries multiscale_corrector_error(const WaveProblem& fine, const WaveTrajectory& fine_traj, MultiscaleCorrector& corr,
                                              int workers = 1) {
  return detail::error_series(fine, fine_traj, corr, workers);
}

}  // namespace mshom
