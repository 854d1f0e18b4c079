#pragma once

// Periodic cell problems and the level-by-level homogenized tensors.
//
// Scalar problem on Y_i:  div_y( b (e^k + grad_y w^k) ) = 0,  w^k mean zero,
//   b^{i-1}_{jk} = \int_Y (e^j + grad w^j) . b (e^k + grad w^k) dy.
// Curl problem on Y_i:    curl_y( a (e^l + curl_y N^l) ) = 0,
//   a^{i-1}_{pq} = \int_Y (e^p + curl N^p) . a (e^q + curl N^q) dy.
// In 2D the curl is scalar, a is 1x1 and there is a single curl cell field.

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <span>
#include <thread>
#include <vector>

#include "mshom/assembly.hpp"
#include "mshom/coeffs.hpp"

namespace mshom {

using CellCoefficient = std::function<SymMatrix(const Point&)>;

struct CellSolveOptions {
  int quadrature = 2;
  double rel_tol = 1e-10;
};

/// Gradient of a nodal field on the cell mesh at y in [0,1]^d.
inline Point nodal_gradient(const CellMesh& mesh, const Vector& w, const Point& y) {
  const Location loc = locate(mesh, y);
  const NodalEval ne = eval_nodal(mesh.dim(), mesh.spacing(), loc.local);
  const auto nodes = mesh.element_nodes(mesh.element_id(loc.cell));
  Point g{};
  for (int v = 0; v < local_node_count(mesh.dim()); ++v)
    for (int j = 0; j < mesh.dim(); ++j)
      g[static_cast<std::size_t>(j)] += w[nodes[static_cast<std::size_t>(v)]] * ne.grad[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
  return g;
}

/// Curl of an edge field on the cell mesh at y (2D: scalar in component 0).
inline Point edge_curl(const CellMesh& mesh, const Vector& n, const Point& y) {
  const Location loc = locate(mesh, y);
  const EdgeEval ee = eval_edge(mesh.dim(), mesh.spacing(), loc.local);
  const auto edges = mesh.element_edges(mesh.element_id(loc.cell));
  Point c{};
  for (int l = 0; l < local_edge_count(mesh.dim()); ++l)
    for (int j = 0; j < 3; ++j)
      c[static_cast<std::size_t>(j)] += n[edges[static_cast<std::size_t>(l)]] * ee.curl[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
  return c;
}

/// Value of a nodal field on the cell mesh at y.
inline double nodal_value(const CellMesh& mesh, const Vector& w, const Point& y) {
  const Location loc = locate(mesh, y);
  const NodalEval ne = eval_nodal(mesh.dim(), mesh.spacing(), loc.local);
  const auto nodes = mesh.element_nodes(mesh.element_id(loc.cell));
  double v = 0.0;
  for (int k = 0; k < local_node_count(mesh.dim()); ++k) v += w[nodes[static_cast<std::size_t>(k)]] * ne.value[static_cast<std::size_t>(k)];
  return v;
}

/// Value of an edge field on the cell mesh at y.
inline Point edge_value(const CellMesh& mesh, const Vector& n, const Point& y) {
  const Location loc = locate(mesh, y);
  const EdgeEval ee = eval_edge(mesh.dim(), mesh.spacing(), loc.local);
  const auto edges = mesh.element_edges(mesh.element_id(loc.cell));
  Point v{};
  for (int l = 0; l < local_edge_count(mesh.dim()); ++l)
    for (int j = 0; j < 3; ++j)
      v[static_cast<std::size_t>(j)] += n[edges[static_cast<std::size_t>(l)]] * ee.value[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
  return v;
}

/// w^1..w^d, each mean zero.
inline std::vector<Vector> solve_scalar_cell(const CellMesh& mesh, const CellCoefficient& coef, const CellSolveOptions& opt = {}) {
  const int d = mesh.dim();
  const SparseSymSystem sys = assemble_scalar_stiffness(mesh, coef, opt.quadrature);
  const ElementTables t(d, mesh.spacing(), opt.quadrature);
  std::vector<Vector> rhs(static_cast<std::size_t>(d), Vector::Zero(mesh.node_count()));
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Point origin = mesh.element_origin(e);
    const auto nodes = mesh.element_nodes(e);
    for (int q = 0; q < t.rule.size(); ++q) {
      const SymMatrix b = coef(t.physical(origin, q));
      const double wq = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
      const NodalEval& ne = t.nodal[static_cast<std::size_t>(q)];
      for (int v = 0; v < local_node_count(d); ++v)
        for (int k = 0; k < d; ++k) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) s += b(j, k) * ne.grad[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
          rhs[static_cast<std::size_t>(k)][nodes[static_cast<std::size_t>(v)]] -= wq * s;
        }
    }
  }
  std::vector<Vector> w;
  SolveOptions so;
  so.rel_tol = opt.rel_tol;
  so.warn = nullptr;
  for (int k = 0; k < d; ++k) w.push_back(solve_spd(sys, rhs[static_cast<std::size_t>(k)], so).x);
  return w;
}

inline SymMatrix scalar_level_tensor(const CellMesh& mesh, const CellCoefficient& coef, const std::vector<Vector>& w, int quadrature = 2) {
  const int d = mesh.dim();
  const ElementTables t(d, mesh.spacing(), quadrature);
  SymMatrix out = SymMatrix::Zero(d, d);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Point origin = mesh.element_origin(e);
    const auto nodes = mesh.element_nodes(e);
    for (int q = 0; q < t.rule.size(); ++q) {
      const SymMatrix b = coef(t.physical(origin, q));
      const double wq = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
      const NodalEval& ne = t.nodal[static_cast<std::size_t>(q)];
      SymMatrix f = identity_matrix(d);  // column k = e^k + grad w^k
      for (int k = 0; k < d; ++k)
        for (int v = 0; v < local_node_count(d); ++v)
          for (int j = 0; j < d; ++j)
            f(j, k) += w[static_cast<std::size_t>(k)][nodes[static_cast<std::size_t>(v)]] * ne.grad[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
      out.noalias() += wq * (f.transpose() * b * f);
    }
  }
  return 0.5 * (out + out.transpose());
}

/// N^l for l = 1..curl_size(d).
inline std::vector<Vector> solve_curl_cell(const CellMesh& mesh, const CellCoefficient& coef, const CellSolveOptions& opt = {}) {
  const int d = mesh.dim();
  const int cs = curl_size(d);
  const int q_pts = detail::curl_points(d, opt.quadrature);
  const SparseSymSystem sys = assemble_curl_stiffness(mesh, coef, opt.quadrature);
  const ElementTables t(d, mesh.spacing(), q_pts);
  std::vector<Vector> rhs(static_cast<std::size_t>(cs), Vector::Zero(mesh.edge_count()));
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Point origin = mesh.element_origin(e);
    const auto edges = mesh.element_edges(e);
    for (int q = 0; q < t.rule.size(); ++q) {
      const SymMatrix a = coef(t.physical(origin, q));
      const double wq = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
      const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
      for (int l = 0; l < local_edge_count(d); ++l)
        for (int p = 0; p < cs; ++p) {
          double s = 0.0;
          for (int j = 0; j < cs; ++j) s += a(j, p) * ee.curl[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
          rhs[static_cast<std::size_t>(p)][edges[static_cast<std::size_t>(l)]] -= wq * s;
        }
    }
  }
  std::vector<Vector> n;
  SolveOptions so;
  so.rel_tol = opt.rel_tol;
  so.warn = nullptr;
  for (int p = 0; p < cs; ++p) n.push_back(solve_spd(sys, rhs[static_cast<std::size_t>(p)], so).x);
  return n;
}

inline SymMatrix curl_level_tensor(const CellMesh& mesh, const CellCoefficient& coef, const std::vector<Vector>& n, int quadrature = 2) {
  const int d = mesh.dim();
  const int cs = curl_size(d);
  const ElementTables t(d, mesh.spacing(), detail::curl_points(d, quadrature));
  SymMatrix out = SymMatrix::Zero(cs, cs);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Point origin = mesh.element_origin(e);
    const auto edges = mesh.element_edges(e);
    for (int q = 0; q < t.rule.size(); ++q) {
      const SymMatrix a = coef(t.physical(origin, q));
      const double wq = t.rule.weights[static_cast<std::size_t>(q)] * t.volume;
      const EdgeEval& ee = t.edge[static_cast<std::size_t>(q)];
      SymMatrix f = identity_matrix(cs);  // column p = e^p + curl N^p
      for (int p = 0; p < cs; ++p)
        for (int l = 0; l < local_edge_count(d); ++l)
          for (int j = 0; j < cs; ++j)
            f(j, p) += n[static_cast<std::size_t>(p)][edges[static_cast<std::size_t>(l)]] * ee.curl[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      out.noalias() += wq * (f.transpose() * a * f);
    }
  }
  return 0.5 * (out + out.transpose());
}

/// Uniform tensor grid over a set of slow variables: x axes sampled on
/// [0, L] including both ends (clamped multilinear interpolation), y axes on
/// the periodic grid k/s (periodic multilinear interpolation).
class SampleGrid {
 public:
  SampleGrid() = default;
  SampleGrid(std::vector<VarRef> vars, std::vector<int> counts, std::vector<double> lengths)
      : vars_(std::move(vars)), counts_(std::move(counts)), lengths_(std::move(lengths)) {
    size_ = 1;
    for (int c : counts_) size_ *= c;
  }

  int size() const { return size_; }
  const std::vector<VarRef>& vars() const { return vars_; }
  const std::vector<int>& counts() const { return counts_; }

  double coord(std::size_t k, int idx) const {
    if (vars_[k].group == 0) return counts_[k] == 1 ? 0.5 * lengths_[k] : lengths_[k] * idx / (counts_[k] - 1);
    return static_cast<double>(idx) / counts_[k];
  }

  /// Writes the sample's coordinates into x / ys (other entries untouched).
  void place(int sample, Point& x, std::vector<Point>& ys) const {
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      const int idx = sample % counts_[k];
      sample /= counts_[k];
      const double c = coord(k, idx);
      if (vars_[k].group == 0) x[static_cast<std::size_t>(vars_[k].axis)] = c;
      else ys[static_cast<std::size_t>(vars_[k].group - 1)][static_cast<std::size_t>(vars_[k].axis)] = c;
    }
  }

  /// Multilinear interpolation weights (sample index, weight).
  std::vector<std::pair<int, double>> weights(const Point& x, std::span<const Point> ys) const {
    std::vector<std::pair<int, double>> out{{0, 1.0}};
    int stride = 1;
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      const VarRef v = vars_[k];
      const int s = counts_[k];
      int i0 = 0, i1 = 0;
      double t = 0.0;
      if (v.group == 0) {
        if (s > 1) {
          const double u = std::clamp(x[static_cast<std::size_t>(v.axis)] / lengths_[k], 0.0, 1.0) * (s - 1);
          i0 = std::min(static_cast<int>(std::floor(u)), s - 2);
          i1 = i0 + 1;
          t = u - i0;
        }
      } else {
        const double u = frac(ys[static_cast<std::size_t>(v.group - 1)][static_cast<std::size_t>(v.axis)]) * s;
        i0 = std::min(static_cast<int>(std::floor(u)), s - 1);
        i1 = (i0 + 1) % s;
        t = u - i0;
      }
      std::vector<std::pair<int, double>> next;
      next.reserve(out.size() * 2);
      for (const auto& [idx, w] : out) {
        if (1.0 - t != 0.0) next.emplace_back(idx + stride * i0, w * (1.0 - t));
        if (t != 0.0) next.emplace_back(idx + stride * i1, w * t);
      }
      out.swap(next);
      stride *= s;
    }
    return out;
  }

 private:
  std::vector<VarRef> vars_;
  std::vector<int> counts_;
  std::vector<double> lengths_;
  int size_ = 1;
};

/// Tensor field sampled on a SampleGrid.
struct TensorField {
  SampleGrid grid;
  std::vector<SymMatrix> values;

  SymMatrix at(const Point& x, std::span<const Point> ys) const {
    const auto w = grid.weights(x, ys);
    SymMatrix m = w.front().second * values[static_cast<std::size_t>(w.front().first)];
    for (std::size_t i = 1; i < w.size(); ++i) m += w[i].second * values[static_cast<std::size_t>(w[i].first)];
    return m;
  }
};

/// Cached cell fields at one sample of the slow variables.
struct CellSolution {
  std::vector<Vector> w;  ///< scalar cell fields (nodal)
  std::vector<Vector> n;  ///< curl cell fields (edge)
};

/// Cell-field derivatives at a point: column r of grad_w is grad_y w^r,
/// column r of curl_n is curl_y N^r.
struct CellDerivatives {
  SymMatrix grad_w;
  SymMatrix curl_n;
};

struct LevelData {
  int level = 1;  ///< cell problems live on Y_level
  CellMesh mesh;
  SampleGrid grid;  ///< slow variables x, y_1..y_{level-1}
  std::vector<CellSolution> cells;
  TensorField b_lower;  ///< b^{level-1}
  TensorField a_lower;  ///< a^{level-1}
};

struct HomogenizationOptions {
  std::vector<int> cell_n{64};  ///< per level (a single entry applies to all)
  int x_samples = 9;            ///< per x axis, only if the coefficient depends on x
  std::vector<int> y_samples{16};  ///< per axis of y_1..y_{n-1}
  int workers = 1;
  double rel_tol = 1e-10;
  Point extents{1.0, 1.0, 1.0};
};

class HomogenizationResult {
  Point reduced(Point y) const {
    for (int j = 0; j < spec.dim; ++j) y[static_cast<std::size_t>(j)] = frac(y[static_cast<std::size_t>(j)]);
    return y;
  }

 public:
  CoefficientSpec spec;
  std::vector<LevelData> levels;  ///< levels[i-1] for Y_i

  /// b^{i}(x, y_1..y_i) for i = 0..n-1.
  const TensorField& b_tensor(int i) const { return levels[static_cast<std::size_t>(i)].b_lower; }
  const TensorField& a_tensor(int i) const { return levels[static_cast<std::size_t>(i)].a_lower; }

  SymMatrix b0(const Point& x) const { return b_tensor(0).at(x, {}); }
  SymMatrix a0(const Point& x) const { return a_tensor(0).at(x, {}); }

  /// Cell derivatives at level i for slow variables (x, ys[0..i-2]) and the
  /// fast point ys[i-1]; interpolated across slow samples.
  CellDerivatives derivatives(int level, const Point& x, std::span<const Point> ys) const {
    const LevelData& L = levels[static_cast<std::size_t>(level - 1)];
    const int d = spec.dim, cs = curl_size(d);
    CellDerivatives out{SymMatrix::Zero(d, d), SymMatrix::Zero(cs, cs)};
    const Point y = reduced(ys[static_cast<std::size_t>(level - 1)]);
    auto add = [&](int idx, double wt) {
      const CellSolution& c = L.cells[static_cast<std::size_t>(idx)];
      for (int r = 0; r < d; ++r) {
        const Point g = nodal_gradient(L.mesh, c.w[static_cast<std::size_t>(r)], y);
        for (int q = 0; q < d; ++q) out.grad_w(q, r) += wt * g[static_cast<std::size_t>(q)];
      }
      for (int r = 0; r < cs; ++r) {
        const Point g = edge_curl(L.mesh, c.n[static_cast<std::size_t>(r)], y);
        for (int q = 0; q < cs; ++q) out.curl_n(q, r) += wt * g[static_cast<std::size_t>(q)];
      }
    };
    if (L.grid.size() == 1) add(0, 1.0);
    else
      for (const auto& [idx, wt] : L.grid.weights(x, ys)) add(idx, wt);
    return out;
  }

  /// Cell field values at level i: w^r(y) in `w[r]`, N^r(y) in column r of `n`.
  struct CellValues {
    Point w{};
    std::array<Point, 3> n{};
  };

  CellValues values(int level, const Point& x, std::span<const Point> ys) const {
    const LevelData& L = levels[static_cast<std::size_t>(level - 1)];
    const int d = spec.dim, cs = curl_size(d);
    CellValues out;
    const Point y = reduced(ys[static_cast<std::size_t>(level - 1)]);
    for (const auto& [idx, wt] : L.grid.weights(x, ys)) {
      const CellSolution& c = L.cells[static_cast<std::size_t>(idx)];
      for (int r = 0; r < d; ++r) out.w[static_cast<std::size_t>(r)] += wt * nodal_value(L.mesh, c.w[static_cast<std::size_t>(r)], y);
      for (int r = 0; r < cs; ++r) {
        const Point v = edge_value(L.mesh, c.n[static_cast<std::size_t>(r)], y);
        for (int j = 0; j < 3; ++j) out.n[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] += wt * v[static_cast<std::size_t>(j)];
      }
    }
    return out;
  }

  /// True if no cell solution depends on x.
  bool x_independent() const {
    for (const LevelData& L : levels)
      for (const VarRef& v : L.grid.vars())
        if (v.group == 0) return false;
    return true;
  }

  /// Text dump: one line per (level, sample, tensor) at 17 significant digits.
  void dump(std::ostream& os) const {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      const LevelData& L = *it;
      for (int s = 0; s < L.grid.size(); ++s) {
        Point x{};
        std::vector<Point> ys(static_cast<std::size_t>(spec.scales), Point{});
        L.grid.place(s, x, ys);
        const std::array<std::pair<const char*, const TensorField*>, 2> fields{{{"b", &L.b_lower}, {"a", &L.a_lower}}};
        for (const auto& [name, field] : fields) {
          os << name << (L.level - 1) << " sample " << s;
          for (std::size_t k = 0; k < L.grid.vars().size(); ++k) {
            const VarRef v = L.grid.vars()[k];
            os << ' ' << (v.group == 0 ? "x" : "y" + std::to_string(v.group) + "_") << (v.axis + 1) << '=';
            os << (v.group == 0 ? x[static_cast<std::size_t>(v.axis)] : ys[static_cast<std::size_t>(v.group - 1)][static_cast<std::size_t>(v.axis)]);
          }
          os << " :";
          const SymMatrix& m = field->values[static_cast<std::size_t>(s)];
          for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) os << ' ' << m(r, c);
          os << '\n';
        }
      }
    }
    os.flags(flags);
    os.precision(prec);
  }
};

namespace detail {

/// Runs f(i) for i in [0, count) on up to `workers` threads; rethrows the
/// error of the lowest failing index.
template <class F>
void parallel_for(int count, int workers, F&& f) {
  workers = std::max(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto run = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void check_tensor(const CoefficientSpec& spec, const SymMatrix& m, const char* name, int level, int sample) {
  const EigenRange r = eigen_range(m);
  const double slack = 1e-10 * spec.beta;
  if (max_asymmetry(m) > 1e-12 || r.min < spec.alpha - slack || r.max > spec.beta + slack)
    fail_numerical(std::string("homogenize: tensor ") + name + std::to_string(level - 1) + " at sample " + std::to_string(sample) +
                   " has eigenvalues [" + std::to_string(r.min) + ", " + std::to_string(r.max) + "] outside [" +
                   std::to_string(spec.alpha) + ", " + std::to_string(spec.beta) + "]");
}

}  // namespace detail

/// Homogenizes from level n down to level 0.
inline HomogenizationResult homogenize(const CoefficientSpec& spec, const HomogenizationOptions& opt = {}) {
  spec.validate();
  const int n = spec.scales;
  const int d = spec.dim;
  if (opt.cell_n.empty()) detail::fail_validation("homogenize: cell resolution list is empty");
  if (opt.cell_n.size() != 1 && static_cast<int>(opt.cell_n.size()) != n)
    detail::fail_validation("homogenize: need one cell resolution or one per level");
  if (n >= 2 && opt.y_samples.empty()) detail::fail_validation("homogenize: slow-variable sampling needed for n >= 2");
  if (opt.x_samples < 1) detail::fail_validation("homogenize: x_samples must be >= 1");

  std::set<VarRef> all = spec.a.variables(d);
  for (const VarRef& v : spec.b.variables(d)) all.insert(v);

  HomogenizationResult res;
  res.spec = spec;
  res.levels.resize(static_cast<std::size_t>(n));
  const int q = spec.quadrature_points();
  const CellSolveOptions cso{q, opt.rel_tol};

  for (int level = n; level >= 1; --level) {
    LevelData& L = res.levels[static_cast<std::size_t>(level - 1)];
    L.level = level;
    const int cn = opt.cell_n.size() == 1 ? opt.cell_n[0] : opt.cell_n[static_cast<std::size_t>(level - 1)];
    L.mesh = CellMesh(d, cn);
    std::vector<VarRef> vars;
    std::vector<int> counts;
    std::vector<double> lengths;
    for (const VarRef& v : all) {
      if (v.group >= level) continue;
      vars.push_back(v);
      if (v.group == 0) {
        counts.push_back(opt.x_samples);
        lengths.push_back(opt.extents[static_cast<std::size_t>(v.axis)]);
      } else {
        const int s = opt.y_samples.size() == 1 ? opt.y_samples[0] : opt.y_samples.at(static_cast<std::size_t>(v.group - 1));
        if (s < 2) detail::fail_validation("homogenize: y sampling needs at least 2 points per axis");
        counts.push_back(s);
        lengths.push_back(1.0);
      }
    }
    L.grid = SampleGrid(vars, counts, lengths);
    const int samples = L.grid.size();
    L.cells.resize(static_cast<std::size_t>(samples));
    L.b_lower = {L.grid, std::vector<SymMatrix>(static_cast<std::size_t>(samples))};
    L.a_lower = {L.grid, std::vector<SymMatrix>(static_cast<std::size_t>(samples))};
    const LevelData* upper = level < n ? &res.levels[static_cast<std::size_t>(level)] : nullptr;

    auto varies = [&](Which w) {
      if (!upper) {
        for (const VarRef& v : spec.field(w).variables(d))
          if (v.group == level) return true;
        return false;
      }
      for (const VarRef& v : upper->grid.vars())
        if (v.group == level) return true;
      return false;
    };

    detail::parallel_for(samples, opt.workers, [&](int s) {
      Point x{};
      std::vector<Point> ys(static_cast<std::size_t>(n), Point{});
      L.grid.place(s, x, ys);
      auto make = [&](Which w) -> CellCoefficient {
        if (!upper)
          return [&spec, x, ys, level, w](const Point& y) {
            std::vector<Point> p = ys;
            p[static_cast<std::size_t>(level - 1)] = y;
            return eval_coefficient(spec, x, std::span<const Point>(p.data(), p.size()), w);
          };
        const TensorField* f = w == Which::a ? &upper->a_lower : &upper->b_lower;
        return [f, x, ys, level](const Point& y) {
          std::vector<Point> p = ys;
          p[static_cast<std::size_t>(level - 1)] = y;
          return f->at(x, std::span<const Point>(p.data(), p.size()));
        };
      };
      const CellCoefficient bc = make(Which::b);
      const CellCoefficient ac = make(Which::a);
      CellSolution& c = L.cells[static_cast<std::size_t>(s)];
      // a coefficient constant in y_level has identically zero correctors
      if (varies(Which::b)) c.w = solve_scalar_cell(L.mesh, bc, cso);
      else c.w.assign(static_cast<std::size_t>(d), Vector::Zero(L.mesh.node_count()));
      if (varies(Which::a)) c.n = solve_curl_cell(L.mesh, ac, cso);
      else c.n.assign(static_cast<std::size_t>(curl_size(d)), Vector::Zero(L.mesh.edge_count()));
      SymMatrix bl = scalar_level_tensor(L.mesh, bc, c.w, q);
      SymMatrix al = curl_level_tensor(L.mesh, ac, c.n, q);
      detail::check_tensor(spec, bl, "b", level, s);
      detail::check_tensor(spec, al, "a", level, s);
      L.b_lower.values[static_cast<std::size_t>(s)] = std::move(bl);
      L.a_lower.values[static_cast<std::size_t>(s)] = std::move(al);
    });
  }
  return res;
}

}  // namespace mshom
