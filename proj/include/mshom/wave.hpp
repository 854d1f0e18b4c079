#pragma once

// Time-domain solver for b u_tt + curl(a curl u) = f, u x nu = 0 on the box,
// lowest-order edge elements in space and Newmark average acceleration
// (beta = 1/4, gamma = 1/2) in time.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "mshom/assembly.hpp"
#include "mshom/cells.hpp"
#include "mshom/coeffs.hpp"

namespace mshom {

using TimeFactor = std::function<double(double)>;

/// Closed-form data: g0, g1 and f(t, x) = sum_j theta_j(t) F_j(x).
struct ClosedFormData {
  std::string g0_name = "zero", g1_name = "zero", f_name = "zero";
  VectorField g0 = [](const Point&) { return Point{}; };
  VectorField g1 = [](const Point&) { return Point{}; };
  std::vector<TimeFactor> theta;
  std::vector<VectorField> shapes;

  Point force(double t, const Point& x) const {
    Point out{};
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double th = theta[j](t);
      const Point s = shapes[j](x);
      for (int k = 0; k < 3; ++k) out[static_cast<std::size_t>(k)] += th * s[static_cast<std::size_t>(k)];
    }
    return out;
  }
};

namespace detail {
constexpr double kPi = std::numbers::pi;

/// Cavity mode with zero tangential trace on the unit box. 2D: (m, n) = (1, 1)
/// TE mode; 3D: (0, 0, sin(pi x) sin(pi y)). curl curl u = 2 pi^2 u in both.
inline Point cavity_mode(const Point& x, int dim) {
  if (dim == 2)
    return {-kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]), kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1]), 0.0};
  return {0.0, 0.0, std::sin(kPi * x[0]) * std::sin(kPi * x[1])};
}

/// grad of sin(pi x_1) ... sin(pi x_d), which vanishes on the boundary.
inline Point bump_gradient(const Point& x, int dim) {
  Point g{};
  for (int k = 0; k < dim; ++k) {
    double v = kPi * std::cos(kPi * x[static_cast<std::size_t>(k)]);
    for (int j = 0; j < dim; ++j)
      if (j != k) v *= std::sin(kPi * x[static_cast<std::size_t>(j)]);
    g[static_cast<std::size_t>(k)] = v;
  }
  return g;
}

inline VectorField field_by_name(const std::string& name, int dim, const std::string& what) {
  if (name == "zero") return [](const Point&) { return Point{}; };
  if (name == "cavity") return [dim](const Point& x) { return cavity_mode(x, dim); };
  if (name == "mixed")
    return [dim](const Point& x) {
      Point c = cavity_mode(x, dim);
      const Point g = bump_gradient(x, dim);
      for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] += g[static_cast<std::size_t>(k)];
      return c;
    };
  fail_validation("unknown " + what + " data '" + name + "' (known: zero, cavity, mixed)");
}
}  // namespace detail

/// Builtin data registry. Initial fields: zero, cavity, mixed (cavity plus a
/// gradient field). Forcing: zero, smooth = cos(2 pi t) (sin pi x_2, sin pi x_1)
/// in 2D and cos(2 pi t) (s_2 s_3, s_1 s_3, s_1 s_2), s_j = sin pi x_j, in 3D.
inline ClosedFormData builtin_data(const std::string& g0, const std::string& g1, const std::string& f, int dim) {
  ClosedFormData d;
  d.g0_name = g0;
  d.g1_name = g1;
  d.f_name = f;
  d.g0 = detail::field_by_name(g0, dim, "g0");
  d.g1 = detail::field_by_name(g1, dim, "g1");
  if (f == "smooth") {
    d.theta.push_back([](double t) { return std::cos(kTwoPi * t); });
    d.shapes.push_back([dim](const Point& x) {
      const double s1 = std::sin(detail::kPi * x[0]), s2 = std::sin(detail::kPi * x[1]);
      if (dim == 2) return Point{s2, s1, 0.0};
      const double s3 = std::sin(detail::kPi * x[2]);
      return Point{s2 * s3, s1 * s3, s1 * s2};
    });
  } else if (f != "zero") {
    detail::fail_validation("unknown forcing '" + f + "' (known: zero, smooth)");
  }
  return d;
}

struct TimeOptions {
  double final_time = 0.5;
  double dt = 0.0;  ///< 0 selects h/2
  int snapshot_stride = 1;
  double rel_tol = 1e-10;
};

struct WaveProblem {
  DomainMesh mesh;
  SparseSymSystem mass;
  SparseSymSystem stiffness;
  std::vector<TimeFactor> theta;
  std::vector<Vector> loads;
  Vector g0, g1;  ///< edge interpolants
  ClosedFormData data;
  double final_time = 0.5;
  double dt = 0.0;
  int steps = 0;
  int snapshot_stride = 1;
  double rel_tol = 1e-10;
  int quadrature = 2;
  std::vector<int> probes;  ///< free-edge indices reported per step

  Vector force(double t) const {
    Vector f = Vector::Zero(mass.size());
    for (std::size_t j = 0; j < theta.size(); ++j) f += theta[j](t) * loads[j];
    return f;
  }
};

/// Snapshot / energy record of one run.
struct WaveTrajectory {
  double dt = 0.0;
  std::vector<int> stamp_steps;
  std::vector<double> stamps;
  std::vector<Vector> u;
  std::vector<Vector> v;
  std::vector<double> step_times;  ///< every step, including 0
  std::vector<double> energy;
  std::vector<std::vector<double>> probe_values;
};

namespace detail {

inline void finish_time_setup(WaveProblem& p, const TimeOptions& t) {
  if (!(t.final_time > 0.0)) fail_validation("wave: final time must be positive");
  p.dt = t.dt > 0.0 ? t.dt : 0.5 * p.mesh.max_h();
  const double ratio = t.final_time / p.dt;
  p.steps = static_cast<int>(std::llround(ratio));
  if (p.steps < 1) fail_validation("wave: final time must be at least one time step");
  if (std::abs(ratio - p.steps) > 1e-9 * ratio) {
    // keep T exact; shrink the step so that T / dt is an integer
    p.steps = static_cast<int>(std::ceil(ratio));
    p.dt = t.final_time / p.steps;
  }
  p.final_time = t.final_time;
  if (t.snapshot_stride < 1) fail_validation("wave: snapshot stride must be >= 1");
  p.snapshot_stride = t.snapshot_stride;
  if (!(t.rel_tol > 0.0 && t.rel_tol < 1.0)) fail_validation("wave: solver tolerance must lie in (0,1)");
  p.rel_tol = t.rel_tol;
}

inline int default_probe(const DomainMesh& mesh) {
  if (mesh.free_edge_count() == 0) return -1;
  Index3 c{mesh.subdivisions() / 2, mesh.subdivisions() / 2, mesh.dim() == 3 ? mesh.subdivisions() / 2 : 0};
  const int f = mesh.free_edge(mesh.edge(0, c));
  return f >= 0 ? f : 0;
}

}  // namespace detail

/// Assembles a problem for arbitrary coefficient callables a(x), b(x).
template <class ACoef, class BCoef>
WaveProblem setup_with(const DomainMesh& mesh, ACoef&& acoef, BCoef&& bcoef, int quadrature, const ClosedFormData& data,
                       const TimeOptions& time) {
  WaveProblem p;
  p.mesh = mesh;
  p.quadrature = quadrature;
  p.mass = assemble_vector_mass(mesh, bcoef, quadrature);
  p.stiffness = assemble_curl_stiffness(mesh, acoef, quadrature);
  p.data = data;
  p.theta = data.theta;
  for (const VectorField& s : data.shapes) p.loads.push_back(load_vector(mesh, s, quadrature));
  p.g0 = interpolate_edges(mesh, data.g0);
  p.g1 = interpolate_edges(mesh, data.g1);
  detail::finish_time_setup(p, time);
  const int probe = detail::default_probe(mesh);
  if (probe >= 0) p.probes.push_back(probe);
  return p;
}

/// Fine-scale problem with a^eps, b^eps. Refuses meshes with h > eps_n / 4.
inline WaveProblem setup_fine(const CoefficientSpec& spec, const ScaleSchedule& sched, const DomainMesh& mesh,
                              const ClosedFormData& data, const TimeOptions& time, bool enforce_resolution = true) {
  spec.validate();
  sched.validate(spec.scales);
  if (mesh.dim() != spec.dim) detail::fail_validation("setup: mesh and coefficient dimensions differ");
  const double en = sched.finest();
  if (enforce_resolution && mesh.max_h() > en / 4.0 * (1.0 + 1e-12)) {
    double lmax = 0.0;
    for (int j = 0; j < mesh.dim(); ++j) lmax = std::max(lmax, mesh.extents()[static_cast<std::size_t>(j)]);
    const int required = static_cast<int>(std::ceil(4.0 * lmax / en - 1e-9));
    detail::fail_validation("setup: fine mesh does not resolve the finest scale (h = " + std::to_string(mesh.max_h()) +
                            " > eps_n/4 = " + std::to_string(en / 4.0) + "); use N >= " + std::to_string(required));
  }
  auto a = [&](const Point& x) { return eval_fine(spec, sched, x, Which::a); };
  auto b = [&](const Point& x) { return eval_fine(spec, sched, x, Which::b); };
  return setup_with(mesh, a, b, spec.quadrature_points(), data, time);
}

/// Homogenized problem with a^0(x), b^0(x).
inline WaveProblem setup_homogenized(const HomogenizationResult& hom, const DomainMesh& mesh, const ClosedFormData& data,
                                     const TimeOptions& time) {
  if (mesh.dim() != hom.spec.dim) detail::fail_validation("setup: mesh and coefficient dimensions differ");
  auto a = [&](const Point& x) { return hom.a0(x); };
  auto b = [&](const Point& x) { return hom.b0(x); };
  return setup_with(mesh, a, b, hom.spec.quadrature_points(), data, time);
}

/// E = (v^T M v + u^T K u) / 2.
inline double energy(const WaveProblem& p, const Vector& u, const Vector& v) {
  return 0.5 * (v.dot(p.mass.matrix * v) + u.dot(p.stiffness.matrix * u));
}

using StepObserver = std::function<void(int step, double t, const Vector& u, const Vector& v)>;

struct IntegrateOptions {
  bool store_snapshots = true;
  /// Called at every snapshot stamp (before storing).
  StepObserver observer;
  /// Overrides the problem's initial state when non-null.
  const Vector* u0 = nullptr;
  const Vector* v0 = nullptr;
};

/// Newmark average acceleration in acceleration form:
///   (M + dt^2/4 K) a_{n+1} = F_{n+1} - K (u_n + dt v_n + dt^2/4 a_n),
///   v_{n+1} = v_n + dt/2 (a_n + a_{n+1}),
///   u_{n+1} = u_n + dt v_n + dt^2/4 (a_n + a_{n+1}),
/// with M a_0 = F_0 - K u_0.
inline WaveTrajectory integrate(const WaveProblem& p, const IntegrateOptions& opt = {}) {
  const int n = p.mass.size();
  WaveTrajectory tr;
  tr.dt = p.dt;
  Vector u = opt.u0 ? *opt.u0 : p.g0;
  Vector v = opt.v0 ? *opt.v0 : p.g1;
  if (u.size() != n || v.size() != n) detail::fail_validation("integrate: initial state size does not match the problem");
  const double dt = p.dt, c = 0.25 * dt * dt;

  SparseSymSystem eff;
  eff.matrix = p.mass.matrix + c * p.stiffness.matrix;
  SolveOptions so;
  so.rel_tol = p.rel_tol;
  so.warn = nullptr;

  Vector a = Vector::Zero(n);
  if (n > 0) {
    const Vector rhs0 = p.force(0.0) - p.stiffness.matrix * u;
    if (rhs0.norm() > 0.0) a = solve_spd(p.mass, rhs0, so).x;
  }

  auto record = [&](int step, double t) {
    tr.step_times.push_back(t);
    tr.energy.push_back(energy(p, u, v));
    std::vector<double> pv;
    for (int e : p.probes) pv.push_back(u[e]);
    tr.probe_values.push_back(std::move(pv));
    if (step % p.snapshot_stride == 0 || step == p.steps) {
      if (opt.observer) opt.observer(step, t, u, v);
      tr.stamp_steps.push_back(step);
      tr.stamps.push_back(t);
      if (opt.store_snapshots) {
        tr.u.push_back(u);
        tr.v.push_back(v);
      }
    }
  };

  record(0, 0.0);
  Vector pred(n), a_next(n);
  for (int step = 1; step <= p.steps; ++step) {
    const double t = step * dt;
    pred = u + dt * v + c * a;
    const Vector rhs = p.force(t) - p.stiffness.matrix * pred;
    if (n > 0) {
      so.initial_guess = &a;
      a_next = solve_spd(eff, rhs, so).x;
    }
    v += (0.5 * dt) * (a + a_next);
    u = pred + c * a_next;
    a.swap(a_next);
    record(step, t);
  }
  return tr;
}

/// CSV: t, energy, then one column per probe edge. 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const WaveProblem& p, const WaveTrajectory& tr) {
  os << "t,energy";
  for (int e : p.probes) os << ",probe_" << e;
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < tr.step_times.size(); ++i) {
    os << tr.step_times[i] << ',' << tr.energy[i];
    for (double pv : tr.probe_values[i]) os << ',' << pv;
    os << '\n';
  }
}

/// Flat binary snapshot, little-endian:
///   char[8] "MSHSNAP1"; int32 dim; int32 N; float64 extents[3];
///   int64 dof count; int64 step; float64 t; float64 u[dofs]; float64 v[dofs].
struct Snapshot {
  int dim = 0, n = 0;
  Point extents{};
  std::int64_t step = 0;
  double t = 0.0;
  Vector u, v;
};

namespace detail {
template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) fail_validation("snapshot: truncated file");
  return value;
}
}  // namespace detail

inline void write_snapshot(std::ostream& os, const DomainMesh& mesh, std::int64_t step, double t, const Vector& u, const Vector& v) {
  os.write("MSHSNAP1", 8);
  detail::put<std::int32_t>(os, mesh.dim());
  detail::put<std::int32_t>(os, mesh.subdivisions());
  for (int j = 0; j < 3; ++j) detail::put<double>(os, mesh.extents()[static_cast<std::size_t>(j)]);
  detail::put<std::int64_t>(os, u.size());
  detail::put<std::int64_t>(os, step);
  detail::put<double>(os, t);
  os.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Snapshot read_snapshot(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "MSHSNAP1", 8) != 0) detail::fail_validation("snapshot: bad magic");
  Snapshot s;
  s.dim = detail::get<std::int32_t>(is);
  s.n = detail::get<std::int32_t>(is);
  for (int j = 0; j < 3; ++j) s.extents[static_cast<std::size_t>(j)] = detail::get<double>(is);
  const auto dofs = detail::get<std::int64_t>(is);
  s.step = detail::get<std::int64_t>(is);
  s.t = detail::get<double>(is);
  s.u.resize(dofs);
  s.v.resize(dofs);
  is.read(reinterpret_cast<char*>(s.u.data()), static_cast<std::streamsize>(dofs * static_cast<std::int64_t>(sizeof(double))));
  is.read(reinterpret_cast<char*>(s.v.data()), static_cast<std::streamsize>(dofs * static_cast<std::int64_t>(sizeof(double))));
  if (!is) detail::fail_validation("snapshot: truncated payload");
  return s;
}

}  // namespace mshom
