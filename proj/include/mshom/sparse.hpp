#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mshom/errors.hpp"

namespace mshom {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

/// Kernel carried by a semidefinite system.
enum class Nullspace {
  none,       ///< positive definite
  constants,  ///< periodic scalar problems (H^1_# / R)
  gradients,  ///< periodic curl-curl problems: discrete gradients plus constant fields
};

struct KernelProjector;

struct SparseSymSystem {
  SparseMatrix matrix;
  Nullspace nullspace = Nullspace::none;
  /// Number of DOFs removed by essential conditions (domain meshes) or
  /// identified by periodicity (cell meshes) before numbering.
  int constrained = 0;
  /// Kernel description for gradient nullspaces.
  std::shared_ptr<const KernelProjector> kernel;

  int size() const { return static_cast<int>(matrix.rows()); }
};

/// Euclidean projection onto the complement of ker(A) = range(G) + span(harmonic)
/// for curl-curl systems; G is the discrete gradient and the harmonic vectors
/// are orthonormal and orthogonal to range(G).
struct KernelProjector {
  SparseMatrix gradient;
  std::vector<Eigen::VectorXd> harmonic;
  SparseSymSystem laplacian;  ///< G^T G

  KernelProjector(SparseMatrix g, std::vector<Eigen::VectorXd> h, Nullspace lap_nullspace) : gradient(std::move(g)), harmonic(std::move(h)) {
    laplacian.matrix = SparseMatrix(gradient.transpose() * gradient);
    laplacian.nullspace = lap_nullspace;
  }

  void project(Eigen::VectorXd& v) const;
};

/// Accumulates symmetric element matrices. Each element contributes both
/// triangles from one upper-triangle evaluation, so A = A^T bit-for-bit.
class SymAssembler {
 public:
  explicit SymAssembler(int n) : n_(n) {}

  void reserve(std::size_t entries) { triplets_.reserve(entries); }

  /// `local` is row-major k x k; dofs < 0 are skipped.
  void add(const int* dofs, int k, const double* local) {
    for (int i = 0; i < k; ++i) {
      if (dofs[i] < 0) continue;
      for (int j = i; j < k; ++j) {
        if (dofs[j] < 0) continue;
        const double v = local[i * k + j];
        triplets_.emplace_back(dofs[i], dofs[j], v);
        if (dofs[i] != dofs[j] || i != j) triplets_.emplace_back(dofs[j], dofs[i], v);
      }
    }
  }

  SparseMatrix finish() {
    SparseMatrix m(n_, n_);
    m.setFromTriplets(triplets_.begin(), triplets_.end());
    m.makeCompressed();
    triplets_.clear();
    triplets_.shrink_to_fit();
    return m;
  }

 private:
  int n_;
  std::vector<Eigen::Triplet<double, int>> triplets_;
};

struct SolveOptions {
  double rel_tol = 1e-10;
  /// 0 selects the default cap of 20 * size.
  int max_iterations = 0;
  /// Jacobi preconditioning; only used for positive definite systems.
  bool jacobi = true;
  /// Initial guess (positive definite systems only); empty means zero.
  const Vector* initial_guess = nullptr;
  std::ostream* warn = &std::clog;
};

struct SolveResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  ///< ||A x - rhs|| / ||rhs||, recomputed after the solve
};

namespace detail {
inline void remove_mean(Vector& v) {
  if (v.size() > 0) v.array() -= v.mean();
}
}  // namespace detail

/// Conjugate gradients for a symmetric positive (semi)definite system.
/// Constants-nullspace systems have rhs and iterates projected onto the
/// mean-zero complement. Gradient-nullspace systems rely on compatible
/// right-hand sides; plain CG from zero keeps the iterate in range(A), which is
/// the Euclidean orthogonal complement of the kernel.
inline SolveResult solve_spd(const SparseSymSystem& system, const Vector& rhs_in, const SolveOptions& opt = {}) {
  const int n = system.size();
  if (rhs_in.size() != n) detail::fail_validation("solve_spd: rhs length " + std::to_string(rhs_in.size()) + " != system size " + std::to_string(n));
  if (!(opt.rel_tol > 0.0 && opt.rel_tol < 1.0)) detail::fail_validation("solve_spd: rel_tol must lie in (0,1)");
  const SparseMatrix& A = system.matrix;
  const KernelProjector* kernel = system.nullspace == Nullspace::gradients ? system.kernel.get() : nullptr;
  Vector rhs = rhs_in;
  if (kernel) kernel->project(rhs);
  if (system.nullspace == Nullspace::constants) {
    const double before = rhs.norm();
    detail::remove_mean(rhs);
    if (opt.warn && before > 0.0 && (before - rhs.norm()) > 1e-8 * before)
      *opt.warn << "warning: solve_spd removed a nullspace component of relative size " << (before - rhs.norm()) / before << "\n";
  }
  SolveResult res;
  res.x = Vector::Zero(n);
  const double bnorm = rhs.norm();
  if (n == 0 || bnorm == 0.0) return res;

  const bool definite = system.nullspace == Nullspace::none;
  const bool precondition = definite && opt.jacobi;
  Vector inv_diag;
  if (precondition) inv_diag = A.diagonal().cwiseInverse();
  if (definite && opt.initial_guess && opt.initial_guess->size() == n) res.x = *opt.initial_guess;

  const int cap = opt.max_iterations > 0 ? opt.max_iterations : 20 * n;
  const double target = opt.rel_tol * bnorm;
  Vector r(n), z(n), p(n), Ap(n);
  int it = 0;
  // The recursive residual can drift from the true one; restart from the true
  // residual until the recomputed residual meets the tolerance.
  for (int restart = 0; restart < 4; ++restart) {
    r = rhs - A * res.x;
    if (system.nullspace == Nullspace::constants) detail::remove_mean(r);
    if (kernel && restart > 0) kernel->project(r);
    double rnorm = r.norm();
    if (rnorm <= target) break;
    z = precondition ? Vector(inv_diag.cwiseProduct(r)) : r;
    p = z;
    double rz = r.dot(z);
    while (rnorm > target && it < cap) {
      Ap.noalias() = A * p;
      const double pAp = p.dot(Ap);
      if (!(pAp > 0.0)) break;
      const double alpha = rz / pAp;
      res.x.noalias() += alpha * p;
      r.noalias() -= alpha * Ap;
      if (system.nullspace == Nullspace::constants) detail::remove_mean(r);
      rnorm = r.norm();
      ++it;
      if (rnorm <= target) break;
      if (precondition) z = inv_diag.cwiseProduct(r);
      else z = r;
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    if (it >= cap) break;
  }
  if (system.nullspace == Nullspace::constants) detail::remove_mean(res.x);
  if (kernel) kernel->project(res.x);
  res.iterations = it;
  res.residual = (A * res.x - rhs).norm() / bnorm;
  if (res.residual > opt.rel_tol)
    detail::fail_numerical("solve_spd: no convergence after " + std::to_string(it) + " iterations (relative residual " +
                           std::to_string(res.residual) + ", tolerance " + std::to_string(opt.rel_tol) + ")");
  return res;
}

inline void KernelProjector::project(Eigen::VectorXd& v) const {
  if (gradient.cols() > 0) {
    const Vector g = gradient.transpose() * v;
    if (g.norm() > 0.0) {
      SolveOptions opt;
      opt.rel_tol = 1e-11;
      opt.warn = nullptr;
      v -= gradient * solve_spd(laplacian, g, opt).x;
    }
  }
  for (const Vector& h : harmonic) v -= h.dot(v) * h;
}

}  // namespace mshom
