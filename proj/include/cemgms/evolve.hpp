#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <complex>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cemgms/assembly.hpp"
#include "cemgms/cembasis.hpp"
#include "cemgms/error.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/problems.hpp"

namespace cemgms {

using Complex = std::complex<double>;

enum class FieldSpace { fine, multiscale };

/**
 * Complex coefficient vector at time t. Reduced fields keep a pointer to
 * the multiscale space that owns them; the space must outlive the field.
 */
struct WaveField {
  Eigen::VectorXcd values;
  double time = 0.0;
  double epsilon = 1.0;
  const MultiscaleSpace* space = nullptr;

  FieldSpace kind() const { return space ? FieldSpace::multiscale : FieldSpace::fine; }

  /// Fine-grid coefficients (P c for reduced fields).
  Eigen::VectorXcd fine_values() const { return space ? space->prolong(values) : values; }
};

/// Δt is rounded so that steps * Δt == T.
struct EvolutionConfig {
  double final_time = 0.1;
  double dt = 1e-2;
  int steps = 10;
  FieldSpace space = FieldSpace::multiscale;
  int snapshot_every = 0;  ///< 0 keeps only t = 0 and T

  static EvolutionConfig make(double T, double dt_target, FieldSpace space = FieldSpace::multiscale) {
    if (!(T > 0.0) || !(dt_target > 0.0)) throw std::invalid_argument("final time and time step must be positive");
    EvolutionConfig c;
    c.final_time = T;
    c.steps = static_cast<int>(std::ceil(T / dt_target - 1e-9));
    if (c.steps < 1) c.steps = 1;
    c.dt = T / c.steps;
    c.space = space;
    return c;
  }
};

/// Nodal interpolation of u₀ on the fine grid.
inline Eigen::VectorXcd interpolate(const PeriodicGrid& grid, const InitialData& u0) {
  Eigen::VectorXcd u(grid.num_dofs());
  for (int p = 0; p < grid.num_dofs(); ++p) {
    u(p) = u0(grid.dof_point(p));
    if (!std::isfinite(u(p).real()) || !std::isfinite(u(p).imag()))
      throw std::domain_error("initial data is not finite at dof " + std::to_string(p));
  }
  return u;
}

/// Real matrix times complex vector without forming a complex copy.
template <class Matrix>
Eigen::VectorXcd apply_real(const Matrix& A, const Eigen::VectorXcd& u) {
  Eigen::VectorXcd out(A.rows());
  out.real() = A * u.real();
  out.imag() = A * u.imag();
  return out;
}

/**
 * σ(u₀): the a-orthogonal projection onto V_ms, A_ms c = Pᵀ A u₀.
 */
inline WaveField elliptic_project(const Eigen::VectorXcd& u0, const MultiscaleSpace& ms,
                                  const AssembledOperator& a_op, double eps) {
  if (!(a_op.grid == ms.grid)) throw std::invalid_argument("operator and multiscale space use different grids");
  if (u0.size() != ms.basis.rows()) throw std::invalid_argument("field size does not match the fine grid");
  const Eigen::VectorXcd rhs = ms.restrict_dual(apply_real(a_op.matrix, u0));

  Eigen::VectorXcd c(ms.dimension());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ms.a_reduced);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    c.real() = ldlt.solve(rhs.real());
    c.imag() = ldlt.solve(rhs.imag());
    const double res = (apply_real(ms.a_reduced, c) - rhs).norm();
    ok = c.allFinite() && res <= 1e-9 * std::max(1.0, rhs.norm());
  }
  if (!ok) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ms.a_reduced);
    if (!lu.isInvertible()) throw SolverError("reduced Hamiltonian is singular");
    c.real() = lu.solve(rhs.real());
    c.imag() = lu.solve(rhs.imag());
  }
  WaveField w;
  w.values = std::move(c);
  w.epsilon = eps;
  w.space = &ms;
  return w;
}

namespace detail {

template <class Matrix>
struct CnTraits;

template <>
struct CnTraits<Eigen::MatrixXd> {
  using ComplexMatrix = Eigen::MatrixXcd;
  using Factor = Eigen::PartialPivLU<Eigen::MatrixXcd>;

  static std::unique_ptr<Factor> factor(const Eigen::MatrixXd& M, const Eigen::MatrixXd& A, Complex alpha) {
    ComplexMatrix K = alpha * M.cast<Complex>() - 0.5 * A.cast<Complex>();
    return std::make_unique<Factor>(K);
  }
};

template <>
struct CnTraits<SparseMatrix> {
  using ComplexMatrix = Eigen::SparseMatrix<Complex>;
  using Factor = Eigen::SparseLU<ComplexMatrix, Eigen::COLAMDOrdering<int>>;

  static std::unique_ptr<Factor> factor(const SparseMatrix& M, const SparseMatrix& A, Complex alpha) {
    ComplexMatrix K = alpha * M.cast<Complex>() - Complex(0.5) * A.cast<Complex>();
    K.makeCompressed();
    auto f = std::make_unique<Factor>();
    f->analyzePattern(K);
    f->factorize(K);
    if (f->info() != Eigen::Success) throw SolverError("Crank-Nicolson factorization failed: " + f->lastErrorMessage());
    return f;
  }
};

}  // namespace detail

/**
 * Crank-Nicolson propagator
 *   (iε/Δt M − ½A) uⁿ = (iε/Δt M + ½A) uⁿ⁻¹
 * with the left-hand factorization computed once. Matrix is Eigen::MatrixXd
 * (reduced space) or SparseMatrix (fine space). Negative Δt steps backward.
 */
template <class Matrix>
class CrankNicolson {
 public:
  CrankNicolson(Matrix M, Matrix A, double eps, double dt)
      : M_(std::move(M)), A_(std::move(A)), eps_(eps), dt_(dt), alpha_(0.0, eps / dt) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(dt != 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be finite and nonzero");
    if (M_.rows() != A_.rows() || M_.cols() != A_.cols() || M_.rows() != M_.cols())
      throw std::invalid_argument("mass and Hamiltonian must be square and of equal size");
    factor_ = detail::CnTraits<Matrix>::factor(M_, A_, alpha_);
  }

  double dt() const { return dt_; }
  double epsilon() const { return eps_; }
  Eigen::Index size() const { return M_.rows(); }
  const Matrix& mass() const { return M_; }
  const Matrix& hamiltonian() const { return A_; }

  Eigen::VectorXcd step(const Eigen::VectorXcd& u) const {
    if (u.size() != size()) throw std::invalid_argument("field size does not match the propagator");
    const Eigen::VectorXcd rhs = alpha_ * apply_real(M_, u) + 0.5 * apply_real(A_, u);
    Eigen::VectorXcd next = factor_->solve(rhs);
    if (!next.allFinite()) throw SolverError("Crank-Nicolson step produced non-finite values");
    return next;
  }

 private:
  Matrix M_;
  Matrix A_;
  double eps_;
  double dt_;
  Complex alpha_;
  std::unique_ptr<typename detail::CnTraits<Matrix>::Factor> factor_;
};

/// One step with a freshly built propagator; use CrankNicolson to reuse the factorization.
template <class Matrix>
WaveField cn_step(const WaveField& prev, double dt, const Matrix& M, const Matrix& A) {
  CrankNicolson<Matrix> cn(M, A, prev.epsilon, dt);
  WaveField next = prev;
  next.values = cn.step(prev.values);
  next.time = prev.time + dt;
  return next;
}

struct Trajectory {
  std::vector<WaveField> snapshots;  ///< t = 0, every snapshot_every steps, and T

  const WaveField& initial() const { return snapshots.front(); }
  const WaveField& final() const { return snapshots.back(); }
};

/// Called after every step with the step index (1-based) and the new field.
using StepObserver = std::function<void(int, const WaveField&)>;

template <class Matrix>
Trajectory propagate(const CrankNicolson<Matrix>& cn, WaveField u, int steps, int snapshot_every = 0,
                     const StepObserver& observer = {}) {
  Trajectory traj;
  traj.snapshots.push_back(u);
  for (int n = 1; n <= steps; ++n) {
    try {
      u.values = cn.step(u.values);
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.what());
    }
    u.time = traj.snapshots.front().time + n * cn.dt();
    if (observer) observer(n, u);
    if (n == steps || (snapshot_every > 0 && n % snapshot_every == 0)) traj.snapshots.push_back(u);
  }
  return traj;
}

/// CN-CEM: elliptic projection of u₀ followed by steps in V_ms.
inline Trajectory run_cn_multiscale(const EvolutionConfig& cfg, const MultiscaleSpace& ms,
                                    const AssembledOperator& a_op, const Eigen::VectorXcd& u0, double eps,
                                    const StepObserver& observer = {}) {
  WaveField w = elliptic_project(u0, ms, a_op, eps);
  CrankNicolson<Eigen::MatrixXd> cn(ms.m_reduced, ms.a_reduced, eps, cfg.dt);
  return propagate(cn, std::move(w), cfg.steps, cfg.snapshot_every, observer);
}

/// CN-FEM on the fine grid starting from the given nodal values.
inline Trajectory run_cn_fine(const EvolutionConfig& cfg, const AssembledOperator& m_op,
                              const AssembledOperator& a_op, const Eigen::VectorXcd& u0, double eps,
                              const StepObserver& observer = {}) {
  if (!(m_op.grid == a_op.grid)) throw std::invalid_argument("operators use different grids");
  WaveField w;
  w.values = u0;
  w.epsilon = eps;
  CrankNicolson<SparseMatrix> cn(m_op.matrix, a_op.matrix, eps, cfg.dt);
  return propagate(cn, std::move(w), cfg.steps, cfg.snapshot_every, observer);
}

/**
 * Plain-text field dump: "d nx [ny] t eps" then one "re im" line per fine
 * dof in grid order.
 */
inline void write_field(std::ostream& os, const PeriodicGrid& grid, const WaveField& u) {
  const Eigen::VectorXcd v = u.fine_values();
  if (v.size() != grid.num_dofs()) throw std::invalid_argument("field does not live on this grid");
  os.precision(17);
  os << grid.dim() << ' ' << grid.fine_count(0);
  if (grid.dim() == 2) os << ' ' << grid.fine_count(1);
  os << ' ' << u.time << ' ' << u.epsilon << '\n';
  for (Eigen::Index p = 0; p < v.size(); ++p) os << v(p).real() << ' ' << v(p).imag() << '\n';
}

inline WaveField read_field(std::istream& is) {
  int d = 0, nx = 0, ny = 1;
  WaveField u;
  if (!(is >> d >> nx) || (d != 1 && d != 2) || nx < 1) throw std::runtime_error("field dump: bad header");
  if (d == 2 && !(is >> ny)) throw std::runtime_error("field dump: bad header");
  if (!(is >> u.time >> u.epsilon)) throw std::runtime_error("field dump: bad header");
  u.values.resize(static_cast<Eigen::Index>(nx) * ny);
  for (Eigen::Index p = 0; p < u.values.size(); ++p) {
    double re = 0, im = 0;
    if (!(is >> re >> im)) throw std::runtime_error("field dump: truncated at entry " + std::to_string(p));
    u.values(p) = Complex(re, im);
  }
  return u;
}

}  // namespace cemgms
