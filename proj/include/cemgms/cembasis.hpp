#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cemgms/assembly.hpp"
#include "cemgms/auxspace.hpp"
#include "cemgms/error.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/parallel.hpp"

namespace cemgms {

/// How the patch system (A + Πᵀ S Π) ψ = Πᵀ S φ is solved.
enum class PatchSolver {
  automatic,  ///< whichever of the two below touches fewer matrix entries
  woodbury,   ///< factor A once, treat Πᵀ S Π as a low-rank update
  assembled   ///< form A + Πᵀ S Π as one sparse matrix and factor it
};

struct BasisOptions {
  PatchSolver solver = PatchSolver::automatic;
};

/// The l CEM basis functions of one coarse element on its patch.
struct PatchBasis {
  int element = 0;
  int layers = 0;
  std::vector<int> dofs;   ///< global dof of each row (patch interior)
  Eigen::MatrixXd values;  ///< rows x l
};

namespace detail {

/// Symmetric sparse factorization with an LU fallback for indefinite or
/// singular-looking pivots.
class SymmetricSolver {
 public:
  explicit SymmetricSolver(const SparseMatrix& K) {
    ldlt_.compute(K);
    if (ldlt_.info() == Eigen::Success) {
      const auto d = ldlt_.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      if (d.size() > 0 && d.cwiseAbs().minCoeff() > 1e-14 * dmax) {
        use_ldlt_ = true;
        return;
      }
    }
    lu_.analyzePattern(K);
    lu_.factorize(K);
    if (lu_.info() != Eigen::Success) throw SolverError("patch system is singular: " + lu_.lastErrorMessage());
  }

  template <class Rhs>
  Eigen::MatrixXd solve(const Rhs& b) const {
    Eigen::MatrixXd x = use_ldlt_ ? Eigen::MatrixXd(ldlt_.solve(b)) : Eigen::MatrixXd(lu_.solve(b));
    if (!x.allFinite()) throw SolverError("patch solve produced non-finite values");
    return x;
  }

 private:
  bool use_ldlt_ = false;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Interior-restricted Hamiltonian and the update factor B = Πᵀ S Φ on
/// patch (j, m). Column block k of B holds S_k φ_k^i for the k-th element
/// of the patch.
struct PatchSystem {
  Patch patch;
  AssembledOperator a;
  SparseMatrix update;  ///< interior dofs x (patch elements * l)
  int center_block = 0;
};

inline PatchSystem patch_system(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                const AuxiliarySpace& aux, int j, int m) {
  PatchSystem sys;
  sys.patch = extract_patch(grid, j, m);
  sys.a = restrict(a_op, sys.patch, BoundaryCondition::zero_trace);

  std::vector<int> interior_pos(sys.patch.dofs.size(), -1);
  for (std::size_t k = 0; k < sys.patch.interior.size(); ++k)
    interior_pos[sys.patch.interior[k]] = static_cast<int>(k);

  const int l = aux.per_element;
  const auto nb = static_cast<Eigen::Index>(sys.patch.elements.size()) * l;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t b = 0; b < sys.patch.elements.size(); ++b) {
    const int k = sys.patch.elements[b];
    if (k == j) sys.center_block = static_cast<int>(b);
    const LocalEigenSet& set = aux.elements[k];
    for (std::size_t a = 0; a < set.dofs.size(); ++a) {
      const int row = interior_pos[sys.patch.local_of(set.dofs[a])];
      if (row < 0) continue;
      for (int i = 0; i < l; ++i) {
        const double v = set.s_vectors(static_cast<Eigen::Index>(a), i);
        if (v != 0.0) triplets.emplace_back(row, static_cast<int>(b) * l + i, v);
      }
    }
  }
  sys.update.resize(static_cast<Eigen::Index>(sys.patch.interior.size()), nb);
  sys.update.setFromTriplets(triplets.begin(), triplets.end());
  sys.update.makeCompressed();
  return sys;
}

inline Eigen::MatrixXd solve_woodbury(const PatchSystem& sys, int l) {
  const SymmetricSolver solver(sys.a.matrix);
  const Eigen::MatrixXd B = Eigen::MatrixXd(sys.update);
  const Eigen::MatrixXd Y = solver.solve(B);
  // (A + BBᵀ)⁻¹ B = Y (I + BᵀY)⁻¹
  Eigen::MatrixXd C = sys.update.transpose() * Y;
  C.diagonal().array() += 1.0;
  const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(C.rows(), C.cols()).middleCols(
      static_cast<Eigen::Index>(sys.center_block) * l, l);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(C);
  return Y * lu.solve(E);
}

inline Eigen::MatrixXd solve_assembled(const PatchSystem& sys, int l) {
  SparseMatrix K = sys.a.matrix + SparseMatrix(sys.update * sys.update.transpose());
  K.makeCompressed();
  const SymmetricSolver solver(K);
  const Eigen::MatrixXd rhs =
      Eigen::MatrixXd(sys.update.middleCols(static_cast<Eigen::Index>(sys.center_block) * l, l));
  return solver.solve(rhs);
}

}  // namespace detail

/**
 * Localized CEM basis functions ψ_{j,m}^i, i = 1..l, solving
 *   a(ψ, v) + s(πψ, πv) = s(φ_j^i, πv)   for all v in V_0(K_j^m)
 * with zero trace on the patch boundary (none when the patch covers Ω).
 */
inline PatchBasis solve_patch_bases(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                    const AuxiliarySpace& aux, int j, int m, const BasisOptions& opts = {}) {
  if (!(aux.grid == grid.spec())) throw std::invalid_argument("auxiliary space was built on a different grid");
  const detail::PatchSystem sys = detail::patch_system(grid, a_op, aux, j, m);
  const int l = aux.per_element;

  PatchSolver solver = opts.solver;
  if (solver == PatchSolver::automatic) {
    // Woodbury stores the dense block A⁻¹B; the assembled matrix gains one
    // dense block per coarse element of the patch.
    const double woodbury = static_cast<double>(sys.update.rows()) * static_cast<double>(sys.update.cols());
    double assembled = 0.0;
    for (int k : sys.patch.elements) {
      const double n = static_cast<double>(aux.elements[k].dofs.size());
      assembled += n * n;
    }
    solver = assembled <= woodbury ? PatchSolver::assembled : PatchSolver::woodbury;
  }

  PatchBasis out;
  out.element = j;
  out.layers = m;
  out.dofs = sys.a.dofs;
  try {
    out.values = solver == PatchSolver::woodbury ? detail::solve_woodbury(sys, l) : detail::solve_assembled(sys, l);
  } catch (const SolverError& e) {
    if (solver == PatchSolver::woodbury) {
      // A alone may be singular on a full-cover patch; the full system is not.
      out.values = detail::solve_assembled(sys, l);
    } else {
      throw SolverError("CEM basis on element " + std::to_string(j) + ": " + e.what());
    }
  }
  return out;
}

/// ψ_{j,m}^i extended by zero to all fine dofs.
inline Eigen::VectorXd solve_cem_basis(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                       const AuxiliarySpace& aux, int j, int i, int m,
                                       const BasisOptions& opts = {}) {
  if (i < 0 || i >= aux.per_element) throw std::out_of_range("basis index out of range");
  const PatchBasis pb = solve_patch_bases(grid, a_op, aux, j, m, opts);
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(grid.num_dofs());
  for (std::size_t r = 0; r < pb.dofs.size(); ++r) psi(pb.dofs[r]) = pb.values(static_cast<Eigen::Index>(r), i);
  return psi;
}

/// Smallest m whose patch covers the whole periodic domain.
inline int full_cover_layers(const PeriodicGrid& grid) {
  int nc = grid.coarse_count(0);
  if (grid.dim() == 2) nc = std::max(nc, grid.coarse_count(1));
  return nc / 2;
}

/**
 * V_ms = span{ψ_{j,m}^i}. `basis` is P (fine dofs x n_b) with column
 * (j, i) at j*l + i. When the columns are linearly dependent (e.g. the
 * complete local eigenbasis) the space is re-expressed in an M-orthonormal
 * basis of its range and `compressed` is set.
 */
struct MultiscaleSpace {
  GridSpec grid;
  int layers = 0;
  int per_element = 0;
  double lambda = 0.0;
  SparseMatrix basis;
  Eigen::MatrixXd a_reduced;
  Eigen::MatrixXd m_reduced;
  Eigen::Index raw_columns = 0;
  bool compressed = false;

  Eigen::Index dimension() const { return basis.cols(); }

  Eigen::VectorXcd prolong(const Eigen::VectorXcd& c) const {
    Eigen::VectorXcd u(basis.rows());
    u.real() = basis * c.real();
    u.imag() = basis * c.imag();
    return u;
  }

  /// Pᵀ v for a complex fine vector.
  Eigen::VectorXcd restrict_dual(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd c(basis.cols());
    c.real() = basis.transpose() * v.real();
    c.imag() = basis.transpose() * v.imag();
    return c;
  }
};

inline MultiscaleSpace build_multiscale_space(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                              const AssembledOperator& m_op, const AuxiliarySpace& aux, int m,
                                              const BasisOptions& opts = {}) {
  if (!(a_op.grid == grid.spec()) || !(m_op.grid == grid.spec()))
    throw std::invalid_argument("operators were assembled on a different grid");
  const int N = grid.num_coarse();
  const int l = aux.per_element;
  std::vector<PatchBasis> patches(static_cast<std::size_t>(N));
  parallel_for(N, [&](int j) { patches[j] = solve_patch_bases(grid, a_op, aux, j, m, opts); });

  std::size_t nnz = 0;
  for (const auto& p : patches) nnz += p.dofs.size() * static_cast<std::size_t>(l);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nnz);
  for (const auto& p : patches)
    for (int i = 0; i < l; ++i)
      for (std::size_t r = 0; r < p.dofs.size(); ++r) {
        const double v = p.values(static_cast<Eigen::Index>(r), i);
        if (v != 0.0) triplets.emplace_back(p.dofs[r], aux.column(p.element, i), v);
      }
  patches.clear();
  patches.shrink_to_fit();

  MultiscaleSpace ms;
  ms.grid = grid.spec();
  ms.layers = m;
  ms.per_element = l;
  ms.lambda = aux.lambda;
  ms.raw_columns = aux.dimension();
  ms.basis.resize(grid.num_dofs(), aux.dimension());
  ms.basis.setFromTriplets(triplets.begin(), triplets.end());
  ms.basis.makeCompressed();
  triplets.clear();
  triplets.shrink_to_fit();

  const SparseMatrix Pt = ms.basis.transpose();
  {
    const SparseMatrix AP = a_op.matrix * ms.basis;
    ms.a_reduced = Eigen::MatrixXd(SparseMatrix(Pt * AP));
  }
  {
    const SparseMatrix MP = m_op.matrix * ms.basis;
    ms.m_reduced = Eigen::MatrixXd(SparseMatrix(Pt * MP));
  }
  // Symmetrize away product rounding.
  ms.a_reduced = 0.5 * (ms.a_reduced + ms.a_reduced.transpose()).eval();
  ms.m_reduced = 0.5 * (ms.m_reduced + ms.m_reduced.transpose()).eval();

  Eigen::LDLT<Eigen::MatrixXd> gram(ms.m_reduced);
  const Eigen::VectorXd d = gram.vectorD();
  const bool singular = gram.info() != Eigen::Success || d.minCoeff() <= 1e-12 * d.cwiseAbs().maxCoeff();
  if (singular) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ms.m_reduced);
    const Eigen::VectorXd& w = es.eigenvalues();
    const double cutoff = 1e-10 * w.maxCoeff();
    Eigen::Index keep = 0;
    for (Eigen::Index k = 0; k < w.size(); ++k) keep += w(k) > cutoff ? 1 : 0;
    if (keep == 0) throw SolverError("multiscale space is empty");
    const Eigen::Index first = w.size() - keep;
    Eigen::MatrixXd Q = es.eigenvectors().rightCols(keep);
    for (Eigen::Index k = 0; k < keep; ++k) Q.col(k) /= std::sqrt(w(first + k));
    ms.basis = (Eigen::MatrixXd(ms.basis) * Q).sparseView();
    ms.a_reduced = Q.transpose() * ms.a_reduced * Q;
    ms.m_reduced = Q.transpose() * ms.m_reduced * Q;
    ms.a_reduced = 0.5 * (ms.a_reduced + ms.a_reduced.transpose()).eval();
    ms.m_reduced = 0.5 * (ms.m_reduced + ms.m_reduced.transpose()).eval();
    ms.compressed = true;
  }
  return ms;
}

struct DecayRow {
  int layers = 0;
  double error = 0.0;  ///< ‖ψ_j^i − ψ_{j,m}^i‖_a
  bool covers_domain = false;
};

struct DecayStudy {
  int element = 0;
  int index = 0;
  std::vector<DecayRow> rows;
  /// Geometric rate fitted to the squared errors, err² ≈ C θ̂^m.
  double theta_hat = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares fit of log(err²) against m over rows with nonzero error.
inline double fit_decay_rate(const std::vector<DecayRow>& rows) {
  std::vector<std::pair<double, double>> pts;
  double emax = 0.0;
  for (const auto& r : rows) emax = std::max(emax, r.error);
  for (const auto& r : rows)
    if (!r.covers_domain && r.error > 1e-13 * emax && r.error > 0.0)
      pts.emplace_back(r.layers, 2.0 * std::log(r.error));
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= pts.size();
  my /= pts.size();
  double sxy = 0, sxx = 0;
  for (auto [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  return std::exp(sxy / sxx);
}

/// Errors of localized bases against the global basis ψ_j^i (full-cover patch).
inline DecayStudy decay_study(const PeriodicGrid& grid, const AssembledOperator& a_op, const AuxiliarySpace& aux,
                              int j, int i, const std::vector<int>& layers, const BasisOptions& opts = {}) {
  DecayStudy study;
  study.element = j;
  study.index = i;
  const int full = full_cover_layers(grid);
  const Eigen::VectorXd global = solve_cem_basis(grid, a_op, aux, j, i, full, opts);
  for (int m : layers) {
    DecayRow row;
    row.layers = m;
    row.covers_domain = extract_patch(grid, j, m).covers_domain;
    const Eigen::VectorXd local = row.covers_domain ? global : solve_cem_basis(grid, a_op, aux, j, i, m, opts);
    const Eigen::VectorXd d = global - local;
    row.error = std::sqrt(std::abs(d.dot(a_op.matrix * d)));
    study.rows.push_back(row);
  }
  study.theta_hat = fit_decay_rate(study.rows);
  return study;
}

inline void write_decay_csv(std::ostream& os, const DecayStudy& study) {
  os << "element,index,m,error_a,theta_hat\n";
  os.precision(10);
  for (const auto& r : study.rows)
    os << study.element << ',' << study.index << ',' << r.layers << ',' << std::scientific << r.error << ','
       << study.theta_hat << std::defaultfloat << '\n';
}

}  // namespace cemgms
