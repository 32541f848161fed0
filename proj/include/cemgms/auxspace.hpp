#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cemgms/assembly.hpp"
#include "cemgms/error.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/parallel.hpp"

namespace cemgms {

/// Lowest eigenpairs of the Neumann pencil (A_j, S_j) on one coarse element.
struct LocalEigenSet {
  int element = 0;
  std::vector<int> dofs;            ///< global dof of each local node
  Eigen::VectorXd eigenvalues;      ///< retained λ_j^1..λ_j^l, ascending
  double next_eigenvalue = 0.0;     ///< λ_j^{l+1}; +inf when l spans the local space
  Eigen::MatrixXd vectors;          ///< local nodes x l, S_j-orthonormal
  Eigen::MatrixXd s_vectors;        ///< S_j * vectors

  int count() const { return static_cast<int>(vectors.cols()); }
};

/**
 * Solves a_j(φ, v) = λ s_j(φ, v) on K_j and keeps the l lowest pairs plus
 * the first discarded eigenvalue. Dense: Cholesky of S_j followed by a
 * symmetric eigensolve.
 */
inline LocalEigenSet solve_local_eigenproblem(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                              const AssembledOperator& s_op, int j, int l) {
  const Eigen::MatrixXd A = assemble_on_coarse_element(grid, a_op, j);
  const Eigen::MatrixXd S = assemble_on_coarse_element(grid, s_op, j);
  const auto n = static_cast<int>(A.rows());
  if (l < 1 || l > n) {
    throw std::invalid_argument("eigenpair count must lie in [1, " + std::to_string(n) + "]");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw SolverError("weighted mass on coarse element " + std::to_string(j) + " is not positive definite");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, S, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) {
    throw SolverError("local eigensolve failed on coarse element " + std::to_string(j));
  }

  LocalEigenSet set;
  set.element = j;
  set.dofs = grid.coarse_element_dofs(j);
  set.eigenvalues = es.eigenvalues().head(l);
  set.next_eigenvalue = l < n ? es.eigenvalues()(l) : std::numeric_limits<double>::infinity();
  set.vectors = es.eigenvectors().leftCols(l);
  // One pass of S-orthonormalization to clean up rounding from the
  // back-substitution.
  Eigen::MatrixXd G = set.vectors.transpose() * S * set.vectors;
  Eigen::LLT<Eigen::MatrixXd> g(G);
  if (g.info() == Eigen::Success) {
    set.vectors = g.matrixU().solve<Eigen::OnTheRight>(set.vectors);
  }
  set.s_vectors = S * set.vectors;
  return set;
}

/// The auxiliary space: s-orthonormal local eigenvectors on every coarse
/// element, zero-extended. Columns are ordered (j, i) -> j * l + i.
struct AuxiliarySpace {
  GridSpec grid;
  int per_element = 0;
  std::vector<LocalEigenSet> elements;
  double lambda = 0.0;  ///< Λ = min_j λ_j^{l+1}

  int dimension() const { return per_element * static_cast<int>(elements.size()); }
  int column(int j, int i) const { return j * per_element + i; }
};

inline double compute_lambda(const AuxiliarySpace& aux) {
  double lambda = std::numeric_limits<double>::infinity();
  for (const auto& set : aux.elements) lambda = std::min(lambda, set.next_eigenvalue);
  return lambda;
}

inline AuxiliarySpace build_auxiliary_space(const PeriodicGrid& grid, const AssembledOperator& a_op,
                                            const AssembledOperator& s_op, int l) {
  AuxiliarySpace aux;
  aux.grid = grid.spec();
  aux.per_element = l;
  aux.elements.resize(static_cast<std::size_t>(grid.num_coarse()));
  parallel_for(grid.num_coarse(), [&](int j) { aux.elements[j] = solve_local_eigenproblem(grid, a_op, s_op, j, l); });
  aux.lambda = compute_lambda(aux);
  return aux;
}

/// Per-element local vectors (the broken space ⊕_j V_h(K_j)).
using BrokenField = std::vector<Eigen::VectorXd>;

/**
 * The s-orthogonal projection π = Σ_j π_j onto the auxiliary space,
 * π_j v = Σ_i s_j(φ_j^i, v) φ_j^i. It acts on global fine vectors through
 * their element restrictions and returns broken fields.
 */
class Projection {
 public:
  Projection(const PeriodicGrid& grid, const AssembledOperator& s_op, const AuxiliarySpace& aux)
      : aux_(&aux) {
    s_local_.resize(aux.elements.size());
    for (std::size_t j = 0; j < aux.elements.size(); ++j)
      s_local_[j] = assemble_on_coarse_element(grid, s_op, static_cast<int>(j));
  }

  const AuxiliarySpace& aux() const { return *aux_; }
  const Eigen::MatrixXd& s_local(int j) const { return s_local_[j]; }

  BrokenField restrict_to_elements(const Eigen::VectorXd& v) const {
    BrokenField out(aux_->elements.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
      const auto& dofs = aux_->elements[j].dofs;
      out[j].resize(static_cast<Eigen::Index>(dofs.size()));
      for (std::size_t a = 0; a < dofs.size(); ++a) out[j](a) = v(dofs[a]);
    }
    return out;
  }

  /// Auxiliary coordinates s(φ_j^i, v).
  Eigen::VectorXd coefficients(const BrokenField& v) const {
    Eigen::VectorXd c(aux_->dimension());
    for (std::size_t j = 0; j < v.size(); ++j)
      c.segment(aux_->column(static_cast<int>(j), 0), aux_->per_element) =
          aux_->elements[j].s_vectors.transpose() * v[j];
    return c;
  }

  BrokenField expand(const Eigen::VectorXd& c) const {
    BrokenField out(aux_->elements.size());
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = aux_->elements[j].vectors * c.segment(aux_->column(static_cast<int>(j), 0), aux_->per_element);
    return out;
  }

  BrokenField apply(const BrokenField& v) const { return expand(coefficients(v)); }
  BrokenField apply(const Eigen::VectorXd& v) const { return apply(restrict_to_elements(v)); }

  double s_inner(const BrokenField& u, const BrokenField& v) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) sum += u[j].dot(s_local_[j] * v[j]);
    return sum;
  }
  double s_norm(const BrokenField& u) const { return std::sqrt(std::max(0.0, s_inner(u, u))); }

 private:
  const AuxiliarySpace* aux_;
  std::vector<Eigen::MatrixXd> s_local_;
};

inline Projection build_projection(const PeriodicGrid& grid, const AssembledOperator& s_op,
                                   const AuxiliarySpace& aux) {
  return Projection(grid, s_op, aux);
}

/// CSV: element, λ^1..λ^{l+1}; then a final "Lambda" row.
inline void write_spectra_csv(std::ostream& os, const AuxiliarySpace& aux) {
  os << "element";
  for (int i = 1; i <= aux.per_element + 1; ++i) os << ",lambda_" << i;
  os << '\n';
  os.precision(12);
  for (const auto& set : aux.elements) {
    os << set.element;
    for (Eigen::Index i = 0; i < set.eigenvalues.size(); ++i) os << ',' << set.eigenvalues(i);
    os << ',' << set.next_eigenvalue << '\n';
  }
  os << "Lambda," << aux.lambda << '\n';
}

}  // namespace cemgms
