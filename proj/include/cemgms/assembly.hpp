#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemgms/grid.hpp"
#include "cemgms/quadrature.hpp"

namespace cemgms {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class OperatorKind {
  stiffness_scaled,  ///< ½ε² (∇u, ∇v)
  stiffness_unit,    ///< (∇u, ∇v), used for H¹ norms
  potential_mass,    ///< (V u, v)
  weighted_mass_s,   ///< (μ̃ u, v)
  l2_mass,           ///< (u, v)
  hamiltonian_a      ///< ½ε² (∇u, ∇v) + (V u, v)
};

enum class WeightMode { constant, exact_lagrange };

/// Coefficient function of a mass-type term; receives the physical point
/// and the coarse element owning it.
using MassCoefficient = std::function<double(const Point&, int coarse)>;

/// Q1/P1 bilinear form  gradient * (∇u,∇v) + (mass u, v).
struct BilinearForm {
  double gradient = 0.0;
  MassCoefficient mass;
  int quad_points = 2;
};

/**
 * The spectral-problem weight μ̃.
 *
 * constant:        μ̃|_K = 12 ε² H⁻²
 * exact_lagrange:  μ̃(x) = Σ_k ½ε² |∇η_k(x)|² over the coarse Q1/P1
 *                  Lagrange functions of the owning coarse element.
 */
struct WeightFunction {
  WeightMode mode = WeightMode::constant;
  double epsilon = 1.0;

  static WeightFunction constant(double eps) { return {WeightMode::constant, eps}; }
  static WeightFunction exact_lagrange(double eps) { return {WeightMode::exact_lagrange, eps}; }

  double operator()(const PeriodicGrid& grid, const Point& x, int coarse) const {
    const double e2 = epsilon * epsilon;
    if (mode == WeightMode::constant) {
      const double H = grid.H();
      return 12.0 * e2 / (H * H);
    }
    const double Hx = grid.coarse_size(0);
    if (grid.dim() == 1) return 0.5 * e2 * 2.0 / (Hx * Hx);
    const double Hy = grid.coarse_size(1);
    const Point o = grid.coarse_origin(coarse);
    const double s = (x.x - o.x) / Hx;
    const double t = (x.y - o.y) / Hy;
    const double gx = 2.0 * ((1.0 - t) * (1.0 - t) + t * t) / (Hx * Hx);
    const double gy = 2.0 * ((1.0 - s) * (1.0 - s) + s * s) / (Hy * Hy);
    return 0.5 * e2 * (gx + gy);
  }
};

/**
 * A sparse Hermitian (real symmetric) operator over fine dofs, or over a
 * patch-local subset of them when `dofs` is non-empty.
 */
struct AssembledOperator {
  OperatorKind kind = OperatorKind::l2_mass;
  GridSpec grid;
  BilinearForm form;
  double epsilon = 0.0;
  std::optional<WeightMode> weight;
  SparseMatrix matrix;
  std::vector<int> dofs;

  bool is_global() const { return dofs.empty(); }
  Eigen::Index size() const { return matrix.rows(); }
};

namespace detail {

/// Element matrix of `form` on fine element e (2x2 in 1D, 4x4 in 2D).
inline Eigen::Matrix4d element_matrix(const PeriodicGrid& grid, const BilinearForm& form, int e,
                                      const GaussRule& rule) {
  Eigen::Matrix4d K = Eigen::Matrix4d::Zero();
  const Point o = grid.fine_origin(e);
  const int coarse = grid.coarse_of_fine(e);
  const double hx = grid.fine_size(0);
  const std::size_t nq = rule.nodes.size();

  if (grid.dim() == 1) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double s = rule.nodes[q];
      const double w = rule.weights[q] * hx;
      const std::array<double, 2> N{1.0 - s, s};
      const std::array<double, 2> dN{-1.0 / hx, 1.0 / hx};
      double c = 0.0;
      if (form.mass) {
        c = form.mass(Point{o.x + s * hx, 0.0}, coarse);
        if (!std::isfinite(c)) {
          std::ostringstream msg;
          msg << "non-finite coefficient at x=" << o.x + s * hx;
          throw std::domain_error(msg.str());
        }
      }
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) K(a, b) += w * (form.gradient * dN[a] * dN[b] + c * N[a] * N[b]);
    }
    return K;
  }

  const double hy = grid.fine_size(1);
  for (std::size_t qy = 0; qy < nq; ++qy) {
    const double t = rule.nodes[qy];
    for (std::size_t qx = 0; qx < nq; ++qx) {
      const double s = rule.nodes[qx];
      const double w = rule.weights[qx] * rule.weights[qy] * hx * hy;
      const std::array<double, 4> N{(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
      const std::array<double, 4> Nx{-(1 - t) / hx, (1 - t) / hx, -t / hx, t / hx};
      const std::array<double, 4> Ny{-(1 - s) / hy, -s / hy, (1 - s) / hy, s / hy};
      double c = 0.0;
      if (form.mass) {
        const Point x{o.x + s * hx, o.y + t * hy};
        c = form.mass(x, coarse);
        if (!std::isfinite(c)) {
          std::ostringstream msg;
          msg << "non-finite coefficient at (" << x.x << ", " << x.y << ")";
          throw std::domain_error(msg.str());
        }
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          K(a, b) += w * (form.gradient * (Nx[a] * Nx[b] + Ny[a] * Ny[b]) + c * N[a] * N[b]);
    }
  }
  return K;
}

inline AssembledOperator make_operator(const PeriodicGrid& grid, OperatorKind kind, BilinearForm form,
                                       double eps) {
  const GaussRule rule = gauss_legendre(form.quad_points);
  const int nloc = grid.nodes_per_element();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.num_fine_elements()) * nloc * nloc);
  for (int e = 0; e < grid.num_fine_elements(); ++e) {
    const Eigen::Matrix4d K = element_matrix(grid, form, e, rule);
    const auto d = grid.element_dofs(e);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b)
        if (K(a, b) != 0.0) triplets.emplace_back(d[a], d[b], K(a, b));
  }
  AssembledOperator op;
  op.kind = kind;
  op.grid = grid.spec();
  op.form = std::move(form);
  op.epsilon = eps;
  op.matrix.resize(grid.num_dofs(), grid.num_dofs());
  op.matrix.setFromTriplets(triplets.begin(), triplets.end());
  // Triplet summation order differs between (i,j) and (j,i).
  const SparseMatrix transposed = op.matrix.transpose();
  op.matrix = 0.5 * (op.matrix + transposed);
  op.matrix.makeCompressed();
  return op;
}

}  // namespace detail

/// ½ε² ∫∇φ_p·∇φ_q.
inline AssembledOperator assemble_stiffness(const PeriodicGrid& grid, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return detail::make_operator(grid, OperatorKind::stiffness_scaled, {0.5 * eps * eps, {}, 2}, eps);
}

/// ∫∇φ_p·∇φ_q without scaling (H¹ seminorm).
inline AssembledOperator assemble_laplacian(const PeriodicGrid& grid) {
  return detail::make_operator(grid, OperatorKind::stiffness_unit, {1.0, {}, 2}, 0.0);
}

inline AssembledOperator assemble_l2_mass(const PeriodicGrid& grid) {
  return detail::make_operator(grid, OperatorKind::l2_mass,
                               {0.0, [](const Point&, int) { return 1.0; }, 2}, 0.0);
}

/// ∫ V φ_p φ_q with tensor Gauss quadrature of `quad_points` per axis.
inline AssembledOperator assemble_potential_mass(const PeriodicGrid& grid,
                                                 std::function<double(const Point&)> V,
                                                 int quad_points = 2) {
  MassCoefficient c = [V = std::move(V)](const Point& x, int) { return V(x); };
  return detail::make_operator(grid, OperatorKind::potential_mass, {0.0, std::move(c), quad_points}, 0.0);
}

/// ∫ μ̃ φ_p φ_q.
inline AssembledOperator assemble_weighted_mass(const PeriodicGrid& grid, const WeightFunction& weight,
                                                int quad_points = 2) {
  MassCoefficient c = [weight, grid](const Point& x, int k) { return weight(grid, x, k); };
  auto op = detail::make_operator(grid, OperatorKind::weighted_mass_s, {0.0, std::move(c), quad_points},
                                  weight.epsilon);
  op.weight = weight.mode;
  return op;
}

/// a(u, v) = ½ε²(∇u,∇v) + (V u, v).
inline AssembledOperator assemble_hamiltonian(const PeriodicGrid& grid, double eps,
                                              std::function<double(const Point&)> V, int quad_points = 2) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  MassCoefficient c = [V = std::move(V)](const Point& x, int) { return V(x); };
  return detail::make_operator(grid, OperatorKind::hamiltonian_a, {0.5 * eps * eps, std::move(c), quad_points},
                               eps);
}

/**
 * Neumann (unconstrained) restriction of the operator's bilinear form to
 * coarse element K_j, in the local numbering of grid.coarse_element_dofs(j).
 * Unlike a submatrix of the global matrix, this only integrates over K_j.
 */
inline Eigen::MatrixXd assemble_on_coarse_element(const PeriodicGrid& grid, const AssembledOperator& op, int j) {
  if (!(op.grid == grid.spec())) throw std::invalid_argument("operator was assembled on a different grid");
  const GaussRule rule = gauss_legendre(op.form.quad_points);
  const int n = grid.nodes_per_coarse_element();
  const int nloc = grid.nodes_per_element();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int e : grid.fine_elements_of(j)) {
    const Eigen::Matrix4d Ke = detail::element_matrix(grid, op.form, e, rule);
    const auto loc = grid.element_local_in_coarse(e);
    for (int a = 0; a < nloc; ++a)
      for (int b = 0; b < nloc; ++b) K(loc[a], loc[b]) += Ke(a, b);
  }
  return K;
}

/// Sum of two operators on the same grid (e.g. stiffness + potential mass).
inline AssembledOperator combine(const AssembledOperator& stiffness, const AssembledOperator& potential) {
  if (!(stiffness.grid == potential.grid)) throw std::invalid_argument("operators live on different grids");
  AssembledOperator out;
  out.kind = OperatorKind::hamiltonian_a;
  out.grid = stiffness.grid;
  out.epsilon = stiffness.epsilon;
  out.form.gradient = stiffness.form.gradient + potential.form.gradient;
  out.form.quad_points = std::max(stiffness.form.quad_points, potential.form.quad_points);
  auto m1 = stiffness.form.mass;
  auto m2 = potential.form.mass;
  if (m1 || m2) {
    out.form.mass = [m1, m2](const Point& x, int k) { return (m1 ? m1(x, k) : 0.0) + (m2 ? m2(x, k) : 0.0); };
  }
  out.matrix = stiffness.matrix + potential.matrix;
  return out;
}

enum class BoundaryCondition { none, zero_trace };

/**
 * Principal submatrix on the patch dofs. With zero_trace the patch
 * boundary dofs are dropped (homogeneous essential condition on ∂K_j^m).
 * The result's `dofs` lists the global index of each retained row.
 */
inline AssembledOperator restrict(const AssembledOperator& op, const Patch& patch, BoundaryCondition bc) {
  if (!op.is_global()) throw std::invalid_argument("restrict expects a global operator");
  if (!(op.grid == patch.grid)) throw std::invalid_argument("patch was not built from the operator's grid");

  std::vector<int> keep_local;
  if (bc == BoundaryCondition::zero_trace) {
    keep_local = patch.interior;
  } else {
    keep_local.resize(patch.dofs.size());
    std::iota(keep_local.begin(), keep_local.end(), 0);
  }

  AssembledOperator out;
  out.kind = op.kind;
  out.grid = op.grid;
  out.form = op.form;
  out.epsilon = op.epsilon;
  out.weight = op.weight;
  out.dofs.reserve(keep_local.size());
  std::vector<int> row_of(op.matrix.rows(), -1);
  for (std::size_t k = 0; k < keep_local.size(); ++k) {
    const int g = patch.dofs[keep_local[k]];
    out.dofs.push_back(g);
    row_of[g] = static_cast<int>(k);
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < out.dofs.size(); ++k) {
    const int g = out.dofs[k];
    for (SparseMatrix::InnerIterator it(op.matrix, g); it; ++it) {
      const int r = row_of[it.row()];
      if (r >= 0) triplets.emplace_back(r, static_cast<int>(k), it.value());
    }
  }
  const auto n = static_cast<Eigen::Index>(out.dofs.size());
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  return out;
}

/// Coordinate-format dump: one "row col value" line per stored entry.
inline void write_coo(std::ostream& os, const AssembledOperator& op) {
  os << "% rows " << op.matrix.rows() << " cols " << op.matrix.cols() << " nnz " << op.matrix.nonZeros() << '\n';
  os.precision(17);
  for (Eigen::Index k = 0; k < op.matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

/// Warning text when the fine mesh does not resolve min(ε, δ)/4.
inline std::optional<std::string> resolution_warning(const PeriodicGrid& grid, double eps, double delta) {
  const double scale = std::min(eps, delta);
  if (grid.h() > scale / 4.0) {
    std::ostringstream msg;
    msg << "fine mesh h=" << grid.h() << " exceeds min(eps, delta)/4=" << scale / 4.0;
    return msg.str();
  }
  return std::nullopt;
}

}  // namespace cemgms
