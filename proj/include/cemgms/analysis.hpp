#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cemgms/assembly.hpp"
#include "cemgms/evolve.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/quadrature.hpp"

namespace cemgms {

/// n = |u|² at every node.
inline Eigen::VectorXd position_density(const Eigen::VectorXcd& u) { return u.cwiseAbs2(); }

/**
 * Element averages of e = ε²/2 |∇u_h|² + V |u_h|² using the same tensor
 * Gauss rule as the Hamiltonian assembly, so Σ_e |K_e| ē_e = uᴴ A u.
 */
inline Eigen::VectorXd energy_density(const PeriodicGrid& grid, const Eigen::VectorXcd& u, double eps,
                                      const std::function<double(const Point&)>& V, int quad_points = 2) {
  if (u.size() != grid.num_dofs()) throw std::invalid_argument("field does not live on this grid");
  const GaussRule rule = gauss_legendre(quad_points);
  const double hx = grid.fine_size(0);
  const double hy = grid.dim() == 2 ? grid.fine_size(1) : 1.0;
  const double k = 0.5 * eps * eps;
  Eigen::VectorXd out(grid.num_fine_elements());
  for (int e = 0; e < grid.num_fine_elements(); ++e) {
    const auto d = grid.element_dofs(e);
    const Point o = grid.fine_origin(e);
    double sum = 0.0;
    if (grid.dim() == 1) {
      const Complex du = (u(d[1]) - u(d[0])) / hx;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double s = rule.nodes[q];
        const Complex uq = (1.0 - s) * u(d[0]) + s * u(d[1]);
        sum += rule.weights[q] * (k * std::norm(du) + V(Point{o.x + s * hx, 0.0}) * std::norm(uq));
      }
    } else {
      for (std::size_t qy = 0; qy < rule.nodes.size(); ++qy) {
        const double t = rule.nodes[qy];
        for (std::size_t qx = 0; qx < rule.nodes.size(); ++qx) {
          const double s = rule.nodes[qx];
          const Complex uq = (1 - s) * (1 - t) * u(d[0]) + s * (1 - t) * u(d[1]) + (1 - s) * t * u(d[2]) +
                             s * t * u(d[3]);
          const Complex ux = ((1 - t) * (u(d[1]) - u(d[0])) + t * (u(d[3]) - u(d[2]))) / hx;
          const Complex uy = ((1 - s) * (u(d[2]) - u(d[0])) + s * (u(d[3]) - u(d[1]))) / hy;
          const double v = V(Point{o.x + s * hx, o.y + t * hy});
          sum += rule.weights[qx] * rule.weights[qy] * (k * (std::norm(ux) + std::norm(uy)) + v * std::norm(uq));
        }
      }
    }
    out(e) = sum;
  }
  return out;
}

/// Quadratic forms used for error norms on one fine grid.
struct NormOperators {
  GridSpec grid;
  SparseMatrix mass;
  SparseMatrix laplacian;
  SparseMatrix hamiltonian;
};

inline NormOperators make_norm_operators(const PeriodicGrid& grid, const AssembledOperator& a_op) {
  if (!(a_op.grid == grid.spec())) throw std::invalid_argument("operator was assembled on a different grid");
  NormOperators n;
  n.grid = grid.spec();
  n.mass = assemble_l2_mass(grid).matrix;
  n.laplacian = assemble_laplacian(grid).matrix;
  n.hamiltonian = a_op.matrix;
  return n;
}

inline double quadratic_form(const SparseMatrix& A, const Eigen::VectorXcd& u) {
  return std::abs(u.dot(apply_real(A, u)));
}

struct RunMetadata {
  std::string experiment_id;
  double epsilon = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double contrast = std::numeric_limits<double>::quiet_NaN();
  double H = 0.0;
  double h = 0.0;
  int layers = 0;
  int per_element = 0;
  double dt = 0.0;
};

struct ErrorReport {
  double l2 = 0.0;
  double h1 = 0.0;
  double a = 0.0;
  RunMetadata meta;
};

/// Relative L², H¹ (mass + unit Laplacian) and a-norm errors of u_test against u_ref.
inline ErrorReport relative_errors(const Eigen::VectorXcd& u_test, const Eigen::VectorXcd& u_ref,
                                   const NormOperators& norms) {
  if (u_test.size() != u_ref.size() || u_ref.size() != norms.mass.rows())
    throw std::invalid_argument("fields and norm operators have different sizes");
  const Eigen::VectorXcd d = u_test - u_ref;
  const double ref_l2 = quadratic_form(norms.mass, u_ref);
  const double ref_h1 = ref_l2 + quadratic_form(norms.laplacian, u_ref);
  const double ref_a = quadratic_form(norms.hamiltonian, u_ref);
  if (!(ref_l2 > 0.0)) throw std::domain_error("reference field has zero norm");
  const double d_l2 = quadratic_form(norms.mass, d);
  ErrorReport r;
  r.l2 = std::sqrt(d_l2 / ref_l2);
  r.h1 = std::sqrt((d_l2 + quadratic_form(norms.laplacian, d)) / ref_h1);
  r.a = ref_a > 0.0 ? std::sqrt(quadratic_form(norms.hamiltonian, d) / ref_a) : 0.0;
  return r;
}

/**
 * Nodal injection of a field on `fine` into the nodes of `coarse`, where
 * `fine` refines every axis of `coarse` by an integer factor.
 */
inline Eigen::VectorXcd inject(const PeriodicGrid& fine, const PeriodicGrid& coarse, const Eigen::VectorXcd& u) {
  if (u.size() != fine.num_dofs()) throw std::invalid_argument("field does not live on the fine grid");
  std::array<int, 2> factor{1, 1};
  for (int a = 0; a < coarse.dim(); ++a) {
    if (fine.fine_count(a) % coarse.fine_count(a) != 0 || fine.dim() != coarse.dim())
      throw std::invalid_argument("grids are not nested");
    factor[a] = fine.fine_count(a) / coarse.fine_count(a);
  }
  Eigen::VectorXcd out(coarse.num_dofs());
  for (int iy = 0; iy < coarse.fine_count(1); ++iy)
    for (int ix = 0; ix < coarse.fine_count(0); ++ix)
      out(coarse.dof(ix, iy)) = u(fine.dof(ix * factor[0], iy * factor[1]));
  return out;
}

/// order_k = log(e_{k-1}/e_k) / log(H_{k-1}/H_k) for consecutive pairs.
inline std::vector<double> convergence_order(const std::vector<std::pair<double, double>>& h_err) {
  std::vector<double> orders;
  for (std::size_t k = 1; k < h_err.size(); ++k) {
    const auto [h0, e0] = h_err[k - 1];
    const auto [h1, e1] = h_err[k];
    if (!(h1 < h0)) throw std::invalid_argument("mesh sizes must strictly decrease");
    if (!(e0 > 0.0) || !(e1 > 0.0)) throw std::domain_error("errors must be positive to compute an order");
    orders.push_back(std::log(e0 / e1) / std::log(h0 / h1));
  }
  return orders;
}

struct ResultRow {
  ErrorReport errors;
  double order_l2 = std::numeric_limits<double>::quiet_NaN();
  double order_h1 = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;
};

inline void write_csv_header(std::ostream& os) {
  os << "experiment_id,eps,delta,upsilon,H,h,m,l,dt,errL2,errH1,errA,orderL2,orderH1,wall_time\n";
}

inline void write_csv_row(std::ostream& os, const ResultRow& row) {
  const auto& m = row.errors.meta;
  auto num = [&os](double v) {
    if (std::isnan(v))
      os << "nan";
    else
      os << v;
  };
  const auto flags = os.flags();
  const auto prec = os.precision(10);
  os << m.experiment_id << ',';
  num(m.epsilon);
  os << ',';
  num(m.delta);
  os << ',';
  num(m.contrast);
  os << ',';
  num(m.H);
  os << ',';
  num(m.h);
  os << ',' << m.layers << ',' << m.per_element << ',';
  num(m.dt);
  os << ',' << std::scientific;
  num(row.errors.l2);
  os << ',';
  num(row.errors.h1);
  os << ',';
  num(row.errors.a);
  os << std::defaultfloat << std::fixed << std::setprecision(4) << ',';
  num(row.order_l2);
  os << ',';
  num(row.order_h1);
  os << ',' << std::setprecision(3);
  num(row.wall_time);
  os << '\n';
  os.flags(flags);
  os.precision(prec);
}

}  // namespace cemgms
