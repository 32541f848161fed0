#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cemgms/analysis.hpp"
#include "cemgms/assembly.hpp"
#include "cemgms/evolve.hpp"
#include "cemgms/problems.hpp"
#include "support/generators.hpp"

using namespace cemgms;
using cemgms::testing::Gen;

namespace {

double cell_area(const PeriodicGrid& g) { return g.dim() == 2 ? g.fine_size(0) * g.fine_size(1) : g.fine_size(0); }

}  // namespace

TEST(Densities, PositionDensityIsModulusSquared) {
  Eigen::VectorXcd u(3);
  u << std::complex<double>(3, 4), 0.0, std::complex<double>(0, -2);
  const Eigen::VectorXd n = position_density(u);
  EXPECT_DOUBLE_EQ(n(0), 25.0);
  EXPECT_DOUBLE_EQ(n(1), 0.0);
  EXPECT_DOUBLE_EQ(n(2), 4.0);
}

TEST(Densities, GaussianPeakDensity) {
  const auto grid = PeriodicGrid::build(2, 0.0, 1.0, 4, 4);
  const auto u0 = make_initial_data(InitialKind::gaussian2d, 1.0 / 16);
  const Eigen::VectorXd n = position_density(interpolate(grid, u0));
  EXPECT_NEAR(n(grid.dof(8, 8)), 10.0 / std::numbers::pi, 1e-12);
}

TEST(Densities, EnergyIntegratesToHamiltonianForm) {
  Gen gen(4);
  for (int dim : {1, 2}) {
    const auto grid = PeriodicGrid::build(dim, 0.0, 1.0, 4, 3);
    const Potential V = make_potential(dim == 1 ? PotentialKind::smooth1d : PotentialKind::checkerboard2d);
    const double eps = 1.0 / 8;
    const auto a = assemble_hamiltonian(grid, eps, V.eval);
    const Eigen::VectorXcd u = gen.complex_vector(grid.num_dofs());
    const Eigen::VectorXd e = energy_density(grid, u, eps, V.eval);
    const double form = u.dot(apply_real(a.matrix, u)).real();
    EXPECT_NEAR(cell_area(grid) * e.sum(), form, 1e-12 * form) << "dim " << dim;
    const Eigen::VectorXd e2 = energy_density(grid, 2.0 * u, eps, V.eval);
    EXPECT_LT((e2 - 4.0 * e).cwiseAbs().maxCoeff(), 1e-12 * e.cwiseAbs().maxCoeff());
    EXPECT_GE(e.minCoeff(), 0.0);
  }
}

TEST(Densities, EnergyRejectsWrongSize) {
  const auto grid = PeriodicGrid::build(1, 0.0, 1.0, 2, 2);
  EXPECT_THROW(energy_density(grid, Eigen::VectorXcd::Zero(3), 1.0, [](const Point&) { return 0.0; }),
               std::invalid_argument);
}

TEST(Errors, IdenticalAndScaledFields) {
  Gen gen(6);
  const auto grid = PeriodicGrid::build(2, 0.0, 1.0, 3, 3);
  const auto a = assemble_hamiltonian(grid, 0.1, make_potential(PotentialKind::checkerboard2d).eval);
  const NormOperators norms = make_norm_operators(grid, a);
  const Eigen::VectorXcd ref = gen.complex_vector(grid.num_dofs());
  const ErrorReport same = relative_errors(ref, ref, norms);
  EXPECT_EQ(same.l2, 0.0);
  EXPECT_EQ(same.h1, 0.0);
  EXPECT_EQ(same.a, 0.0);
  const ErrorReport scaled = relative_errors(1.01 * ref, ref, norms);
  EXPECT_NEAR(scaled.l2, 0.01, 1e-12);
  EXPECT_NEAR(scaled.h1, 0.01, 1e-12);
  EXPECT_NEAR(scaled.a, 0.01, 1e-12);
  const ErrorReport phase = relative_errors(std::complex<double>(0, 1) * ref, ref, norms);
  EXPECT_NEAR(phase.l2, std::sqrt(2.0), 1e-12);
}

TEST(Errors, NormsMatchDirectQuadraticForms) {
  Gen gen(7);
  const auto grid = PeriodicGrid::build(1, 0.0, 2.0, 4, 4);
  const auto a = assemble_hamiltonian(grid, 0.5, make_potential(PotentialKind::smooth1d).eval);
  const NormOperators norms = make_norm_operators(grid, a);
  const Eigen::VectorXcd ref = gen.complex_vector(grid.num_dofs());
  const Eigen::VectorXcd test = ref + 0.1 * gen.complex_vector(grid.num_dofs());
  const Eigen::VectorXcd d = test - ref;
  // Independent L² oracle: exact mass integral of |d|² for P1 elements on a ring.
  const double h = grid.fine_size(0);
  auto l2sq = [h](const Eigen::VectorXcd& v) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const auto p = v(k), q = v((k + 1) % v.size());
      s += h / 3.0 * (std::norm(p) + std::norm(q) + (std::conj(p) * q).real());
    }
    return s;
  };
  auto grad = [h](const Eigen::VectorXcd& v) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) s += std::norm(v((k + 1) % v.size()) - v(k)) / h;
    return s;
  };
  const ErrorReport r = relative_errors(test, ref, norms);
  EXPECT_NEAR(r.l2, std::sqrt(l2sq(d) / l2sq(ref)), 1e-12);
  EXPECT_NEAR(r.h1, std::sqrt((l2sq(d) + grad(d)) / (l2sq(ref) + grad(ref))), 1e-12);
}

TEST(Errors, RejectsZeroReferenceAndSizeMismatch) {
  const auto grid = PeriodicGrid::build(1, 0.0, 1.0, 2, 2);
  const auto a = assemble_hamiltonian(grid, 1.0, [](const Point&) { return 1.0; });
  const NormOperators norms = make_norm_operators(grid, a);
  const Eigen::VectorXcd z = Eigen::VectorXcd::Zero(grid.num_dofs());
  EXPECT_THROW(relative_errors(z, z, norms), std::domain_error);
  EXPECT_THROW(relative_errors(Eigen::VectorXcd::Zero(3), z, norms), std::invalid_argument);
  const auto other = PeriodicGrid::build(1, 0.0, 1.0, 2, 3);
  EXPECT_THROW(make_norm_operators(other, a), std::invalid_argument);
}

TEST(Orders, KnownRates) {
  auto o = convergence_order({{0.1, 4e-2}, {0.05, 1e-2}});
  ASSERT_EQ(o.size(), 1u);
  EXPECT_NEAR(o[0], 2.0, 1e-12);
  o = convergence_order({{0.1, 1.0}, {0.05, std::pow(2.0, -1.22)}, {0.025, std::pow(2.0, -1.22 - 2.14)}});
  ASSERT_EQ(o.size(), 2u);
  EXPECT_NEAR(o[0], 1.22, 1e-12);
  EXPECT_NEAR(o[1], 2.14, 1e-12);
  EXPECT_TRUE(convergence_order({{0.1, 1.0}}).empty());
}

TEST(Orders, RejectsNonDecreasingMeshOrZeroError) {
  EXPECT_THROW(convergence_order({{0.05, 1.0}, {0.1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(convergence_order({{0.1, 1.0}, {0.1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(convergence_order({{0.1, 0.0}, {0.05, 0.5}}), std::domain_error);
}

TEST(Inject, PicksCoincidingNodes) {
  const auto coarse = PeriodicGrid::build(2, 0.0, 1.0, 2, 2);
  const auto fine = PeriodicGrid::build(2, 0.0, 1.0, 2, 6);
  Eigen::VectorXcd u(fine.num_dofs());
  for (int p = 0; p < fine.num_dofs(); ++p) {
    const Point x = fine.dof_point(p);
    u(p) = std::complex<double>(x.x, x.y);
  }
  const Eigen::VectorXcd v = inject(fine, coarse, u);
  for (int p = 0; p < coarse.num_dofs(); ++p) {
    const Point x = coarse.dof_point(p);
    EXPECT_NEAR(std::abs(v(p) - std::complex<double>(x.x, x.y)), 0.0, 1e-14);
  }
  const auto odd = PeriodicGrid::build(2, 0.0, 1.0, 2, 5);
  EXPECT_THROW(inject(fine, odd, u), std::invalid_argument);
}

TEST(Csv, HeaderAndRowLayout) {
  std::ostringstream os;
  write_csv_header(os);
  ResultRow row;
  row.errors.meta = {"t4", 0.125, 0.0625, 1000.0, 0.05, 0.005, 3, 3, 0.03125};
  row.errors.l2 = 7.264e-3;
  row.errors.h1 = 1.455e-1;
  row.errors.a = 7.22e-2;
  row.order_l2 = 2.6434;
  row.wall_time = 30.812;
  write_csv_row(os, row);
  EXPECT_EQ(os.str(),
            "experiment_id,eps,delta,upsilon,H,h,m,l,dt,errL2,errH1,errA,orderL2,orderH1,wall_time\n"
            "t4,0.125,0.0625,1000,0.05,0.005,3,3,0.03125,7.2640000000e-03,1.4550000000e-01,7.2200000000e-02,"
            "2.6434,nan,30.812\n");
}
