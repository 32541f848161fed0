#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cemgms/assembly.hpp"
#include "support/generators.hpp"

using namespace cemgms;
using cemgms::testing::Gen;

namespace {

double max_asymmetry(const SparseMatrix& A) {
  return Eigen::MatrixXd(A - SparseMatrix(A.transpose())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Stiffness, OneDimensionalHandAssembly) {
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 4, 1);
  const Eigen::MatrixXd K = Eigen::MatrixXd(assemble_stiffness(g, 1.0).matrix);
  // (½/h)[[1,-1],[-1,1]] per element with h = 1/4.
  for (int p = 0; p < 4; ++p) {
    EXPECT_NEAR(K(p, p), 4.0, 1e-14);
    EXPECT_NEAR(K(p, (p + 1) % 4), -2.0, 1e-14);
    EXPECT_NEAR(K(p, (p + 3) % 4), -2.0, 1e-14);
  }
  EXPECT_NEAR(K(0, 2), 0.0, 1e-14);
}

TEST(Stiffness, ConstantsInKernel) {
  for (int dim : {1, 2}) {
    const auto g = PeriodicGrid::build(dim, 0.0, 1.0, 5, 3);
    const SparseMatrix K = assemble_stiffness(g, 0.3).matrix;
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(g.num_dofs());
    EXPECT_LT((K * one).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Stiffness, EpsilonScaling) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 4, 2);
  const SparseMatrix a = assemble_stiffness(g, 0.5).matrix;
  const SparseMatrix b = assemble_stiffness(g, 0.25).matrix;
  EXPECT_LT(Eigen::MatrixXd(a - 4.0 * b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Stiffness, RejectsNonPositiveEpsilon) {
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 4, 2);
  EXPECT_THROW(assemble_stiffness(g, 0.0), std::invalid_argument);
}

TEST(PotentialMass, UnitPotentialIsMass) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 3, 3);
  const SparseMatrix V = assemble_potential_mass(g, [](const Point&) { return 1.0; }).matrix;
  const SparseMatrix M = assemble_l2_mass(g).matrix;
  EXPECT_LT(Eigen::MatrixXd(V - M).cwiseAbs().maxCoeff(), 1e-15);
  const SparseMatrix Z = assemble_potential_mass(g, [](const Point&) { return 0.0; }).matrix;
  EXPECT_EQ(Eigen::MatrixXd(Z).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PotentialMass, HarmonicWellIsSmallestAtTheCenter) {
  const auto g = PeriodicGrid::build(1, 0.0, 2.0, 8, 4);
  const SparseMatrix V = assemble_potential_mass(g, [](const Point& x) { return 0.5 * (x.x - 1.0) * (x.x - 1.0); }).matrix;
  const int center = g.num_dofs() / 2;
  EXPECT_LT(V.coeff(center, center), V.coeff(1, 1));
}

TEST(PotentialMass, PiecewiseConstantIsIntegratedExactly) {
  // Oracle: V constant c_e on each fine element gives c_e * h/6 [[2,1],[1,2]].
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 4, 3);
  const double h = g.h();
  auto value = [&](double x) { return 1.0 + static_cast<int>(std::floor(x / h)) % 3; };
  const SparseMatrix V = assemble_potential_mass(g, [&](const Point& x) { return value(x.x); }).matrix;
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(g.num_dofs(), g.num_dofs());
  for (int e = 0; e < g.num_fine_elements(); ++e) {
    const double c = value((e + 0.5) * h);
    const int p = e, q = (e + 1) % g.num_dofs();
    oracle(p, p) += c * h / 3.0;
    oracle(q, q) += c * h / 3.0;
    oracle(p, q) += c * h / 6.0;
    oracle(q, p) += c * h / 6.0;
  }
  EXPECT_LT((Eigen::MatrixXd(V) - oracle).cwiseAbs().maxCoeff(), 1e-13 * oracle.cwiseAbs().maxCoeff());
}

TEST(PotentialMass, RejectsNonFiniteValues) {
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 4, 2);
  EXPECT_THROW(assemble_potential_mass(g, [](const Point& x) { return x.x > 0.5 ? std::nan("") : 1.0; }),
               std::domain_error);
}

TEST(WeightedMass, ConstantModeFactor) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 10, 2);
  const SparseMatrix S = assemble_weighted_mass(g, WeightFunction::constant(1.0 / 8.0)).matrix;
  const SparseMatrix M = assemble_l2_mass(g).matrix;
  EXPECT_LT(Eigen::MatrixXd(S - 18.75 * M).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeightedMass, ExactModeOneDimensional) {
  const double eps = 0.3;
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 4, 3);
  const WeightFunction w = WeightFunction::exact_lagrange(eps);
  const double H = g.H();
  EXPECT_NEAR(w(g, Point{0.1, 0.0}, 0), 0.5 * eps * eps * 2.0 / (H * H), 1e-14);
  EXPECT_NEAR(w(g, Point{0.7, 0.0}, 2), 0.5 * eps * eps * 2.0 / (H * H), 1e-14);
}

TEST(WeightedMass, ExactModeTwoDimensional) {
  // Q1 hats η_k on [0,H]²: Σ|∇η_k|² = (2/H²)[(1-t)²+t²] + (2/H²)[(1-s)²+s²].
  const double eps = 0.5;
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 4, 2);
  const WeightFunction w = WeightFunction::exact_lagrange(eps);
  const double H = g.H();
  const double s = 0.3, t = 0.8;
  const Point o = g.coarse_origin(5);
  const double expected =
      0.5 * eps * eps * (2.0 / (H * H)) * ((1 - t) * (1 - t) + t * t + (1 - s) * (1 - s) + s * s);
  EXPECT_NEAR(w(g, Point{o.x + s * H, o.y + t * H}, 5), expected, 1e-13);
}

TEST(WeightedMass, ModeDoesNotChangeSparsity) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 4, 3);
  const SparseMatrix a = assemble_weighted_mass(g, WeightFunction::constant(0.2)).matrix;
  const SparseMatrix b = assemble_weighted_mass(g, WeightFunction::exact_lagrange(0.2)).matrix;
  ASSERT_EQ(a.nonZeros(), b.nonZeros());
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    SparseMatrix::InnerIterator ia(a, k), ib(b, k);
    for (; ia && ib; ++ia, ++ib) EXPECT_EQ(ia.row(), ib.row());
  }
}

TEST(Operators, AllSymmetricAndDefinite) {
  Gen gen(11);
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 4, 3);
  auto V = [](const Point& x) { return 0.5 + x.x * x.y; };
  const AssembledOperator ops[] = {assemble_stiffness(g, 0.2), assemble_l2_mass(g),
                                   assemble_weighted_mass(g, WeightFunction::constant(0.2)),
                                   assemble_potential_mass(g, V), assemble_hamiltonian(g, 0.2, V)};
  for (const auto& op : ops) EXPECT_EQ(max_asymmetry(op.matrix), 0.0);

  const SparseMatrix A = assemble_hamiltonian(g, 0.2, V).matrix;
  const SparseMatrix M = assemble_l2_mass(g).matrix;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd v = gen.vector(g.num_dofs());
    EXPECT_GE(v.dot(A * v), 0.5 * v.dot(M * v) * (1.0 - 1e-12));
    EXPECT_GT(v.dot(M * v), 0.0);
  }
}

TEST(Operators, HamiltonianIsStiffnessPlusPotential) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 3, 4);
  auto V = [](const Point& x) { return std::cos(3 * x.x) + 2.0; };
  const auto A = assemble_hamiltonian(g, 0.1, V);
  const auto sum = combine(assemble_stiffness(g, 0.1), assemble_potential_mass(g, V));
  EXPECT_LT(Eigen::MatrixXd(A.matrix - sum.matrix).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((assemble_on_coarse_element(g, A, 4) - assemble_on_coarse_element(g, sum, 4)).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(ElementLocal, SumsToGlobalOperator) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 3, 3);
  const auto A = assemble_hamiltonian(g, 0.4, [](const Point& x) { return 1.0 + x.y; });
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(g.num_dofs(), g.num_dofs());
  for (int j = 0; j < g.num_coarse(); ++j) {
    const Eigen::MatrixXd Aj = assemble_on_coarse_element(g, A, j);
    const auto dofs = g.coarse_element_dofs(j);
    for (std::size_t a = 0; a < dofs.size(); ++a)
      for (std::size_t b = 0; b < dofs.size(); ++b) sum(dofs[a], dofs[b]) += Aj(a, b);
  }
  EXPECT_LT((sum - Eigen::MatrixXd(A.matrix)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Restrict, ZeroLayerInteriorCount) {
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 6, 4);
  const auto A = assemble_stiffness(g, 1.0);
  const auto R = restrict(A, extract_patch(g, 2, 0), BoundaryCondition::zero_trace);
  EXPECT_EQ(R.size(), 3);
  EXPECT_EQ(max_asymmetry(R.matrix), 0.0);
  EXPECT_FALSE(R.is_global());
}

TEST(Restrict, FullCoverWithoutBoundaryIsAPermutation) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 3, 2);
  const auto A = assemble_hamiltonian(g, 0.3, [](const Point& x) { return 1.0 + x.x; });
  const auto R = restrict(A, extract_patch(g, 4, 1), BoundaryCondition::none);
  ASSERT_EQ(R.size(), g.num_dofs());
  for (int a = 0; a < R.size(); ++a)
    for (int b = 0; b < R.size(); ++b) EXPECT_EQ(R.matrix.coeff(a, b), A.matrix.coeff(R.dofs[a], R.dofs[b]));
}

TEST(Restrict, RejectsForeignPatch) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 3, 2);
  const auto other = PeriodicGrid::build(2, 0.0, 1.0, 4, 2);
  const auto A = assemble_l2_mass(g);
  EXPECT_THROW(restrict(A, extract_patch(other, 0, 0), BoundaryCondition::none), std::invalid_argument);
}

TEST(Debug, CoordinateDumpListsEveryEntry) {
  const auto g = PeriodicGrid::build(1, 0.0, 1.0, 2, 2);
  std::ostringstream os;
  write_coo(os, assemble_l2_mass(g));
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  int lines = 0;
  for (std::string l; std::getline(is, l);) ++lines;
  EXPECT_EQ(lines, 12);
}

TEST(Resolution, WarnsWhenUnderResolved) {
  const auto g = PeriodicGrid::build(2, 0.0, 1.0, 10, 2);
  EXPECT_TRUE(resolution_warning(g, 1.0 / 8.0, 1.0 / 16.0).has_value());
  const auto fine = PeriodicGrid::build(2, 0.0, 1.0, 10, 20);
  EXPECT_FALSE(resolution_warning(fine, 1.0 / 8.0, 1.0 / 16.0).has_value());
}
