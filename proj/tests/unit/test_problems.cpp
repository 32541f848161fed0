#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cemgms/problems.hpp"

using namespace cemgms;
using std::numbers::pi;

TEST(Potential, SmoothWellValue) {
  const Potential V = make_potential(PotentialKind::smooth1d);
  EXPECT_DOUBLE_EQ(V(Point{0.5, 0.0}), 0.125);
  EXPECT_DOUBLE_EQ(V(Point{1.0, 0.0}), 0.0);
}

TEST(Potential, TwoScaleValue) {
  PotentialParams p;
  p.delta1 = 0.25;
  p.delta2 = 0.1;
  const Potential V = make_potential(PotentialKind::twoscale1d, p);
  const double x = 0.7;
  EXPECT_NEAR(V(Point{x, 0.0}), std::sin(x * x / 0.25) * std::sin(pi * x / 0.1), 1e-15);
  EXPECT_DOUBLE_EQ(*V.delta(), 0.1);
}

TEST(Potential, CheckerboardQuadrants) {
  PotentialParams p;
  p.delta1 = 1.0 / 8.0;
  p.delta2 = 1.0 / 16.0;
  const Potential V = make_potential(PotentialKind::checkerboard2d, p);
  const double c2 = std::cos(3.2 * pi) + 1.0;
  EXPECT_NEAR(V(Point{0.1, 0.1}), c2 * c2, 1e-14);
  const double c1x = std::cos(2 * pi * 0.7 / p.delta1) + 1.0;
  const double c1y = std::cos(2 * pi * 0.2 / p.delta1) + 1.0;
  EXPECT_NEAR(V(Point{0.7, 0.2}), c1x * c1y, 1e-14);
  EXPECT_DOUBLE_EQ(*V.delta(), 1.0 / 16.0);
}

TEST(Potential, InclusionsTakeTwoValues) {
  PotentialParams p;
  p.contrast = 1e3;
  const Potential V = make_potential(PotentialKind::inclusions2d, p);
  std::set<double> values;
  for (int iy = 0; iy < 100; ++iy)
    for (int ix = 0; ix < 100; ++ix) values.insert(V(Point{(ix + 0.5) / 100.0, (iy + 0.5) / 100.0}));
  EXPECT_EQ(values, (std::set<double>{1e-3, 1.0}));
  EXPECT_DOUBLE_EQ(V.vmin, 1e-3);
  EXPECT_DOUBLE_EQ(V.vmax, 1.0);
}

TEST(Potential, InclusionLayoutIsPureFunctionOfSeed) {
  const CellMap a = make_inclusion_layout(20, 20, 0.25, 1e3, 42);
  const CellMap b = make_inclusion_layout(20, 20, 0.25, 1e3, 42);
  const CellMap c = make_inclusion_layout(20, 20, 0.25, 1e3, 43);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  // Contrast changes values but not the layout.
  const CellMap d = make_inclusion_layout(20, 20, 0.25, 1e4, 42);
  for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_EQ(a.values[k] < 1.0, d.values[k] < 1.0);
}

TEST(Potential, InclusionFractionNearProbability) {
  const CellMap m = make_inclusion_layout(100, 100, 0.25, 10.0, 7);
  int inclusions = 0;
  for (double v : m.values) inclusions += v < 1.0 ? 1 : 0;
  EXPECT_NEAR(inclusions / 1e4, 0.25, 0.02);
}

TEST(Potential, RejectsBadParameters) {
  PotentialParams p;
  p.delta1 = 0.0;
  EXPECT_THROW(make_potential(PotentialKind::checkerboard2d, p), std::invalid_argument);
  PotentialParams q;
  q.contrast = 1.0;
  EXPECT_THROW(make_potential(PotentialKind::inclusions2d, q), std::invalid_argument);
  EXPECT_THROW(parse_potential_kind("sombrero"), std::invalid_argument);
}

TEST(Potential, KindNamesRoundTrip) {
  for (auto k : {PotentialKind::smooth1d, PotentialKind::twoscale1d, PotentialKind::checkerboard2d,
                 PotentialKind::inclusions2d, PotentialKind::constant, PotentialKind::custom_from_file})
    EXPECT_EQ(parse_potential_kind(to_string(k)), k);
}

TEST(Potential, CellMapFromFile) {
  const std::string path = ::testing::TempDir() + "cells.txt";
  {
    std::ofstream out(path);
    out << "2 2\n1 2\n3 4\n";
  }
  PotentialParams p;
  p.cell_file = path;
  const Potential V = make_potential(PotentialKind::custom_from_file, p);
  EXPECT_DOUBLE_EQ(V(Point{0.25, 0.25}), 1.0);
  EXPECT_DOUBLE_EQ(V(Point{0.75, 0.25}), 2.0);
  EXPECT_DOUBLE_EQ(V(Point{0.25, 0.75}), 3.0);
  EXPECT_DOUBLE_EQ(V.vmax, 4.0);

  std::istringstream bad("2 2\n1 2 3\n");
  EXPECT_THROW(read_cell_map(bad), std::runtime_error);
}

TEST(Potential, AlignmentWarnings) {
  PotentialParams p;
  p.delta2 = 1.0 / 16.0;
  const Potential V = make_potential(PotentialKind::checkerboard2d, p);
  EXPECT_FALSE(alignment_warnings(V, PeriodicGrid::build(2, 0.0, 1.0, 10, 3)).empty());
  EXPECT_TRUE(alignment_warnings(V, PeriodicGrid::build(2, 0.0, 1.0, 16, 4)).empty());
}

TEST(InitialData, WkbAtCenter) {
  const double eps = 1.0 / 32.0;
  const InitialData u = make_initial_data(InitialKind::wkb1d, eps);
  const auto v = u(Point{1.0, 0.0});
  EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
  const double phase = -0.2 * std::log(2.0) / eps;
  EXPECT_NEAR(std::abs(v - std::polar(1.0, phase)), 0.0, 1e-13);
}

TEST(InitialData, WkbMatchesDirectFormula) {
  const double eps = 1.0 / 64.0;
  const InitialData u = make_initial_data(InitialKind::wkb1d, eps);
  for (double x : {0.0, 0.3, 0.9, 1.2, 2.0}) {
    const double r0 = std::pow(std::exp(-50 * (x - 1) * (x - 1)), 2);
    const double S0 = -0.2 * std::log(std::exp(5 * (x - 1)) + std::exp(-5 * (x - 1)));
    const auto expected = std::sqrt(r0) * std::exp(std::complex<double>(0.0, S0 / eps));
    EXPECT_NEAR(std::abs(u(Point{x, 0.0}) - expected), 0.0, 1e-12);
  }
}

TEST(InitialData, GaussianAtCenterIsReal) {
  const InitialData u = make_initial_data(InitialKind::gaussian2d, 1.0 / 8.0);
  const auto v = u(Point{0.5, 0.5});
  EXPECT_NEAR(v.real(), std::sqrt(10.0 / pi), 1e-15);
  EXPECT_EQ(v.imag(), 0.0);
}

TEST(InitialData, ModulusIndependentOfEpsilon) {
  for (auto kind : {InitialKind::wkb1d, InitialKind::gaussian2d}) {
    const InitialData a = make_initial_data(kind, 1.0 / 8.0);
    const InitialData b = make_initial_data(kind, 1.0 / 128.0);
    for (double x : {0.1, 0.45, 0.8})
      EXPECT_NEAR(std::abs(a(Point{x, 0.3})), std::abs(b(Point{x, 0.3})), 1e-14);
  }
}

TEST(InitialData, RejectsBadInput) {
  EXPECT_THROW(make_initial_data(InitialKind::wkb1d, 0.0), std::invalid_argument);
  EXPECT_THROW(make_initial_data(InitialKind::custom, 1.0), std::invalid_argument);
}
