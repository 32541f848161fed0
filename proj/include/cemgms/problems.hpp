#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemgms/grid.hpp"

namespace cemgms {

enum class PotentialKind { smooth1d, twoscale1d, checkerboard2d, inclusions2d, constant, custom_from_file };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::smooth1d: return "smooth1d";
    case PotentialKind::twoscale1d: return "twoscale1d";
    case PotentialKind::checkerboard2d: return "checkerboard2d";
    case PotentialKind::inclusions2d: return "inclusions2d";
    case PotentialKind::constant: return "constant";
    case PotentialKind::custom_from_file: return "custom";
  }
  return "unknown";
}

inline PotentialKind parse_potential_kind(const std::string& s) {
  for (auto k : {PotentialKind::smooth1d, PotentialKind::twoscale1d, PotentialKind::checkerboard2d,
                 PotentialKind::inclusions2d, PotentialKind::constant, PotentialKind::custom_from_file}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown potential kind: " + s);
}

/// Piecewise-constant values on a uniform nx-by-ny cell lattice over a box,
/// stored row-major with y as the slow index.
struct CellMap {
  int nx = 1;
  int ny = 1;
  std::vector<double> values;

  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * nx + ix]; }
};

/// Parses "nx ny" followed by nx*ny values (row-major, y slow).
inline CellMap read_cell_map(std::istream& is) {
  CellMap m;
  if (!(is >> m.nx >> m.ny) || m.nx < 1 || m.ny < 1) throw std::runtime_error("cell map: bad header");
  m.values.resize(static_cast<std::size_t>(m.nx) * m.ny);
  for (double& v : m.values)
    if (!(is >> v)) throw std::runtime_error("cell map: expected " + std::to_string(m.values.size()) + " values");
  return m;
}

inline CellMap read_cell_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cell map " + path);
  return read_cell_map(in);
}

/// Seeded Bernoulli layout: each cell is an inclusion (value 1/contrast)
/// with the given probability, otherwise 1. The draw uses the raw
/// mt19937_64 stream so the layout is identical on every platform.
inline CellMap make_inclusion_layout(int nx, int ny, double probability, double contrast, std::uint64_t seed) {
  CellMap m;
  m.nx = nx;
  m.ny = ny;
  m.values.resize(static_cast<std::size_t>(nx) * ny);
  std::mt19937_64 rng(seed);
  for (double& v : m.values) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = u < probability ? 1.0 / contrast : 1.0;
  }
  return m;
}

struct PotentialParams {
  double delta1 = 1.0 / 8.0;
  double delta2 = 1.0 / 16.0;
  double contrast = 1e3;
  std::uint64_t seed = 20240601;
  int lattice_nx = 20;
  int lattice_ny = 20;
  double inclusion_probability = 0.25;
  double constant = 1.0;
  std::string cell_file;
  /// Domain box for lattice-based kinds.
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 1.0};
};

/**
 * A potential V(x) with metadata. Evaluation is pure and reentrant.
 */
struct Potential {
  PotentialKind kind = PotentialKind::constant;
  PotentialParams params;
  double vmin = 0.0;
  double vmax = 0.0;
  std::function<double(const Point&)> eval;
  std::shared_ptr<const CellMap> cells;

  double operator()(const Point& x) const { return eval(x); }

  /// Single length scale for reporting: min(δ₁, δ₂) where it applies.
  std::optional<double> delta() const {
    switch (kind) {
      case PotentialKind::twoscale1d:
      case PotentialKind::checkerboard2d: return std::min(params.delta1, params.delta2);
      default: return std::nullopt;
    }
  }
};

namespace detail {

inline std::function<double(const Point&)> cell_evaluator(std::shared_ptr<const CellMap> cells,
                                                          const PotentialParams& p) {
  const double x0 = p.lower[0], y0 = p.lower[1];
  const double wx = (p.upper[0] - p.lower[0]) / cells->nx;
  const double wy = (p.upper[1] - p.lower[1]) / cells->ny;
  return [cells, x0, y0, wx, wy](const Point& x) {
    const int ix = std::clamp(static_cast<int>(std::floor((x.x - x0) / wx)), 0, cells->nx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((x.y - y0) / wy)), 0, cells->ny - 1);
    return cells->at(ix, iy);
  };
}

}  // namespace detail

inline Potential make_potential(PotentialKind kind, const PotentialParams& params = {}) {
  Potential V;
  V.kind = kind;
  V.params = params;
  using std::numbers::pi;
  switch (kind) {
    case PotentialKind::smooth1d:
      V.eval = [](const Point& x) { return 0.5 * (x.x - 1.0) * (x.x - 1.0); };
      V.vmin = 0.0;
      V.vmax = 0.5;
      break;
    case PotentialKind::twoscale1d: {
      if (!(params.delta1 > 0.0) || !(params.delta2 > 0.0)) throw std::invalid_argument("delta must be positive");
      const double d1 = params.delta1, d2 = params.delta2;
      V.eval = [d1, d2](const Point& x) { return std::sin(x.x * x.x / d1) * std::sin(pi * x.x / d2); };
      V.vmin = -1.0;
      V.vmax = 1.0;
      break;
    }
    case PotentialKind::checkerboard2d: {
      if (!(params.delta1 > 0.0) || !(params.delta2 > 0.0)) throw std::invalid_argument("delta must be positive");
      const double d1 = params.delta1, d2 = params.delta2;
      V.eval = [d1, d2](const Point& x) {
        const bool diagonal = (x.x <= 0.5 && x.y <= 0.5) || (x.x >= 0.5 && x.y >= 0.5);
        const double d = diagonal ? d2 : d1;
        return (std::cos(2.0 * pi * x.x / d) + 1.0) * (std::cos(2.0 * pi * x.y / d) + 1.0);
      };
      V.vmin = 0.0;
      V.vmax = 4.0;
      break;
    }
    case PotentialKind::inclusions2d: {
      if (!(params.contrast > 1.0)) throw std::invalid_argument("contrast must exceed 1");
      if (params.lattice_nx < 1 || params.lattice_ny < 1) throw std::invalid_argument("lattice must be non-empty");
      V.cells = std::make_shared<const CellMap>(make_inclusion_layout(
          params.lattice_nx, params.lattice_ny, params.inclusion_probability, params.contrast, params.seed));
      V.eval = detail::cell_evaluator(V.cells, params);
      V.vmin = 1.0 / params.contrast;
      V.vmax = 1.0;
      break;
    }
    case PotentialKind::constant: {
      const double c = params.constant;
      V.eval = [c](const Point&) { return c; };
      V.vmin = V.vmax = c;
      break;
    }
    case PotentialKind::custom_from_file: {
      V.cells = std::make_shared<const CellMap>(read_cell_map_file(params.cell_file));
      V.eval = detail::cell_evaluator(V.cells, params);
      const auto [lo, hi] = std::minmax_element(V.cells->values.begin(), V.cells->values.end());
      V.vmin = *lo;
      V.vmax = *hi;
      break;
    }
  }
  return V;
}

/// Warnings when potential discontinuities or periods fall off fine-element
/// boundaries of `grid`.
inline std::vector<std::string> alignment_warnings(const Potential& V, const PeriodicGrid& grid) {
  std::vector<std::string> out;
  auto multiple_of = [](double len, double h) {
    const double k = len / h;
    return std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, k);
  };
  if (V.kind == PotentialKind::checkerboard2d || V.kind == PotentialKind::twoscale1d) {
    if (!multiple_of(V.params.delta2, grid.fine_size(0))) {
      std::ostringstream msg;
      msg << "delta2=" << V.params.delta2 << " is not an integer multiple of h=" << grid.fine_size(0);
      out.push_back(msg.str());
    }
  }
  if (V.cells) {
    for (int a = 0; a < grid.dim(); ++a) {
      const int n = a == 0 ? V.cells->nx : V.cells->ny;
      const double w = (V.params.upper[a] - V.params.lower[a]) / n;
      if (!multiple_of(w, grid.fine_size(a))) {
        std::ostringstream msg;
        msg << "cell width " << w << " is not aligned with h=" << grid.fine_size(a) << " on axis " << a;
        out.push_back(msg.str());
      }
    }
  }
  return out;
}

enum class InitialKind { wkb1d, gaussian2d, custom };

struct InitialData {
  InitialKind kind = InitialKind::custom;
  double epsilon = 1.0;
  std::function<std::complex<double>(const Point&)> eval;

  std::complex<double> operator()(const Point& x) const { return eval(x); }
};

/**
 * wkb1d:      u₀ = √r₀ exp(i S₀/ε),  r₀ = exp(-50(x-1)²)²,
 *             S₀ = -0.2 log(e^{5(x-1)} + e^{-5(x-1)})
 * gaussian2d: u₀ = √(10/π) exp(-5|x-c|²) exp(-i|x-c|²/ε),  c = (½,½)
 */
inline InitialData make_initial_data(InitialKind kind, double eps,
                                     std::function<std::complex<double>(const Point&)> custom = {}) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  InitialData u;
  u.kind = kind;
  u.epsilon = eps;
  using namespace std::complex_literals;
  switch (kind) {
    case InitialKind::wkb1d:
      u.eval = [eps](const Point& p) {
        const double z = p.x - 1.0;
        const double amplitude = std::exp(-50.0 * z * z);
        // log(e^{5z} + e^{-5z}) written to stay finite for large |z|.
        const double a = 5.0 * std::abs(z);
        const double S0 = -0.2 * (a + std::log1p(std::exp(-2.0 * a)));
        return amplitude * std::exp(1i * (S0 / eps));
      };
      break;
    case InitialKind::gaussian2d:
      u.eval = [eps](const Point& p) {
        const double r2 = (p.x - 0.5) * (p.x - 0.5) + (p.y - 0.5) * (p.y - 0.5);
        return std::sqrt(10.0 / std::numbers::pi) * std::exp(-5.0 * r2) * std::exp(-1i * (r2 / eps));
      };
      break;
    case InitialKind::custom:
      if (!custom) throw std::invalid_argument("custom initial data needs an evaluator");
      u.eval = std::move(custom);
      break;
  }
  return u;
}

}  // namespace cemgms
