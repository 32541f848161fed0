#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cemgms {

/// A point in the physical domain. In 1D only `x` is meaningful.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Construction parameters of a nested coarse/fine tensor grid.
struct GridSpec {
  int dim = 1;
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 1.0};
  std::array<int, 2> coarse{2, 1};
  std::array<int, 2> refine{1, 1};

  bool operator==(const GridSpec&) const = default;
};

/**
 * Nested periodic coarse/fine tensor mesh on a box in 1D or 2D.
 *
 * Fine nodes are identified periodically, so on every axis there are
 * `coarse * refine` distinct node coordinates. Degrees of freedom are
 * numbered x-fastest: dof = iy * nx + ix. Coarse elements and fine
 * elements follow the same ordering.
 */
class PeriodicGrid {
 public:
  PeriodicGrid() = default;

  static PeriodicGrid build(const GridSpec& spec) {
    if (spec.dim != 1 && spec.dim != 2) {
      throw std::invalid_argument("grid dimension must be 1 or 2");
    }
    std::int64_t total = 1;
    for (int a = 0; a < spec.dim; ++a) {
      if (spec.coarse[a] < 2) {
        throw std::invalid_argument("at least 2 coarse elements per axis are required");
      }
      if (spec.refine[a] < 1) {
        throw std::invalid_argument("refinement factor must be positive");
      }
      if (!(spec.upper[a] > spec.lower[a])) {
        throw std::invalid_argument("domain box must have positive extent");
      }
      total *= static_cast<std::int64_t>(spec.coarse[a]) * spec.refine[a];
      if (total > std::numeric_limits<int>::max() / 16) {
        throw std::invalid_argument("refinement overflows the dof index space");
      }
    }
    PeriodicGrid g;
    g.spec_ = spec;
    if (spec.dim == 1) {
      g.spec_.lower[1] = 0.0;
      g.spec_.upper[1] = 1.0;
      g.spec_.coarse[1] = 1;
      g.spec_.refine[1] = 1;
    }
    return g;
  }

  /// Convenience overload for the common uniform-per-axis case.
  static PeriodicGrid build(int dim, double lower, double upper, int coarse, int refine) {
    GridSpec s;
    s.dim = dim;
    s.lower = {lower, lower};
    s.upper = {upper, upper};
    s.coarse = {coarse, coarse};
    s.refine = {refine, refine};
    return build(s);
  }

  const GridSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }

  int coarse_count(int axis) const { return spec_.coarse[axis]; }
  int refinement(int axis) const { return spec_.refine[axis]; }
  int fine_count(int axis) const { return spec_.coarse[axis] * spec_.refine[axis]; }
  double side(int axis) const { return spec_.upper[axis] - spec_.lower[axis]; }
  double coarse_size(int axis) const { return side(axis) / spec_.coarse[axis]; }
  double fine_size(int axis) const { return side(axis) / fine_count(axis); }

  /// Largest coarse element side, H.
  double H() const {
    return dim() == 1 ? coarse_size(0) : std::max(coarse_size(0), coarse_size(1));
  }
  /// Largest fine element side, h.
  double h() const {
    return dim() == 1 ? fine_size(0) : std::max(fine_size(0), fine_size(1));
  }

  int num_coarse() const { return spec_.coarse[0] * spec_.coarse[1]; }
  int num_fine_elements() const { return fine_count(0) * fine_count(1); }
  int num_dofs() const { return fine_count(0) * fine_count(1); }

  /// Nodes per fine element (2 in 1D, 4 in 2D).
  int nodes_per_element() const { return dim() == 1 ? 2 : 4; }
  /// Nodes in one coarse element, (r+1)^d.
  int nodes_per_coarse_element() const {
    int n = spec_.refine[0] + 1;
    if (dim() == 2) n *= spec_.refine[1] + 1;
    return n;
  }

  static int wrap(int i, int n) {
    const int k = i % n;
    return k < 0 ? k + n : k;
  }

  /// Periodic dof index of the (possibly out-of-range) node (ix, iy).
  int dof(int ix, int iy = 0) const {
    return wrap(iy, fine_count(1)) * fine_count(0) + wrap(ix, fine_count(0));
  }

  /// Coordinates of an unwrapped node index.
  Point node(int ix, int iy = 0) const {
    return {spec_.lower[0] + ix * fine_size(0),
            dim() == 2 ? spec_.lower[1] + iy * fine_size(1) : 0.0};
  }

  Point dof_point(int dof) const { return node(dof % fine_count(0), dof / fine_count(0)); }

  std::array<int, 2> coarse_coords(int j) const {
    return {j % spec_.coarse[0], j / spec_.coarse[0]};
  }
  int coarse_index(int cx, int cy = 0) const {
    return wrap(cy, spec_.coarse[1]) * spec_.coarse[0] + wrap(cx, spec_.coarse[0]);
  }

  std::array<int, 2> fine_coords(int e) const { return {e % fine_count(0), e / fine_count(0)}; }

  /// Coarse element containing fine element e.
  int coarse_of_fine(int e) const {
    const auto [ex, ey] = fine_coords(e);
    return coarse_index(ex / spec_.refine[0], ey / spec_.refine[1]);
  }

  /// Lower-left corner of fine element e.
  Point fine_origin(int e) const {
    const auto [ex, ey] = fine_coords(e);
    return node(ex, ey);
  }

  /// Lower-left corner of coarse element j.
  Point coarse_origin(int j) const {
    const auto [cx, cy] = coarse_coords(j);
    return node(cx * spec_.refine[0], cy * spec_.refine[1]);
  }

  /// Dofs of fine element e in the local order (0,0),(1,0)[,(0,1),(1,1)].
  std::array<int, 4> element_dofs(int e) const {
    const auto [ex, ey] = fine_coords(e);
    if (dim() == 1) return {dof(ex), dof(ex + 1), -1, -1};
    return {dof(ex, ey), dof(ex + 1, ey), dof(ex, ey + 1), dof(ex + 1, ey + 1)};
  }

  /// Fine elements tiling coarse element j, x-fastest.
  std::vector<int> fine_elements_of(int j) const {
    const auto [cx, cy] = coarse_coords(j);
    const int rx = spec_.refine[0], ry = spec_.refine[1];
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(rx) * ry);
    for (int b = 0; b < ry; ++b)
      for (int a = 0; a < rx; ++a) out.push_back((cy * ry + b) * fine_count(0) + cx * rx + a);
    return out;
  }

  /// Nodes of coarse element j, (r+1)^d of them, x-fastest. This is the
  /// local numbering used by element-local operators.
  std::vector<int> coarse_element_dofs(int j) const {
    const auto [cx, cy] = coarse_coords(j);
    const int rx = spec_.refine[0], ry = spec_.refine[1];
    const int ny = dim() == 2 ? ry + 1 : 1;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(rx + 1) * ny);
    for (int b = 0; b < ny; ++b)
      for (int a = 0; a <= rx; ++a) out.push_back(dof(cx * rx + a, cy * ry + b));
    return out;
  }

  /// Position of fine element e's local nodes inside the coarse-element
  /// numbering of coarse_element_dofs(coarse_of_fine(e)).
  std::array<int, 4> element_local_in_coarse(int e) const {
    const auto [ex, ey] = fine_coords(e);
    const int rx = spec_.refine[0], ry = spec_.refine[1];
    const int a = ex % rx;
    if (dim() == 1) return {a, a + 1, -1, -1};
    const int b = ey % ry;
    const int w = rx + 1;
    return {b * w + a, b * w + a + 1, (b + 1) * w + a, (b + 1) * w + a + 1};
  }

 private:
  GridSpec spec_;
};

/**
 * Oversampled patch K_j^m: all coarse elements within Chebyshev distance m
 * of K_j on the periodic torus.
 *
 * Local dofs are the distinct fine nodes of the member elements, ordered
 * x-fastest in unwrapped patch coordinates. On an axis where 2m+1 reaches
 * the coarse count the patch wraps onto itself and that axis contributes
 * no boundary.
 */
struct Patch {
  GridSpec grid;
  int center = 0;
  int layers = 0;
  bool covers_domain = false;
  std::vector<int> elements;       ///< sorted coarse element indices
  std::vector<int> dofs;           ///< local -> global
  std::vector<int> boundary;       ///< local indices on the patch boundary
  std::vector<int> interior;       ///< local indices off the boundary
  std::vector<int> global_to_local;  ///< size n_f, -1 when outside

  int local_of(int global) const { return global_to_local[global]; }
  bool contains_dof(int global) const { return global_to_local[global] >= 0; }
  bool contains_element(int j) const {
    return std::binary_search(elements.begin(), elements.end(), j);
  }
};

inline Patch extract_patch(const PeriodicGrid& grid, int j, int m) {
  if (j < 0 || j >= grid.num_coarse()) throw std::out_of_range("coarse element index out of range");
  if (m < 0) throw std::invalid_argument("oversampling layers must be non-negative");

  Patch p;
  p.grid = grid.spec();
  p.center = j;
  p.layers = m;

  const auto c = grid.coarse_coords(j);
  // Per axis: list of unwrapped node indices and whether the ends are boundary.
  std::array<std::vector<int>, 2> nodes;
  std::array<bool, 2> full{true, true};
  std::array<std::vector<int>, 2> cells;
  for (int a = 0; a < 2; ++a) {
    if (a >= grid.dim()) {
      nodes[a] = {0};
      cells[a] = {0};
      continue;
    }
    const int nc = grid.coarse_count(a);
    const int r = grid.refinement(a);
    if (2 * m + 1 >= nc) {
      for (int k = 0; k < nc; ++k) cells[a].push_back(k);
      for (int k = 0; k < grid.fine_count(a); ++k) nodes[a].push_back(k);
    } else {
      full[a] = false;
      for (int k = c[a] - m; k <= c[a] + m; ++k) cells[a].push_back(k);
      for (int k = (c[a] - m) * r; k <= (c[a] + m + 1) * r; ++k) nodes[a].push_back(k);
    }
  }
  p.covers_domain = full[0] && (grid.dim() == 1 || full[1]);

  for (int cy : cells[1])
    for (int cx : cells[0]) p.elements.push_back(grid.coarse_index(cx, cy));
  std::sort(p.elements.begin(), p.elements.end());
  p.elements.erase(std::unique(p.elements.begin(), p.elements.end()), p.elements.end());

  p.global_to_local.assign(static_cast<std::size_t>(grid.num_dofs()), -1);
  for (std::size_t by = 0; by < nodes[1].size(); ++by) {
    for (std::size_t bx = 0; bx < nodes[0].size(); ++bx) {
      const int g = grid.dof(nodes[0][bx], nodes[1][by]);
      const int local = static_cast<int>(p.dofs.size());
      p.dofs.push_back(g);
      p.global_to_local[g] = local;
      const bool on_x = !full[0] && (bx == 0 || bx + 1 == nodes[0].size());
      const bool on_y = grid.dim() == 2 && !full[1] && (by == 0 || by + 1 == nodes[1].size());
      (on_x || on_y ? p.boundary : p.interior).push_back(local);
    }
  }
  return p;
}

/// Oversampling layers from the coarse size: (2/3) log2(side / H), rounded
/// to the nearest integer and at least 1.
inline int oversampling_layers(double side, double H) {
  const double m = (2.0 / 3.0) * std::log2(side / H);
  return std::max(1, static_cast<int>(std::lround(m)));
}

}  // namespace cemgms
