#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemgms/analysis.hpp"
#include "cemgms/assembly.hpp"
#include "cemgms/auxspace.hpp"
#include "cemgms/cembasis.hpp"
#include "cemgms/evolve.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/problems.hpp"

namespace cemgms {

enum class ReferencePolicy { same_grid, refined };

/// A stage of run_experiment failed; the message names the stage and the run.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * One fully specified run. `upper` and `layers` may be left unset and are
 * resolved from the dimension and from H respectively.
 */
struct ExperimentConfig {
  std::string id = "run";

  PotentialKind potential = PotentialKind::checkerboard2d;
  PotentialParams params;
  double epsilon = 1.0 / 8.0;

  int dim = 2;
  double lower = 0.0;
  std::optional<double> upper;
  int coarse = 10;
  int refine = 20;
  int per_element = 3;
  std::optional<int> layers;
  int quad_points = 2;
  WeightMode weight = WeightMode::constant;
  PatchSolver solver = PatchSolver::automatic;

  double final_time = 1.0;
  double dt = 1.0 / 32.0;

  ReferencePolicy reference = ReferencePolicy::same_grid;
  int reference_factor = 4;

  std::string csv;
  int dump_every = 0;
  std::string dump_dir;

  double domain_upper() const { return upper.value_or(dim == 1 ? 2.0 : 1.0); }
  double side() const { return domain_upper() - lower; }
  double H() const { return side() / coarse; }
  int resolved_layers() const { return layers.value_or(oversampling_layers(side(), H())); }

  GridSpec grid_spec() const {
    GridSpec s;
    s.dim = dim;
    s.lower = {lower, lower};
    s.upper = {domain_upper(), domain_upper()};
    s.coarse = {coarse, coarse};
    s.refine = {refine, refine};
    return PeriodicGrid::build(s).spec();
  }

  PotentialParams resolved_params() const {
    PotentialParams p = params;
    p.lower = {lower, lower};
    p.upper = {domain_upper(), domain_upper()};
    return p;
  }

  EvolutionConfig evolution() const { return EvolutionConfig::make(final_time, dt); }
};

inline std::string to_string(ReferencePolicy p) { return p == ReferencePolicy::same_grid ? "same_grid" : "refined"; }
inline std::string to_string(WeightMode w) { return w == WeightMode::constant ? "constant" : "exact"; }
inline std::string to_string(PatchSolver s) {
  switch (s) {
    case PatchSolver::automatic: return "auto";
    case PatchSolver::woodbury: return "woodbury";
    case PatchSolver::assembled: return "assembled";
  }
  return "auto";
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Accepts plain numbers and simple fractions such as "1/32".
inline double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  std::size_t used = 0;
  try {
    if (slash == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } else {
      const std::string num = trim(text.substr(0, slash));
      const std::string den = trim(text.substr(slash + 1));
      std::size_t u1 = 0, u2 = 0;
      const double a = std::stod(num, &u1);
      const double b = std::stod(den, &u2);
      if (u1 == num.size() && u2 == den.size() && b != 0.0) return a / b;
    }
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("not a number: '" + text + "'");
}

inline int parse_int(const std::string& text) {
  std::size_t used = 0;
  try {
    const long v = std::stol(text, &used);
    if (used == text.size() && v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max())
      return static_cast<int>(v);
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("not an integer: '" + text + "'");
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/// Sets `section.key` on the config. Throws on unknown keys or bad values.
inline void apply_setting(ExperimentConfig& c, const std::string& section, const std::string& key,
                          const std::string& value) {
  using detail::parse_int;
  using detail::parse_number;
  const std::string k = section + "." + key;
  if (k == "experiment.id") {
    c.id = value;
  } else if (k == "problem.kind") {
    c.potential = parse_potential_kind(value);
  } else if (k == "problem.eps") {
    c.epsilon = parse_number(value);
  } else if (k == "problem.delta1") {
    c.params.delta1 = parse_number(value);
  } else if (k == "problem.delta2") {
    c.params.delta2 = parse_number(value);
  } else if (k == "problem.contrast") {
    c.params.contrast = parse_number(value);
  } else if (k == "problem.seed") {
    c.params.seed = std::stoull(value);
  } else if (k == "problem.lattice") {
    c.params.lattice_nx = c.params.lattice_ny = parse_int(value);
  } else if (k == "problem.inclusion_probability") {
    c.params.inclusion_probability = parse_number(value);
  } else if (k == "problem.constant") {
    c.params.constant = parse_number(value);
  } else if (k == "problem.cell_file") {
    c.params.cell_file = value;
  } else if (k == "discretization.dim") {
    c.dim = parse_int(value);
  } else if (k == "discretization.lower") {
    c.lower = parse_number(value);
  } else if (k == "discretization.upper") {
    c.upper = parse_number(value);
  } else if (k == "discretization.coarse") {
    c.coarse = parse_int(value);
  } else if (k == "discretization.refine") {
    c.refine = parse_int(value);
  } else if (k == "discretization.l") {
    c.per_element = parse_int(value);
  } else if (k == "discretization.m") {
    if (value == "auto")
      c.layers.reset();
    else
      c.layers = parse_int(value);
  } else if (k == "discretization.quad") {
    c.quad_points = parse_int(value);
  } else if (k == "discretization.weight") {
    if (value == "constant")
      c.weight = WeightMode::constant;
    else if (value == "exact")
      c.weight = WeightMode::exact_lagrange;
    else
      throw std::invalid_argument("weight must be constant or exact");
  } else if (k == "discretization.solver") {
    if (value == "auto")
      c.solver = PatchSolver::automatic;
    else if (value == "woodbury")
      c.solver = PatchSolver::woodbury;
    else if (value == "assembled")
      c.solver = PatchSolver::assembled;
    else
      throw std::invalid_argument("solver must be auto, woodbury or assembled");
  } else if (k == "time.T") {
    c.final_time = parse_number(value);
  } else if (k == "time.dt") {
    c.dt = parse_number(value);
  } else if (k == "reference.policy") {
    if (value == "same_grid")
      c.reference = ReferencePolicy::same_grid;
    else if (value == "refined")
      c.reference = ReferencePolicy::refined;
    else
      throw std::invalid_argument("reference policy must be same_grid or refined");
  } else if (k == "reference.refine_factor") {
    c.reference_factor = parse_int(value);
  } else if (k == "output.csv") {
    c.csv = value;
  } else if (k == "output.dump_every") {
    c.dump_every = parse_int(value);
  } else if (k == "output.dump_dir") {
    c.dump_dir = value;
  } else {
    throw std::invalid_argument("unknown setting " + k);
  }
}

/// Checks ranges that the parser alone cannot.
inline void validate(const ExperimentConfig& c) {
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("eps must be positive");
  if (c.dim != 1 && c.dim != 2) throw std::invalid_argument("dim must be 1 or 2");
  if (c.coarse < 2 || c.refine < 1) throw std::invalid_argument("need coarse >= 2 and refine >= 1");
  if (c.per_element < 1) throw std::invalid_argument("l must be at least 1");
  if (c.layers && *c.layers < 0) throw std::invalid_argument("m must be non-negative");
  if (!(c.final_time > 0.0) || !(c.dt > 0.0)) throw std::invalid_argument("T and dt must be positive");
  if (c.reference_factor < 1) throw std::invalid_argument("refine_factor must be positive");
  if (!(c.side() > 0.0)) throw std::invalid_argument("domain must have positive extent");
  const bool two_d = c.potential == PotentialKind::checkerboard2d || c.potential == PotentialKind::inclusions2d;
  const bool one_d = c.potential == PotentialKind::smooth1d || c.potential == PotentialKind::twoscale1d;
  if ((two_d && c.dim != 2) || (one_d && c.dim != 1))
    throw std::invalid_argument(to_string(c.potential) + " does not match dim=" + std::to_string(c.dim));
}

/**
 * Flat key=value text with [section] headers; '#' starts a comment.
 * Settings override the fields of `base`.
 */
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {}) {
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
    try {
      apply_setting(base, section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate(base);
  return base;
}

inline ExperimentConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_config(in);
}

/// The resolved config in the same format parse_config reads.
inline std::string to_text(const ExperimentConfig& c) {
  using detail::format_number;
  std::ostringstream os;
  os << "[experiment]\nid = " << c.id << "\n";
  os << "[problem]\nkind = " << to_string(c.potential) << "\neps = " << format_number(c.epsilon)
     << "\ndelta1 = " << format_number(c.params.delta1) << "\ndelta2 = " << format_number(c.params.delta2)
     << "\ncontrast = " << format_number(c.params.contrast) << "\nseed = " << c.params.seed
     << "\nlattice = " << c.params.lattice_nx
     << "\ninclusion_probability = " << format_number(c.params.inclusion_probability)
     << "\nconstant = " << format_number(c.params.constant) << "\n";
  if (!c.params.cell_file.empty()) os << "cell_file = " << c.params.cell_file << "\n";
  os << "[discretization]\ndim = " << c.dim << "\nlower = " << format_number(c.lower)
     << "\nupper = " << format_number(c.domain_upper()) << "\ncoarse = " << c.coarse << "\nrefine = " << c.refine
     << "\nl = " << c.per_element << "\nm = " << c.resolved_layers() << "\nquad = " << c.quad_points
     << "\nweight = " << to_string(c.weight) << "\nsolver = " << to_string(c.solver) << "\n";
  const EvolutionConfig ev = c.evolution();
  os << "[time]\nT = " << format_number(c.final_time) << "\ndt = " << format_number(ev.dt) << "\n";
  os << "[reference]\npolicy = " << to_string(c.reference) << "\nrefine_factor = " << c.reference_factor << "\n";
  os << "[output]\n";
  if (!c.csv.empty()) os << "csv = " << c.csv << "\n";
  os << "dump_every = " << c.dump_every << "\n";
  if (!c.dump_dir.empty()) os << "dump_dir = " << c.dump_dir << "\n";
  return os.str();
}

/// One-paragraph plan for --dry-run: every resolved quantity, nothing solved.
inline std::string describe_plan(const ExperimentConfig& c) {
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  const EvolutionConfig ev = c.evolution();
  std::ostringstream os;
  os << c.id << ": " << to_string(c.potential) << " eps=" << c.epsilon << " H=" << grid.H() << " h=" << grid.h()
     << " m=" << c.resolved_layers() << " l=" << c.per_element << " n_f=" << grid.num_dofs()
     << " n_b=" << grid.num_coarse() * c.per_element << " T=" << c.final_time << " dt=" << ev.dt
     << " steps=" << ev.steps << " reference=" << to_string(c.reference);
  if (c.reference == ReferencePolicy::refined)
    os << " (fine x" << c.reference_factor << ", dt/" << c.reference_factor << ")";
  return os.str();
}

inline InitialData initial_data_for(const ExperimentConfig& c) {
  return make_initial_data(c.dim == 1 ? InitialKind::wkb1d : InitialKind::gaussian2d, c.epsilon);
}

/**
 * Reference solutions at T keyed by everything they depend on, so sweep
 * cells sharing a fine grid and time step reuse one CN-FEM run.
 */
class ReferenceCache {
 public:
  static std::string key(const ExperimentConfig& c) {
    ExperimentConfig k = c;
    k.id.clear();
    k.coarse *= k.refine;
    k.refine = 1;
    k.per_element = 0;
    k.layers = 0;
    k.weight = WeightMode::constant;
    k.solver = PatchSolver::automatic;
    k.csv.clear();
    k.dump_every = 0;
    k.dump_dir.clear();
    return to_text(k);
  }

  const Eigen::VectorXcd* find(const ExperimentConfig& c) const {
    const auto it = entries_.find(key(c));
    return it == entries_.end() ? nullptr : &it->second;
  }
  void store(const ExperimentConfig& c, Eigen::VectorXcd u) { entries_[key(c)] = std::move(u); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Eigen::VectorXcd> entries_;
};

/// CN-FEM reference at T, sampled on the fine grid of `c`.
inline Eigen::VectorXcd compute_reference(const ExperimentConfig& c) {
  ExperimentConfig rc = c;
  if (c.reference == ReferencePolicy::refined) {
    rc.refine = c.refine * c.reference_factor;
    rc.dt = c.evolution().dt / c.reference_factor;
  }
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  const PeriodicGrid rgrid = PeriodicGrid::build(rc.grid_spec());
  const Potential V = make_potential(c.potential, c.resolved_params());
  const auto a_op = assemble_hamiltonian(rgrid, c.epsilon, V.eval, c.quad_points);
  const auto m_op = assemble_l2_mass(rgrid);
  const Eigen::VectorXcd u0 = interpolate(rgrid, initial_data_for(c));
  EvolutionConfig ev = EvolutionConfig::make(c.final_time, rc.dt, FieldSpace::fine);
  const Trajectory traj = run_cn_fine(ev, m_op, a_op, u0, c.epsilon);
  const Eigen::VectorXcd& uT = traj.final().values;
  return c.reference == ReferencePolicy::refined ? inject(rgrid, grid, uT) : uT;
}

struct ExperimentResult {
  ExperimentConfig config;
  ResultRow row;
  double lambda = 0.0;
  Eigen::Index basis_size = 0;
  bool compressed = false;
  double mass_drift = 0.0;    ///< max relative change of ‖u‖_M over the CN-CEM run
  double energy_drift = 0.0;  ///< same for uᴴ A u
  int steps = 0;
  std::vector<std::string> warnings;
};

/// Emitted between stages; silent by default.
using ProgressLog = std::function<void(const std::string&)>;

namespace detail {

template <class Fn>
auto stage(const std::string& name, const ExperimentConfig& c, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(name + " failed for " + describe_plan(c) + ": " + e.what());
  }
}

inline void dump_snapshots(const ExperimentConfig& c, const PeriodicGrid& grid, const Trajectory& traj,
                           const std::string& tag) {
  std::filesystem::create_directories(c.dump_dir);
  for (const auto& w : traj.snapshots) {
    const int step = static_cast<int>(std::lround(w.time / c.evolution().dt));
    std::ofstream out(std::filesystem::path(c.dump_dir) / (c.id + "_" + tag + "_" + std::to_string(step) + ".txt"));
    if (!out) throw std::runtime_error("cannot write field dump in " + c.dump_dir);
    write_field(out, grid, w);
  }
}

}  // namespace detail

/**
 * grid -> operators -> auxiliary space -> multiscale space -> CN-CEM ->
 * reference -> errors. wall_time covers the multiscale part only.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& config, ReferenceCache* cache = nullptr,
                                       const ProgressLog& log = {}) {
  using clock = std::chrono::steady_clock;
  validate(config);
  ExperimentResult res;
  res.config = config;
  const ExperimentConfig& c = config;
  auto note = [&](const std::string& s) {
    if (log) log(c.id + ": " + s);
  };

  const auto t0 = clock::now();
  const PeriodicGrid grid = detail::stage("grid", c, [&] { return PeriodicGrid::build(c.grid_spec()); });
  const Potential V = detail::stage("potential", c, [&] { return make_potential(c.potential, c.resolved_params()); });
  for (auto& w : alignment_warnings(V, grid)) res.warnings.push_back(w);
  {
    const double delta = V.delta().value_or(c.epsilon);
    if (auto w = resolution_warning(grid, c.epsilon, delta)) res.warnings.push_back(*w);
  }

  note("assembling operators");
  const auto a_op = detail::stage("operators", c, [&] { return assemble_hamiltonian(grid, c.epsilon, V.eval, c.quad_points); });
  const auto m_op = detail::stage("operators", c, [&] { return assemble_l2_mass(grid); });
  const auto s_op = detail::stage("operators", c, [&] {
    const WeightFunction w{c.weight, c.epsilon};
    return assemble_weighted_mass(grid, w, c.quad_points);
  });

  note("local spectral problems");
  const AuxiliarySpace aux =
      detail::stage("auxiliary space", c, [&] { return build_auxiliary_space(grid, a_op, s_op, c.per_element); });
  res.lambda = aux.lambda;

  note("multiscale basis, m=" + std::to_string(c.resolved_layers()));
  BasisOptions opts;
  opts.solver = c.solver;
  const MultiscaleSpace ms = detail::stage(
      "multiscale space", c, [&] { return build_multiscale_space(grid, a_op, m_op, aux, c.resolved_layers(), opts); });
  res.basis_size = ms.dimension();
  res.compressed = ms.compressed;

  note("CN-CEM time stepping");
  EvolutionConfig ev = c.evolution();
  if (c.dump_every > 0 && !c.dump_dir.empty()) ev.snapshot_every = c.dump_every;
  res.steps = ev.steps;
  const Eigen::VectorXcd u0 = detail::stage("initial data", c, [&] { return interpolate(grid, initial_data_for(c)); });
  double mass0 = 0.0, energy0 = 0.0;
  auto observer = [&](int, const WaveField& w) {
    const double mass = std::sqrt(std::abs(w.values.dot(apply_real(ms.m_reduced, w.values))));
    const double energy = std::abs(w.values.dot(apply_real(ms.a_reduced, w.values)).real());
    res.mass_drift = std::max(res.mass_drift, std::abs(mass - mass0) / mass0);
    res.energy_drift = std::max(res.energy_drift, std::abs(energy - energy0) / std::max(energy0, 1e-300));
  };
  const Trajectory traj = detail::stage("CN-CEM", c, [&] {
    const WaveField w0 = elliptic_project(u0, ms, a_op, c.epsilon);
    mass0 = std::sqrt(std::abs(w0.values.dot(apply_real(ms.m_reduced, w0.values))));
    energy0 = std::abs(w0.values.dot(apply_real(ms.a_reduced, w0.values)).real());
    CrankNicolson<Eigen::MatrixXd> cn(ms.m_reduced, ms.a_reduced, c.epsilon, ev.dt);
    return propagate(cn, w0, ev.steps, ev.snapshot_every, observer);
  });
  const Eigen::VectorXcd u_cem = traj.final().fine_values();
  res.row.wall_time = std::chrono::duration<double>(clock::now() - t0).count();

  note("reference solution");
  Eigen::VectorXcd u_ref;
  if (const Eigen::VectorXcd* hit = cache ? cache->find(c) : nullptr) {
    u_ref = *hit;
  } else {
    u_ref = detail::stage("reference", c, [&] { return compute_reference(c); });
    if (cache) cache->store(c, u_ref);
  }

  if (c.dump_every > 0 && !c.dump_dir.empty())
    detail::stage("field dump", c, [&] {
      detail::dump_snapshots(c, grid, traj, "cem");
      return 0;
    });

  res.row.errors = detail::stage("analysis", c, [&] {
    const NormOperators norms = make_norm_operators(grid, a_op);
    return relative_errors(u_cem, u_ref, norms);
  });
  RunMetadata& meta = res.row.errors.meta;
  meta.experiment_id = c.id;
  meta.epsilon = c.epsilon;
  meta.delta = V.delta().value_or(std::numeric_limits<double>::quiet_NaN());
  meta.contrast = c.potential == PotentialKind::inclusions2d ? c.params.contrast
                                                             : std::numeric_limits<double>::quiet_NaN();
  meta.H = grid.H();
  meta.h = grid.h();
  meta.layers = c.resolved_layers();
  meta.per_element = c.per_element;
  meta.dt = ev.dt;
  return res;
}

/// A named parameter sweep; orders are computed along the rows when H varies.
struct TableSpec {
  std::string name;
  std::string description;
  std::vector<ExperimentConfig> cells;
  bool orders = false;
};

inline std::vector<std::string> table_names() {
  return {"table1", "table2", "table3", "table4", "table5", "table6", "table7"};
}

namespace detail {

/// 1D sweeps: ε halves per row with H and Δt scaled by ε^{5/4}.
inline TableSpec one_d_table(const std::string& name, PotentialKind kind) {
  TableSpec t;
  t.name = name;
  t.orders = false;
  for (int k = 0; k < 3; ++k) {
    ExperimentConfig c;
    c.potential = kind;
    c.dim = 1;
    c.epsilon = 1.0 / (32 << k);
    c.params.delta1 = 1.0 / 4.0;
    c.params.delta2 = 1.0 / 10.0;
    c.coarse = static_cast<int>(std::lround(128.0 * std::pow(2.0, 1.25 * k)));
    c.refine = 4;
    c.per_element = 3;
    c.final_time = 0.1;
    c.dt = 1e-2 * std::pow(2.0, -1.25 * k);
    c.reference = ReferencePolicy::refined;
    c.reference_factor = 4;
    c.id = name + "_eps" + std::to_string(32 << k);
    t.cells.push_back(c);
  }
  return t;
}

inline ExperimentConfig two_d_cell(const std::string& id, PotentialKind kind, double eps, int coarse, int m) {
  ExperimentConfig c;
  c.id = id;
  c.potential = kind;
  c.dim = 2;
  c.epsilon = eps;
  c.coarse = coarse;
  c.refine = 200 / coarse;
  c.per_element = 3;
  c.layers = m;
  c.final_time = 1.0;
  c.dt = 1.0 / 32.0;
  c.reference = ReferencePolicy::same_grid;
  return c;
}

inline TableSpec h_sweep(const std::string& name, PotentialKind kind, double eps, double contrast) {
  TableSpec t;
  t.name = name;
  t.orders = true;
  const int coarse[] = {10, 20, 40};
  const int layers[] = {2, 3, 4};
  for (int k = 0; k < 3; ++k) {
    ExperimentConfig c = two_d_cell(name + "_H" + std::to_string(coarse[k]), kind, eps, coarse[k], layers[k]);
    c.params.delta1 = 1.0 / 8.0;
    c.params.delta2 = 1.0 / 16.0;
    c.params.contrast = contrast;
    t.cells.push_back(c);
  }
  return t;
}

}  // namespace detail

inline TableSpec named_table(const std::string& name) {
  if (name == "table1") {
    auto t = detail::one_d_table(name, PotentialKind::smooth1d);
    t.description = "1D smooth potential, eps in {1/32,1/64,1/128}, H and dt scaled by eps^(5/4)";
    return t;
  }
  if (name == "table2") {
    auto t = detail::one_d_table(name, PotentialKind::twoscale1d);
    t.description = "1D two-scale potential delta1=1/4 delta2=1/10, eps in {1/32,1/64,1/128}";
    return t;
  }
  if (name == "table3") {
    auto t = detail::h_sweep(name, PotentialKind::inclusions2d, 1.0 / 8.0, 1e3);
    t.description = "2D random inclusions, contrast 1e3, eps=1/8, H in {1/10,1/20,1/40}";
    return t;
  }
  if (name == "table4") {
    auto t = detail::h_sweep(name, PotentialKind::checkerboard2d, 1.0 / 8.0, 1e3);
    t.description = "2D checkerboard, eps=1/8, delta1=1/8, delta2=1/16, H in {1/10,1/20,1/40}";
    return t;
  }
  if (name == "table5") {
    auto t = detail::h_sweep(name, PotentialKind::checkerboard2d, 1.0 / 32.0, 1e3);
    t.description = "2D checkerboard, eps=1/32, delta1=1/8, delta2=1/16, H in {1/10,1/20,1/40}";
    return t;
  }
  if (name == "table6") {
    TableSpec t;
    t.name = name;
    t.description = "2D checkerboard, eps=1/16, H=1/40, m=4, delta in {1/8,1/16,1/32} (delta2=delta, delta1=2 delta)";
    for (int k : {8, 16, 32}) {
      ExperimentConfig c = detail::two_d_cell(name + "_delta" + std::to_string(k), PotentialKind::checkerboard2d,
                                              1.0 / 16.0, 40, 4);
      c.params.delta2 = 1.0 / k;
      c.params.delta1 = 2.0 / k;
      t.cells.push_back(c);
    }
    return t;
  }
  if (name == "table7") {
    TableSpec t;
    t.name = name;
    t.description = "2D random inclusions, eps=1/8, H=1/40, m=4, contrast in {1e1,1e2,1e3,1e4}";
    for (int k = 1; k <= 4; ++k) {
      ExperimentConfig c =
          detail::two_d_cell(name + "_contrast1e" + std::to_string(k), PotentialKind::inclusions2d, 1.0 / 8.0, 40, 4);
      c.params.contrast = std::pow(10.0, k);
      t.cells.push_back(c);
    }
    return t;
  }
  throw std::invalid_argument("unknown table " + name);
}

/// Runs the cells in order and fills the order columns.
inline std::vector<ExperimentResult> run_table(const TableSpec& table, ReferenceCache& cache,
                                               const ProgressLog& log = {}) {
  std::vector<ExperimentResult> out;
  for (const auto& cell : table.cells) out.push_back(run_experiment(cell, &cache, log));
  if (table.orders && out.size() > 1) {
    std::vector<std::pair<double, double>> l2, h1;
    for (const auto& r : out) {
      l2.emplace_back(r.row.errors.meta.H, r.row.errors.l2);
      h1.emplace_back(r.row.errors.meta.H, r.row.errors.h1);
    }
    const auto o2 = convergence_order(l2);
    const auto o1 = convergence_order(h1);
    for (std::size_t k = 1; k < out.size(); ++k) {
      out[k].row.order_l2 = o2[k - 1];
      out[k].row.order_h1 = o1[k - 1];
    }
  }
  return out;
}

inline void write_results_csv(std::ostream& os, const std::vector<ExperimentResult>& results) {
  write_csv_header(os);
  for (const auto& r : results) write_csv_row(os, r.row);
}

/// decay_study on the grid of `c` for basis (j, i).
inline DecayStudy run_decay(const ExperimentConfig& c, int j, int i, const std::vector<int>& layers) {
  validate(c);
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  if (j < 0 || j >= grid.num_coarse()) throw std::out_of_range("coarse element index out of range");
  const Potential V = make_potential(c.potential, c.resolved_params());
  const auto a_op = assemble_hamiltonian(grid, c.epsilon, V.eval, c.quad_points);
  const auto s_op = assemble_weighted_mass(grid, WeightFunction{c.weight, c.epsilon}, c.quad_points);
  const AuxiliarySpace aux = build_auxiliary_space(grid, a_op, s_op, c.per_element);
  BasisOptions opts;
  opts.solver = c.solver;
  return decay_study(grid, a_op, aux, j, i, layers, opts);
}

inline AuxiliarySpace run_spectra(const ExperimentConfig& c) {
  validate(c);
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  const Potential V = make_potential(c.potential, c.resolved_params());
  const auto a_op = assemble_hamiltonian(grid, c.epsilon, V.eval, c.quad_points);
  const auto s_op = assemble_weighted_mass(grid, WeightFunction{c.weight, c.epsilon}, c.quad_points);
  return build_auxiliary_space(grid, a_op, s_op, c.per_element);
}

/// Nodal potential values: "x V" (1D) or "x y V" (2D) per fine dof.
inline void dump_potential(std::ostream& os, const ExperimentConfig& c) {
  validate(c);
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  const Potential V = make_potential(c.potential, c.resolved_params());
  os.precision(12);
  for (int p = 0; p < grid.num_dofs(); ++p) {
    const Point x = grid.dof_point(p);
    os << x.x;
    if (grid.dim() == 2) os << ' ' << x.y;
    os << ' ' << V(x) << '\n';
  }
}

}  // namespace cemgms
