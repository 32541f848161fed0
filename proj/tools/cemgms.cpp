#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cemgms/cemgms.hpp"

namespace fs = std::filesystem;
using namespace cemgms;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::string config;
  std::string out = ".";
  int threads = 0;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::string command_line;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_manifest(const Globals& g, const std::string& command, const std::vector<ExperimentConfig>& configs,
                    const std::string& extra = {}) {
  std::ofstream m = open_output(fs::path(g.out) / (command + "_manifest.txt"));
  m << "# cemgms " << kVersion << "\n";
  m << "# eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << "\n";
#if defined(__clang__)
  m << "# compiler clang " << __clang_major__ << '.' << __clang_minor__ << "\n";
#elif defined(__GNUC__)
  m << "# compiler gcc " << __GNUC__ << '.' << __GNUC_MINOR__ << "\n";
#endif
  m << "# threads " << thread_count() << "\n";
  m << "# command " << g.command_line << "\n";
  if (!extra.empty()) m << extra;
  for (const auto& c : configs) m << "\n" << to_text(c);
}

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : read_config_file(g.config);
  if (g.seed) c.params.seed = *g.seed;
  return c;
}

void print_warnings(const ExperimentResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << r.config.id << ": " << w << "\n";
}

int cmd_solve(const Globals& g) {
  const ExperimentConfig c = load_config(g);
  std::cout << describe_plan(c) << "\n";
  if (g.dry_run) return 0;
  write_manifest(g, "solve", {c});
  const ExperimentResult r = run_experiment(c, nullptr, [](const std::string& s) { std::cerr << s << "\n"; });
  print_warnings(r);
  const fs::path csv = c.csv.empty() ? fs::path(g.out) / (c.id + ".csv") : fs::path(c.csv);
  std::ofstream out = open_output(csv);
  write_results_csv(out, {r});
  write_results_csv(std::cout, {r});
  std::cerr << "Lambda=" << r.lambda << " n_b=" << r.basis_size << " mass drift=" << r.mass_drift
            << " energy drift=" << r.energy_drift << "\n";
  return 0;
}

int cmd_table(const Globals& g, const std::string& name) {
  TableSpec t = named_table(name);
  if (g.seed)
    for (auto& c : t.cells) c.params.seed = *g.seed;
  std::cout << t.name << ": " << t.description << "\n";
  for (const auto& c : t.cells) std::cout << "  " << describe_plan(c) << "\n";
  if (g.dry_run) return 0;
  write_manifest(g, t.name, t.cells, "# table " + t.description + "\n");
  ReferenceCache cache;
  const auto results = run_table(t, cache, [](const std::string& s) { std::cerr << s << "\n"; });
  for (const auto& r : results) print_warnings(r);
  std::ofstream out = open_output(fs::path(g.out) / (t.name + ".csv"));
  write_results_csv(out, results);
  write_results_csv(std::cout, results);
  return 0;
}

int cmd_decay(const Globals& g, int element, int index, std::vector<int> layers) {
  const ExperimentConfig c = load_config(g);
  const PeriodicGrid grid = PeriodicGrid::build(c.grid_spec());
  if (layers.empty())
    for (int m = 1; m <= full_cover_layers(grid); ++m) layers.push_back(m);
  std::cout << describe_plan(c) << "\ndecay of basis (" << element << ", " << index << ") for m in";
  for (int m : layers) std::cout << ' ' << m;
  std::cout << "\n";
  if (g.dry_run) return 0;
  write_manifest(g, "decay", {c});
  const DecayStudy study = run_decay(c, element, index, layers);
  std::ofstream out = open_output(fs::path(g.out) / (c.id + "_decay.csv"));
  write_decay_csv(out, study);
  write_decay_csv(std::cout, study);
  return 0;
}

int cmd_spectra(const Globals& g) {
  const ExperimentConfig c = load_config(g);
  std::cout << describe_plan(c) << "\n";
  if (g.dry_run) return 0;
  write_manifest(g, "spectra", {c});
  const AuxiliarySpace aux = run_spectra(c);
  std::ofstream out = open_output(fs::path(g.out) / (c.id + "_spectra.csv"));
  write_spectra_csv(out, aux);
  std::cout << "Lambda=" << aux.lambda << "\n";
  return 0;
}

int cmd_dump_potential(const Globals& g) {
  const ExperimentConfig c = load_config(g);
  std::cout << describe_plan(c) << "\n";
  if (g.dry_run) return 0;
  write_manifest(g, "dump-potential", {c});
  std::ofstream out = open_output(fs::path(g.out) / (c.id + "_potential.txt"));
  dump_potential(out, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEM-GMsFEM / Crank-Nicolson solver for the semiclassical Schroedinger equation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Experiment config (key=value with [sections])")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-element work (0 = runtime default)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the random-layout seed");
  app.add_flag("--dry-run", g.dry_run, "Print the resolved plan and exit");

  auto* solve = app.add_subcommand("solve", "Run one experiment from --config");
  auto* table = app.add_subcommand("table", "Run a named parameter sweep");
  std::string table_name;
  table->add_option("--table", table_name, "Sweep name")->required()->check(CLI::IsMember(table_names()));
  auto* decay = app.add_subcommand("decay", "Localization error of one basis function versus m");
  int element = 0, index = 0;
  std::vector<int> layers;
  decay->add_option("--element", element, "Coarse element index")->capture_default_str();
  decay->add_option("--index", index, "Basis index within the element")->capture_default_str();
  decay->add_option("--layers", layers, "Oversampling layers to test (default 1..full cover)")->delimiter(',');
  auto* spectra = app.add_subcommand("spectra", "Local eigenvalues and Lambda");
  auto* dump = app.add_subcommand("dump-potential", "Nodal potential values on the fine grid");

  CLI11_PARSE(app, argc, argv);
  for (int k = 0; k < argc; ++k) g.command_line += (k ? " " : "") + std::string(argv[k]);
  if (*seed_opt) g.seed = seed;
  set_thread_count(g.threads);

  try {
    if (*solve) return cmd_solve(g);
    if (*table) return cmd_table(g, table_name);
    if (*decay) return cmd_decay(g, element, index, layers);
    if (*spectra) return cmd_spectra(g);
    if (*dump) return cmd_dump_potential(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
