// layered-rom: mesh generation, reduced-model build, point solves, error
// sweeps, analytic tables and n-width reports for layered diffusion problems.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "layered/layered.hpp"

namespace fs = std::filesystem;
using namespace layered;

namespace {

struct Options {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::string> geometry, source, h, tau, rank, ranks, box, out, rank_policy;
  std::optional<int> layers, samples;
  std::optional<std::uint64_t> seed;

  std::string model_dir;
  std::string y_text;
  bool check = false;
  bool do_export = false;
};

RunConfig load_config(const Options& o) {
  RunConfig c;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    if (!in) throw InvalidInput("cannot open config file '" + o.config_file + "'");
    c = RunConfig::parse(in);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
    c.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (o.geometry) c.set("geometry", *o.geometry);
  if (o.layers) c.set("layers", std::to_string(*o.layers));
  if (o.h) c.set("h", *o.h);
  if (o.source) c.set("source", *o.source);
  if (o.tau) {
    c.set("tau", *o.tau);
    c.set("rank_policy", "threshold");
  }
  if (o.rank) {
    c.set("rank", *o.rank);
    c.set("rank_policy", "fixed");
  }
  if (o.ranks) c.set("ranks", *o.ranks);
  if (o.rank_policy) c.set("rank_policy", *o.rank_policy);
  if (o.samples) c.set("samples", std::to_string(*o.samples));
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (o.box) c.set("box", *o.box);
  if (o.out) c.set("output", *o.out);
  c.validate();
  return c;
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

int cmd_mesh(const Options& o) {
  const auto c = load_config(o);
  const std::string prov = provenance_line(c.canonical());
  const Mesh mesh = build_layered_mesh(c.profile(), c.layers(), c.h());
  if (const auto problem = check_mesh(mesh); !problem.empty()) throw ConsistencyError(problem);
  const auto part = classify_dofs(mesh);
  auto out = open_output(fs::path(c.output()) / "mesh.txt");
  write_mesh(out, mesh, prov);
  std::size_t iface = 0;
  for (int i = 1; i < part.n_layers; ++i) iface += part.interface_size(i);
  std::cout << "layers " << c.layers() << " vertices " << mesh.vertices.size() << " triangles "
            << mesh.triangles.size() << " free_dofs " << part.n_free << " interface_dofs " << iface << '\n';
  return 0;
}

int cmd_build(const Options& o) {
  const auto c = load_config(o);
  const std::string prov = provenance_line(c.canonical());
  const Problem p = make_problem(c);
  const Decomposition d(p.K, p.part);
  const auto basis = build_slow_fast_basis(d, c.rank_policy());
  const auto rom = build_rom(d, p.K, p.b, basis);
  const fs::path dir(c.output());
  {
    auto out = open_output(dir / "config.txt");
    out << prov << '\n' << c.canonical();
  }
  {
    auto out = open_output(dir / "model.txt");
    write_model(out, rom, prov);
  }
  {
    auto out = open_output(dir / "sigma.csv");
    write_sigma_csv(out, basis.svds(), prov);
  }
  {
    auto out = open_output(dir / "manifest.csv");
    write_manifest(out, rom, nullptr, prov);
  }
  std::cout << "free_dofs " << p.part.n_free << " ranks " << join(rom.ranks) << " slow_dimension "
            << rom.slow_dimension() << " map_dimension " << rom.dimension() << " lambda " << format_real(rom.lambda)
            << " eps_f " << format_real(rom.eps_f) << '\n';
  return 0;
}

RunConfig model_config(const fs::path& dir) {
  std::ifstream in(dir / "config.txt");
  if (!in) throw InvalidInput("no config.txt in model directory '" + dir.string() + "'");
  return RunConfig::parse(in);
}

ReducedModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "model.txt");
  if (!in) throw InvalidInput("no model.txt in model directory '" + dir.string() + "'");
  return read_model(in);
}

int cmd_solve(const Options& o) {
  const fs::path dir(o.model_dir);
  const RunConfig c = model_config(dir);
  const std::string prov = provenance_line(c.canonical());
  const ReducedModel rom = load_model(dir);
  const ParameterVector y(parse_number_list("y", o.y_text));
  const RomSolution sol = rom.evaluate(y);
  const Vector u = rom.assemble(sol);

  std::cout << "y";
  for (double v : y.values()) std::cout << ' ' << format_real(v);
  std::cout << "\nterms " << rom.dimension() << '\n';
  std::optional<Problem> problem;
  if (o.check || o.do_export) {
    problem = make_problem(c);
    if (problem->part.n_free != rom.n_free) throw InvalidInput("model does not match its recorded configuration");
  }
  if (o.check) {
    const Vector truth = solve_full(problem->K, y, problem->b, SolverBackend::Direct);
    std::cout << "relative_error " << format_real(relative_error(problem->K, y, truth, u)) << '\n';
  }
  if (o.do_export) {
    const fs::path out_dir = o.out ? fs::path(*o.out) : dir / "solution";
    const auto& part = problem->part;
    std::vector<std::pair<std::string, Vector>> fields;
    Vector subdomain = Vector::Zero(rom.n_free);
    for (std::size_t i = 0; i < rom.subdomain.size(); ++i) {
      const Vector term = sol.subdomain_coefficients[i] * rom.subdomain[i];
      subdomain += term;
      fields.emplace_back("subdomain_" + std::to_string(i + 1), term);
    }
    Vector fast = Vector::Zero(rom.n_free);
    for (std::size_t i = 0; i < rom.fast.size(); ++i) {
      const Vector term = sol.fast_coefficients[i] * rom.fast[i];
      fast += term;
      fields.emplace_back("fast_" + std::to_string(i + 1), term);
    }
    const Vector slow = rom.slow.cols() ? Vector(rom.slow * sol.slow_coefficients) : Vector::Zero(rom.n_free);
    fields.emplace_back("slow", slow);
    fields.emplace_back("subdomain_part", subdomain);
    fields.emplace_back("interface_part", fast + slow);
    fields.emplace_back("solution", u);
    for (const auto& [name, field] : fields) {
      auto out = open_output(out_dir / (name + ".txt"));
      write_field(out, part, field, prov);
    }
    {
      auto out = open_output(out_dir / "solution.vtk");
      write_vtk(out, problem->mesh, part, fields);
    }
    {
      auto out = open_output(out_dir / "manifest.csv");
      write_manifest(out, rom, &sol, prov);
    }
    std::cout << "exported " << fields.size() << " fields to " << out_dir.string() << '\n';
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto c = load_config(o);
  const std::string prov = provenance_line(c.canonical());
  const Problem p = make_problem(c);
  const Decomposition d(p.K, p.part);
  const auto report = sweep(d, p.K, p.b, c.sweep_options());
  auto out = open_output(fs::path(c.output()) / "sweep.csv");
  write_error_csv(out, report, prov);
  write_error_csv(std::cout, report);
  return 0;
}

int cmd_analytic(const Options& o) {
  const auto c = load_config(o);
  const std::string prov = provenance_line(c.canonical());
  const fs::path dir(c.output());

  // Coefficients of the configured source, read in the frame centred on the interface.
  const auto f = parse_source(c.source());
  const auto coeffs = analytic::interface_coefficients(f, 8);
  {
    auto out = open_output(dir / "alpha.csv");
    analytic::write_mode_table(out, coeffs.alpha, prov);
  }
  std::cout << "alpha (source " << c.source() << ", quadrature " << (coeffs.converged ? "converged" : "NOT converged")
            << ")\n";
  for (std::size_t m = 0; m < coeffs.alpha.size(); ++m)
    std::cout << "  n=" << m + 1 << " alpha=" << format_real(coeffs.alpha[m]) << '\n';

  {
    auto out = open_output(dir / "bounds.csv");
    out << prov << "\nn_s,dimension,eps_f_bound,lambda_bound\n";
    for (int ns = 0; ns <= 6; ++ns) {
      const auto b = analytic::interaction_bounds(ns);
      out << ns << ',' << square_nwidth_bound(c.layers(), ns).dimension << ',' << format_real(b.eps_f_bound) << ','
          << format_real(b.lambda_bound) << '\n';
    }
  }

  // Discrete singular values on square layers against 1/cosh(pi n).
  const int layers = std::max(3, c.layers());
  const Problem p = make_problem(LayerProfile::square(), layers, c.h(), "zero");
  const Decomposition d(p.K, p.part);
  const auto svds = interaction_svds(d);
  auto out = open_output(dir / "sigma_compare.csv");
  out << prov << "\nn,sigma_discrete,mode_interaction,relative_difference\n";
  std::cout << "n sigma_discrete 1/cosh(pi n) rel_diff (square layers, N=" << layers << ")\n";
  const Index count = std::min<Index>(8, svds.front().sigma.size());
  for (Index n = 1; n <= count; ++n) {
    const double s = svds.front().sigma[n - 1];
    const double a = analytic::mode_interaction(static_cast<int>(n));
    out << n << ',' << format_real(s) << ',' << format_real(a) << ',' << format_real(s / a - 1.0) << '\n';
    std::cout << "  " << n << ' ' << format_real(s) << ' ' << format_real(a) << ' ' << format_real(s / a - 1.0) << '\n';
  }
  return 0;
}

int cmd_report(const Options& o) {
  const fs::path dir(o.model_dir);
  const RunConfig c = model_config(dir);
  const std::string prov = provenance_line(c.canonical());
  const ReducedModel rom = load_model(dir);
  const auto discrete = nwidth_bound(rom);
  std::cout << "layers " << rom.n_layers << " free_dofs " << rom.n_free << " ranks " << join(rom.ranks)
            << "\nmap_dimension " << rom.dimension() << " (subdomain " << rom.n_layers << ", fast " << rom.n_layers - 1
            << ", slow " << rom.slow_dimension() << ")\nlambda " << format_real(rom.lambda) << "\nnwidth "
            << discrete.dimension << ' ' << format_real(discrete.bound) << '\n';
  auto out = open_output(dir / "nwidth.csv");
  out << prov << "\nkind,n_s,dimension,bound\n";
  out << "discrete,," << discrete.dimension << ',' << format_real(discrete.bound) << '\n';
  for (int ns = 0; ns <= 5; ++ns) {
    const auto pair = square_nwidth_bound(rom.n_layers, ns);
    out << "square," << ns << ',' << pair.dimension << ',' << format_real(pair.bound) << '\n';
    std::cout << "square n_s=" << ns << " nwidth " << pair.dimension << ' ' << format_real(pair.bound) << '\n';
  }
  return 0;
}

void add_config_options(CLI::App* cmd, Options& o) {
  cmd->set_help_flag("--help", "Print this help message and exit");
  cmd->add_option("--config", o.config_file, "key = value configuration file");
  cmd->add_option("--set", o.overrides, "override one configuration entry (key=value)");
  cmd->add_option("--geometry", o.geometry, "square, crown, or a profile file");
  cmd->add_option("--layers", o.layers, "number of layers N");
  cmd->add_option("--h", o.h, "target mesh size (e.g. 1/80)");
  cmd->add_option("--source", o.source, "x2, sin_pi_x2, zero, or an expression in x1, x2");
  cmd->add_option("--out", o.out, "output directory");
}

void add_rank_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--tau", o.tau, "singular-value threshold");
  cmd->add_option("--rank", o.rank, "fixed rank on every interface");
  cmd->add_option("--ranks", o.ranks, "comma-separated rank list");
  cmd->add_option("--rank-policy", o.rank_policy, "threshold, fixed or list");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced parameter-to-solution maps for layered diffusion problems"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(kToolVersion));
  Options o;

  auto* mesh = app.add_subcommand("mesh", "generate the layered mesh");
  add_config_options(mesh, o);

  auto* build = app.add_subcommand("build", "build and store the reduced model");
  add_config_options(build, o);
  add_rank_options(build, o);

  auto* solve = app.add_subcommand("solve", "evaluate a stored model at one parameter vector");
  solve->add_option("--model", o.model_dir, "model directory written by build")->required();
  solve->add_option("--y", o.y_text, "comma-separated diffusion coefficients")->required();
  solve->add_flag("--check", o.check, "compare with the full finite element solve");
  solve->add_flag("--export", o.do_export, "write the solution components");
  solve->add_option("--out", o.out, "export directory (default <model>/solution)");

  auto* sweep_cmd = app.add_subcommand("sweep", "maximum relative error per rank over random parameters");
  add_config_options(sweep_cmd, o);
  sweep_cmd->add_option("--ranks", o.ranks, "comma-separated ranks to sweep");
  sweep_cmd->add_option("--samples", o.samples, "samples per rank");
  sweep_cmd->add_option("--seed", o.seed, "random seed");
  sweep_cmd->add_option("--box", o.box, "parameter interval a,b");

  auto* analytic_cmd = app.add_subcommand("analytic", "sine-mode tables and the square-layer singular values");
  add_config_options(analytic_cmd, o);

  auto* report = app.add_subcommand("report", "dimension and n-width summary of a stored model");
  report->add_option("--model", o.model_dir, "model directory written by build")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*mesh) return cmd_mesh(o);
    if (*build) return cmd_build(o);
    if (*solve) return cmd_solve(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*analytic_cmd) return cmd_analytic(o);
    if (*report) return cmd_report(o);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
