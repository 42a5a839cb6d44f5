// SPDX-License-Identifier: MIT
//
// Command-line front end: mesh, constants, solve, certify, report, oracle.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 certification refused.

#include "cecr/config.hpp"
#include "cecr/errors.hpp"
#include "cecr/oracle.hpp"
#include "cecr/pipeline.hpp"
#include "cecr/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace
{

using namespace cecr;

struct RunFlags
{
  std::string preset;
  std::string config;
  std::string levels;
  bool heavy = false;
  bool dry_run = false;
  std::string out;
  int threads = 0;
  std::string mesh_in, mesh_out, ch_out, dump_matrices;
  double eig_tol = 0.0;
  int eig_maxit = 0;
  int k_max = 0;
  double sigma = 0.0, epsilon = 0.0, C_eps = 0.0;
  std::string ceps_source;
  double ceps_value = -1.0;
  double kappa_target = 0.0;
  bool no_opt_shift = false;
  bool rigorous = false;
  bool quiet = false;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool certify_flags)
{
  auto* src = app->add_option_group("source", "problem definition");
  src->add_option("--preset", f.preset, "built-in preset")
    ->check(CLI::IsMember(preset_names()));
  src->add_option("--config", f.config, "configuration file")->check(CLI::ExistingFile);
  src->require_option(1);
  app->add_option("--levels", f.levels, "comma-separated mesh sizes, strictly decreasing");
  app->add_flag("--heavy", f.heavy, "append the fine levels of the preset");
  app->add_flag("--dry-run", f.dry_run, "print the resolved configuration and plan only");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--threads", f.threads, "worker threads for levels (env CECR_THREADS)")
    ->check(CLI::PositiveNumber);
  app->add_option("--mesh-in", f.mesh_in, "read the mesh of a single level")
    ->check(CLI::ExistingFile);
  app->add_option("--mesh-out", f.mesh_out, "directory for mesh files");
  app->add_option("--ch-out", f.ch_out, "directory for element potential averages");
  app->add_option("--eig-tol", f.eig_tol, "eigensolver tolerance")->check(CLI::PositiveNumber);
  app->add_option("--eig-maxit", f.eig_maxit, "eigensolver restart cap")
    ->check(CLI::PositiveNumber);
  app->add_option("--k-max", f.k_max, "number of eigenvalues")->check(CLI::PositiveNumber);
  app->add_option("--sigma", f.sigma, "rough shift");
  app->add_option("--epsilon", f.epsilon, "form-bound coefficient in (0, 1)");
  app->add_option("--C-eps", f.C_eps, "form-bound constant of the rough shift");
  app->add_flag("--quiet", f.quiet, "no progress messages");
  if (certify_flags)
  {
    app->add_option("--ceps-source", f.ceps_source, "form constant of the optimal shift")
      ->check(CLI::IsMember({"analytic", "diagnostic", "rigorous", "manual"}));
    app->add_option("--ceps-value", f.ceps_value, "value for --ceps-source manual");
    app->add_option("--kappa-target", f.kappa_target, "sigma_opt = C_eps_cert + kappa_target");
    app->add_flag("--no-opt-shift", f.no_opt_shift, "rough shift only");
    app->add_flag("--rigorous-ceps", f.rigorous, "also compute the rigorous form constant");
  }
}

RunConfig resolve(const RunFlags& f)
{
  RunConfig c = f.config.empty() ? preset(f.preset) : load_config(f.config);
  if (!f.out.empty())
    c.output_dir = f.out;
  if (f.threads > 0)
    c.threads = f.threads;
  else if (const char* env = std::getenv("CECR_THREADS"))
  {
    const int n = std::atoi(env);
    if (n < 1)
      throw InputError("CECR_THREADS must be a positive integer");
    c.threads = n;
  }
  if (f.eig_tol > 0.0)
    c.eig.tol = f.eig_tol;
  if (f.eig_maxit > 0)
    c.eig.max_restarts = f.eig_maxit;
  if (f.k_max > 0)
    c.k_max = f.k_max;
  if (f.sigma != 0.0)
    c.sigma = f.sigma;
  if (f.epsilon != 0.0)
    c.epsilon = f.epsilon;
  if (f.C_eps != 0.0)
    c.C_eps = f.C_eps;
  if (!f.ceps_source.empty())
    c.opt_source = parse_ceps_source(f.ceps_source);
  if (f.ceps_value >= 0.0)
    c.C_eps_manual = f.ceps_value;
  if (c.opt_source == CepsSource::manual && f.ceps_value < 0.0 && c.C_eps_manual <= 0.0)
    throw InputError("--ceps-source manual needs --ceps-value");
  if (f.kappa_target != 0.0)
    c.kappa_target = f.kappa_target;
  if (f.no_opt_shift)
    c.optimal_shift = false;
  if (f.rigorous)
    c.rigorous_ceps = true;
  validate_config(c);
  return c;
}

int run_stage(const RunFlags& f, Stage stage)
{
  const RunConfig cfg = resolve(f);
  PipelineOptions opt;
  opt.heavy = f.heavy;
  if (!f.levels.empty())
    opt.levels = parse_number_list(f.levels);
  opt.mesh_in = f.mesh_in;
  opt.mesh_out = f.mesh_out;
  opt.ch_out = f.ch_out;
  opt.dump_matrices = f.dump_matrices;
  opt.log = f.quiet ? nullptr : &std::cerr;

  if (f.dry_run)
  {
    std::cout << describe_plan(cfg, stage, opt);
    return 0;
  }
  if (f.heavy)
  {
    std::cout << "memory estimates (rough):\n";
    for (const MemoryEstimate& e : estimate_memory(cfg, planned_levels(cfg, opt)))
      fmt::print(std::cout, "  h = {}: ~{:.0f} elements, ~{:.0f} MB\n", e.h, e.elements,
                 e.megabytes);
    std::cout.flush();
  }
  const PipelineResult res = run_pipeline(cfg, stage, opt);
  write_outputs(cfg, stage, res);
  for (const LevelOutcome& l : res.levels)
    if (!l.ok)
      fmt::print(std::cerr, "level h = {} failed at the {}\n", l.h, l.error);
  fmt::print(std::cout, "{}: {} level(s), outputs in {}\n", to_string(stage), res.levels.size(),
             cfg.output_dir);
  return res.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Certified two-sided eigenvalue bounds for Schroedinger operators with Coulomb "
               "potentials"};
  app.require_subcommand(1);

  RunFlags mesh_f, const_f, solve_f, cert_f;
  auto* mesh = app.add_subcommand("mesh", "build graded meshes and the mesh audit");
  add_run_flags(mesh, mesh_f, false);
  auto* cons = app.add_subcommand("constants", "meshes plus the constants bundle per level");
  add_run_flags(cons, const_f, false);
  auto* solve = app.add_subcommand("solve", "conforming and shifted CECR eigenvalues");
  add_run_flags(solve, solve_f, false);
  solve->add_option("--dump-matrices", solve_f.dump_matrices,
                    "directory for Matrix Market files");
  auto* cert = app.add_subcommand("certify", "full certification pipeline");
  add_run_flags(cert, cert_f, true);

  std::string report_dir;
  double report_ref = 0.0;
  auto* report = app.add_subcommand("report", "render tables from an enclosures.csv");
  report->add_option("--in", report_dir, "directory holding enclosures.csv")
    ->required()
    ->check(CLI::ExistingDirectory);
  auto* ref_opt = report->add_option("--reference", report_ref, "reference lambda_1");

  std::string oracle_json;
  double perturb = 0.0;
  auto* oracle = app.add_subcommand("oracle", "run the oracle suite");
  oracle->add_option("--json", oracle_json, "also write the report to this file");
  oracle->add_option("--perturb-stiffness", perturb, "test hook: perturb one stiffness entry")
    ->group("");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try
  {
    if (*mesh)
      return run_stage(mesh_f, Stage::mesh);
    if (*cons)
      return run_stage(const_f, Stage::constants);
    if (*solve)
      return run_stage(solve_f, Stage::solve);
    if (*cert)
      return run_stage(cert_f, Stage::certify);
    if (*report)
    {
      std::optional<double> ref;
      if (*ref_opt)
        ref = report_ref;
      render_report(report_dir, ref);
      fmt::print(std::cout, "report written to {}\n", report_dir);
      return 0;
    }
    if (*oracle)
    {
      OracleSuiteOptions o;
      o.stiffness_perturbation = perturb;
      const std::vector<OracleCheck> checks = run_oracle_suite(o);
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      bool all = true;
      for (const OracleCheck& c : checks)
      {
        all = all && c.passed;
        j.push_back({{"name", c.name},
                     {"passed", c.passed},
                     {"discrepancy", c.discrepancy},
                     {"tolerance", c.tolerance},
                     {"detail", c.detail}});
      }
      std::cout << j.dump(2) << '\n';
      if (!oracle_json.empty())
      {
        std::ofstream os(oracle_json);
        if (!os)
          throw InputError("cannot write " + oracle_json);
        os << j.dump(2) << '\n';
      }
      return all ? 0 : 3;
    }
  }
  catch (const std::exception& e)
  {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return exit_code_for(e);
  }
  return 2;
}
