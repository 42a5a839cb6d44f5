// SPDX-License-Identifier: MIT
#include "cecr/pipeline.hpp"

#include "cecr/assembly.hpp"
#include "cecr/errors.hpp"
#include "cecr/report.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

namespace cecr
{

namespace
{

namespace fs = std::filesystem;

std::string num(double x) { return fmt::format("{:.10g}", x); }

std::string level_tag(double h) { return fmt::format("h{:.6g}", h); }

std::ofstream open_output(const fs::path& p)
{
  std::ofstream os(p);
  if (!os)
    throw InputError(fmt::format("cannot write {}", p.string()));
  return os;
}

// Everything up to and including the requested stage for one level.
void run_level(const RunConfig& cfg, Stage last, const PipelineOptions& opt, LevelOutcome& out,
               std::mutex& io)
{
  const char* stage = "mesh";
  try
  {
    Mesh mesh;
    if (!opt.mesh_in.empty())
      mesh = read_mesh_file(opt.mesh_in, cfg.potential.centers);
    else
      mesh = build_level_mesh(cfg, out.h);
    if (mesh.dim != cfg.potential.dim)
      throw InputError("mesh and problem dimensions differ");
    out.num_elements = mesh.num_elements();
    out.num_vertices = mesh.num_vertices();
    out.quality = mesh_quality(mesh, grading_for(cfg, out.h));
    if (!opt.mesh_out.empty())
    {
      std::lock_guard lock(io);
      fs::create_directories(opt.mesh_out);
      write_mesh_file((fs::path(opt.mesh_out) / (level_tag(out.h) + ".mesh")).string(), mesh);
    }
    if (last == Stage::mesh)
    {
      out.ok = true;
      return;
    }

    stage = "constants";
    const CellField ch = assemble_ch(mesh, cfg.potential);
    if (!opt.ch_out.empty())
    {
      std::lock_guard lock(io);
      fs::create_directories(opt.ch_out);
      auto os = open_output(fs::path(opt.ch_out) / (level_tag(out.h) + ".ch"));
      write_cell_field(os, ch);
    }
    if (last == Stage::constants)
    {
      ConstantsBundle cb;
      cb.C_h_PW = payne_weinberger(mesh);
      cb.Gamma_h = gamma_h(mesh, ch);
      cb.epsilon = cfg.epsilon;
      cb.C_eps = cfg.C_eps;
      cb.sigma = cfg.sigma;
      const ShiftConstants sc = a_h_and_kappa(cb.Gamma_h, cfg.epsilon, cfg.C_eps, cfg.sigma);
      cb.A_h = sc.A_h;
      cb.kappa_sigma = sc.kappa_sigma;
      cb.embed = domain_embedding(cfg);
      const PerturbationBound pb = optimal_patch_radius(mesh, ch, cfg.potential, cb.embed);
      cb.d_h = pb.d_h;
      cb.c0 = pb.c0;
      cb.c_star = pb.c_star;
      cb.rho_patch = pb.rho;
      cb.eps_h = pb.d_h / cb.kappa_sigma;
      out.constants = cb;
      if (cfg.lambda1_reference_upper)
      {
        const Confinement c =
          confinement_check(cfg.potential, cfg.domain, *cfg.lambda1_reference_upper);
        out.sigma_ext = c.sigma_ext;
        out.confinement_ok = c.ok;
      }
      out.ok = true;
      return;
    }

    if (last == Stage::solve)
    {
      stage = "solve";
      SolveSummary s;
      const DiscreteSystem p1 = assemble_p1(mesh, &cfg.potential, Boundary::dirichlet);
      const DiscreteSystem ecr = assemble_ecr(mesh, ch);
      if (!opt.dump_matrices.empty())
      {
        std::lock_guard lock(io);
        dump_matrices(p1, opt.dump_matrices, level_tag(out.h) + "_p1_");
        dump_matrices(ecr, opt.dump_matrices, level_tag(out.h) + "_ecr_");
      }
      const EigenResult ru = smallest_eigenpairs(p1.K + p1.CP1, p1.M, cfg.k_max, cfg.eig);
      EigenOptions eo = cfg.eig;
      eo.estimate = ru.values[0] + cfg.sigma;
      const EigenResult rs =
        smallest_eigenpairs(shifted_cecr_matrix(ecr, cfg.sigma), ecr.M, cfg.k_max, eo);
      if (!ru.converged || !rs.converged)
        throw NumericalError("eigensolver did not converge");
      s.p1_values = ru.values;
      s.p1_certificates = ru.certificates;
      s.ecr_shifted_values = rs.values;
      s.ecr_shifted_certificates = rs.certificates;
      s.solver_tag = rs.solver_tag;
      out.solve = s;
      out.ok = true;
      return;
    }

    stage = "certify";
    out.result = certify_level(mesh, cfg.potential, out.h, certify_options(cfg));
    out.constants = out.result->constants;
    out.sigma_ext = out.result->sigma_ext;
    out.confinement_ok = out.result->confinement_ok;
    out.ok = true;
  }
  catch (const std::exception& e)
  {
    out.ok = false;
    out.exit_code = exit_code_for(e);
    out.error = fmt::format("{} stage: {}", stage, e.what());
  }
}

void write_mesh_audit(std::ostream& os, const PipelineResult& res)
{
  os << "h,N_elem,N_vert,h_max,h_min,min_angle_deg,grading_ratio,patch_radius,G1,G2\n";
  for (const LevelOutcome& l : res.levels)
  {
    if (l.num_elements == 0)
      continue;
    double patch = 0.0;
    for (double r : l.quality.patch_radii)
      patch = std::max(patch, r);
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{}\n", num(l.h), l.num_elements, l.num_vertices,
               num(l.quality.h_max), num(l.quality.h_min),
               num(l.quality.min_angle * 180.0 / std::numbers::pi), num(l.quality.grading_ratio), num(patch),
               l.quality.G1_ok ? 1 : 0, l.quality.G2_ok ? 1 : 0);
  }
}

void write_constants(std::ostream& os, const PipelineResult& res)
{
  os << "h,C_h_PW,Gamma_h,A_h,epsilon,C_eps,sigma,kappa_sigma,d_h,c0,c_star,rho_patch,eps_h,"
        "embed,sigma_ext,confinement_ok\n";
  for (const LevelOutcome& l : res.levels)
  {
    if (!l.constants)
      continue;
    const ConstantsBundle& c = *l.constants;
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", num(l.h), num(c.C_h_PW),
               num(c.Gamma_h), num(c.A_h), num(c.epsilon), num(c.C_eps), num(c.sigma),
               num(c.kappa_sigma), num(c.d_h), num(c.c0), num(c.c_star), num(c.rho_patch),
               num(c.eps_h), num(c.embed), num(l.sigma_ext), l.confinement_ok ? 1 : 0);
  }
}

void write_eigenvalues(std::ostream& os, const RunConfig& cfg, const PipelineResult& res)
{
  os << "h,system,k,value,certificate\n";
  for (const LevelOutcome& l : res.levels)
  {
    if (!l.solve)
      continue;
    const SolveSummary& s = *l.solve;
    for (std::size_t i = 0; i < s.p1_values.size(); ++i)
      fmt::print(os, "{},p1_dirichlet,{},{},{}\n", num(l.h), i + 1, num(s.p1_values[i]),
                 num(s.p1_certificates[i]));
    for (std::size_t i = 0; i < s.ecr_shifted_values.size(); ++i)
      fmt::print(os, "{},ecr_shifted_minus_sigma,{},{},{}\n", num(l.h), i + 1,
                 num(s.ecr_shifted_values[i] - cfg.sigma), num(s.ecr_shifted_certificates[i]));
  }
}

} // namespace

std::string to_string(Stage s)
{
  switch (s)
  {
  case Stage::mesh:
    return "mesh";
  case Stage::constants:
    return "constants";
  case Stage::solve:
    return "solve";
  case Stage::certify:
    return "certify";
  }
  return "?";
}

std::vector<double> planned_levels(const RunConfig& cfg, const PipelineOptions& opt)
{
  std::vector<double> v = opt.levels ? *opt.levels : cfg.levels;
  if (opt.heavy)
    for (double h : cfg.heavy_levels)
      if (v.empty() || h < v.back())
        v.push_back(h);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] > 0.0) || (i > 0 && !(v[i] < v[i - 1])))
      throw InputError("levels must be positive and strictly decreasing");
  if (v.empty())
    throw InputError("no levels to run");
  if (!opt.mesh_in.empty() && v.size() != 1)
    throw InputError("a mesh file input needs exactly one level");
  return v;
}

GradingSpec grading_for(const RunConfig& cfg, double h)
{
  GradingSpec g;
  g.h = h;
  g.vartheta = cfg.vartheta;
  g.centers = cfg.potential.centers;
  g.seed = cfg.seed;
  g.rule = PatchRule::optimal;
  g.improve_rho = balanced_patch_rule(cfg.potential, domain_embedding(cfg));
  return g;
}

Mesh build_level_mesh(const RunConfig& cfg, double h)
{
  switch (cfg.mesh_kind)
  {
  case MeshKind::graded_rectangle:
    return build_graded_mesh_2d(cfg.domain.box, grading_for(cfg, h));
  case MeshKind::graded_box:
    return build_graded_box_mesh_3d(cfg.domain.box, grading_for(cfg, h));
  case MeshKind::ball_shells:
    return build_ball_mesh_3d(cfg.domain.radius, h, cfg.growth, 0);
  }
  throw InputError("unknown mesh kind");
}

std::vector<MemoryEstimate> estimate_memory(const RunConfig& cfg,
                                            const std::vector<double>& levels)
{
  // Calibrated on desk runs: about 3.5 kB per triangle and 5 kB per
  // tetrahedron at 7e4 tetrahedra, with Cholesky fill growing like N^(1/3).
  const double h0 = cfg.levels.front();
  const Mesh m = build_level_mesh(cfg, h0);
  const int dim = cfg.potential.dim;
  std::vector<MemoryEstimate> out;
  for (double h : levels)
  {
    MemoryEstimate e;
    e.h = h;
    e.elements = m.num_elements() * std::pow(h0 / h, dim);
    const double per = dim == 2 ? 3.5e3 : 5e3 * std::max(1.0, std::cbrt(e.elements / 7e4));
    e.megabytes = 50.0 + e.elements * per / 1e6;
    out.push_back(e);
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& cfg, Stage last, const PipelineOptions& opt)
{
  validate_config(cfg);
  const std::vector<double> levels = planned_levels(cfg, opt);
  PipelineResult res;
  res.levels.resize(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i)
    res.levels[i].h = levels[i];
  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&]
  {
    for (std::size_t i; (i = next++) < res.levels.size();)
    {
      if (opt.log)
      {
        std::lock_guard lock(io);
        fmt::print(*opt.log, "level h = {}: {} ...\n", res.levels[i].h, to_string(last));
        opt.log->flush();
      }
      run_level(cfg, last, opt, res.levels[i], io);
      if (opt.log)
      {
        std::lock_guard lock(io);
        const LevelOutcome& l = res.levels[i];
        if (l.ok)
          fmt::print(*opt.log, "level h = {}: done ({} elements)\n", l.h, l.num_elements);
        else
          fmt::print(*opt.log, "level h = {}: FAILED: {}\n", l.h, l.error);
        opt.log->flush();
      }
    }
  };
  const int nt = std::min<int>(cfg.threads, static_cast<int>(levels.size()));
  if (nt <= 1)
    worker();
  else
  {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back(worker);
    for (std::thread& t : pool)
      t.join();
  }
  for (const LevelOutcome& l : res.levels)
    if (!l.ok)
    {
      res.exit_code = l.exit_code;
      break;
    }
  return res;
}

void write_outputs(const RunConfig& cfg, Stage last, const PipelineResult& res)
{
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    auto os = open_output(dir / "mesh_audit.csv");
    write_mesh_audit(os, res);
  }
  if (last == Stage::mesh)
    return;
  {
    auto os = open_output(dir / "constants.csv");
    write_constants(os, res);
  }
  if (last == Stage::solve)
  {
    auto os = open_output(dir / "eigenvalues.csv");
    write_eigenvalues(os, cfg, res);
  }
  if (last != Stage::certify)
    return;

  std::vector<LevelResult> certified;
  for (const LevelOutcome& l : res.levels)
    if (l.result)
      certified.push_back(*l.result);
  {
    auto os = open_output(dir / "enclosures.csv");
    write_enclosure_csv(os, certified);
  }
  render_report(dir.string(), cfg.lambda1_reference);

  nlohmann::ordered_json j;
  j["problem"] = cfg.problem;
  j["config"] = describe_config(cfg);
  j["caveat"] = "form-bound and embedding constants are certified per mesh, not uniformly in h";
  j["exit_code"] = res.exit_code;
  for (const LevelOutcome& l : res.levels)
  {
    nlohmann::ordered_json lj;
    lj["h"] = l.h;
    lj["certified"] = l.ok;
    if (!l.ok)
      lj["error"] = l.error;
    if (l.result)
    {
      lj["notes"] = l.result->notes;
      nlohmann::ordered_json t;
      for (const auto& [name, s] : l.result->timings)
        t[name] = s;
      lj["seconds"] = t;
    }
    j["levels"].push_back(lj);
  }
  auto os = open_output(dir / "run.json");
  os << j.dump(2) << '\n';
}

std::string describe_plan(const RunConfig& cfg, Stage last, const PipelineOptions& opt)
{
  validate_config(cfg);
  const std::vector<double> levels = planned_levels(cfg, opt);
  std::string s = describe_config(cfg);
  s += "\nplanned stages:";
  for (Stage st : {Stage::mesh, Stage::constants, Stage::solve, Stage::certify})
  {
    if (st == Stage::solve && last == Stage::certify)
      continue;
    s += " " + to_string(st);
    if (st == last)
      break;
  }
  s += "\nplanned levels:";
  for (double h : levels)
    s += fmt::format(" {}", h);
  s += fmt::format("\nthreads: {}\n", cfg.threads);
  if (!opt.mesh_in.empty())
    s += "mesh input: " + opt.mesh_in + "\n";
  s += "outputs: " + (fs::path(cfg.output_dir) / "mesh_audit.csv").string();
  if (last != Stage::mesh)
    s += ", constants.csv";
  if (last == Stage::solve)
    s += ", eigenvalues.csv";
  if (last == Stage::certify)
    s += ", enclosures.csv, enclosures.md, convergence.csv, separation.csv, run.json";
  s += "\n";
  return s;
}

int exit_code_for(const std::exception& e)
{
  if (dynamic_cast<const InputError*>(&e))
    return 2;
  if (dynamic_cast<const CertificationRefused*>(&e))
    return 4;
  return 3;
}

} // namespace cecr
