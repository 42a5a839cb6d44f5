// SPDX-License-Identifier: MIT
#include "cecr/config.hpp"

#include "cecr/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cecr
{

namespace
{

namespace pt = boost::property_tree;

RunConfig hydrogen2d()
{
  RunConfig c;
  c.problem = "hydrogen2d";
  c.potential = {2, {{0.0, 0.0, 0.0}}, {1.0}};
  c.domain.kind = TruncationDomain::Kind::box;
  c.domain.dim = 2;
  c.domain.box = Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}};
  c.mesh_kind = MeshKind::graded_rectangle;
  c.levels = {0.4, 0.2, 0.1};
  c.heavy_levels = {0.05};
  c.vartheta = 0.5;
  c.epsilon = 0.55;
  c.C_eps = 12.0;
  c.sigma = 12.5;
  c.k_max = 3;
  c.lambda1_reference_upper = -1.0;
  c.lambda1_reference = -1.0;
  c.output_dir = "out/hydrogen2d";
  return c;
}

RunConfig h2plus2d()
{
  RunConfig c = hydrogen2d();
  c.problem = "h2plus2d";
  c.potential = {2, {{-2.0, 0.0, 0.0}, {2.0, 0.0, 0.0}}, {1.0, 1.0}};
  c.domain.box = Box{2, {-7.0, -5.0, 0.0}, {7.0, 5.0, 0.0}};
  c.levels = {0.4, 0.2};
  c.heavy_levels = {0.1};
  c.lambda1_reference_upper = -1.3170;
  c.lambda1_reference = -1.317;
  c.gamma_baseline = false;
  c.output_dir = "out/h2plus2d";
  return c;
}

RunConfig hydrogen3d()
{
  RunConfig c;
  c.problem = "hydrogen3d";
  c.potential = {3, {{0.0, 0.0, 0.0}}, {1.0}};
  c.domain.kind = TruncationDomain::Kind::ball;
  c.domain.dim = 3;
  c.domain.radius = 6.0;
  c.mesh_kind = MeshKind::ball_shells;
  c.levels = {1.4};
  c.heavy_levels = {1.2, 1.0, 0.8};
  c.growth = 0.25;
  c.epsilon = 0.6;
  c.C_eps = 5.0;
  c.sigma = 5.4;
  c.k_max = 3;
  c.gamma_baseline = false;
  c.lambda1_reference_upper = -0.25;
  c.lambda1_reference = -0.25;
  c.output_dir = "out/hydrogen3d";
  return c;
}

RunConfig h2plus3d()
{
  RunConfig c = hydrogen3d();
  c.problem = "h2plus3d";
  c.potential = {3, {{-2.0, 0.0, 0.0}, {2.0, 0.0, 0.0}}, {1.0, 1.0}};
  c.domain.kind = TruncationDomain::Kind::box;
  c.domain.box = Box{3, {-8.0, -6.0, -6.0}, {8.0, 6.0, 6.0}};
  c.domain.radius = 0.0;
  c.mesh_kind = MeshKind::graded_box;
  c.vartheta = 1.0;
  c.levels = {2.0, 1.4};
  c.heavy_levels = {1.0};
  c.lambda1_reference_upper = -0.5303;
  c.lambda1_reference = -0.5513;
  c.output_dir = "out/h2plus3d";
  return c;
}

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& key)
{
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try
  {
    v = std::stod(t, &used);
  }
  catch (const std::exception&)
  {
    throw InputError(fmt::format("{}: '{}' is not a number", key, text));
  }
  if (used != t.size() || !std::isfinite(v))
    throw InputError(fmt::format("{}: '{}' is not a finite number", key, text));
  return v;
}

bool parse_bool(const std::string& text, const std::string& key)
{
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1" || t == "on")
    return true;
  if (t == "false" || t == "no" || t == "0" || t == "off")
    return false;
  throw InputError(fmt::format("{}: '{}' is not a boolean", key, text));
}

// "x y [z]" with whitespace-separated coordinates.
Point parse_point(const std::string& text, int dim, const std::string& key)
{
  std::istringstream is(text);
  Point p{0.0, 0.0, 0.0};
  std::string tok;
  int n = 0;
  while (is >> tok)
  {
    if (n >= 3)
      throw InputError(fmt::format("{}: too many coordinates in '{}'", key, text));
    p[n++] = parse_number(tok, key);
  }
  if (n != dim && !(dim == 2 && n == 3 && p[2] == 0.0))
    throw InputError(fmt::format("{}: expected {} coordinates in '{}'", key, dim, text));
  return p;
}

std::vector<std::string> split(const std::string& text, char sep)
{
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text)
  {
    if (ch == sep)
    {
      out.push_back(trim(cur));
      cur.clear();
    }
    else
      cur += ch;
  }
  if (!trim(cur).empty() || !out.empty())
    out.push_back(trim(cur));
  return out;
}

std::string format_point(const Point& p, int dim)
{
  return dim == 2 ? fmt::format("{:.10g} {:.10g}", p[0], p[1])
                  : fmt::format("{:.10g} {:.10g} {:.10g}", p[0], p[1], p[2]);
}

std::string format_list(const std::vector<double>& v)
{
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ", " : "") + fmt::format("{:.10g}", v[i]);
  return s;
}

} // namespace

std::vector<std::string> preset_names()
{
  return {"hydrogen2d", "h2plus2d", "hydrogen3d", "h2plus3d"};
}

RunConfig preset(const std::string& name)
{
  if (name == "hydrogen2d")
    return hydrogen2d();
  if (name == "h2plus2d")
    return h2plus2d();
  if (name == "hydrogen3d")
    return hydrogen3d();
  if (name == "h2plus3d")
    return h2plus3d();
  throw InputError(fmt::format("unknown preset '{}'", name));
}

std::vector<double> parse_number_list(const std::string& text)
{
  std::vector<double> out;
  for (const std::string& item : split(text, ','))
  {
    if (item.empty())
      throw InputError(fmt::format("empty entry in list '{}'", text));
    out.push_back(parse_number(item, "list"));
  }
  return out;
}

std::string to_string(MeshKind k)
{
  switch (k)
  {
  case MeshKind::graded_rectangle:
    return "graded-rectangle";
  case MeshKind::ball_shells:
    return "ball-shells";
  case MeshKind::graded_box:
    return "graded-box";
  }
  return "?";
}

MeshKind parse_mesh_kind(const std::string& name)
{
  if (name == "graded-rectangle")
    return MeshKind::graded_rectangle;
  if (name == "ball-shells")
    return MeshKind::ball_shells;
  if (name == "graded-box")
    return MeshKind::graded_box;
  throw InputError(fmt::format("unknown mesh kind '{}'", name));
}

RunConfig load_config(const std::string& path)
{
  pt::ptree tree;
  try
  {
    pt::read_ini(path, tree);
  }
  catch (const pt::ini_parser_error& e)
  {
    throw InputError(fmt::format("cannot read configuration: {}", e.what()));
  }
  auto get = [&](const char* key) -> std::optional<std::string>
  {
    if (auto v = tree.get_optional<std::string>(key))
      return trim(*v);
    return std::nullopt;
  };

  RunConfig c;
  if (auto p = get("problem.preset"))
    c = preset(*p);
  if (auto v = get("problem.name"))
    c.problem = *v;
  if (auto v = get("problem.dim"))
  {
    const double d = parse_number(*v, "problem.dim");
    if (d != 2.0 && d != 3.0)
      throw InputError("problem.dim must be 2 or 3");
    c.potential.dim = static_cast<int>(d);
    c.domain.dim = c.potential.dim;
    c.domain.box.dim = c.potential.dim;
  }
  const int dim = c.potential.dim;
  if (auto v = get("problem.centers"))
  {
    c.potential.centers.clear();
    for (const std::string& s : split(*v, ','))
      c.potential.centers.push_back(parse_point(s, dim, "problem.centers"));
  }
  if (auto v = get("problem.charges"))
    c.potential.charges = parse_number_list(*v);

  if (auto v = get("domain.kind"))
  {
    if (*v == "box")
      c.domain.kind = TruncationDomain::Kind::box;
    else if (*v == "ball")
      c.domain.kind = TruncationDomain::Kind::ball;
    else
      throw InputError(fmt::format("domain.kind: unknown kind '{}'", *v));
  }
  if (auto v = get("domain.lo"))
    c.domain.box.lo = parse_point(*v, dim, "domain.lo");
  if (auto v = get("domain.hi"))
    c.domain.box.hi = parse_point(*v, dim, "domain.hi");
  if (auto v = get("domain.center"))
    c.domain.center = parse_point(*v, dim, "domain.center");
  if (auto v = get("domain.radius"))
    c.domain.radius = parse_number(*v, "domain.radius");

  if (auto v = get("mesh.kind"))
    c.mesh_kind = parse_mesh_kind(*v);
  if (auto v = get("mesh.levels"))
    c.levels = parse_number_list(*v);
  if (auto v = get("mesh.heavy_levels"))
    c.heavy_levels = v->empty() ? std::vector<double>{} : parse_number_list(*v);
  if (auto v = get("mesh.vartheta"))
    c.vartheta = parse_number(*v, "mesh.vartheta");
  if (auto v = get("mesh.growth"))
    c.growth = parse_number(*v, "mesh.growth");
  if (auto v = get("mesh.seed"))
    c.seed = static_cast<std::uint64_t>(parse_number(*v, "mesh.seed"));

  if (auto v = get("shift.epsilon"))
    c.epsilon = parse_number(*v, "shift.epsilon");
  if (auto v = get("shift.C_eps"))
    c.C_eps = *v == "analytic" ? -1.0 : parse_number(*v, "shift.C_eps");
  if (auto v = get("shift.sigma"))
    c.sigma = parse_number(*v, "shift.sigma");
  if (auto v = get("shift.rule"))
  {
    if (*v == "opt")
      c.optimal_shift = true;
    else if (*v == "manual")
      c.optimal_shift = false;
    else
      throw InputError(fmt::format("shift.rule: expected opt or manual, got '{}'", *v));
  }
  if (auto v = get("shift.kappa_target"))
    c.kappa_target = parse_number(*v, "shift.kappa_target");

  if (auto v = get("form.opt_source"))
    c.opt_source = parse_ceps_source(*v);
  if (auto v = get("form.value"))
    c.C_eps_manual = parse_number(*v, "form.value");
  if (auto v = get("form.rigorous"))
    c.rigorous_ceps = parse_bool(*v, "form.rigorous");
  if (auto v = get("form.alpha"))
    c.alpha = parse_number(*v, "form.alpha");
  if (auto v = get("form.C_alpha"))
    c.C_alpha = parse_number(*v, "form.C_alpha");
  if (auto v = get("form.embed"))
    c.embed = parse_number(*v, "form.embed");
  if (auto v = get("form.gamma_baseline"))
    c.gamma_baseline = parse_bool(*v, "form.gamma_baseline");

  if (auto v = get("solver.k_max"))
    c.k_max = static_cast<int>(parse_number(*v, "solver.k_max"));
  if (auto v = get("solver.tol"))
    c.eig.tol = parse_number(*v, "solver.tol");
  if (auto v = get("solver.max_restarts"))
    c.eig.max_restarts = static_cast<int>(parse_number(*v, "solver.max_restarts"));
  if (auto v = get("solver.subspace"))
    c.eig.subspace = static_cast<int>(parse_number(*v, "solver.subspace"));
  if (auto v = get("solver.seed"))
    c.eig.seed = static_cast<std::uint64_t>(parse_number(*v, "solver.seed"));

  if (auto v = get("reference.lambda1_upper"))
    c.lambda1_reference_upper = parse_number(*v, "reference.lambda1_upper");
  if (auto v = get("reference.lambda1"))
    c.lambda1_reference = parse_number(*v, "reference.lambda1");

  if (auto v = get("output.dir"))
    c.output_dir = *v;
  if (auto v = get("output.threads"))
    c.threads = static_cast<int>(parse_number(*v, "output.threads"));

  if (c.C_eps < 0.0)
    c.C_eps = analytic_ceps(c);
  validate_config(c);
  return c;
}

void validate_config(const RunConfig& c)
{
  validate_potential(c.potential);
  if (c.domain.dim != c.potential.dim)
    throw InputError("domain and potential dimensions differ");
  if (c.levels.empty())
    throw InputError("at least one mesh level is required");
  auto check_levels = [](const std::vector<double>& v, const char* what)
  {
    for (std::size_t i = 0; i < v.size(); ++i)
    {
      if (!(v[i] > 0.0))
        throw InputError(fmt::format("{} must be positive", what));
      if (i > 0 && !(v[i] < v[i - 1]))
        throw InputError(fmt::format("{} must be strictly decreasing", what));
    }
  };
  check_levels(c.levels, "mesh levels");
  check_levels(c.heavy_levels, "heavy mesh levels");
  if (!c.heavy_levels.empty() && !(c.heavy_levels.front() < c.levels.back()))
    throw InputError("heavy levels must be finer than the default levels");
  if (c.k_max < 1)
    throw InputError("k_max must be at least 1");
  if (c.threads < 1)
    throw InputError("thread count must be at least 1");
  if (c.domain.kind == TruncationDomain::Kind::box)
  {
    for (int d = 0; d < c.domain.dim; ++d)
      if (!(c.domain.box.hi[d] > c.domain.box.lo[d]))
        throw InputError("box domain has nonpositive extent");
    for (const Point& a : c.potential.centers)
      for (int d = 0; d < c.domain.dim; ++d)
        if (!(a[d] > c.domain.box.lo[d] && a[d] < c.domain.box.hi[d]))
          throw InputError("every center must lie inside the box");
  }
  else if (!(c.domain.radius > 0.0))
    throw InputError("ball domain needs a positive radius");
  switch (c.mesh_kind)
  {
  case MeshKind::graded_rectangle:
    if (c.domain.dim != 2 || c.domain.kind != TruncationDomain::Kind::box)
      throw InputError("graded-rectangle meshes need a 2D box domain");
    break;
  case MeshKind::graded_box:
    if (c.domain.dim != 3 || c.domain.kind != TruncationDomain::Kind::box)
      throw InputError("graded-box meshes need a 3D box domain");
    break;
  case MeshKind::ball_shells:
    if (c.domain.dim != 3 || c.domain.kind != TruncationDomain::Kind::ball)
      throw InputError("ball-shell meshes need a 3D ball domain");
    if (c.domain.center != Point{0.0, 0.0, 0.0} || c.potential.centers.size() != 1 ||
        c.potential.centers[0] != Point{0.0, 0.0, 0.0})
      throw InputError("ball-shell meshes need one center at the origin of the ball");
    if (!(c.growth > 0.0))
      throw InputError("ball shell growth must be positive");
    break;
  }
  if (!(c.vartheta > 0.0 && c.vartheta <= 1.0))
    throw InputError("vartheta must lie in (0, 1]");
  if (c.opt_source == CepsSource::manual && !(c.C_eps_manual >= 0.0))
    throw InputError("manual form constant must be nonnegative");
  if (c.embed && !(*c.embed > 0.0))
    throw InputError("embedding constant must be positive");
  // Constants-stage guard: the shifted form must be coercive.
  try
  {
    a_h_and_kappa(0.0, c.epsilon, c.C_eps, c.sigma);
  }
  catch (const InputError& e)
  {
    throw InputError(fmt::format("constants stage: {}", e.what()));
  }
}

double domain_embedding(const RunConfig& c)
{
  if (c.embed)
    return *c.embed;
  if (c.domain.kind == TruncationDomain::Kind::ball)
    return c6_ball(c.domain.radius).C6;
  const Box& b = c.domain.box;
  if (c.domain.dim == 2)
    return sobolev_rectangle(0.5 * (b.hi[0] - b.lo[0]), 0.5 * (b.hi[1] - b.lo[1])).S8;
  return c6_box(0.5 * (b.hi[0] - b.lo[0]), 0.5 * (b.hi[1] - b.lo[1]), 0.5 * (b.hi[2] - b.lo[2]));
}

double analytic_ceps(const RunConfig& c)
{
  FormBoundSpec s;
  s.epsilon = c.epsilon;
  const auto& centers = c.potential.centers;
  const auto& charges = c.potential.charges;
  if (charges.empty() || std::any_of(charges.begin(), charges.end(),
                                     [&](double z) { return z != charges[0]; }))
    throw InputError("analytic form constant needs equal charges");
  s.Z = charges[0];
  const Box& b = c.domain.box;
  const Point mid{0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1]),
                  0.5 * (b.lo[2] + b.hi[2])};
  for (int d = 0; d < 3; ++d)
    s.a[d] = 0.5 * (b.hi[d] - b.lo[d]);
  if (c.embed)
    s.C6 = *c.embed;
  auto centered = [&](const Point& a) { return a[1] == mid[1] && a[2] == mid[2]; };
  if (centers.size() == 1)
  {
    if (c.domain.kind == TruncationDomain::Kind::ball)
    {
      if (centers[0] != c.domain.center)
        throw InputError("analytic form constant needs the center at the ball center");
      s.geometry = FormGeometry::ball_one_center;
      s.a[0] = c.domain.radius;
    }
    else if (c.domain.dim == 2 && centered(centers[0]) && centers[0][0] == mid[0])
      s.geometry = FormGeometry::rectangle_one_center;
    else
      throw InputError("no analytic form constant for this one-center geometry");
  }
  else if (centers.size() == 2 && c.domain.kind == TruncationDomain::Kind::box &&
           centered(centers[0]) && centered(centers[1]) &&
           centers[0][0] - mid[0] == -(centers[1][0] - mid[0]) && centers[0][0] != mid[0])
  {
    s.geometry = c.domain.dim == 2 ? FormGeometry::rectangle_two_center
                                   : FormGeometry::box_two_center;
    s.offset = std::abs(centers[0][0] - mid[0]);
  }
  else
    throw InputError("no analytic form constant for this geometry");
  return round_up(analytic_form_bound(s), 2);
}

CertifyOptions certify_options(const RunConfig& c)
{
  CertifyOptions o;
  o.epsilon = c.epsilon;
  o.C_eps = c.C_eps;
  o.sigma = c.sigma;
  o.k_max = c.k_max;
  o.embed = domain_embedding(c);
  o.domain = c.domain;
  o.opt_source = c.opt_source;
  o.C_eps_manual = c.C_eps_manual;
  o.optimal_shift = c.optimal_shift;
  o.kappa_target = c.kappa_target;
  o.gamma_baseline = c.gamma_baseline;
  o.rigorous_ceps = c.rigorous_ceps;
  o.alpha = c.alpha;
  o.C_alpha = c.C_alpha;
  o.eig = c.eig;
  return o;
}

std::string describe_config(const RunConfig& c)
{
  const int dim = c.potential.dim;
  std::string s;
  auto line = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  line("problem.name", c.problem);
  line("problem.dim", std::to_string(dim));
  std::string centers;
  for (std::size_t i = 0; i < c.potential.centers.size(); ++i)
    centers += (i ? ", " : "") + format_point(c.potential.centers[i], dim);
  line("problem.centers", centers);
  line("problem.charges", format_list(c.potential.charges));
  if (c.domain.kind == TruncationDomain::Kind::box)
  {
    line("domain.kind", "box");
    line("domain.lo", format_point(c.domain.box.lo, dim));
    line("domain.hi", format_point(c.domain.box.hi, dim));
  }
  else
  {
    line("domain.kind", "ball");
    line("domain.center", format_point(c.domain.center, dim));
    line("domain.radius", fmt::format("{:.10g}", c.domain.radius));
  }
  line("mesh.kind", to_string(c.mesh_kind));
  line("mesh.levels", format_list(c.levels));
  line("mesh.heavy_levels", format_list(c.heavy_levels));
  line("mesh.vartheta", fmt::format("{:.10g}", c.vartheta));
  if (c.mesh_kind == MeshKind::ball_shells)
    line("mesh.growth", fmt::format("{:.10g}", c.growth));
  line("mesh.seed", std::to_string(c.seed));
  line("shift.epsilon", fmt::format("{:.10g}", c.epsilon));
  line("shift.C_eps", fmt::format("{:.10g}", c.C_eps));
  line("shift.sigma", fmt::format("{:.10g}", c.sigma));
  line("shift.rule", c.optimal_shift ? "opt" : "manual");
  line("shift.kappa_target", fmt::format("{:.10g}", c.kappa_target.value_or(1.0 - c.epsilon)));
  line("form.opt_source", to_string(c.opt_source));
  if (c.opt_source == CepsSource::manual)
    line("form.value", fmt::format("{:.10g}", c.C_eps_manual));
  line("form.rigorous", c.rigorous_ceps ? "true" : "false");
  line("form.embed", fmt::format("{:.6f}", domain_embedding(c)));
  line("form.gamma_baseline", c.gamma_baseline ? "true" : "false");
  line("solver.k_max", std::to_string(c.k_max));
  line("solver.tol", fmt::format("{:.10g}", c.eig.tol));
  line("solver.max_restarts", std::to_string(c.eig.max_restarts));
  line("solver.seed", std::to_string(c.eig.seed));
  if (c.lambda1_reference_upper)
    line("reference.lambda1_upper", fmt::format("{:.10g}", *c.lambda1_reference_upper));
  if (c.lambda1_reference)
    line("reference.lambda1", fmt::format("{:.10g}", *c.lambda1_reference));
  line("output.dir", c.output_dir);
  line("output.threads", std::to_string(c.threads));
  return s;
}

} // namespace cecr
