// SPDX-License-Identifier: MIT
#include "cecr/certify.hpp"

#include "cecr/assembly.hpp"
#include "cecr/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace cecr
{

namespace
{

constexpr double pi = std::numbers::pi;

// Compass search for a local minimum of f on [0, 1]^n (n = 1 or 2).
template <class F>
double refine_min(int n, F&& f, double s, double t, double step)
{
  double best = f(s, t);
  while (step > 1e-13)
  {
    bool moved = false;
    for (int d = 0; d < n; ++d)
      for (double sgn : {-1.0, 1.0})
      {
        double ss = s, tt = t;
        (d == 0 ? ss : tt) += sgn * step;
        ss = std::clamp(ss, 0.0, 1.0);
        tt = std::clamp(tt, 0.0, 1.0);
        const double v = f(ss, tt);
        if (v < best)
          best = v, s = ss, t = tt, moved = true;
      }
    if (!moved)
      step *= 0.5;
  }
  return best;
}

// Minimum of f over [0, 1]^n: dense grid, then refinement from every grid
// local minimum.
template <class F>
double minimize_unit(int n, F&& f, int grid)
{
  const int nt = n == 2 ? grid : 0;
  std::vector<double> val((grid + 1) * (nt + 1));
  auto at = [&](int i, int j) -> double& { return val[i * (nt + 1) + j]; };
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= nt; ++j)
      at(i, j) = f(double(i) / grid, nt ? double(j) / nt : 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= nt; ++j)
    {
      bool local = true;
      for (int di = -1; di <= 1 && local; ++di)
        for (int dj = -1; dj <= 1; ++dj)
        {
          const int ii = i + di, jj = j + dj;
          if ((di || dj) && ii >= 0 && ii <= grid && jj >= 0 && jj <= nt && at(ii, jj) < at(i, j))
          {
            local = false;
            break;
          }
        }
      if (local)
        best = std::min(best, refine_min(n, f, double(i) / grid, nt ? double(j) / nt : 0.0,
                                         1.0 / grid));
    }
  return best;
}

double eigen_lower_value(const EigenResult& r, int i) { return r.values[i] - r.certificates[i]; }
double eigen_upper_value(const EigenResult& r, int i) { return r.values[i] + r.certificates[i]; }

EigenResult solve_checked(const SparseMatrix& A, const SparseMatrix& B, int k,
                          const EigenOptions& eig, const char* what)
{
  EigenResult r = smallest_eigenpairs(A, B, k, eig);
  if (!r.converged)
    throw NumericalError(fmt::format("eigensolver did not converge ({})", what));
  return r;
}

} // namespace

double cecr_lower_bound_positive(double mu_kh, double C_h)
{
  if (!(mu_kh > 0.0))
    throw InputError("positive-case bound needs a positive Ritz value");
  return mu_kh / (1.0 + C_h * C_h * mu_kh);
}

double cecr_lower_bound_gamma_shift(double mu_kh, double gamma_h, double C_h)
{
  const double A = mu_kh + gamma_h;
  if (!(A > 0.0))
    throw InputError("gamma-shift bound needs mu + gamma > 0");
  return A / (1.0 + A * C_h * C_h) - gamma_h;
}

double cecr_lower_bound_convergent(double mu_sigma, double C_h, double A_h, double sigma)
{
  if (!(mu_sigma > 0.0))
    throw CertificationRefused(
      fmt::format("inadmissible shift: first shifted Ritz value {} is not positive", mu_sigma));
  return mu_sigma / ((1.0 + A_h) * (1.0 + C_h * C_h * mu_sigma)) - sigma;
}

double perturbation_correct(double L_mu_sigma, double eps_h, double sigma)
{
  if (!(eps_h >= 0.0))
    throw InputError("perturbation ratio must be nonnegative");
  if (eps_h > 1.0)
    throw CertificationRefused(fmt::format("perturbation ratio eps_h = {} exceeds 1", eps_h));
  return (1.0 - eps_h) * (L_mu_sigma + sigma) - sigma;
}

Confinement confinement_check(const PotentialSpec& pot, const TruncationDomain& d,
                              double lambda1_upper)
{
  validate_potential(pot);
  auto V = [&](const Point& x) { return coulomb_potential(pot, x); };
  double inf = std::numeric_limits<double>::infinity();
  if (d.kind == TruncationDomain::Kind::ball)
  {
    if (!(d.radius > 0.0))
      throw InputError("ball radius must be positive");
    for (const Point& a : pot.centers)
      if (!(distance(a, d.center) < d.radius))
        throw InputError("centers must lie inside the truncation domain");
    if (d.dim == 2)
      inf = minimize_unit(1,
                          [&](double s, double)
                          {
                            const double t = 2.0 * pi * s;
                            return V({d.center[0] + d.radius * std::cos(t),
                                      d.center[1] + d.radius * std::sin(t), 0.0});
                          },
                          4000);
    else
      inf = minimize_unit(2,
                          [&](double s, double t)
                          {
                            const double th = pi * s, ph = 2.0 * pi * t;
                            return V({d.center[0] + d.radius * std::sin(th) * std::cos(ph),
                                      d.center[1] + d.radius * std::sin(th) * std::sin(ph),
                                      d.center[2] + d.radius * std::cos(th)});
                          },
                          300);
  }
  else
  {
    const Box& b = d.box;
    for (const Point& a : pot.centers)
      for (int r = 0; r < d.dim; ++r)
        if (!(a[r] > b.lo[r] && a[r] < b.hi[r]))
          throw InputError("centers must lie inside the truncation domain");
    for (int axis = 0; axis < d.dim; ++axis)
      for (double side : {b.lo[axis], b.hi[axis]})
      {
        // The remaining coordinates span the face.
        int u = -1, w = -1;
        for (int r = 0; r < d.dim; ++r)
          if (r != axis)
            (u < 0 ? u : w) = r;
        auto f = [&](double s, double t)
        {
          Point x{0.0, 0.0, 0.0};
          x[axis] = side;
          x[u] = b.lo[u] + s * (b.hi[u] - b.lo[u]);
          if (w >= 0)
            x[w] = b.lo[w] + t * (b.hi[w] - b.lo[w]);
          return V(x);
        };
        inf = std::min(inf, minimize_unit(d.dim - 1, f, d.dim == 2 ? 4000 : 200));
      }
  }
  return {inf, inf > lambda1_upper};
}

double confinement_radius(double Z, double lambda1)
{
  if (!(Z > 0.0 && lambda1 < 0.0))
    throw InputError("confinement radius needs Z > 0 and a negative eigenvalue");
  return Z / std::abs(lambda1);
}

DiagnosticCeps ceps_diagnostic_p1(const Mesh& mesh, const CellField& ch, double epsilon,
                                  const EigenOptions& eig)
{
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InputError("epsilon must lie in (0, 1)");
  std::vector<double> neg(mesh.num_elements());
  bool any = false;
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    neg[e] = std::max(-ch.values.at(e), 0.0);
    any = any || neg[e] > 0.0;
  }
  if (!any)
    return {0.0, 0.0};
  const DiscreteSystem sys = assemble_p1(mesh, nullptr, Boundary::neumann);
  const SparseMatrix A = epsilon * sys.K - p1_weighted_mass(mesh, sys, neg);
  const EigenResult r = solve_checked(A, sys.M, 1, eig, "form-constant diagnostic");
  return {std::max(0.0, -r.values[0]), r.values[0]};
}

RigorousCeps certified_ceps_rigorous(const Mesh& mesh, const CellField& ch, double epsilon,
                                     double alpha, double C_alpha, double sigma_star,
                                     const EigenOptions& eig, int max_retries)
{
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InputError("epsilon must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < epsilon))
    throw InputError("preliminary coefficient alpha must lie in (0, epsilon)");
  if (!(C_alpha >= 0.0))
    throw InputError("preliminary constant must be nonnegative");
  RigorousCeps out{};
  CellField q;
  q.values.resize(mesh.num_elements());
  bool any = false;
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    q.values[e] = std::min(ch.values.at(e), 0.0) / epsilon;
    any = any || q.values[e] < 0.0;
  }
  if (!any)
    return out;
  const double eps_star = alpha / epsilon, C_star = C_alpha / epsilon;
  out.sigma_star = sigma_star > C_star ? sigma_star : C_star + 1.0;
  out.Gamma_star = gamma_h(mesh, q);
  out.A_star = out.Gamma_star / (1.0 - eps_star);
  const double Ct = payne_weinberger(mesh);
  const DiscreteSystem sys = assemble_ecr(mesh, q);
  for (;; ++out.retries)
  {
    EigenOptions o = eig;
    o.shift = 0.0;
    const EigenResult r =
      solve_checked(shifted_cecr_matrix(sys, out.sigma_star), sys.M, 1, o, "scaled problem");
    out.nu_sigma = eigen_lower_value(r, 0);
    if (out.nu_sigma > 0.0)
      break;
    if (out.retries >= max_retries)
      throw NumericalError("shifted scaled problem stays indefinite after raising the shift");
    out.sigma_star += std::max(1.0, out.sigma_star);
  }
  out.nu_lower = out.nu_sigma / ((1.0 + out.A_star) * (1.0 + Ct * Ct * out.nu_sigma)) -
                 out.sigma_star;
  out.C_eps = std::max(0.0, -epsilon * out.nu_lower);
  return out;
}

CepsSource parse_ceps_source(const std::string& name)
{
  if (name == "analytic")
    return CepsSource::analytic;
  if (name == "diagnostic")
    return CepsSource::diagnostic;
  if (name == "rigorous")
    return CepsSource::rigorous;
  if (name == "manual")
    return CepsSource::manual;
  throw InputError(fmt::format("unknown form-constant source '{}'", name));
}

std::string to_string(CepsSource s)
{
  switch (s)
  {
  case CepsSource::analytic:
    return "analytic";
  case CepsSource::diagnostic:
    return "diagnostic";
  case CepsSource::rigorous:
    return "rigorous";
  case CepsSource::manual:
    return "manual";
  }
  return "?";
}

namespace
{

LevelResult certify_level_staged(const Mesh& mesh, const PotentialSpec& pot, double h_nominal,
                                 const CertifyOptions& opt, const char*& stage)
{
  if (opt.k_max < 1)
    throw InputError("k_max must be at least 1");
  if (!(opt.embed > 0.0))
    throw InputError("embedding constant must be positive");
  LevelResult res;
  res.h = h_nominal;
  res.num_elements = mesh.num_elements();
  res.num_vertices = mesh.num_vertices();
  const int k = opt.k_max;
  auto clock = std::chrono::steady_clock::now();
  auto lap = [&](const char* stage)
  {
    const auto now = std::chrono::steady_clock::now();
    res.timings.emplace_back(stage, std::chrono::duration<double>(now - clock).count());
    clock = now;
  };

  stage = "constants";
  // Constants.
  const CellField ch = assemble_ch(mesh, pot);
  ConstantsBundle& cb = res.constants;
  cb.C_h_PW = payne_weinberger(mesh);
  res.h_max = cb.C_h_PW * pi;
  cb.Gamma_h = gamma_h(mesh, ch);
  cb.epsilon = opt.epsilon;
  cb.C_eps = opt.C_eps;
  cb.sigma = opt.sigma;
  const ShiftConstants sc = a_h_and_kappa(cb.Gamma_h, opt.epsilon, opt.C_eps, opt.sigma);
  cb.A_h = sc.A_h;
  cb.kappa_sigma = sc.kappa_sigma;
  cb.embed = opt.embed;
  res.patch = optimal_patch_radius(mesh, ch, pot, opt.embed);
  cb.d_h = res.patch.d_h;
  cb.c0 = res.patch.c0;
  cb.c_star = res.patch.c_star;
  cb.rho_patch = res.patch.rho;
  cb.eps_h = cb.d_h / cb.kappa_sigma;
  for (double c : ch.values)
    res.gamma_inf = std::max(res.gamma_inf, -c);
  lap("constants");

  stage = "upper bounds";
  // Conforming upper bounds.
  const DiscreteSystem p1 = assemble_p1(mesh, &pot, Boundary::dirichlet);
  const EigenResult ru = solve_checked(p1.K + p1.CP1, p1.M, k, opt.eig, "P1 Dirichlet system");
  res.enclosures.resize(k);
  for (int i = 0; i < k; ++i)
    res.enclosures[i].U = eigen_upper_value(ru, i);

  lap("upper bounds");

  stage = "rough shift";
  // Rough shift.
  const DiscreteSystem ecr = assemble_ecr(mesh, ch);
  EigenOptions eo = opt.eig;
  eo.estimate = res.enclosures[0].U + opt.sigma;
  const EigenResult rs = solve_checked(shifted_cecr_matrix(ecr, opt.sigma), ecr.M, k, eo,
                                       "shifted CECR system");
  res.admissible = eigen_lower_value(rs, 0) > 0.0;
  for (int i = 0; i < k; ++i)
  {
    Enclosure& en = res.enclosures[i];
    en.k = i + 1;
    en.mu_sigma = rs.values[i];
    en.mu_sigma_cert = rs.certificates[i];
    en.L_mu_sigma =
      cecr_lower_bound_convergent(eigen_lower_value(rs, i), cb.C_h_PW, cb.A_h, opt.sigma);
    en.L = perturbation_correct(en.L_mu_sigma, cb.eps_h, opt.sigma);
  }

  lap("rough shift");

  stage = "confinement";
  const Confinement conf = confinement_check(pot, opt.domain, res.enclosures[0].U);
  res.sigma_ext = conf.sigma_ext;
  res.confinement_ok = conf.ok;
  if (!conf.ok)
    res.notes.push_back("confinement condition fails: the bound covers the truncated problem only");

  stage = "baseline";
  // Classical gamma_h-shift baseline.
  if (opt.gamma_baseline)
  {
    EigenOptions eb = opt.eig;
    eb.estimate = rs.values[0] - opt.sigma;
    const EigenResult rb =
      solve_checked(shifted_cecr_matrix(ecr, 0.0), ecr.M, k, eb, "unshifted CECR system");
    for (int i = 0; i < k; ++i)
    {
      Enclosure& en = res.enclosures[i];
      en.mu_h = rb.values[i];
      const double mu = eigen_lower_value(rb, i);
      if (mu + res.gamma_inf > 0.0)
      {
        en.L_gamma = cecr_lower_bound_gamma_shift(mu, res.gamma_inf, cb.C_h_PW);
        en.has_gamma = true;
      }
    }
  }
  lap("baseline");

  stage = "form constants";
  // Form constants.
  res.C_eps_diag = ceps_diagnostic_p1(mesh, ch, opt.epsilon, opt.eig).C_eps;
  if (opt.rigorous_ceps || opt.opt_source == CepsSource::rigorous)
    res.C_eps_rigorous =
      certified_ceps_rigorous(mesh, ch, opt.epsilon, opt.alpha, opt.C_alpha, 0.0, opt.eig).C_eps;
  lap("form constants");

  stage = "optimal shift";
  // Optimal shift.
  if (opt.optimal_shift)
  {
    switch (opt.opt_source)
    {
    case CepsSource::analytic:
      res.C_eps_cert = opt.C_eps;
      break;
    case CepsSource::diagnostic:
      res.C_eps_cert = res.C_eps_diag;
      break;
    case CepsSource::rigorous:
      res.C_eps_cert = res.C_eps_rigorous;
      break;
    case CepsSource::manual:
      res.C_eps_cert = opt.C_eps_manual;
      break;
    }
    const double kappa_t = opt.kappa_target.value_or(1.0 - opt.epsilon);
    res.sigma_opt = res.C_eps_cert + kappa_t;
    const ShiftConstants so =
      a_h_and_kappa(cb.Gamma_h, opt.epsilon, res.C_eps_cert, res.sigma_opt);
    res.kappa_opt = so.kappa_sigma;
    res.eps_h_opt = cb.d_h / res.kappa_opt;
    eo.estimate = rs.values[0] - opt.sigma + res.sigma_opt;
    const EigenResult ro = solve_checked(shifted_cecr_matrix(ecr, res.sigma_opt), ecr.M, k, eo,
                                         "optimally shifted CECR system");
    res.admissible_opt = eigen_lower_value(ro, 0) > 0.0;
    if (!res.admissible_opt)
      res.notes.push_back("optimal shift inadmissible: rough-shift enclosure kept");
    else if (res.eps_h_opt > 1.0)
      res.notes.push_back("eps_h at the optimal shift exceeds 1: rough-shift enclosure kept");
    else
      for (int i = 0; i < k; ++i)
      {
        Enclosure& en = res.enclosures[i];
        en.mu_sigma_opt = ro.values[i];
        en.L_mu_sigma_opt = cecr_lower_bound_convergent(eigen_lower_value(ro, i), cb.C_h_PW,
                                                        cb.A_h, res.sigma_opt);
        en.L_opt = perturbation_correct(en.L_mu_sigma_opt, res.eps_h_opt, res.sigma_opt);
        en.has_opt = true;
      }
  }

  lap("optimal shift");
  stage = "consistency";
  for (const Enclosure& en : res.enclosures)
  {
    if (en.L > en.U || (en.has_opt && en.L_opt > en.U))
      throw NumericalError(fmt::format(
        "inconsistent enclosure for k = {}: lower bound {} exceeds upper bound {}", en.k,
        en.has_opt ? std::max(en.L, en.L_opt) : en.L, en.U));
  }
  return res;
}

} // namespace

LevelResult certify_level(const Mesh& mesh, const PotentialSpec& pot, double h_nominal,
                          const CertifyOptions& opt)
{
  const char* stage = "setup";
  try
  {
    return certify_level_staged(mesh, pot, h_nominal, opt, stage);
  }
  catch (const InputError& e)
  {
    throw InputError(fmt::format("{} stage: {}", stage, e.what()));
  }
  catch (const CertificationRefused& e)
  {
    throw CertificationRefused(fmt::format("{} stage: {}", stage, e.what()));
  }
  catch (const NumericalError& e)
  {
    throw NumericalError(fmt::format("{} stage: {}", stage, e.what()));
  }
}

std::vector<std::optional<double>> eoc(const std::vector<double>& gaps,
                                       const std::vector<double>& hs)
{
  if (gaps.size() != hs.size())
    throw InputError("gap and mesh-size lists differ in length");
  std::vector<std::optional<double>> out;
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
  {
    if (!(hs[i] > hs[i + 1] && hs[i + 1] > 0.0))
      throw InputError("mesh sizes must be positive and strictly decreasing");
    if (gaps[i] > 0.0 && gaps[i + 1] > 0.0)
      out.emplace_back(std::log(gaps[i] / gaps[i + 1]) / std::log(hs[i] / hs[i + 1]));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

std::vector<Separation> spectral_separation(const std::vector<double>& lower,
                                            const std::vector<double>& upper)
{
  if (lower.size() != upper.size())
    throw InputError("lower and upper bound lists differ in length");
  std::vector<Separation> out;
  for (std::size_t i = 0; i + 1 < lower.size(); ++i)
  {
    const bool sep = upper[i] < lower[i + 1];
    out.push_back({static_cast<int>(i) + 1, sep, sep ? lower[i + 1] - upper[i] : 0.0});
  }
  return out;
}

namespace
{

std::string num(double x) { return fmt::format("{:.10g}", x); }
std::string opt_num(bool has, double x) { return has ? num(x) : std::string(); }

} // namespace

void write_enclosure_csv(std::ostream& os, const std::vector<LevelResult>& levels)
{
  os << "h,N_elem,h_max,Gamma_h,A_h,d_h,rho_patch,eps_h_star,C_eps_diag,C_eps_rigorous,"
        "C_eps_cert,sigma,sigma_opt,eps_h_opt,k,mu_sigma_minus_sigma,L_mu_sigma,L_star,"
        "L_gamma,L_opt,U,admissible,confinement_ok\n";
  for (const LevelResult& r : levels)
    for (const Enclosure& e : r.enclosures)
      fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                 num(r.h), r.num_elements, num(r.h_max), num(r.constants.Gamma_h),
                 num(r.constants.A_h), num(r.constants.d_h), num(r.constants.rho_patch),
                 num(r.constants.eps_h), num(r.C_eps_diag),
                 r.C_eps_rigorous >= 0.0 ? num(r.C_eps_rigorous) : std::string(),
                 num(r.C_eps_cert), num(r.constants.sigma), num(r.sigma_opt), num(r.eps_h_opt),
                 e.k, num(e.mu_sigma - r.constants.sigma), num(e.L_mu_sigma), num(e.L),
                 opt_num(e.has_gamma, e.L_gamma), opt_num(e.has_opt, e.L_opt), num(e.U),
                 r.admissible ? 1 : 0, r.confinement_ok ? 1 : 0);
}

} // namespace cecr
