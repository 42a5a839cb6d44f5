// SPDX-License-Identifier: MIT
#include "cecr/constants.hpp"

#include "cecr/errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cecr
{

namespace
{

constexpr double pi = std::numbers::pi;

double patch_exponent(int dim) { return dim == 2 ? 4.0 / 3.0 : 1.5; }

struct ElementKey
{
  double t;  ///< farthest distance to the owning center
  int owner; ///< nearest center by farthest distance
};

ElementKey element_key(const Mesh& mesh, int e, const PotentialSpec& pot)
{
  Point v[4];
  element_points(mesh, e, v);
  ElementKey k{std::numeric_limits<double>::infinity(), -1};
  for (std::size_t i = 0; i < pot.centers.size(); ++i)
  {
    const double t = point_simplex_max_distance(mesh.dim, v, pot.centers[i]);
    if (t < k.t)
      k = {t, static_cast<int>(i)};
  }
  return k;
}

void check_inputs(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot)
{
  validate_potential(pot);
  if (pot.dim != mesh.dim)
    throw InputError("potential and mesh dimensions differ");
  if (static_cast<int>(ch.values.size()) != mesh.num_elements())
    throw InputError("cell field size does not match the mesh");
}

double off_patch_term(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot, int e)
{
  return 0.5 * mesh.h[e] * sup_deviation(mesh, e, pot, ch.values[e]);
}

// Maximizes f over the closed positive part of the unit sphere in R^n
// (n = 2 or 3) by a dense angular grid followed by compass search.
template <class F>
double maximize_on_sphere(int n, F&& f)
{
  auto point = [n](double s, double t)
  {
    std::array<double, 3> x{};
    if (n == 2)
      x = {std::cos(s), std::sin(s), 0.0};
    else
      x = {std::cos(s), std::sin(s) * std::cos(t), std::sin(s) * std::sin(t)};
    return x;
  };
  const double hi = 0.5 * pi;
  const int grid = 200;
  const int nt = n == 2 ? 0 : grid;
  double best = -std::numeric_limits<double>::infinity(), bs = 0.0, bt = 0.0;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= nt; ++j)
    {
      const double s = hi * i / grid, t = nt ? hi * j / grid : 0.0;
      const double v = f(point(s, t));
      if (v > best)
        best = v, bs = s, bt = t;
    }
  double step = hi / grid;
  while (step > 1e-13)
  {
    bool moved = false;
    for (int d = 0; d < (n == 2 ? 1 : 2); ++d)
      for (double sgn : {-1.0, 1.0})
      {
        double s = bs, t = bt;
        (d == 0 ? s : t) += sgn * step;
        if (s < 0.0 || s > hi || t < 0.0 || t > hi)
          continue;
        const double v = f(point(s, t));
        if (v > best)
          best = v, bs = s, bt = t, moved = true;
      }
    if (!moved)
      step *= 0.5;
  }
  return best;
}

// Z / rho + Z (3 pi)^{3/4} (1/(4a) + 1/(4b)) rho^{1/2} + Z^2 (3 pi)^{3/2} rho / (2 eps),
// minimized over 0 < rho <= min(a, b).
double disk_split_bound_2d(double a, double b, double Z, double eps)
{
  const double c1 = Z * std::pow(3.0 * pi, 0.75) * (0.25 / a + 0.25 / b);
  const double c2 = Z * Z * std::pow(3.0 * pi, 1.5) / (2.0 * eps);
  auto g = [&](double rho) { return Z / rho + c1 * std::sqrt(rho) + c2 * rho; };
  const auto r = boost::math::tools::brent_find_minima(g, 1e-12, std::min(a, b), 60);
  return r.second;
}

} // namespace

double payne_weinberger(const Mesh& mesh)
{
  double h = 0.0;
  for (double hk : mesh.h)
    h = std::max(h, hk);
  return h / pi;
}

double gamma_h(const Mesh& mesh, const CellField& ch)
{
  if (static_cast<int>(ch.values.size()) != mesh.num_elements())
    throw InputError("cell field size does not match the mesh");
  double g = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e)
    g = std::max(g, std::max(-ch.values[e], 0.0) * mesh.h[e] * mesh.h[e]);
  return g / (pi * pi);
}

ShiftConstants a_h_and_kappa(double Gamma_h, double epsilon, double C_eps, double sigma)
{
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InputError(fmt::format("epsilon must lie in (0, 1), got {}", epsilon));
  if (!(Gamma_h >= 0.0))
    throw InputError("Gamma_h must be nonnegative");
  if (!(sigma > C_eps))
    throw InputError(fmt::format("kappa nonpositive: sigma = {} must exceed C_eps = {}", sigma,
                                 C_eps));
  return {Gamma_h / (1.0 - epsilon), std::min(1.0 - epsilon, sigma - C_eps)};
}

PerturbationBound eps_direct(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                             double rho, double embed)
{
  check_inputs(mesh, ch, pot);
  const double p = patch_exponent(mesh.dim);
  std::vector<double> norm_p(pot.centers.size(), 0.0);
  PerturbationBound out;
  out.rho = rho;
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    const ElementKey k = element_key(mesh, e, pot);
    if (k.t <= rho)
    {
      norm_p[k.owner] += integral_abs_deviation_pow(mesh, e, pot, ch.values[e], p);
      ++out.patch_elements;
    }
    else if (touches_center(mesh, e))
      throw InputError(
        fmt::format("patch radius {} excludes an element touching a center (needs >= {})", rho,
                    k.t));
    else
      out.c_star = std::max(out.c_star, off_patch_term(mesh, ch, pot, e));
  }
  for (double s : norm_p)
    out.c0 += std::pow(s, 1.0 / p);
  out.c0 *= embed * embed;
  out.d_h = out.c0 + out.c_star;
  return out;
}

PerturbationBound eps_direct_2d(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                                double rho, double S8)
{
  if (mesh.dim != 2)
    throw InputError("eps_direct_2d needs a 2D mesh");
  return eps_direct(mesh, ch, pot, rho, S8);
}

PerturbationBound eps_direct_3d(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                                double rho, double C6)
{
  if (mesh.dim != 3)
    throw InputError("eps_direct_3d needs a 3D mesh");
  return eps_direct(mesh, ch, pot, rho, C6);
}

PerturbationBound optimal_patch_radius(const Mesh& mesh, const CellField& ch,
                                       const PotentialSpec& pot, double embed)
{
  check_inputs(mesh, ch, pot);
  const int ne = mesh.num_elements();
  const double p = patch_exponent(mesh.dim);
  std::vector<ElementKey> key(ne);
  double rho_min = 0.0;
  for (int e = 0; e < ne; ++e)
  {
    key[e] = element_key(mesh, e, pot);
    if (touches_center(mesh, e))
      rho_min = std::max(rho_min, key[e].t);
  }
  std::vector<int> order(ne);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return key[x].t < key[y].t || (key[x].t == key[y].t && x < y); });

  // suffix[i]: largest off-patch term among order[i..].
  std::vector<double> suffix(ne + 1, 0.0);
  for (int i = ne - 1; i >= 0; --i)
  {
    const int e = order[i];
    suffix[i] = std::max(suffix[i + 1], touches_center(mesh, e)
                                          ? std::numeric_limits<double>::infinity()
                                          : off_patch_term(mesh, ch, pot, e));
  }

  std::vector<double> norm_p(pot.centers.size(), 0.0);
  auto c0_now = [&]
  {
    double c = 0.0;
    for (double s : norm_p)
      c += std::pow(s, 1.0 / p);
    return embed * embed * c;
  };
  PerturbationBound best;
  best.d_h = std::numeric_limits<double>::infinity();
  int i = 0;
  while (i < ne)
  {
    // Add the whole group of elements sharing this key.
    const double t = key[order[i]].t;
    while (i < ne && key[order[i]].t == t)
    {
      const int e = order[i];
      norm_p[key[e].owner] += integral_abs_deviation_pow(mesh, e, pot, ch.values[e], p);
      ++i;
    }
    if (t < rho_min)
      continue;
    const double c0 = c0_now();
    const double cs = suffix[i];
    if (c0 + cs < best.d_h)
      best = {c0 + cs, c0, cs, t, i};
    if (c0 >= best.d_h)
      break; // c0 never decreases
  }
  return best;
}

std::function<double(const Mesh&, double)> balanced_patch_rule(const PotentialSpec& pot,
                                                                double embed, double tau)
{
  return [pot, embed, tau](const Mesh& mesh, double rho)
  {
    const CellField ch = assemble_ch(mesh, pot);
    double rho_mesh = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e)
      if (touches_center(mesh, e))
        rho_mesh = std::max(rho_mesh, element_key(mesh, e, pot).t);
    const PerturbationBound b = eps_direct(mesh, ch, pot, rho_mesh, embed);
    if (!(b.c0 > 0.0) || !(b.c_star > 0.0))
      return rho;
    // c0 scales like rho^{1/2} in 2D and like rho in 3D.
    const double power = mesh.dim == 2 ? 2.0 : 1.0;
    const double factor = std::clamp(std::pow(tau * b.c_star / b.c0, power), 0.05, 20.0);
    return rho * factor;
  };
}

RectangleSobolev sobolev_rectangle(double a, double b)
{
  if (!(a > 0.0 && b > 0.0))
    throw InputError("rectangle half-widths must be positive");
  RectangleSobolev s{};
  const double s4_4 = maximize_on_sphere(3,
                                         [&](const std::array<double, 3>& x)
                                         {
                                           const double A = x[0], Bx = x[1], By = x[2];
                                           return (A * A / (2 * a) + 2 * A * Bx) *
                                                  (A * A / (2 * b) + 2 * A * By);
                                         });
  s.S4 = std::pow(s4_4, 0.25);
  const double m6 = maximize_on_sphere(3,
                                       [&](const std::array<double, 3>& x)
                                       {
                                         const double A = x[0], Bx = x[1], By = x[2];
                                         return (A / (2 * a) + 3 * Bx) * (A / (2 * b) + 3 * By);
                                       });
  s.S6 = std::pow(s4_4 * m6, 1.0 / 6.0);
  const double s6_3 = std::pow(s.S6, 3);
  const double m8 = maximize_on_sphere(2,
                                       [&](const std::array<double, 3>& x)
                                       {
                                         return (s4_4 / (2 * a) + 4 * s6_3 * x[0]) *
                                                (s4_4 / (2 * b) + 4 * s6_3 * x[1]);
                                       });
  s.S8 = std::pow(m8, 0.125);
  return s;
}

double c6_box(double a, double b, double c)
{
  if (!(a > 0.0 && b > 0.0 && c > 0.0))
    throw InputError("box half-widths must be positive");
  return std::cbrt((1.0 + 4.0 * (a * a + b * b + c * c)) / (8.0 * a * b * c));
}

double sobolev_constant_r3() { return std::cbrt(4.0 / std::sqrt(pi)) / std::sqrt(3.0 * pi); }

BallEmbedding c6_ball(double R)
{
  if (!(R > 0.0))
    throw InputError("ball radius must be positive");
  // 2 + 1/delta = 16 (1 + delta) / R^2  <=>  16 d^2 + (16 - 2 R^2) d - R^2 = 0.
  const double qa = 16.0, qb = 16.0 - 2.0 * R * R, qc = -R * R;
  const double disc = std::sqrt(qb * qb - 4.0 * qa * qc);
  // Positive root, written to avoid cancellation.
  const double delta = qb <= 0.0 ? (-qb + disc) / (2.0 * qa) : (2.0 * qc) / (-qb - disc);
  const double m = std::max(2.0 + 1.0 / delta, 16.0 * (1.0 + delta) / (R * R));
  return {delta, sobolev_constant_r3() * std::sqrt(m)};
}

double analytic_form_bound(const FormBoundSpec& s)
{
  if (!(s.epsilon > 0.0 && s.epsilon < 1.0))
    throw InputError("epsilon must lie in (0, 1)");
  if (!(s.Z >= 0.0))
    throw InputError("charge must be nonnegative");
  const double vol_factor = std::pow(8.0 * pi / 3.0, 2.0 / 3.0);
  switch (s.geometry)
  {
  case FormGeometry::rectangle_one_center:
    return disk_split_bound_2d(s.a[0], s.a[1], s.Z, s.epsilon);
  case FormGeometry::rectangle_two_center:
  {
    if (!(s.offset > 0.0 && s.offset < s.a[0]))
      throw InputError("centers must lie strictly inside the rectangle");
    // Each half-rectangle carries its near center; the far one is bounded by Z / offset.
    return disk_split_bound_2d(0.5 * s.a[0], s.a[1], s.Z, s.epsilon) + s.Z / s.offset;
  }
  case FormGeometry::ball_one_center:
  {
    const double C6 = s.C6 > 0.0 ? s.C6 : c6_ball(s.a[0]).C6;
    const double A = vol_factor * C6 * C6;
    if (s.Z > 0.0 && !(s.epsilon / (s.Z * A) < s.a[0]))
      throw InputError("inner ball radius exceeds the domain");
    return s.Z * s.Z * A / s.epsilon + s.epsilon;
  }
  case FormGeometry::box_two_center:
  {
    if (!(s.offset > 0.0 && s.offset < s.a[0]))
      throw InputError("centers must lie strictly inside the box");
    const double C6 = s.C6 > 0.0 ? s.C6 : c6_box(s.a[0], s.a[1], s.a[2]);
    const double A = vol_factor * C6 * C6;
    return s.Z * s.Z * A / s.epsilon + s.epsilon + s.Z / s.offset;
  }
  }
  throw InputError("unsupported form-bound geometry");
}

double round_up(double x, int decimals)
{
  const double scale = std::pow(10.0, decimals);
  const double y = x * scale;
  const double r = std::nearbyint(y);
  // Values already on the grid up to rounding noise stay put.
  if (std::abs(y - r) <= 1e-9 * std::max(1.0, std::abs(y)))
    return r / scale;
  return std::ceil(y) / scale;
}

FormGeometry parse_form_geometry(const std::string& name)
{
  if (name == "rectangle-1c")
    return FormGeometry::rectangle_one_center;
  if (name == "rectangle-2c")
    return FormGeometry::rectangle_two_center;
  if (name == "ball-1c")
    return FormGeometry::ball_one_center;
  if (name == "box-2c")
    return FormGeometry::box_two_center;
  throw InputError(fmt::format("unsupported form-bound geometry '{}'", name));
}

} // namespace cecr
