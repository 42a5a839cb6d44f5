// SPDX-License-Identifier: MIT
#include "cecr/oracle.hpp"

#include "cecr/assembly.hpp"
#include "cecr/certify.hpp"
#include "cecr/constants.hpp"
#include "cecr/eigensolver.hpp"
#include "cecr/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <vector>

namespace cecr
{

namespace
{

using Simplex = std::array<Point, 4>;
using Integrand = std::function<double(const Point&)>;

Point lerp(const Point& a, const Point& b, double t)
{
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

double rule_on(int dim, const Simplex& s, const Integrand& f, int n)
{
  const SimplexRule& R = simplex_rule(dim, n);
  const double jac = std::abs(simplex_signed_volume(dim, s.data())) * (dim == 2 ? 2.0 : 6.0);
  double sum = 0.0;
  for (std::size_t q = 0; q < R.weights.size(); ++q)
  {
    Point x = s[0];
    for (int i = 1; i <= dim; ++i)
      for (int d = 0; d < 3; ++d)
        x[d] += R.points[q][i - 1] * (s[i][d] - s[0][d]);
    sum += R.weights[q] * f(x);
  }
  return sum * jac;
}

// Bisects the longest edge.
std::array<Simplex, 2> bisect(int dim, const Simplex& s)
{
  int bi = 0, bj = 1;
  double best = -1.0;
  for (int i = 0; i <= dim; ++i)
    for (int j = i + 1; j <= dim; ++j)
    {
      const double l = distance(s[i], s[j]);
      if (l > best)
      {
        best = l;
        bi = i;
        bj = j;
      }
    }
  const Point m = lerp(s[bi], s[bj], 0.5);
  Simplex a = s, b = s;
  a[bj] = m;
  b[bi] = m;
  return {a, b};
}

// Globally adaptive: always splits the piece with the largest error estimate,
// so kinks along a curve do not force uniform refinement.
double integrate(int dim, const Simplex& s, const Integrand& f, double rel_tol)
{
  const int order = dim == 2 ? 10 : 6;
  struct Piece
  {
    double err;
    double value;
    Simplex s;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  // Three refinement levels; an estimate from two levels alone can cancel by
  // accident on pieces that straddle a kink.
  auto make = [&](const Simplex& x)
  {
    const double whole = rule_on(dim, x, f, order);
    double half = 0.0, quarter = 0.0;
    for (const Simplex& k : bisect(dim, x))
    {
      half += rule_on(dim, k, f, order);
      for (const Simplex& kk : bisect(dim, k))
        quarter += rule_on(dim, kk, f, order);
    }
    return Piece{std::max(std::abs(quarter - whole), std::abs(quarter - half)), quarter, x};
  };
  // Uniform pre-bisection first: on a single simplex the two-level error
  // estimate can vanish by accident when V - c changes sign inside.
  std::vector<Simplex> start{s};
  for (int level = 0; level < (dim == 2 ? 6 : 4); ++level)
  {
    std::vector<Simplex> next;
    for (const Simplex& x : start)
      for (const Simplex& k : bisect(dim, x))
        next.push_back(k);
    start = std::move(next);
  }
  std::priority_queue<Piece> heap;
  double total = 0.0, err = 0.0;
  for (const Simplex& x : start)
  {
    Piece p = make(x);
    total += p.value;
    err += p.err;
    heap.push(std::move(p));
  }
  for (int it = 0; it < 400000 && err > rel_tol * std::abs(total); ++it)
  {
    const Piece top = heap.top();
    heap.pop();
    total -= top.value;
    err -= top.err;
    for (const Simplex& k : bisect(dim, top.s))
    {
      Piece c = make(k);
      total += c.value;
      err += c.err;
      heap.push(std::move(c));
    }
  }
  double sum = 0.0;
  while (!heap.empty())
  {
    sum += heap.top().value;
    heap.pop();
  }
  return sum;
}

// Simplices covering the star simplex (a, b, c[, d]) minus its half-size copy at a.
std::vector<Simplex> frustum(int dim, const Simplex& s, double t_outer, double t_inner)
{
  const Point& a = s[0];
  std::vector<Simplex> out;
  if (dim == 2)
  {
    const Point b = lerp(a, s[1], t_outer), c = lerp(a, s[2], t_outer);
    const Point bi = lerp(a, s[1], t_inner), ci = lerp(a, s[2], t_inner);
    out.push_back({bi, b, c, {}});
    out.push_back({bi, c, ci, {}});
  }
  else
  {
    const Point b = lerp(a, s[1], t_outer), c = lerp(a, s[2], t_outer),
                d = lerp(a, s[3], t_outer);
    const Point bi = lerp(a, s[1], t_inner), ci = lerp(a, s[2], t_inner),
                di = lerp(a, s[3], t_inner);
    out.push_back({b, c, d, bi});
    out.push_back({c, d, bi, ci});
    out.push_back({d, bi, ci, di});
  }
  return out;
}

// Signed star decomposition of s at a: simplices (a, facet) with weights +-1.
std::vector<std::pair<Simplex, double>> star(int dim, const Point* v, const Point& a)
{
  const double vol = simplex_signed_volume(dim, v);
  std::vector<std::pair<Simplex, double>> out;
  for (int i = 0; i <= dim; ++i)
  {
    Simplex w{};
    for (int j = 0; j <= dim; ++j)
      w[j] = v[j];
    w[i] = a;
    const double vi = simplex_signed_volume(dim, w.data());
    if (std::abs(vi) <= 1e-14 * std::abs(vol))
      continue;
    Simplex st{};
    st[0] = a;
    int k = 1;
    for (int j = 0; j <= dim; ++j)
      if (j != i)
        st[k++] = v[j];
    out.emplace_back(st, (vi > 0.0) == (vol > 0.0) ? 1.0 : -1.0);
  }
  return out;
}

OracleCheck make_check(std::string name, double discrepancy, double tol, std::string detail)
{
  return {std::move(name), discrepancy <= tol, discrepancy, tol, std::move(detail)};
}

// Elements for the quadrature oracle: all singular ones, then a seeded sample.
std::vector<int> sample_elements(const Mesh& m, int count, std::uint64_t seed)
{
  std::vector<int> ids;
  for (int e = 0; e < m.num_elements(); ++e)
    if (touches_center(m, e))
      ids.push_back(e);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, m.num_elements() - 1);
  while (static_cast<int>(ids.size()) < count)
  {
    const int e = pick(rng);
    if (std::find(ids.begin(), ids.end(), e) == ids.end())
      ids.push_back(e);
  }
  return ids;
}

OracleCheck quadrature_check(const std::string& name, const Mesh& m, const PotentialSpec& pot,
                             int samples, std::uint64_t seed)
{
  const CellField ch = assemble_ch(m, pot);
  double worst = 0.0;
  const std::vector<int> ids = sample_elements(m, samples, seed);
  for (int e : ids)
  {
    Point v[4];
    element_points(m, e, v);
    double ref = 0.0;
    for (std::size_t i = 0; i < pot.centers.size(); ++i)
      ref -= pot.charges[i] * subdivision_inverse_distance(m.dim, v, pot.centers[i]);
    ref /= std::abs(simplex_signed_volume(m.dim, v));
    worst = std::max(worst, std::abs(ch.values[e] - ref) / std::abs(ref));
  }
  return make_check(name, worst, 1e-9,
                    fmt::format("{} elements, max relative difference", ids.size()));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

} // namespace

double subdivision_inverse_distance(int dim, const Point* v, const Point& a)
{
  const Integrand f = [&](const Point& x) { return 1.0 / distance(x, a); };
  const double scale = 1.0 / (1.0 - std::pow(0.5, dim - 1));
  double total = 0.0;
  for (const auto& [s, sign] : star(dim, v, a))
  {
    double part = 0.0;
    for (const Simplex& piece : frustum(dim, s, 1.0, 0.5))
      part += integrate(dim, piece, f, 1e-13);
    total += sign * scale * part;
  }
  return total;
}

double subdivision_deviation_pow(int dim, const Point* v, const PotentialSpec& pot, double c,
                                 double p, double rel_tol)
{
  const Integrand f = [&](const Point& x) { return std::pow(std::abs(coulomb_potential(pot, x) - c), p); };
  const double diam = simplex_diameter(dim, v);
  const Point* singular = nullptr;
  for (const Point& a : pot.centers)
    if (point_simplex_distance(dim, v, a) <= 1e-14 * diam)
      singular = &a;
  if (!singular)
  {
    Simplex s{};
    for (int i = 0; i <= dim; ++i)
      s[i] = v[i];
    return integrate(dim, s, f, rel_tol);
  }
  double total = 0.0;
  for (const auto& [s, sign] : star(dim, v, *singular))
  {
    double part = 0.0;
    double t = 1.0, previous = 0.0;
    for (int layer = 0; layer < 100; ++layer, t *= 0.5)
    {
      double layer_sum = 0.0;
      for (const Simplex& piece : frustum(dim, s, t, 0.5 * t))
        layer_sum += integrate(dim, piece, f, rel_tol);
      part += layer_sum;
      // Inner layers shrink geometrically; add the remaining tail once it is negligible.
      const double ratio = previous > 0.0 ? layer_sum / previous : 1.0;
      previous = layer_sum;
      if (ratio < 1.0 && layer_sum * ratio / (1.0 - ratio) <= 0.01 * rel_tol * part)
      {
        part += layer_sum * ratio / (1.0 - ratio);
        break;
      }
    }
    total += sign * part;
  }
  return total;
}

std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& opt)
{
  std::vector<OracleCheck> out;

  // Quadrature: graded meshes with singular elements.
  const PotentialSpec h2d{2, {{0.0, 0.0, 0.0}}, {1.0}};
  GradingSpec g2;
  g2.h = 0.4;
  g2.vartheta = 0.5;
  g2.centers = h2d.centers;
  g2.improve_rho = balanced_patch_rule(h2d, sobolev_rectangle(5.0, 5.0).S8);
  const Mesh m2 = build_graded_mesh_2d(Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}}, g2);
  out.push_back(quadrature_check("quadrature_2d_averages", m2, h2d, opt.samples, opt.seed));

  const PotentialSpec h3d{3, {{-2.0, 0.0, 0.0}, {2.0, 0.0, 0.0}}, {1.0, 1.0}};
  GradingSpec g3;
  g3.h = 2.0;
  g3.centers = h3d.centers;
  g3.improve_rho = balanced_patch_rule(h3d, c6_box(8.0, 6.0, 6.0));
  const Mesh m3 =
    build_graded_box_mesh_3d(Box{3, {-8.0, -6.0, -6.0}, {8.0, 6.0, 6.0}}, g3);
  out.push_back(quadrature_check("quadrature_3d_averages", m3, h3d, opt.samples, opt.seed + 1));

  // Dense equivalence on a small graded hydrogen mesh.
  GradingSpec gs;
  gs.h = 0.8;
  gs.centers = h2d.centers;
  gs.rule = PatchRule::fixed;
  gs.rho = 0.2;
  const Mesh ms = build_graded_mesh_2d(Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}}, gs);
  const CellField chs = assemble_ch(ms, h2d);
  const int k = 5;

  const DiscreteSystem p1 = assemble_p1(ms, &h2d, Boundary::dirichlet);
  SparseMatrix A1 = p1.K + p1.CP1;
  const EigenResult d1 = dense_oracle(A1, p1.M, k);
  if (opt.stiffness_perturbation != 0.0)
    A1.coeffRef(0, 0) += opt.stiffness_perturbation;
  const EigenResult i1 = smallest_eigenpairs(A1, p1.M, k);
  out.push_back(make_check("dense_equivalence_p1", max_abs_diff(i1.values, d1.values), 1e-8,
                           fmt::format("{} dofs, first {} eigenvalues", p1.num_dofs, k)));

  const DiscreteSystem ecr = assemble_ecr(ms, chs);
  const SparseMatrix A2 = shifted_cecr_matrix(ecr, 12.5);
  const EigenResult d2 = dense_oracle(A2, ecr.M, k);
  const EigenResult i2 = smallest_eigenpairs(A2, ecr.M, k);
  out.push_back(make_check("dense_equivalence_ecr", max_abs_diff(i2.values, d2.values), 1e-8,
                           fmt::format("{} dofs, first {} eigenvalues", ecr.num_dofs, k)));
  const EigenResult c2 = cg_path_eigenpairs(A2, ecr.M, k);
  out.push_back(make_check("dense_equivalence_ecr_cg", max_abs_diff(c2.values, d2.values), 1e-8,
                           fmt::format("{} dofs, inner PCG solves", ecr.num_dofs)));

  const double t = 0.5 * (d2.values[2] + d2.values[3]);
  const int below = count_eigenvalues_below(A2, ecr.M, t);
  out.push_back(make_check("inertia_count", std::abs(below - 3), 0.0,
                           fmt::format("{} eigenvalues below {:.6f}, expected 3", below, t)));

  // Bound-formula reductions on a grid of inputs.
  double red = 0.0;
  for (double mu : {0.1, 1.0, 7.5, 40.0})
    for (double C : {0.01, 0.2, 1.3})
    {
      const double base = cecr_lower_bound_positive(mu, C);
      red = std::max(red, std::abs(cecr_lower_bound_convergent(mu, C, 0.0, 0.0) - base));
      red = std::max(red, std::abs(cecr_lower_bound_gamma_shift(mu, 0.0, C) - base));
      red = std::max(red, std::abs(perturbation_correct(base - 2.0, 0.0, 2.0) - (base - 2.0)));
    }
  out.push_back(make_check("formula_reductions", red, 1e-14,
                           "zero shift, zero gamma and zero perturbation reduce to mu/(1+C^2 mu)"));
  return out;
}

} // namespace cecr
