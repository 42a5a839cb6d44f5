// SPDX-License-Identifier: MIT
#include "support.hpp"

#include "cecr/constants.hpp"
#include "cecr/errors.hpp"
#include "cecr/oracle.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <doctest.h>

#include <random>
#include <sstream>

using namespace cecr;

namespace
{

// Integral of 1/|x - a| over a triangle with a at vertex 0, in polar
// coordinates around a: the angular integrand is the ray length to the
// opposite edge.
double polar_vertex_integral(const std::array<Point, 3>& t)
{
  const Point& a = t[0];
  const double th1 = std::atan2(t[1][1] - a[1], t[1][0] - a[0]);
  double th2 = std::atan2(t[2][1] - a[1], t[2][0] - a[0]);
  double lo = th1, hi = th2;
  if (hi < lo)
    std::swap(lo, hi);
  if (hi - lo > std::numbers::pi)
  {
    lo += 2.0 * std::numbers::pi;
    std::swap(lo, hi);
  }
  const double ex = t[2][0] - t[1][0], ey = t[2][1] - t[1][1];
  auto ray = [&](double th)
  {
    // Solve a + s (cos, sin) = t1 + u e for s.
    const double c = std::cos(th), s = std::sin(th);
    const double det = c * (-ey) - s * (-ex);
    const double bx = t[1][0] - a[0], by = t[1][1] - a[1];
    return (bx * (-ey) - by * (-ex)) / det;
  };
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(ray, lo, hi);
}

Mesh translated(const Mesh& m, const Point& shift, const std::vector<Point>& centers)
{
  Mesh t;
  t.dim = m.dim;
  t.elements = m.elements;
  for (const Point& p : m.vertices)
    t.vertices.push_back({p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]});
  finalize_mesh(t, centers);
  return t;
}

Mesh small_hydrogen_mesh()
{
  GradingSpec g;
  g.h = 0.8;
  g.centers = {{0.0, 0.0, 0.0}};
  g.rule = PatchRule::fixed;
  g.rho = 0.2;
  return build_graded_mesh_2d(Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}}, g);
}

} // namespace

TEST_CASE("2D element average with the center at a vertex")
{
  const std::array<Point, 3> t{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}};
  const double ref = -polar_vertex_integral(t) / 0.5;
  // Hand value: the angular integral of 1/(cos + sin) over [0, pi/2] is sqrt(2) asinh(1).
  CHECK(ref == doctest::Approx(-2.0 * std::sqrt(2.0) * std::asinh(1.0)).epsilon(1e-12));
  const double avg = element_average_coulomb_2d(t, {0, 0, 0}, 1.0);
  CHECK(std::abs(avg - ref) <= 1e-12 * std::abs(ref));
  CHECK(std::abs(avg + subdivision_inverse_distance(2, t.data(), {0, 0, 0}) / 0.5) <=
        1e-10 * std::abs(ref));

  const std::array<Point, 3> skew{{{0.3, -0.2, 0}, {2.1, 0.4, 0}, {0.9, 1.7, 0}}};
  const double area = std::abs(simplex_signed_volume(2, skew.data()));
  const double ref2 = -2.5 * polar_vertex_integral(skew) / area;
  CHECK(element_average_coulomb_2d(skew, skew[0], 2.5) == doctest::Approx(ref2).epsilon(1e-12));
}

TEST_CASE("2D element average with the center on an edge or outside")
{
  const std::array<Point, 3> t{{{0, 0, 0}, {2, 0, 0}, {0.5, 1.5, 0}}};
  const Point v[3] = {t[0], t[1], t[2]};
  for (const Point& a : {Point{1.0, 0.0, 0.0}, Point{0.6, 0.5, 0.0}, Point{-0.7, 2.0, 0.0},
                         Point{3.0, -1.0, 0.0}})
  {
    const double area = std::abs(simplex_signed_volume(2, v));
    const double ref = -subdivision_inverse_distance(2, v, a) / area;
    CHECK(std::abs(element_average_coulomb_2d(t, a, 1.0) - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("far-away center: average approaches the centroid value at second order")
{
  const std::array<Point, 3> t{{{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}}};
  const Point xc{0.1 / 3.0, 0.1 / 3.0, 0.0};
  double prev = 0.0;
  for (double r : {1.0, 10.0})
  {
    const Point a{xc[0] + r, xc[1], 0.0};
    const double rel = std::abs(element_average_coulomb_2d(t, a, 1.0) + 1.0 / r) * r;
    CHECK(rel < 0.1 * 0.1 / (r * r));
    if (prev > 0.0)
      CHECK(rel < prev / 50.0);
    prev = rel;
  }
}

TEST_CASE("zero charge gives a zero average")
{
  const std::array<Point, 3> t{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}};
  CHECK(element_average_coulomb_2d(t, {0, 0, 0}, 0.0) == 0.0);
  const std::array<Point, 4> k{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  CHECK(element_average_coulomb_3d(k, {0, 0, 0}, 0.0) == 0.0);
}

TEST_CASE("degenerate elements are rejected")
{
  const std::array<Point, 3> t{{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}};
  CHECK_THROWS_AS(element_average_coulomb_2d(t, {0, 1, 0}, 1.0), InputError);
  const std::array<Point, 4> k{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}}};
  CHECK_THROWS_AS(element_average_coulomb_3d(k, {0, 0, 1}, 1.0), InputError);
}

TEST_CASE("3D element average on the reference tetrahedron")
{
  const std::array<Point, 4> k{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const Point v[4] = {k[0], k[1], k[2], k[3]};
  for (const Point& a : {Point{0, 0, 0}, Point{1, 0, 0}, Point{0.25, 0.25, 0.0},
                         Point{0.2, 0.2, 0.2}})
  {
    const double ref = -subdivision_inverse_distance(3, v, a) * 6.0;
    CHECK(std::abs(element_average_coulomb_3d(k, a, 1.0) - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("3D element average with an outside center matches a plain Gauss rule")
{
  const std::array<Point, 4> k{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const Mesh m = cecr::test::hand_mesh(3, {k[0], k[1], k[2], k[3]}, {{0, 1, 2, 3}});
  const Point a{2.0, 1.5, -1.0};
  const double gauss =
    cecr::test::integrate_element(m, 0, [&](const Point& x) { return -1.0 / distance(x, a); }, 10) *
    6.0;
  CHECK(element_average_coulomb_3d(k, a, 1.0) == doctest::Approx(gauss).epsilon(1e-10));
}

TEST_CASE("assemble_ch: sign, linearity in the charge, translation equivariance")
{
  const Mesh m = small_hydrogen_mesh();
  const PotentialSpec p1{2, {{0, 0, 0}}, {1.0}};
  const PotentialSpec p2{2, {{0, 0, 0}}, {2.0}};
  const PotentialSpec p3{2, {{0, 0, 0}}, {3.0}};
  const CellField c1 = assemble_ch(m, p1), c2 = assemble_ch(m, p2), c3 = assemble_ch(m, p3);
  REQUIRE(c1.values.size() == static_cast<std::size_t>(m.num_elements()));
  for (int e = 0; e < m.num_elements(); ++e)
  {
    CHECK(c1.values[e] < 0.0);
    CHECK(std::abs(c3.values[e] - (c1.values[e] + c2.values[e])) <= 1e-13 * std::abs(c3.values[e]));
  }

  const Point s{1.25, -0.75, 0.0};
  const Mesh mt = translated(m, s, {s});
  const CellField ct = assemble_ch(mt, PotentialSpec{2, {s}, {1.0}});
  double worst = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    worst = std::max(worst, std::abs(ct.values[e] - c1.values[e]) / std::abs(c1.values[e]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("two-center field is the sum of the one-center fields")
{
  GradingSpec g;
  g.h = 1.0;
  g.centers = {{-2.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
  g.rule = PatchRule::fixed;
  g.rho = 0.2;
  const Mesh m = build_graded_mesh_2d(Box{2, {-7.0, -5.0, 0.0}, {7.0, 5.0, 0.0}}, g);
  const CellField both = assemble_ch(m, PotentialSpec{2, g.centers, {1.0, 1.0}});
  const CellField left = assemble_ch(m, PotentialSpec{2, {g.centers[0]}, {1.0}});
  const CellField right = assemble_ch(m, PotentialSpec{2, {g.centers[1]}, {1.0}});
  for (int e = 0; e < m.num_elements(); ++e)
    CHECK(std::abs(both.values[e] - left.values[e] - right.values[e]) <=
          1e-13 * std::abs(both.values[e]));
}

TEST_CASE("singular cell average scales like the inverse element size")
{
  const Mesh m = small_hydrogen_mesh();
  const CellField c = assemble_ch(m, PotentialSpec{2, {{0, 0, 0}}, {1.0}});
  for (int e = 0; e < m.num_elements(); ++e)
    if (touches_center(m, e))
    {
      const double C0 = -c.values[e] * m.h[e];
      CHECK(C0 > 0.5);
      CHECK(C0 < 10.0);
    }
}

TEST_CASE("smooth test potential hook reproduces constants and linear functions")
{
  const Mesh m = small_hydrogen_mesh();
  const CellField five = assemble_ch_smooth(m, [](const Point&) { return 5.0; });
  for (double v : five.values)
    CHECK(v == doctest::Approx(5.0).epsilon(1e-14));
  const CellField lin = assemble_ch_smooth(m, [](const Point& x) { return 2.0 * x[0] - x[1]; });
  Point v[4];
  for (int e = 0; e < m.num_elements(); ++e)
  {
    element_points(m, e, v);
    const double gx = (v[0][0] + v[1][0] + v[2][0]) / 3.0;
    const double gy = (v[0][1] + v[1][1] + v[2][1]) / 3.0;
    CHECK(lin.values[e] == doctest::Approx(2.0 * gx - gy).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("deviation norms agree with the subdivision oracle")
{
  const Mesh m = small_hydrogen_mesh();
  const PotentialSpec pot{2, {{0, 0, 0}}, {1.0}};
  const CellField c = assemble_ch(m, pot);
  int checked = 0;
  for (int e = 0; e < m.num_elements() && checked < 12; ++e)
  {
    if (!touches_center(m, e) && e % 7 != 0)
      continue;
    Point v[4];
    element_points(m, e, v);
    const double ref = subdivision_deviation_pow(2, v, pot, c.values[e], 4.0 / 3.0);
    const double got = integral_abs_deviation_pow(m, e, pot, c.values[e], 4.0 / 3.0, 16);
    CHECK(std::abs(got - ref) <= 1e-8 * ref);
    ++checked;
  }
  CHECK(checked == 12);
}

TEST_CASE("3D deviation norm on a singular tetrahedron agrees with the oracle")
{
  const Mesh m = cecr::test::hand_mesh(3, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                                       {{0, 1, 2, 3}}, {{0, 0, 0}});
  const PotentialSpec pot{3, {{0, 0, 0}}, {1.0}};
  const CellField c = assemble_ch(m, pot);
  Point v[4];
  element_points(m, 0, v);
  // The adaptive oracle is run to 1e-8 here; tighter runs take minutes in 3D.
  const double ref = subdivision_deviation_pow(3, v, pot, c.values[0], 1.5, 1e-8);
  const double got = integral_abs_deviation_pow(m, 0, pot, c.values[0], 1.5, 16);
  CHECK(std::abs(got - ref) <= 1e-7 * ref);
}

TEST_CASE("sup deviation matches dense sampling on off-center elements")
{
  const Mesh m = small_hydrogen_mesh();
  const PotentialSpec pot{2, {{0, 0, 0}}, {1.0}};
  const CellField c = assemble_ch(m, pot);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, m.num_elements() - 1);
  for (int trial = 0; trial < 10; ++trial)
  {
    int e = pick(rng);
    while (touches_center(m, e))
      e = pick(rng);
    Point v[4];
    element_points(m, e, v);
    // Barycentric lattice with about 10^4 points, vertices and edges included.
    const int n = 140;
    double sampled = 0.0;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j)
      {
        const double b1 = double(i) / n, b2 = double(j) / n, b0 = 1.0 - b1 - b2;
        const Point x{b0 * v[0][0] + b1 * v[1][0] + b2 * v[2][0],
                      b0 * v[0][1] + b1 * v[1][1] + b2 * v[2][1], 0.0};
        sampled = std::max(sampled, std::abs(coulomb_potential(pot, x) - c.values[e]));
      }
    const double sup = sup_deviation(m, e, pot, c.values[e]);
    CHECK(sampled <= sup * (1.0 + 1e-14));
    CHECK(sup - sampled <= 1e-6 * sup);
  }
}

TEST_CASE("P1 potential matrix entries sum to the element integral of V")
{
  const Mesh m = small_hydrogen_mesh();
  const PotentialSpec pot{2, {{0, 0, 0}}, {1.0}};
  const CellField c = assemble_ch(m, pot);
  for (int e = 0; e < m.num_elements(); ++e)
  {
    if (!touches_center(m, e) && e % 50 != 0)
      continue;
    double loc[4][4];
    p1_potential_local(m, e, pot, loc);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        sum += loc[i][j];
        CHECK(loc[i][j] == doctest::Approx(loc[j][i]).epsilon(1e-14));
      }
    CHECK(sum == doctest::Approx(c.values[e] * m.volume[e]).epsilon(1e-8));
  }
}

TEST_CASE("cell field text round trip")
{
  const CellField f{{-1.5, 2.25, 1e-300, -3.0e7}};
  std::stringstream s;
  write_cell_field(s, f);
  const CellField g = read_cell_field(s, 4);
  CHECK(g.values == f.values);
  std::stringstream s2;
  write_cell_field(s2, f);
  CHECK_THROWS_AS(read_cell_field(s2, 5), InputError);
}

TEST_CASE("potential specs are validated")
{
  CHECK_THROWS_AS(validate_potential(PotentialSpec{2, {{0, 0, 0}}, {-1.0}}), InputError);
  CHECK_THROWS_AS(validate_potential(PotentialSpec{2, {{0, 0, 0}, {0, 0, 0}}, {1.0, 1.0}}),
                  InputError);
  CHECK_THROWS_AS(validate_potential(PotentialSpec{4, {}, {}}), InputError);
}
