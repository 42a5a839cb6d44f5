// SPDX-License-Identifier: MIT
#include "support.hpp"

#include "cecr/assembly.hpp"
#include "cecr/constants.hpp"
#include "cecr/eigensolver.hpp"
#include "cecr/errors.hpp"

#include <doctest.h>
#include <unsupported/Eigen/SparseExtra>

#include <filesystem>
#include <numbers>
#include <random>

using namespace cecr;
using cecr::test::face_average;
using cecr::test::integrate_element;

namespace
{

constexpr double pi = std::numbers::pi;

double max_abs(const SparseMatrix& A)
{
  double m = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

double asymmetry(const SparseMatrix& A)
{
  return max_abs(SparseMatrix(A - SparseMatrix(A.transpose())));
}

Mesh graded_hydrogen(double h)
{
  GradingSpec g;
  g.h = h;
  g.centers = {{0.0, 0.0, 0.0}};
  g.rule = PatchRule::fixed;
  g.rho = 0.2;
  return build_graded_mesh_2d(Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}}, g);
}

Mesh small_box()
{
  GradingSpec g;
  g.h = 1.5;
  g.centers = {{0.3, -0.2, 0.1}};
  g.rule = PatchRule::fixed;
  g.rho = 0.4;
  return build_graded_box_mesh_3d(Box{3, {-2.0, -2.0, -2.0}, {2.0, 2.0, 2.0}}, g);
}

Vector random_vector(int n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector u(n);
  for (int i = 0; i < n; ++i)
    u(i) = nd(rng);
  return u;
}

// Sum over elements of the integral of |grad u_h|^2 using central differences,
// which are exact for the quadratic local functions.
double broken_energy(const Mesh& m, const DiscreteSystem& sys, const Vector& u)
{
  double total = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
  {
    const double d = 1e-3 * m.h[e];
    total += integrate_element(m, e,
                               [&](const Point& x)
                               {
                                 double g2 = 0.0;
                                 for (int r = 0; r < m.dim; ++r)
                                 {
                                   Point xp = x, xm = x;
                                   xp[r] += d;
                                   xm[r] -= d;
                                   const double g = (ecr_evaluate(m, sys, u, e, xp) -
                                                     ecr_evaluate(m, sys, u, e, xm)) /
                                                    (2.0 * d);
                                   g2 += g * g;
                                 }
                                 return g2;
                               },
                               4);
  }
  return total;
}

double l2_square(const Mesh& m, const DiscreteSystem& sys, const Vector& u)
{
  double total = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    total += integrate_element(
      m, e,
      [&](const Point& x)
      {
        const double v = ecr_evaluate(m, sys, u, e, x);
        return v * v;
      },
      4);
  return total;
}

double cell_mean(const Mesh& m, const DiscreteSystem& sys, const Vector& u, int e)
{
  return integrate_element(m, e, [&](const Point& x) { return ecr_evaluate(m, sys, u, e, x); },
                           4) /
         m.volume[e];
}

// ECR interpolant of f: face averages and cell averages by quadrature.
Vector ecr_interpolate(const Mesh& m, const std::function<double(const Point&)>& f)
{
  Vector u(m.num_faces() + m.num_elements());
  for (int fc = 0; fc < m.num_faces(); ++fc)
    u(fc) = face_average(m, fc, f);
  for (int e = 0; e < m.num_elements(); ++e)
    u(m.num_faces() + e) = integrate_element(m, e, f, 10) / m.volume[e];
  return u;
}

} // namespace

TEST_CASE("P1 matrices: symmetry, dof counts and Neumann row sums")
{
  const Mesh m = graded_hydrogen(0.8);
  const PotentialSpec pot{2, {{0, 0, 0}}, {1.0}};
  const DiscreteSystem n = assemble_p1(m, &pot, Boundary::neumann);
  CHECK(n.num_dofs == m.num_vertices());
  for (const SparseMatrix* A : {&n.K, &n.M, &n.CP1})
    CHECK(asymmetry(*A) <= 1e-13 * max_abs(*A));
  const Vector ones = Vector::Ones(n.num_dofs);
  CHECK((n.K * ones).cwiseAbs().maxCoeff() <= 1e-10 * max_abs(n.K));
  // Total mass and the integral of V from the element averages.
  CHECK(ones.dot(n.M * ones) == doctest::Approx(100.0).epsilon(1e-12));
  const CellField ch = assemble_ch(m, pot);
  double intV = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    intV += ch.values[e] * m.volume[e];
  CHECK(ones.dot(n.CP1 * ones) == doctest::Approx(intV).epsilon(1e-8));

  const DiscreteSystem d = assemble_p1(m, &pot, Boundary::dirichlet);
  int boundary_vertices = 0;
  std::vector<char> on(m.num_vertices(), 0);
  for (int f = 0; f < m.num_faces(); ++f)
    if (m.boundary_face[f])
      for (int i = 0; i < 2; ++i)
        on[m.faces[f][i]] = 1;
  for (char c : on)
    boundary_vertices += c;
  CHECK(d.num_dofs == m.num_vertices() - boundary_vertices);
}

TEST_CASE("P1 Neumann Laplacian on the unit square: 0 then pi^2 from above")
{
  double prev = 1e300;
  for (double h : {0.2, 0.1, 0.05})
  {
    const Mesh m = cecr::test::uniform_square(h);
    const DiscreteSystem s = assemble_p1(m, nullptr, Boundary::neumann);
    EigenOptions o;
    o.shift = -1.0;
    const EigenResult r = smallest_eigenpairs(s.K, s.M, 3, o);
    CHECK(std::abs(r.values[0]) < 1e-9);
    CHECK(r.values[1] >= pi * pi);
    CHECK(r.values[2] >= pi * pi);
    CHECK(r.values[1] < prev);
    prev = r.values[1];
  }
  CHECK(prev - pi * pi < 0.05);
}

TEST_CASE("P1 Dirichlet Laplacian: Ritz values above 2 pi^2, non-increasing on nested meshes")
{
  Mesh m = cecr::test::uniform_square(0.25);
  double prev = 1e300;
  for (int level = 0; level < 3; ++level)
  {
    const DiscreteSystem s = assemble_p1(m, nullptr, Boundary::dirichlet);
    const EigenResult r = smallest_eigenpairs(s.K, s.M, 3);
    CHECK(r.values[0] >= 2.0 * pi * pi);
    CHECK(r.values[0] <= prev);
    prev = r.values[0];
    m = refine_uniform(m);
  }
  CHECK(prev - 2.0 * pi * pi < 0.3);
}

TEST_CASE("ECR matrices: symmetry, dof count, constants")
{
  const Mesh m = graded_hydrogen(0.8);
  const CellField ch = assemble_ch(m, PotentialSpec{2, {{0, 0, 0}}, {1.0}});
  const DiscreteSystem s = assemble_ecr(m, ch);
  CHECK(s.num_dofs == m.num_faces() + m.num_elements());
  for (const SparseMatrix* A : {&s.K, &s.M, &s.M0, &s.C0})
    CHECK(asymmetry(*A) <= 1e-13 * max_abs(*A));
  // The constant function has all face and cell values equal to one.
  const Vector ones = Vector::Ones(s.num_dofs);
  CHECK((s.K * ones).cwiseAbs().maxCoeff() <= 1e-10 * max_abs(s.K));
  CHECK(ones.dot(s.M0 * ones) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(ones.dot(s.M * ones) == doctest::Approx(100.0).epsilon(1e-12));

  const DiscreteSystem z = assemble_ecr(m, CellField{std::vector<double>(m.num_elements(), 0.0)});
  CHECK(z.C0.nonZeros() == 0);
}

TEST_CASE("ECR quadratic forms match quadrature of the evaluated functions")
{
  for (const Mesh& m : {graded_hydrogen(1.2), small_box()})
  {
    const CellField ch{std::vector<double>(m.num_elements(), -0.7)};
    const DiscreteSystem s = assemble_ecr(m, ch);
    for (std::uint64_t seed : {1u, 2u})
    {
      const Vector u = random_vector(s.num_dofs, seed);
      CHECK(u.dot(s.M * u) == doctest::Approx(l2_square(m, s, u)).epsilon(1e-10));
      CHECK(u.dot(s.K * u) == doctest::Approx(broken_energy(m, s, u)).epsilon(1e-6));
      double m0 = 0.0;
      for (int e = 0; e < m.num_elements(); ++e)
        m0 += m.volume[e] * std::pow(cell_mean(m, s, u, e), 2);
      CHECK(u.dot(s.M0 * u) == doctest::Approx(m0).epsilon(1e-10));
      CHECK(u.dot(s.C0 * u) == doctest::Approx(-0.7 * m0).epsilon(1e-10));
    }
  }
}

TEST_CASE("ECR face-mean continuity for random coefficient vectors")
{
  for (const Mesh& m : {graded_hydrogen(1.2), small_box()})
  {
    const DiscreteSystem s = assemble_ecr(m, CellField{std::vector<double>(m.num_elements(), 0.0)});
    const Vector u = random_vector(s.num_dofs, 9);
    double worst = 0.0;
    for (int f = 0; f < m.num_faces(); ++f)
    {
      const int e0 = m.face_elements[f][0];
      const double a0 = face_average(m, f, [&](const Point& x) { return ecr_evaluate(m, s, u, e0, x); });
      // The face value is the degree of freedom itself.
      worst = std::max(worst, std::abs(a0 - u(f)));
      const int e1 = m.face_elements[f][1];
      if (e1 >= 0)
      {
        const double a1 =
          face_average(m, f, [&](const Point& x) { return ecr_evaluate(m, s, u, e1, x); });
        worst = std::max(worst, std::abs(a0 - a1));
      }
    }
    CHECK(worst <= 1e-12 * u.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("cell projection of the ECR interpolant equals the cell projection")
{
  const auto f = [](const Point& x) { return std::sin(1.3 * x[0]) * std::exp(0.4 * x[1]) + x[2]; };
  for (const Mesh& m : {graded_hydrogen(1.2), small_box()})
  {
    const DiscreteSystem s = assemble_ecr(m, CellField{std::vector<double>(m.num_elements(), 0.0)});
    const Vector u = ecr_interpolate(m, f);
    double worst = 0.0;
    for (int e = 0; e < m.num_elements(); ++e)
    {
      const double exact = integrate_element(m, e, f, 10) / m.volume[e];
      worst = std::max(worst, std::abs(cell_mean(m, s, u, e) - exact));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("ECR interpolation reproduces quadratics of the form a + b.x + c|x|^2")
{
  const Mesh m = small_box();
  const auto f = [](const Point& x)
  { return 0.5 - x[0] + 2.0 * x[1] + 0.3 * x[2] + 0.7 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); };
  const DiscreteSystem s = assemble_ecr(m, CellField{std::vector<double>(m.num_elements(), 0.0)});
  const Vector u = ecr_interpolate(m, f);
  double worst = 0.0;
  Point v[4];
  for (int e = 0; e < m.num_elements(); ++e)
  {
    element_points(m, e, v);
    for (int i = 0; i < 4; ++i)
      worst = std::max(worst, std::abs(ecr_evaluate(m, s, u, e, v[i]) - f(v[i])));
  }
  CHECK(worst <= 1e-11);
}

TEST_CASE("single reference element: cell basis mean 1, face basis means 0")
{
  const Mesh m = cecr::test::hand_mesh(2, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2, -1}});
  const DiscreteSystem s = assemble_ecr(m, CellField{{0.0}});
  REQUIRE(s.num_dofs == 4);
  for (int j = 0; j < 4; ++j)
  {
    Vector u = Vector::Zero(4);
    u(j) = 1.0;
    CHECK(cell_mean(m, s, u, 0) == doctest::Approx(j == 3 ? 1.0 : 0.0).scale(1.0).epsilon(1e-14));
  }
  CHECK(s.M0.coeff(3, 3) == doctest::Approx(0.5));
  CHECK(s.M0.nonZeros() == 1);
}

TEST_CASE("ECR kernel without reaction is spanned by constants")
{
  const Mesh m = graded_hydrogen(1.2);
  const DiscreteSystem s = assemble_ecr(m, CellField{std::vector<double>(m.num_elements(), 0.0)});
  CHECK(count_eigenvalues_below(s.K, s.M, 1e-8) == 1);
  const EigenResult r = dense_oracle(s.K, s.M, 2);
  CHECK(std::abs(r.values[0]) < 1e-10);
  CHECK(r.values[1] > 1e-3);
}

TEST_CASE("shifted CECR matrix is linear in the shift")
{
  const Mesh m = graded_hydrogen(1.2);
  const CellField ch = assemble_ch(m, PotentialSpec{2, {{0, 0, 0}}, {1.0}});
  const DiscreteSystem s = assemble_ecr(m, ch);
  const SparseMatrix A0 = shifted_cecr_matrix(s, 0.0);
  CHECK(max_abs(SparseMatrix(A0 - s.K - s.C0)) <= 1e-14 * max_abs(s.K));
  const SparseMatrix d = shifted_cecr_matrix(s, 7.5) - shifted_cecr_matrix(s, 2.0);
  CHECK(max_abs(SparseMatrix(d - 5.5 * s.M0)) <= 1e-12 * max_abs(s.M0));
  const DiscreteSystem p = assemble_p1(m, nullptr, Boundary::neumann);
  CHECK_THROWS_AS(shifted_cecr_matrix(p, 1.0), InputError);
}

TEST_CASE("weighted reaction matrices")
{
  const Mesh m = graded_hydrogen(1.2);
  std::vector<double> w(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e)
    w[e] = 0.1 * (e % 5);
  const DiscreteSystem p = assemble_p1(m, nullptr, Boundary::neumann);
  const SparseMatrix W = p1_weighted_mass(m, p, w);
  const Vector ones = Vector::Ones(p.num_dofs);
  double expect = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    expect += w[e] * m.volume[e];
  CHECK(ones.dot(W * ones) == doctest::Approx(expect).epsilon(1e-12));
  const SparseMatrix R = ecr_projected_reaction(m, w);
  const Vector ones_ecr = Vector::Ones(m.num_faces() + m.num_elements());
  CHECK(ones_ecr.dot(R * ones_ecr) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("Matrix Market dump reads back unchanged")
{
  const Mesh m = graded_hydrogen(1.2);
  const DiscreteSystem s = assemble_ecr(m, assemble_ch(m, PotentialSpec{2, {{0, 0, 0}}, {1.0}}));
  const auto dir = std::filesystem::temp_directory_path() / "cecr_dump_test";
  std::filesystem::remove_all(dir);
  dump_matrices(s, dir.string(), "ecr_");
  SparseMatrix K;
  REQUIRE(Eigen::loadMarket(K, (dir / "ecr_K.mtx").string()));
  // The file holds the lower triangle of the symmetric matrix.
  const SparseMatrix full = SparseMatrix(K.selfadjointView<Eigen::Lower>());
  CHECK(max_abs(SparseMatrix(full - s.K)) <= 1e-15 * max_abs(s.K));
  std::filesystem::remove_all(dir);
}

TEST_CASE("P1 Dirichlet hydrogen upper bound near the reference -0.9983")
{
  GradingSpec g;
  g.h = 0.4;
  g.vartheta = 0.5;
  g.centers = {{0.0, 0.0, 0.0}};
  const PotentialSpec pot{2, g.centers, {1.0}};
  g.improve_rho = balanced_patch_rule(pot, sobolev_rectangle(5.0, 5.0).S8);
  const Mesh m = build_graded_mesh_2d(Box{2, {-5.0, -5.0, 0.0}, {5.0, 5.0, 0.0}}, g);
  const DiscreteSystem s = assemble_p1(m, &pot, Boundary::dirichlet);
  EigenOptions o;
  o.estimate = -1.0;
  const EigenResult r = smallest_eigenpairs(SparseMatrix(s.K + s.CP1), s.M, 1, o);
  CHECK(r.values[0] >= -1.0);
  CHECK(r.values[0] == doctest::Approx(-0.9983).epsilon(0.005));
}
