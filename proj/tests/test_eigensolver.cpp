// SPDX-License-Identifier: MIT
#include "support.hpp"

#include "cecr/assembly.hpp"
#include "cecr/eigensolver.hpp"
#include "cecr/errors.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace cecr;

namespace
{

SparseMatrix sparse_of(const Eigen::MatrixXd& D)
{
  return D.sparseView();
}

SparseMatrix identity(int n)
{
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

// Random SPD pair with a well-separated spectrum.
std::pair<SparseMatrix, SparseMatrix> random_spd_pair(int n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(n, n), Y(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
    {
      X(i, j) = nd(rng);
      Y(i, j) = nd(rng);
    }
  const Eigen::MatrixXd A = X * X.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd B = 0.1 * Y * Y.transpose() + Eigen::MatrixXd::Identity(n, n);
  return {sparse_of(A), sparse_of(B)};
}

// Tridiagonal Toeplitz matrix with 2 on the diagonal and -1 off it.
SparseMatrix toeplitz(int n)
{
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i)
  {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n)
    {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

double b_orthonormality_error(const EigenResult& r, const SparseMatrix& B)
{
  const Eigen::MatrixXd G = r.vectors.transpose() * (B * r.vectors);
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("diagonal problem")
{
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
  D.diagonal() << 3.0, 1.0, 2.0;
  const EigenResult r = dense_oracle(sparse_of(D), identity(3), 2);
  CHECK(r.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.values[1] == doctest::Approx(2.0).epsilon(1e-15));
  const EigenResult s = smallest_eigenpairs(sparse_of(D), identity(3), 2);
  CHECK(s.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.values[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("dense oracle on the Toeplitz matrix matches the closed-form spectrum")
{
  const int n = 60;
  const EigenResult r = dense_oracle(toeplitz(n), identity(n), n);
  for (int j = 1; j <= n; ++j)
    CHECK(std::abs(r.values[j - 1] - (2.0 - 2.0 * std::cos(j * std::numbers::pi / (n + 1)))) <=
          1e-12);
}

TEST_CASE("complete dense spectrum satisfies the trace identity")
{
  const auto [A, B] = random_spd_pair(40, 3);
  const EigenResult r = dense_oracle(A, B, 40);
  const Eigen::MatrixXd BiA = Eigen::MatrixXd(B).llt().solve(Eigen::MatrixXd(A));
  double sum = 0.0;
  for (double v : r.values)
    sum += v;
  CHECK(sum == doctest::Approx(BiA.trace()).epsilon(1e-9));
  CHECK(b_orthonormality_error(r, B) <= 1e-10);
}

TEST_CASE("iterative solvers agree with the dense oracle on a random SPD pair")
{
  const auto [A, B] = random_spd_pair(50, 1);
  const EigenResult d = dense_oracle(A, B, 5);
  const EigenResult s = smallest_eigenpairs(A, B, 5);
  const EigenResult c = cg_path_eigenpairs(A, B, 5);
  REQUIRE(s.values.size() == 5);
  REQUIRE(c.values.size() == 5);
  for (int i = 0; i < 5; ++i)
  {
    CHECK(std::abs(s.values[i] - d.values[i]) <= 1e-10);
    CHECK(std::abs(c.values[i] - d.values[i]) <= 1e-8);
  }
  CHECK(s.converged);
  CHECK(b_orthonormality_error(s, B) <= 1e-10);
  CHECK(b_orthonormality_error(c, B) <= 1e-10);
}

TEST_CASE("residual certificates are computed and bound the eigenvalue error")
{
  const auto [A, B] = random_spd_pair(50, 2);
  const EigenResult d = dense_oracle(A, B, 5);
  const EigenResult s = smallest_eigenpairs(A, B, 5);
  for (int i = 0; i < 5; ++i)
  {
    const Vector u = s.vectors.col(i);
    const Vector res = A * u - s.values[i] * (B * u);
    const double dual = std::sqrt(res.dot(Eigen::MatrixXd(B).llt().solve(res)));
    const double unorm = std::sqrt(u.dot(B * u));
    CHECK(std::abs(s.certificates[i] - dual / unorm) <= 1e-6 * dual / unorm + 1e-14);
    CHECK(std::abs(s.values[i] - d.values[i]) <= s.certificates[i] + 1e-13);
    CHECK(s.residuals[i] <= 1e-9);
  }
}

TEST_CASE("dual norm by CG matches the dense computation")
{
  const auto [A, B] = random_spd_pair(30, 4);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Vector r(30);
  for (int i = 0; i < 30; ++i)
    r(i) = nd(rng);
  const double dense = std::sqrt(r.dot(Eigen::MatrixXd(B).llt().solve(r)));
  CHECK(dual_norm(B, r) == doctest::Approx(dense).epsilon(1e-10));
}

TEST_CASE("indefinite problems: automatic shift and inertia count")
{
  const int n = 80;
  SparseMatrix A = toeplitz(n);
  A -= 1.5 * identity(n);
  const EigenResult d = dense_oracle(A, identity(n), 4);
  const EigenResult s = smallest_eigenpairs(A, identity(n), 4);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(s.values[i] - d.values[i]) <= 1e-10);
  CHECK(s.shift < d.values[0]);
  const EigenResult all = dense_oracle(A, identity(n), n);
  int below = 0;
  for (double v : all.values)
    below += v < 0.0;
  CHECK(count_eigenvalues_below(A, identity(n), 0.0) == below);
}

TEST_CASE("CG path on an identity preconditioned well-conditioned system")
{
  // A = 4 I + T has condition number below 2, so plain CG converges fast.
  const int n = 200;
  const SparseMatrix A = SparseMatrix(toeplitz(n) + 4.0 * identity(n));
  const EigenResult c = cg_path_eigenpairs(A, identity(n), 3);
  for (int j = 1; j <= 3; ++j)
    CHECK(c.values[j - 1] ==
          doctest::Approx(6.0 - 2.0 * std::cos(j * std::numbers::pi / (n + 1))).epsilon(1e-10));
}

TEST_CASE("CG path rejects a singular Neumann operator")
{
  const Mesh m = cecr::test::uniform_square(0.25);
  const DiscreteSystem s = assemble_p1(m, nullptr, Boundary::neumann);
  CHECK_THROWS_AS(cg_path_eigenpairs(s.K, s.M, 2), InputError);
}

TEST_CASE("dense oracle limits and argument checks")
{
  CHECK_THROWS_AS(dense_oracle(identity(3001), identity(3001), 1), InputError);
  CHECK_THROWS_AS(dense_oracle(identity(5), identity(5), 6), InputError);
  CHECK_THROWS_AS(smallest_eigenpairs(identity(5), identity(4), 1), InputError);
}
