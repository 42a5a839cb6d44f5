// SPDX-License-Identifier: MIT
#include "cecr/eigensolver.hpp"

#include "cecr/errors.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>

namespace cecr
{

namespace
{

using Op = std::function<void(const Vector&, Vector&)>;

struct KrylovResult
{
  std::vector<double> theta;
  Eigen::MatrixXd X;
  int iterations = 0;
  bool converged = false;
};

Vector seeded_vector(int n, std::uint64_t seed)
{
  Vector v(n);
  std::uint64_t s = seed;
  for (int i = 0; i < n; ++i)
  {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    v(i) = static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5;
  }
  return v;
}

double b_norm(const SparseMatrix& B, const Vector& x) { return std::sqrt(x.dot(B * x)); }

// Krylov-Schur iteration for the k largest eigenvalues of an operator that
// is self-adjoint in the B inner product.
KrylovResult krylov_schur(const SparseMatrix& B, const Op& op, int k, int m, double tol,
                          int max_restarts, std::uint64_t seed)
{
  const int n = static_cast<int>(B.rows());
  m = std::min(m, n);
  k = std::min(k, m);
  Eigen::MatrixXd V(n, m);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  // One operator application strips the start vector of the components
  // that the inverse damps but the residual norm amplifies.
  Vector r(n);
  op(seeded_vector(n, seed), r);
  V.col(0) = r / b_norm(B, r);
  int j0 = 0;
  Vector w(n), Bw(n);
  std::uint64_t reseed = seed;
  KrylovResult out;
  for (int restart = 0;; ++restart)
  {
    double beta = 0.0;
    for (int j = j0; j < m; ++j)
    {
      op(V.col(j), w);
      ++out.iterations;
      Eigen::VectorXd h = Eigen::VectorXd::Zero(j + 1);
      for (int pass = 0; pass < 2; ++pass)
      {
        Bw = B * w;
        const Eigen::VectorXd c = V.leftCols(j + 1).transpose() * Bw;
        w.noalias() -= V.leftCols(j + 1) * c;
        h += c;
      }
      H.col(j).head(j + 1) = h;
      H.row(j).head(j + 1) = h.transpose();
      beta = b_norm(B, w);
      if (j + 1 < m)
      {
        if (beta <= 1e-14 * std::abs(h(j)) || beta == 0.0)
        {
          // Invariant subspace: continue with a fresh orthogonal direction.
          w = seeded_vector(n, ++reseed);
          for (int pass = 0; pass < 2; ++pass)
          {
            Bw = B * w;
            w.noalias() -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * Bw);
          }
          V.col(j + 1) = w / b_norm(B, w);
          beta = 0.0;
        }
        else
          V.col(j + 1) = w / beta;
        H(j + 1, j) = beta;
        H(j, j + 1) = beta;
      }
    }
    // Column m-1 was written with a coupling to v_m that is not in the basis.
    r = w;
    const Eigen::MatrixXd Hs = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
    const Eigen::VectorXd ev = es.eigenvalues();
    const Eigen::MatrixXd Y = es.eigenvectors();
    int conv = 0;
    for (int i = 0; i < k; ++i)
    {
      const int col = m - 1 - i;
      const double est = std::abs(beta * Y(m - 1, col));
      if (est <= tol * std::abs(ev(col)))
        ++conv;
      else
        break;
    }
    if (conv >= k || restart >= max_restarts)
    {
      out.converged = conv >= k;
      out.theta.resize(k);
      Eigen::MatrixXd Yk(m, k);
      for (int i = 0; i < k; ++i)
      {
        out.theta[i] = ev(m - 1 - i);
        Yk.col(i) = Y.col(m - 1 - i);
      }
      out.X = V * Yk;
      return out;
    }
    const int p = std::min(m - 1, k + (m - k) / 2);
    Eigen::MatrixXd Yp(m, p);
    for (int i = 0; i < p; ++i)
      Yp.col(i) = Y.col(m - 1 - i);
    const Eigen::MatrixXd Vp = V * Yp;
    V.leftCols(p) = Vp;
    H.setZero();
    for (int i = 0; i < p; ++i)
      H(i, i) = ev(m - 1 - i);
    if (beta > 0.0)
      V.col(p) = r / beta;
    else
    {
      Vector f = seeded_vector(n, ++reseed);
      for (int pass = 0; pass < 2; ++pass)
        f.noalias() -= V.leftCols(p) * (V.leftCols(p).transpose() * (B * f));
      V.col(p) = f / b_norm(B, f);
    }
    j0 = p;
  }
}

// Rayleigh-Ritz on span(X) for (A, B), residuals and certificates.
EigenResult finish(const SparseMatrix& A, const SparseMatrix& B, const Eigen::MatrixXd& X0, int k)
{
  const Eigen::MatrixXd AX = A * X0, BX = B * X0;
  Eigen::MatrixXd Ak = X0.transpose() * AX, Bk = X0.transpose() * BX;
  Ak = 0.5 * (Ak + Ak.transpose()).eval();
  Bk = 0.5 * (Bk + Bk.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ak, Bk);
  if (es.info() != Eigen::Success)
    throw NumericalError("Rayleigh-Ritz projection failed");
  EigenResult res;
  res.vectors = X0 * es.eigenvectors().leftCols(k);
  res.values.resize(k);
  res.residuals.resize(k);
  res.certificates.resize(k);
  for (int i = 0; i < k; ++i)
  {
    Vector u = res.vectors.col(i);
    const Vector Bu = B * u;
    u /= std::sqrt(u.dot(Bu));
    res.vectors.col(i) = u;
    const Vector Au = A * u, Bun = B * u;
    const double mu = u.dot(Au);
    res.values[i] = mu;
    const Vector rr = Au - mu * Bun;
    res.residuals[i] = rr.norm() / Bun.norm();
    res.certificates[i] = dual_norm(B, rr);
  }
  return res;
}

int default_subspace(int k, int n, const EigenOptions& opt)
{
  const int m = opt.subspace > 0 ? opt.subspace : std::max(2 * k + 20, 40);
  return std::min(m, n);
}

} // namespace

double dual_norm(const SparseMatrix& B, const Vector& r)
{
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-13);
  cg.setMaxIterations(10000);
  cg.compute(B);
  const Vector z = cg.solve(r);
  if (cg.info() != Eigen::Success && cg.error() > 1e-8)
    throw NumericalError("mass matrix solve for the residual certificate did not converge");
  return std::sqrt(std::max(0.0, r.dot(z)));
}

EigenResult smallest_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                                const EigenOptions& opt)
{
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || B.cols() != n)
    throw InputError("eigenproblem matrices have inconsistent sizes");
  if (k < 1 || k > n)
    throw InputError("requested eigenpair count out of range");

  Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> llt;
  llt.cholmod().print = 0;
  llt.analyzePattern(A + B);
  auto factor = [&](double s)
  {
    const SparseMatrix As = A - s * B;
    llt.factorize(As);
    return llt.info() == Eigen::Success;
  };

  // Bracket the smallest eigenvalue: A - lo B is positive definite and the
  // Rayleigh quotient of the constant vector bounds it from above.
  const Vector one = Vector::Ones(n);
  double hi = one.dot(A * one) / one.dot(B * one);
  double lo;
  bool have_lo = false;
  if (opt.shift)
  {
    if (factor(*opt.shift))
    {
      lo = *opt.shift;
      have_lo = true;
    }
    else
      hi = std::min(hi, *opt.shift);
  }
  else if (opt.estimate)
  {
    const double pad = 0.05 * std::max(1.0, std::abs(*opt.estimate));
    if (factor(*opt.estimate - pad))
    {
      lo = *opt.estimate - pad;
      hi = std::min(hi, *opt.estimate + pad);
      have_lo = true;
    }
    else
      hi = std::min(hi, *opt.estimate - pad);
  }
  if (!have_lo)
  {
    double step = std::max(1.0, std::abs(hi));
    lo = hi - step;
    int tries = 0;
    while (!factor(lo))
    {
      hi = lo;
      step *= 4.0;
      lo = hi - step;
      if (++tries > 40)
        throw NumericalError("no shift below the spectrum was found");
    }
  }
  // A shift far below the spectrum clusters the inverted eigenvalues.
  bool bisected = false;
  while (hi > lo && hi - lo > 0.2 * std::max(1.0, std::abs(hi)))
  {
    const double mid = 0.5 * (lo + hi);
    bisected = true;
    if (factor(mid))
      lo = mid;
    else
      hi = mid;
  }
  const double s = lo;
  if (bisected && !factor(s))
    throw NumericalError("factorization failed at a verified shift");

  Vector tmp(n);
  const Op op = [&](const Vector& x, Vector& y)
  {
    tmp = B * x;
    y = llt.solve(tmp);
  };
  const int m = default_subspace(k, n, opt);
  const KrylovResult kr = krylov_schur(B, op, k, m, opt.tol, opt.max_restarts, opt.seed);
  // Ritz vectors converge in the inverted metric; a few block inverse steps
  // bring the residuals in the dual norm down to the same level.
  Eigen::MatrixXd X = kr.X;
  EigenResult res = finish(A, B, X, k);
  for (int pass = 0; pass < 4; ++pass)
  {
    const double worst = *std::max_element(res.certificates.begin(), res.certificates.end());
    Eigen::MatrixXd Y(n, k);
    Vector y(n);
    for (int i = 0; i < k; ++i)
    {
      op(res.vectors.col(i), y);
      Y.col(i) = y;
    }
    EigenResult next = finish(A, B, Y, k);
    const double after = *std::max_element(next.certificates.begin(), next.certificates.end());
    if (!(after < worst))
      break;
    res = std::move(next);
    if (after > 0.1 * worst)
      break;
  }
  res.iterations = kr.iterations;
  res.converged = kr.converged;
  res.shift = s;
  res.solver_tag = "shift-invert Krylov-Schur (CHOLMOD)";
  return res;
}

EigenResult cg_path_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                               const EigenOptions& opt)
{
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || B.cols() != n)
    throw InputError("eigenproblem matrices have inconsistent sizes");
  if (k < 1 || k > n)
    throw InputError("requested eigenpair count out of range");
  for (int i = 0; i < n; ++i)
    if (!(A.coeff(i, i) > 0.0))
      throw InputError("matrix is not positive definite (nonpositive diagonal)");

  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
    cg;
  cg.setTolerance(opt.cg_tol);
  cg.setMaxIterations(opt.cg_maxit);
  cg.compute(A);
  if (cg.info() != Eigen::Success)
    throw NumericalError("incomplete Cholesky preconditioner failed");

  // A positive definite matrix makes CG converge; failure on a generic
  // right-hand side means the precondition is violated.
  {
    const Vector probe = B * seeded_vector(n, opt.seed + 1);
    const Vector z = cg.solve(probe);
    if (cg.info() != Eigen::Success || !(z.dot(probe) > 0.0))
      throw InputError("matrix is not positive definite (CG did not converge)");
  }
  Vector tmp(n);
  int total_cg = 0;
  const Op op = [&](const Vector& x, Vector& y)
  {
    tmp = B * x;
    y = cg.solve(tmp);
    total_cg += static_cast<int>(cg.iterations());
    if (cg.info() != Eigen::Success)
      throw NumericalError("inner CG solve did not converge");
  };
  const int m = default_subspace(k, n, opt);
  const KrylovResult kr = krylov_schur(B, op, k, m, opt.tol, opt.max_restarts, opt.seed);
  // Ritz vectors converge in the inverted metric; a few block inverse steps
  // bring the residuals in the dual norm down to the same level.
  Eigen::MatrixXd X = kr.X;
  EigenResult res = finish(A, B, X, k);
  for (int pass = 0; pass < 4; ++pass)
  {
    const double worst = *std::max_element(res.certificates.begin(), res.certificates.end());
    Eigen::MatrixXd Y(n, k);
    Vector y(n);
    for (int i = 0; i < k; ++i)
    {
      op(res.vectors.col(i), y);
      Y.col(i) = y;
    }
    EigenResult next = finish(A, B, Y, k);
    const double after = *std::max_element(next.certificates.begin(), next.certificates.end());
    if (!(after < worst))
      break;
    res = std::move(next);
    if (after > 0.1 * worst)
      break;
  }
  res.iterations = kr.iterations;
  res.converged = kr.converged;
  res.shift = 0.0;
  res.solver_tag = fmt::format("Krylov-Schur with ichol-PCG inner solves ({} CG iterations)",
                               total_cg);
  return res;
}

EigenResult dense_oracle(const SparseMatrix& A, const SparseMatrix& B, int k)
{
  const int n = static_cast<int>(A.rows());
  if (n > 3000)
    throw InputError("dense oracle is limited to dimension 3000");
  if (k < 1 || k > n)
    throw InputError("requested eigenpair count out of range");
  const Eigen::MatrixXd Ad = Eigen::MatrixXd(A), Bd = Eigen::MatrixXd(B);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ad + Ad.transpose()),
                                                               0.5 * (Bd + Bd.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("dense generalized eigensolver failed (B not positive definite?)");
  EigenResult res;
  res.values.resize(k);
  res.vectors = es.eigenvectors().leftCols(k);
  res.residuals.resize(k);
  res.certificates.resize(k);
  for (int i = 0; i < k; ++i)
  {
    res.values[i] = es.eigenvalues()(i);
    const Vector u = res.vectors.col(i);
    const Vector rr = A * u - res.values[i] * (B * u);
    res.residuals[i] = rr.norm() / (B * u).norm();
    res.certificates[i] = dual_norm(B, rr);
  }
  res.converged = true;
  res.solver_tag = "dense Cholesky reduction + tridiagonal QR";
  return res;
}

int count_eigenvalues_below(const SparseMatrix& A, const SparseMatrix& B, double t)
{
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt;
  ldlt.compute(SparseMatrix(A - t * B));
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("LDL^T factorization for the inertia count failed");
  const Vector d = ldlt.vectorD();
  int neg = 0;
  for (int i = 0; i < d.size(); ++i)
    if (d(i) < 0.0)
      ++neg;
  return neg;
}

} // namespace cecr
