// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/assembly.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cecr
{

struct EigenOptions
{
  double tol = 1e-9;
  int max_restarts = 200;
  /// Krylov subspace size; 0 selects max(2k + 20, 40).
  int subspace = 0;
  /// Shift below the wanted eigenvalues; chosen automatically when absent.
  std::optional<double> shift;
  /// Estimate of the smallest eigenvalue used to place the shift when no
  /// shift is given. Need not be rigorous.
  std::optional<double> estimate;
  std::uint64_t seed = 7;
  /// Inner CG tolerance and iteration cap for the iterative path.
  double cg_tol = 1e-13;
  int cg_maxit = 20000;
};

/// Eigenpairs of A u = mu B u, ascending.
struct EigenResult
{
  std::vector<double> values;
  Eigen::MatrixXd vectors; ///< B-orthonormal columns
  /// ||A u - mu B u||_2 / ||B u||_2
  std::vector<double> residuals;
  /// ||A u - mu B u||_{B^-1} / ||u||_B: some eigenvalue lies within this
  /// distance of mu.
  std::vector<double> certificates;
  int iterations = 0;
  double shift = 0.0;
  bool converged = false;
  std::string solver_tag;
};

/// k smallest eigenpairs by shift-invert Krylov-Schur Lanczos with a sparse
/// Cholesky factorization of A - shift B. A successful factorization proves
/// the shift lies below the spectrum; failing shifts are lowered.
EigenResult smallest_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                                const EigenOptions& opt = {});

/// Same contract using preconditioned CG inner solves with an incomplete
/// Cholesky preconditioner. A must be positive definite.
EigenResult cg_path_eigenpairs(const SparseMatrix& A, const SparseMatrix& B, int k,
                               const EigenOptions& opt = {});

/// Dense generalized symmetric solve for n <= 3000.
EigenResult dense_oracle(const SparseMatrix& A, const SparseMatrix& B, int k);

/// Number of eigenvalues of (A, B) strictly below t, from the inertia of an
/// LDL^T factorization of A - t B (Sylvester's law of inertia).
int count_eigenvalues_below(const SparseMatrix& A, const SparseMatrix& B, double t);

/// ||r||_{B^-1} by Jacobi-preconditioned CG on B z = r.
double dual_norm(const SparseMatrix& B, const Vector& r);

} // namespace cecr
