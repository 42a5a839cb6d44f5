// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/geometry.hpp"
#include "cecr/potential.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace cecr
{

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class Space
{
  P1,
  ECR
};

enum class Boundary
{
  dirichlet,
  neumann
};

/// Sparse matrices of one discretization. All matrices are stored with both
/// triangles. Unused matrices are empty.
struct DiscreteSystem
{
  Space space = Space::P1;
  Boundary bc = Boundary::neumann;
  SparseMatrix K;   ///< (broken) stiffness
  SparseMatrix M;   ///< mass
  SparseMatrix M0;  ///< projected mass (Pi0 u, Pi0 v), ECR only
  SparseMatrix C0;  ///< projected reaction (c_h Pi0 u, Pi0 v), ECR only
  SparseMatrix CP1; ///< potential matrix (V u, v), P1 only
  /// P1: vertex -> dof or -1 when eliminated.
  /// ECR: faces first (dof f), then elements (dof nf + e).
  std::vector<int> dof_map;
  int num_dofs = 0;
};

/// Conforming P1 system. With pot == nullptr the potential matrix is zero.
DiscreteSystem assemble_p1(const Mesh& mesh, const PotentialSpec* pot, Boundary bc);

/// Enriched Crouzeix-Raviart system: P1 plus the cell function |x - x_K|^2
/// per element, with face averages and the cell average as degrees of freedom.
DiscreteSystem assemble_ecr(const Mesh& mesh, const CellField& ch);

/// K + C0 + sigma M0.
SparseMatrix shifted_cecr_matrix(const DiscreteSystem& sys, double sigma);

/// P1 reaction matrix sum_K w_K (phi_i, phi_j)_K restricted to kept dofs.
SparseMatrix p1_weighted_mass(const Mesh& mesh, const DiscreteSystem& sys,
                              const std::vector<double>& w);

/// ECR projected reaction matrix diag(w_K |K|) on cell dofs.
SparseMatrix ecr_projected_reaction(const Mesh& mesh, const std::vector<double>& w);

/// Local ECR representation on element e: coefficients of the local basis in
/// the scaled monomials {1, (x - g)/s, |x - g|^2 / s^2}. Column j holds the
/// basis function of local dof j (faces in local order, then the cell).
struct EcrLocal
{
  Eigen::MatrixXd coeff;
  Point centroid;
  double scale;
};
EcrLocal ecr_local_basis(const Mesh& mesh, int e);

/// Value at x of the ECR function with global coefficients u on element e.
double ecr_evaluate(const Mesh& mesh, const DiscreteSystem& sys, const Vector& u, int e,
                    const Point& x);

/// Writes K, M, and the space-specific matrices as Matrix Market files.
void dump_matrices(const DiscreteSystem& sys, const std::string& dir, const std::string& prefix);

} // namespace cecr
