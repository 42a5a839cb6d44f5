// SPDX-License-Identifier: MIT
#include "cecr/assembly.hpp"

#include "cecr/errors.hpp"
#include "cecr/quadrature.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <filesystem>

namespace cecr
{

namespace
{

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int n, const Triplets& t)
{
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

// Gradients of the barycentric coordinates of a simplex.
void barycentric_gradients(int dim, const Point* v, double grad[4][3])
{
  Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
  for (int k = 0; k < dim; ++k)
    for (int r = 0; r < dim; ++r)
      J(r, k) = v[k + 1][r] - v[0][r];
  Eigen::MatrixXd Jd = J.topLeftCorner(dim, dim);
  Eigen::MatrixXd Ji = Jd.inverse();
  for (int i = 0; i < 4; ++i)
    for (int r = 0; r < 3; ++r)
      grad[i][r] = 0.0;
  for (int k = 0; k < dim; ++k)
    for (int r = 0; r < dim; ++r)
    {
      grad[k + 1][r] = Ji(k, r);
      grad[0][r] -= Ji(k, r);
    }
}

// Average of |x - c|^2 over a simplex with nv vertices.
double mean_square_distance(const Point* v, int nv, const Point& c)
{
  Point g{0, 0, 0};
  for (int i = 0; i < nv; ++i)
    for (int r = 0; r < 3; ++r)
      g[r] += v[i][r] / nv;
  double spread = 0.0;
  for (int i = 0; i < nv; ++i)
    spread += std::pow(distance(v[i], g), 2);
  return std::pow(distance(g, c), 2) + spread / (nv * (nv + 1.0));
}

} // namespace

DiscreteSystem assemble_p1(const Mesh& mesh, const PotentialSpec* pot, Boundary bc)
{
  if (pot)
  {
    validate_potential(*pot);
    if (pot->dim != mesh.dim)
      throw InputError("potential and mesh dimensions differ");
  }
  const int dim = mesh.dim, nl = dim + 1;
  DiscreteSystem sys;
  sys.space = Space::P1;
  sys.bc = bc;
  sys.dof_map.assign(mesh.num_vertices(), 0);
  if (bc == Boundary::dirichlet)
    for (int f = 0; f < mesh.num_faces(); ++f)
      if (mesh.boundary_face[f])
        for (int i = 0; i < dim; ++i)
          sys.dof_map[mesh.faces[f][i]] = -1;
  int n = 0;
  for (int& d : sys.dof_map)
    d = (d < 0) ? -1 : n++;
  sys.num_dofs = n;
  if (n == 0)
    throw InputError("P1 system has no free degrees of freedom");

  Triplets tk, tm, tv;
  tk.reserve(static_cast<std::size_t>(mesh.num_elements()) * nl * nl);
  tm.reserve(tk.capacity());
  if (pot)
    tv.reserve(tk.capacity());
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    Point v[4];
    element_points(mesh, e, v);
    double grad[4][3];
    barycentric_gradients(dim, v, grad);
    const double vol = mesh.volume[e];
    double pl[4][4];
    if (pot)
      p1_potential_local(mesh, e, *pot, pl);
    for (int i = 0; i < nl; ++i)
    {
      const int gi = sys.dof_map[mesh.elements[e][i]];
      if (gi < 0)
        continue;
      for (int j = 0; j < nl; ++j)
      {
        const int gj = sys.dof_map[mesh.elements[e][j]];
        if (gj < 0)
          continue;
        double kij = 0.0;
        for (int r = 0; r < dim; ++r)
          kij += grad[i][r] * grad[j][r];
        tk.emplace_back(gi, gj, kij * vol);
        tm.emplace_back(gi, gj, vol * (i == j ? 2.0 : 1.0) / ((dim + 1.0) * (dim + 2.0)));
        if (pot)
          tv.emplace_back(gi, gj, pl[i][j]);
      }
    }
  }
  sys.K = from_triplets(n, tk);
  sys.M = from_triplets(n, tm);
  sys.CP1 = pot ? from_triplets(n, tv) : SparseMatrix(n, n);
  return sys;
}

SparseMatrix p1_weighted_mass(const Mesh& mesh, const DiscreteSystem& sys,
                              const std::vector<double>& w)
{
  if (sys.space != Space::P1 || static_cast<int>(w.size()) != mesh.num_elements())
    throw InputError("p1_weighted_mass needs a P1 system and one weight per element");
  const int dim = mesh.dim, nl = dim + 1;
  Triplets t;
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    if (w[e] == 0.0)
      continue;
    for (int i = 0; i < nl; ++i)
    {
      const int gi = sys.dof_map[mesh.elements[e][i]];
      if (gi < 0)
        continue;
      for (int j = 0; j < nl; ++j)
      {
        const int gj = sys.dof_map[mesh.elements[e][j]];
        if (gj < 0)
          continue;
        t.emplace_back(gi, gj,
                       w[e] * mesh.volume[e] * (i == j ? 2.0 : 1.0) / ((dim + 1.0) * (dim + 2.0)));
      }
    }
  }
  return from_triplets(sys.num_dofs, t);
}

EcrLocal ecr_local_basis(const Mesh& mesh, int e)
{
  const int dim = mesh.dim, nd = dim + 2;
  Point v[4];
  element_points(mesh, e, v);
  EcrLocal L;
  L.centroid = {0, 0, 0};
  for (int i = 0; i <= dim; ++i)
    for (int r = 0; r < 3; ++r)
      L.centroid[r] += v[i][r] / (dim + 1);
  L.scale = mesh.h[e];
  const Point& g = L.centroid;
  const double s = L.scale;

  // D(i, j) = dof functional i applied to monomial j.
  Eigen::MatrixXd D(nd, nd);
  for (int i = 0; i <= dim; ++i)
  {
    Point fv[3];
    int c = 0;
    for (int j = 0; j <= dim; ++j)
      if (j != i)
        fv[c++] = v[j];
    Point gf{0, 0, 0};
    for (int k = 0; k < dim; ++k)
      for (int r = 0; r < 3; ++r)
        gf[r] += fv[k][r] / dim;
    D(i, 0) = 1.0;
    for (int r = 0; r < dim; ++r)
      D(i, 1 + r) = (gf[r] - g[r]) / s;
    D(i, dim + 1) = mean_square_distance(fv, dim, g) / (s * s);
  }
  D(dim + 1, 0) = 1.0;
  for (int r = 0; r < dim; ++r)
    D(dim + 1, 1 + r) = 0.0;
  D(dim + 1, dim + 1) = mean_square_distance(v, dim + 1, g) / (s * s);
  L.coeff = D.inverse();
  return L;
}

DiscreteSystem assemble_ecr(const Mesh& mesh, const CellField& ch)
{
  if (static_cast<int>(ch.values.size()) != mesh.num_elements())
    throw InputError("cell field size does not match the mesh");
  const int dim = mesh.dim, nd = dim + 2;
  const int nf = mesh.num_faces(), ne = mesh.num_elements();
  DiscreteSystem sys;
  sys.space = Space::ECR;
  sys.bc = Boundary::neumann;
  sys.num_dofs = nf + ne;
  sys.dof_map.resize(sys.num_dofs);
  for (int i = 0; i < sys.num_dofs; ++i)
    sys.dof_map[i] = i;

  const SimplexRule& R = simplex_rule(dim, 4);
  Triplets tk, tm, t0, tc;
  tk.reserve(static_cast<std::size_t>(ne) * nd * nd);
  tm.reserve(tk.capacity());
  for (int e = 0; e < ne; ++e)
  {
    Point v[4];
    element_points(mesh, e, v);
    const EcrLocal L = ecr_local_basis(mesh, e);
    const double s = L.scale, vol = mesh.volume[e];

    // Monomial Gram matrices, integrated exactly.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nd, nd);
    for (int r = 0; r < dim; ++r)
      G(1 + r, 1 + r) = vol / (s * s);
    G(dim + 1, dim + 1) = 4.0 * vol * mean_square_distance(v, dim + 1, L.centroid) / (s * s * s * s);

    Eigen::MatrixXd Mm = Eigen::MatrixXd::Zero(nd, nd);
    const double J = vol * (dim == 2 ? 2.0 : 6.0);
    Eigen::VectorXd mono(nd);
    for (std::size_t q = 0; q < R.weights.size(); ++q)
    {
      Point x = v[0];
      for (int k = 0; k < dim; ++k)
        for (int r = 0; r < 3; ++r)
          x[r] += R.points[q][k] * (v[k + 1][r] - v[0][r]);
      mono(0) = 1.0;
      double rr = 0.0;
      for (int r = 0; r < dim; ++r)
      {
        mono(1 + r) = (x[r] - L.centroid[r]) / s;
        rr += mono(1 + r) * mono(1 + r);
      }
      mono(dim + 1) = rr;
      Mm.noalias() += (R.weights[q] * J) * mono * mono.transpose();
    }
    const Eigen::MatrixXd Kl = L.coeff.transpose() * G * L.coeff;
    const Eigen::MatrixXd Ml = L.coeff.transpose() * Mm * L.coeff;

    int gid[5];
    for (int i = 0; i <= dim; ++i)
      gid[i] = mesh.element_faces[e][i];
    gid[dim + 1] = nf + e;
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j)
      {
        tk.emplace_back(gid[i], gid[j], Kl(i, j));
        tm.emplace_back(gid[i], gid[j], Ml(i, j));
      }
    t0.emplace_back(nf + e, nf + e, vol);
    if (ch.values[e] != 0.0)
      tc.emplace_back(nf + e, nf + e, ch.values[e] * vol);
  }
  sys.K = from_triplets(sys.num_dofs, tk);
  sys.M = from_triplets(sys.num_dofs, tm);
  sys.M0 = from_triplets(sys.num_dofs, t0);
  sys.C0 = from_triplets(sys.num_dofs, tc);
  // Remove rounding asymmetry of the local products.
  sys.K = SparseMatrix(0.5 * (sys.K + SparseMatrix(sys.K.transpose())));
  sys.M = SparseMatrix(0.5 * (sys.M + SparseMatrix(sys.M.transpose())));
  return sys;
}

SparseMatrix ecr_projected_reaction(const Mesh& mesh, const std::vector<double>& w)
{
  const int nf = mesh.num_faces(), ne = mesh.num_elements();
  Triplets t;
  for (int e = 0; e < ne; ++e)
    if (w[e] != 0.0)
      t.emplace_back(nf + e, nf + e, w[e] * mesh.volume[e]);
  return from_triplets(nf + ne, t);
}

SparseMatrix shifted_cecr_matrix(const DiscreteSystem& sys, double sigma)
{
  if (sys.space != Space::ECR)
    throw InputError("shifted_cecr_matrix needs an ECR system");
  SparseMatrix A = sys.K + sys.C0 + sigma * sys.M0;
  A.makeCompressed();
  return A;
}

double ecr_evaluate(const Mesh& mesh, const DiscreteSystem&, const Vector& u, int e,
                    const Point& x)
{
  const int dim = mesh.dim, nd = dim + 2, nf = mesh.num_faces();
  const EcrLocal L = ecr_local_basis(mesh, e);
  Eigen::VectorXd loc(nd);
  for (int i = 0; i <= dim; ++i)
    loc(i) = u(mesh.element_faces[e][i]);
  loc(dim + 1) = u(nf + e);
  const Eigen::VectorXd c = L.coeff * loc;
  double val = c(0), rr = 0.0;
  for (int r = 0; r < dim; ++r)
  {
    const double t = (x[r] - L.centroid[r]) / L.scale;
    val += c(1 + r) * t;
    rr += t * t;
  }
  return val + c(dim + 1) * rr;
}

void dump_matrices(const DiscreteSystem& sys, const std::string& dir, const std::string& prefix)
{
  std::filesystem::create_directories(dir);
  auto save = [&](const SparseMatrix& A, const char* name)
  {
    // Symmetric Matrix Market files list the lower triangle only.
    const SparseMatrix lower = A.triangularView<Eigen::Lower>();
    const std::string path = (std::filesystem::path(dir) / (prefix + name)).string();
    if (!Eigen::saveMarket(lower, path, Eigen::Symmetric))
      throw InputError("cannot write " + path);
  };
  save(sys.K, "K.mtx");
  save(sys.M, "M.mtx");
  if (sys.space == Space::ECR)
  {
    save(sys.M0, "M0.mtx");
    save(sys.C0, "C0.mtx");
  }
  else
    save(sys.CP1, "V.mtx");
}

} // namespace cecr
