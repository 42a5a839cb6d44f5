// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cecr
{

/// Attractive Coulomb potential V(x) = -sum_i Z_i / |x - a_i|.
struct PotentialSpec
{
  int dim = 2;
  std::vector<Point> centers;
  std::vector<double> charges;
};

/// Piecewise-constant field, one value per element.
struct CellField
{
  std::vector<double> values;
};

void validate_potential(const PotentialSpec& pot);

double coulomb_potential(const PotentialSpec& pot, const Point& x);

/// Exact integral of 1/|x - a| over a triangle (z = 0) for any point a in
/// the plane, including vertices and edges of the triangle.
double integral_inverse_distance_2d(const std::array<Point, 3>& tri, const Point& a);

/// Exact integral of 1/|x - a| over a tetrahedron for any point a.
double integral_inverse_distance_3d(const std::array<Point, 4>& tet, const Point& a);

/// |K|^{-1} * integral over K of -Z/|x - a|.
double element_average_coulomb_2d(const std::array<Point, 3>& tri, const Point& a, double Z);
double element_average_coulomb_3d(const std::array<Point, 4>& tet, const Point& a, double Z);

/// Element averages of the Coulomb potential on every element.
CellField assemble_ch(const Mesh& mesh, const PotentialSpec& pot);

/// Element averages of a smooth test potential by a high-order rule.
/// Test hook for non-Coulomb potentials (constant, polynomial).
CellField assemble_ch_smooth(const Mesh& mesh, const std::function<double(const Point&)>& f);

/// Bounds of V over the closed element from nearest and farthest distances.
struct PotentialRange
{
  double lo; ///< lower bound of V on K (most negative)
  double hi; ///< upper bound of V on K
};
PotentialRange potential_range(const Mesh& mesh, int e, const PotentialSpec& pot);

/// Upper bound of sup over K of |V - c|; exact for a single center.
double sup_deviation(const Mesh& mesh, int e, const PotentialSpec& pot, double c);

/// Integral over element e of |V - c|^p, 1 <= p < dim.
/// Integrates along rays from the vertex nearest to a center, splitting each
/// ray at the zeros of V - c and resolving the Coulomb singularity by a
/// power substitution. n is the number of Gauss points per direction.
double integral_abs_deviation_pow(const Mesh& mesh, int e, const PotentialSpec& pot, double c,
                                  double p, int n = 12);

/// Local matrix of integral over element e of V * phi_i * phi_j with the
/// P1 hat functions phi of the element vertices.
void p1_potential_local(const Mesh& mesh, int e, const PotentialSpec& pot, double out[4][4],
                        int n = 8);

void write_cell_field(std::ostream& os, const CellField& f);
CellField read_cell_field(std::istream& is, int expected_size);

} // namespace cecr
