// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <vector>

namespace cecr
{

/// Gauss-Legendre rule on [0, 1].
struct Rule1D
{
  std::vector<double> x;
  std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [0, 1], exact for degree 2n-1.
/// Rules are computed once and cached.
const Rule1D& gauss_legendre(int n);

/// Quadrature rule on the reference simplex with vertices 0, e_1, ..., e_dim.
/// Weights sum to the reference volume (1/2 or 1/6).
struct SimplexRule
{
  int dim = 2;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

/// Collapsed (Duffy) tensor Gauss-Legendre rule with n points per direction.
/// Exact for polynomials of degree 2n-2 in 2D and 2n-3 in 3D.
/// The collapsed vertex is the reference origin, where no point is placed.
const SimplexRule& simplex_rule(int dim, int n);

} // namespace cecr
