// SPDX-License-Identifier: MIT
//
// Small meshes and brute-force helpers shared by the unit tests.
#pragma once

#include "cecr/geometry.hpp"
#include "cecr/potential.hpp"
#include "cecr/quadrature.hpp"

#include <cmath>
#include <functional>

namespace cecr::test
{

inline Box unit_square() { return Box{2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}}; }

/// Uniform mesh of the unit square with element diameters at most h.
inline Mesh uniform_square(double h)
{
  GradingSpec g;
  g.h = h;
  return build_graded_mesh_2d(unit_square(), g);
}

/// Mesh built by hand from vertices and elements.
inline Mesh hand_mesh(int dim, std::vector<Point> v, std::vector<std::array<int, 4>> e,
                      const std::vector<Point>& centers = {})
{
  Mesh m;
  m.dim = dim;
  m.vertices = std::move(v);
  m.elements = std::move(e);
  finalize_mesh(m, centers);
  return m;
}

/// Two triangles splitting a square of the given side along its diagonal.
inline Mesh two_triangle_square(double side)
{
  return hand_mesh(2, {{0, 0, 0}, {side, 0, 0}, {side, side, 0}, {0, side, 0}},
                   {{0, 1, 2, -1}, {0, 2, 3, -1}});
}

/// Integral of f over element e with an n-point collapsed rule.
inline double integrate_element(const Mesh& m, int e, const std::function<double(const Point&)>& f,
                                int n = 8)
{
  Point v[4];
  element_points(m, e, v);
  const SimplexRule& R = simplex_rule(m.dim, n);
  const double jac = std::abs(simplex_signed_volume(m.dim, v)) * (m.dim == 2 ? 2.0 : 6.0);
  double sum = 0.0;
  for (std::size_t q = 0; q < R.weights.size(); ++q)
  {
    Point x = v[0];
    for (int i = 1; i <= m.dim; ++i)
      for (int d = 0; d < 3; ++d)
        x[d] += R.points[q][i - 1] * (v[i][d] - v[0][d]);
    sum += R.weights[q] * f(x);
  }
  return sum * jac;
}

/// Average of f over face f_id by Gauss points on the face (edge or triangle).
inline double face_average(const Mesh& m, int f_id, const std::function<double(const Point&)>& f)
{
  const auto& fv = m.faces[f_id];
  const Point& a = m.vertices[fv[0]];
  const Point& b = m.vertices[fv[1]];
  if (m.dim == 2)
  {
    const Rule1D& g = gauss_legendre(6);
    double s = 0.0;
    for (std::size_t q = 0; q < g.x.size(); ++q)
    {
      const double t = g.x[q];
      s += g.w[q] * f({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), 0.0});
    }
    return s;
  }
  const Point& c = m.vertices[fv[2]];
  const SimplexRule& R = simplex_rule(2, 6);
  double s = 0.0;
  for (std::size_t q = 0; q < R.weights.size(); ++q)
  {
    const double u = R.points[q][0], w = R.points[q][1];
    Point x;
    for (int d = 0; d < 3; ++d)
      x[d] = a[d] + u * (b[d] - a[d]) + w * (c[d] - a[d]);
    s += R.weights[q] * f(x);
  }
  return 2.0 * s;
}

} // namespace cecr::test
