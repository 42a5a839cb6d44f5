// SPDX-License-Identifier: MIT
#include "cecr/potential.hpp"

#include "cecr/errors.hpp"
#include "cecr/quadrature.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace cecr
{

namespace
{

Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Point cross(const Point& a, const Point& b)
{
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Point& a) { return std::sqrt(dot(a, a)); }
Point axpy(const Point& x, double s, const Point& d)
{
  return {x[0] + s * d[0], x[1] + s * d[1], x[2] + s * d[2]};
}

// asinh(t2/d) - asinh(t1/d) for d > 0 without cancellation.
double asinh_difference(double t1, double t2, double d)
{
  if (t1 >= 0.0 && t2 >= 0.0)
  {
    const double r1 = std::hypot(d, t1), r2 = std::hypot(d, t2);
    const double den = t2 * r1 + t1 * r2;
    return den > 0.0 ? std::asinh((t2 - t1) * (t2 + t1) / den) : 0.0;
  }
  if (t1 <= 0.0 && t2 <= 0.0)
    return asinh_difference(-t2, -t1, d);
  return std::asinh(t2 / d) - std::asinh(t1 / d);
}

// Integral over the planar triangle w (counterclockwise about normal nu)
// of 1/sqrt(rho^2 + hh^2), rho the in-plane distance to the projection p.
double face_inverse_distance(const std::array<Point, 3>& w, const Point& nu, const Point& p,
                             double hh)
{
  const double H = std::abs(hh);
  double total = 0.0;
  for (int i = 0; i < 3; ++i)
  {
    const Point& a = w[i];
    const Point& b = w[(i + 1) % 3];
    const Point e = sub(b, a);
    const double len = norm(e);
    const Point tau{e[0] / len, e[1] / len, e[2] / len};
    const Point n = cross(tau, nu); // in-plane outward normal of the edge
    const double d = dot(sub(a, p), n);
    if (d == 0.0)
      continue;
    const double D = std::abs(d);
    const double s1 = dot(sub(a, p), tau), s2 = dot(sub(b, p), tau);
    const double c = std::hypot(D, H);
    double part = D * asinh_difference(s1, s2, c);
    if (H > 0.0)
    {
      const double w1 = std::hypot(s1, c), w2 = std::hypot(s2, c);
      part += H * (std::atan(H * s2 / (D * w2)) - std::atan(H * s1 / (D * w1)));
      part -= H * (std::atan(s2 / D) - std::atan(s1 / D));
    }
    total += (d > 0.0 ? part : -part);
  }
  return total;
}

double simplex_volume_abs(int dim, const Point* v) { return std::abs(simplex_signed_volume(dim, v)); }

// Plain collapsed Gauss rule for a smooth integrand over a simplex.
template <class F>
double gauss_simplex(int dim, const Point* v, F&& f, int n)
{
  const SimplexRule& R = simplex_rule(dim, n);
  const Point e1 = sub(v[1], v[0]), e2 = sub(v[2], v[0]);
  const Point e3 = dim == 3 ? sub(v[3], v[0]) : Point{0.0, 0.0, 0.0};
  const double J = simplex_volume_abs(dim, v) * (dim == 2 ? 2.0 : 6.0);
  double s = 0.0;
  for (std::size_t q = 0; q < R.weights.size(); ++q)
  {
    const auto& xi = R.points[q];
    Point x = axpy(axpy(axpy(v[0], xi[0], e1), xi[1], e2), xi[2], e3);
    s += R.weights[q] * f(x);
  }
  return s * J;
}

// Children of a red refinement of a simplex.
std::vector<std::array<Point, 4>> red_children(int dim, const Point* v)
{
  auto mid = [](const Point& a, const Point& b)
  { return Point{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])}; };
  std::vector<std::array<Point, 4>> out;
  if (dim == 2)
  {
    const Point ab = mid(v[0], v[1]), bc = mid(v[1], v[2]), ca = mid(v[2], v[0]);
    out.push_back({v[0], ab, ca, Point{}});
    out.push_back({ab, v[1], bc, Point{}});
    out.push_back({ca, bc, v[2], Point{}});
    out.push_back({ab, bc, ca, Point{}});
  }
  else
  {
    const Point x01 = mid(v[0], v[1]), x02 = mid(v[0], v[2]), x03 = mid(v[0], v[3]);
    const Point x12 = mid(v[1], v[2]), x13 = mid(v[1], v[3]), x23 = mid(v[2], v[3]);
    out.push_back({v[0], x01, x02, x03});
    out.push_back({x01, v[1], x12, x13});
    out.push_back({x02, x12, v[2], x23});
    out.push_back({x03, x13, x23, v[3]});
    out.push_back({x01, x02, x03, x13});
    out.push_back({x01, x02, x12, x13});
    out.push_back({x02, x03, x13, x23});
    out.push_back({x02, x12, x13, x23});
  }
  return out;
}

// Barycentric coordinates of x with respect to the simplex v.
std::array<double, 4> barycentric(int dim, const Point* v, const Point& x)
{
  std::array<double, 4> l{0, 0, 0, 0};
  if (dim == 2)
  {
    const Point e1 = sub(v[1], v[0]), e2 = sub(v[2], v[0]), r = sub(x, v[0]);
    const double det = e1[0] * e2[1] - e1[1] * e2[0];
    l[1] = (r[0] * e2[1] - r[1] * e2[0]) / det;
    l[2] = (e1[0] * r[1] - e1[1] * r[0]) / det;
    l[0] = 1.0 - l[1] - l[2];
  }
  else
  {
    const Point e1 = sub(v[1], v[0]), e2 = sub(v[2], v[0]), e3 = sub(v[3], v[0]),
                r = sub(x, v[0]);
    const double det = dot(e1, cross(e2, e3));
    l[1] = dot(r, cross(e2, e3)) / det;
    l[2] = dot(e1, cross(r, e3)) / det;
    l[3] = dot(e1, cross(e2, r)) / det;
    l[0] = 1.0 - l[1] - l[2] - l[3];
  }
  return l;
}

int center_vertex_of(const Mesh& mesh, int e, int c)
{
  const int id = mesh.nucleus_vertex_ids.empty() ? -1 : mesh.nucleus_vertex_ids[c];
  for (int i = 0; i <= mesh.dim; ++i)
    if (mesh.elements[e][i] == id)
      return i;
  return -1;
}

// Power m of the substitution u = s^m that makes u^{dim-1-p} du smooth at 0.
int singular_power(int dim, double p)
{
  for (int m = 1; m <= 12; ++m)
  {
    const double expo = m * (dim - p) - 1.0;
    if (expo > -1e-9 && std::abs(expo - std::round(expo)) < 1e-9)
      return m;
  }
  return static_cast<int>(std::ceil(2.0 / (dim - p)));
}

// Smallest integer k such that k * x is an integer (x rational with small
// denominator), used to pick substitution powers that make integrands smooth.
int integer_multiplier(double x)
{
  for (int k = 1; k <= 12; ++k)
    if (std::abs(k * x - std::round(k * x)) < 1e-9)
      return k;
  return 3;
}

// Breakpoints a = t0 < ... < tm = b at the sign changes of f found on a
// uniform scan with ns intervals, each refined to full precision.
template <class F>
std::vector<double> sign_changes(F&& f, double a, double b, int ns)
{
  std::vector<double> cuts{a};
  double t_prev = a, f_prev = f(a);
  for (int k = 1; k <= ns; ++k)
  {
    const double t = k == ns ? b : a + (b - a) * k / ns;
    const double ft = f(t);
    if (ft == 0.0 && k < ns)
      cuts.push_back(t);
    else if ((f_prev < 0.0 && ft > 0.0) || (f_prev > 0.0 && ft < 0.0))
    {
      boost::uintmax_t iters = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(52);
      const auto br = boost::math::tools::toms748_solve(f, t_prev, t, f_prev, ft, tol, iters);
      cuts.push_back(0.5 * (br.first + br.second));
    }
    t_prev = t;
    f_prev = ft;
  }
  cuts.push_back(b);
  if (cuts.front() > 0.0 && cuts.front() < 1e-200)
    cuts.front() = 0.0;
  return cuts;
}

// Map s in [0,1] to t = I_s(a, b), the regularized incomplete beta function,
// so t ~ s^a at 0 and 1 - t ~ (1 - s)^b at 1. Values at the Gauss nodes.
struct EndMap
{
  std::vector<double> t, dt;
};

EndMap end_map(int a, int b, const Rule1D& g)
{
  EndMap m;
  for (double s : g.x)
  {
    m.t.push_back(boost::math::ibeta(a, b, s));
    m.dt.push_back(boost::math::ibeta_derivative(a, b, s));
  }
  return m;
}

} // namespace

void validate_potential(const PotentialSpec& pot)
{
  if (pot.dim != 2 && pot.dim != 3)
    throw InputError("potential dimension must be 2 or 3");
  if (pot.centers.size() != pot.charges.size())
    throw InputError("potential needs one charge per center");
  for (std::size_t i = 0; i < pot.centers.size(); ++i)
  {
    if (!(pot.charges[i] > 0.0))
      throw InputError("charges must be strictly positive");
    for (std::size_t j = 0; j < i; ++j)
      if (pot.centers[i] == pot.centers[j])
        throw InputError("centers must be pairwise distinct");
  }
}

double coulomb_potential(const PotentialSpec& pot, const Point& x)
{
  double v = 0.0;
  for (std::size_t i = 0; i < pot.centers.size(); ++i)
    v -= pot.charges[i] / distance(x, pot.centers[i]);
  return v;
}

double integral_inverse_distance_2d(const std::array<Point, 3>& tri, const Point& a)
{
  std::array<Point, 3> t = tri;
  double area = simplex_signed_volume(2, t.data());
  if (area == 0.0)
    throw InputError("degenerate triangle");
  if (area < 0.0)
    std::swap(t[1], t[2]);
  const double diam = simplex_diameter(2, t.data());
  if (point_simplex_distance(2, t.data(), a) > 50.0 * diam)
    return gauss_simplex(2, t.data(), [&](const Point& x) { return 1.0 / distance(x, a); }, 10);
  // Divergence theorem with the field (x - a)/|x - a|, whose divergence is 1/|x - a|.
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
  {
    const Point& p = t[i];
    const Point& q = t[(i + 1) % 3];
    const Point e = sub(q, p);
    const double len = norm(e);
    const Point tau{e[0] / len, e[1] / len, 0.0};
    const Point nu{tau[1], -tau[0], 0.0};
    const double d = dot(sub(p, a), nu);
    if (d == 0.0)
      continue;
    const double t1 = dot(sub(p, a), tau), t2 = dot(sub(q, a), tau);
    s += d * asinh_difference(t1, t2, std::abs(d));
  }
  return s;
}

double integral_inverse_distance_3d(const std::array<Point, 4>& tet, const Point& a)
{
  std::array<Point, 4> t = tet;
  const double vol = simplex_signed_volume(3, t.data());
  if (vol == 0.0)
    throw InputError("degenerate tetrahedron");
  if (vol < 0.0)
    std::swap(t[2], t[3]);
  const double diam = simplex_diameter(3, t.data());
  if (point_simplex_distance(3, t.data(), a) > 50.0 * diam)
    return gauss_simplex(3, t.data(), [&](const Point& x) { return 1.0 / distance(x, a); }, 8);
  // Divergence theorem: div((x - a)/|x - a|) = 2/|x - a| in three dimensions.
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
  {
    // Face opposite vertex i, ordered counterclockwise about the outward normal.
    std::array<Point, 3> w;
    int c = 0;
    for (int j = 0; j < 4; ++j)
      if (j != i)
        w[c++] = t[j];
    Point nu = cross(sub(w[1], w[0]), sub(w[2], w[0]));
    if (dot(nu, sub(w[0], t[i])) < 0.0)
    {
      std::swap(w[1], w[2]);
      nu = cross(sub(w[1], w[0]), sub(w[2], w[0]));
    }
    const double nn = norm(nu);
    nu = {nu[0] / nn, nu[1] / nn, nu[2] / nn};
    const double hf = dot(sub(w[0], a), nu);
    if (hf == 0.0)
      continue;
    const Point p = axpy(a, hf, nu);
    s += 0.5 * hf * face_inverse_distance(w, nu, p, hf);
  }
  return s;
}

double element_average_coulomb_2d(const std::array<Point, 3>& tri, const Point& a, double Z)
{
  const double area = simplex_volume_abs(2, tri.data());
  if (!(area > 0.0))
    throw InputError("degenerate triangle");
  if (Z == 0.0)
    return 0.0;
  return -Z * integral_inverse_distance_2d(tri, a) / area;
}

double element_average_coulomb_3d(const std::array<Point, 4>& tet, const Point& a, double Z)
{
  const double vol = simplex_volume_abs(3, tet.data());
  if (!(vol > 0.0))
    throw InputError("degenerate tetrahedron");
  if (Z == 0.0)
    return 0.0;
  return -Z * integral_inverse_distance_3d(tet, a) / vol;
}

CellField assemble_ch(const Mesh& mesh, const PotentialSpec& pot)
{
  validate_potential(pot);
  if (pot.dim != mesh.dim)
    throw InputError("potential and mesh dimensions differ");
  CellField f;
  f.values.assign(mesh.num_elements(), 0.0);
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    std::array<Point, 4> p;
    element_points(mesh, e, p.data());
    double v = 0.0;
    for (std::size_t c = 0; c < pot.centers.size(); ++c)
    {
      if (mesh.dim == 2)
        v += element_average_coulomb_2d({p[0], p[1], p[2]}, pot.centers[c], pot.charges[c]);
      else
        v += element_average_coulomb_3d(p, pot.centers[c], pot.charges[c]);
    }
    f.values[e] = v;
  }
  return f;
}

CellField assemble_ch_smooth(const Mesh& mesh, const std::function<double(const Point&)>& fn)
{
  CellField f;
  f.values.assign(mesh.num_elements(), 0.0);
  for (int e = 0; e < mesh.num_elements(); ++e)
  {
    Point p[4];
    element_points(mesh, e, p);
    f.values[e] = gauss_simplex(mesh.dim, p, fn, 6) / mesh.volume[e];
  }
  return f;
}

PotentialRange potential_range(const Mesh& mesh, int e, const PotentialSpec& pot)
{
  Point p[4];
  element_points(mesh, e, p);
  PotentialRange r{0.0, 0.0};
  for (std::size_t c = 0; c < pot.centers.size(); ++c)
  {
    const double near = point_simplex_distance(mesh.dim, p, pot.centers[c]);
    const double far = point_simplex_max_distance(mesh.dim, p, pot.centers[c]);
    r.lo -= (near > 0.0) ? pot.charges[c] / near : std::numeric_limits<double>::infinity();
    r.hi -= pot.charges[c] / far;
  }
  return r;
}

double sup_deviation(const Mesh& mesh, int e, const PotentialSpec& pot, double c)
{
  const PotentialRange r = potential_range(mesh, e, pot);
  return std::max(r.hi - c, c - r.lo);
}

double integral_abs_deviation_pow(const Mesh& mesh, int e, const PotentialSpec& pot, double c,
                                  double p, int n)
{
  const int dim = mesh.dim;
  if (!(p >= 1.0 && p < dim))
    throw InputError("exponent must satisfy 1 <= p < dim");
  Point v[4];
  element_points(mesh, e, v);

  int apex = -1;
  for (std::size_t ic = 0; ic < pot.centers.size(); ++ic)
  {
    const int loc = center_vertex_of(mesh, e, static_cast<int>(ic));
    if (loc >= 0)
    {
      if (apex >= 0)
        throw InputError("element touches two centers");
      apex = loc;
    }
  }
  const bool singular = apex >= 0;
  if (!singular)
  {
    // Apex at the vertex nearest to any center keeps rays roughly radial.
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= dim; ++i)
      for (const Point& a : pot.centers)
        if (distance(v[i], a) < best)
        {
          best = distance(v[i], a);
          apex = i;
        }
    if (apex < 0)
      apex = 0;
  }
  const Point A = v[apex];
  Point w[3];
  int cnt = 0;
  for (int i = 0; i <= dim; ++i)
    if (i != apex)
      w[cnt++] = v[i];
  const double J = simplex_volume_abs(dim, v) * (dim == 2 ? 2.0 : 6.0);
  const Rule1D& g = gauss_legendre(n);
  // A Coulomb end behaves like u^{dim-1-p} and a simple zero of V - c like
  // |u - u0|^p; these powers make both polynomial after substitution.
  const int m_sing = singular_power(dim, p);
  const int m_root = integer_multiplier(p + 1.0);
  std::vector<std::pair<int, int>> keys;
  std::vector<EndMap> maps;
  for (int l : {1, m_sing, m_root})
    for (int r : {1, m_root})
      if (std::find(keys.begin(), keys.end(), std::make_pair(l, r)) == keys.end())
      {
        keys.emplace_back(l, r);
        maps.push_back(end_map(l, r, g));
      }
  auto map_index = [&](int l, int r)
  { return std::find(keys.begin(), keys.end(), std::make_pair(l, r)) - keys.begin(); };

  auto ray_integral = [&](const Point& y)
  {
    const Point dir = sub(y, A);
    auto q = [&](double u) { return coulomb_potential(pot, axpy(A, u, dir)) - c; };
    auto integrand = [&](double u)
    { return std::pow(std::abs(q(u)), p) * std::pow(u, dim - 1); };

    // Sign changes of V - c along the ray; V = -inf at a singular apex.
    const std::vector<double> cuts = sign_changes(q, singular ? 1e-300 : 0.0, 1.0, 24);

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    {
      const double a = cuts[i], b = cuts[i + 1];
      if (!(b > a))
        continue;
      const int left = (i == 0) ? (singular ? m_sing : 1) : m_root;
      const int right = (i + 2 == cuts.size()) ? 1 : m_root;
      const EndMap& em = maps[map_index(left, right)];
      double s = 0.0;
      for (int k = 0; k < n; ++k)
      {
        const double u = a + (b - a) * em.t[k];
        if (u <= 0.0)
          continue;
        s += g.w[k] * integrand(u) * em.dt[k];
      }
      total += s * (b - a);
    }
    return total;
  };

  // Where the zero set of V - c meets the far side, ray integrals behave like
  // |s - s0|^(p+1); split there and use the root substitution at the cut.
  auto segment_integral = [&](const Point& y0, const Point& y1)
  {
    const Point dir = sub(y1, y0);
    auto q = [&](double s) { return coulomb_potential(pot, axpy(y0, s, dir)) - c; };
    const std::vector<double> cuts = sign_changes(q, 0.0, 1.0, 24);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    {
      const double a = cuts[i], b = cuts[i + 1];
      const int left = i == 0 ? 1 : m_root;
      const int right = i + 2 == cuts.size() ? 1 : m_root;
      const EndMap& em = maps[map_index(left, right)];
      double part = 0.0;
      for (int k = 0; k < n; ++k)
      {
        const double s = a + (b - a) * em.t[k];
        part += g.w[k] * ray_integral(axpy(y0, s, dir)) * em.dt[k];
      }
      total += part * (b - a);
    }
    return total;
  };

  double sum = 0.0;
  if (dim == 2)
    sum = segment_integral(w[0], w[1]);
  else
  {
    // Collapsed parametrization of the opposite face: for each a the segment
    // from w0 + a (w1 - w0) to w0 + a (w2 - w0), Jacobian a.
    for (int i = 0; i < n; ++i)
    {
      const double a = g.x[i];
      const Point y0 = axpy(w[0], a, sub(w[1], w[0]));
      const Point y1 = axpy(w[0], a, sub(w[2], w[0]));
      sum += g.w[i] * a * segment_integral(y0, y1);
    }
  }
  return sum * J;
}

void p1_potential_local(const Mesh& mesh, int e, const PotentialSpec& pot, double out[4][4], int n)
{
  const int dim = mesh.dim;
  const int nl = dim + 1;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      out[i][j] = 0.0;
  Point v[4];
  element_points(mesh, e, v);
  for (std::size_t ic = 0; ic < pot.centers.size(); ++ic)
  {
    const Point& a = pot.centers[ic];
    const double Z = pot.charges[ic];
    const int loc = center_vertex_of(mesh, e, static_cast<int>(ic));
    if (loc >= 0)
    {
      // Collapse the reference origin onto the singular vertex.
      int order[4];
      order[0] = loc;
      int c = 1;
      for (int i = 0; i < nl; ++i)
        if (i != loc)
          order[c++] = i;
      const SimplexRule& R = simplex_rule(dim, n);
      const double J = mesh.volume[e] * (dim == 2 ? 2.0 : 6.0);
      for (std::size_t q = 0; q < R.weights.size(); ++q)
      {
        const auto& xi = R.points[q];
        double lam[4];
        lam[order[0]] = 1.0 - xi[0] - xi[1] - (dim == 3 ? xi[2] : 0.0);
        Point x = v[order[0]];
        for (int k = 1; k < nl; ++k)
        {
          lam[order[k]] = xi[k - 1];
          x = axpy(x, xi[k - 1], sub(v[order[k]], v[order[0]]));
        }
        const double wv = -Z / distance(x, a) * R.weights[q] * J;
        for (int i = 0; i < nl; ++i)
          for (int j = 0; j < nl; ++j)
            out[i][j] += wv * lam[i] * lam[j];
      }
    }
    else
    {
      // Subdivide until separated, then accumulate all pairs at once.
      auto visit = [&](auto&& self, const Point* w, int depth) -> void
      {
        if (point_simplex_distance(dim, w, a) < 2.0 * simplex_diameter(dim, w) && depth < 6)
        {
          for (const auto& c : red_children(dim, w))
            self(self, c.data(), depth + 1);
          return;
        }
        const SimplexRule& R = simplex_rule(dim, n);
        const Point e1 = sub(w[1], w[0]), e2 = sub(w[2], w[0]);
        const Point e3 = dim == 3 ? sub(w[3], w[0]) : Point{0.0, 0.0, 0.0};
        const double J = simplex_volume_abs(dim, w) * (dim == 2 ? 2.0 : 6.0);
        for (std::size_t q = 0; q < R.weights.size(); ++q)
        {
          const auto& xi = R.points[q];
          const Point x = axpy(axpy(axpy(w[0], xi[0], e1), xi[1], e2), xi[2], e3);
          const auto l = barycentric(dim, v, x);
          const double wv = -Z / distance(x, a) * R.weights[q] * J;
          for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
              out[i][j] += wv * l[i] * l[j];
        }
      };
      visit(visit, v, 0);
    }
  }
}

void write_cell_field(std::ostream& os, const CellField& f)
{
  for (double v : f.values)
    os << fmt::format("{:.17g}\n", v);
}

CellField read_cell_field(std::istream& is, int expected_size)
{
  CellField f;
  double v;
  while (is >> v)
    f.values.push_back(v);
  if (!is.eof())
    throw InputError("cell field: malformed value");
  if (expected_size >= 0 && static_cast<int>(f.values.size()) != expected_size)
    throw InputError(fmt::format("cell field has {} values, mesh has {} elements",
                                 f.values.size(), expected_size));
  return f;
}

} // namespace cecr
