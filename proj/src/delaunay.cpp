// SPDX-License-Identifier: MIT
#include "cecr/delaunay.hpp"

#include "cecr/errors.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cecr
{

namespace
{
using P2 = std::array<double, 2>;

constexpr double eps_half = std::numeric_limits<double>::epsilon() / 2.0;
constexpr double orient_bound = (3.0 + 16.0 * eps_half) * eps_half;
constexpr double incircle_bound = (10.0 + 96.0 * eps_half) * eps_half;

int sign_of(const mpq_class& q) { return sgn(q); }

int orient2d_exact(const P2& a, const P2& b, const P2& c)
{
  const mpq_class bx = mpq_class(b[0]) - a[0], by = mpq_class(b[1]) - a[1];
  const mpq_class cx = mpq_class(c[0]) - a[0], cy = mpq_class(c[1]) - a[1];
  return sign_of(bx * cy - by * cx);
}

int incircle_exact(const P2& a, const P2& b, const P2& c, const P2& d)
{
  const mpq_class adx = mpq_class(a[0]) - d[0], ady = mpq_class(a[1]) - d[1];
  const mpq_class bdx = mpq_class(b[0]) - d[0], bdy = mpq_class(b[1]) - d[1];
  const mpq_class cdx = mpq_class(c[0]) - d[0], cdy = mpq_class(c[1]) - d[1];
  const mpq_class al = adx * adx + ady * ady;
  const mpq_class bl = bdx * bdx + bdy * bdy;
  const mpq_class cl = cdx * cdx + cdy * cdy;
  const mpq_class det = al * (bdx * cdy - cdx * bdy) + bl * (cdx * ady - adx * cdy)
                        + cl * (adx * bdy - bdx * ady);
  return sign_of(det);
}

struct Tri
{
  std::array<int, 3> v;
  std::array<int, 3> nb; // neighbor across the edge opposite v[i]
  bool alive;
};

} // namespace

int orient2d(const P2& a, const P2& b, const P2& c)
{
  const double l = (b[0] - a[0]) * (c[1] - a[1]);
  const double r = (b[1] - a[1]) * (c[0] - a[0]);
  const double det = l - r;
  const double bound = orient_bound * (std::abs(l) + std::abs(r));
  if (det > bound)
    return 1;
  if (-det > bound)
    return -1;
  return orient2d_exact(a, b, c);
}

int incircle(const P2& a, const P2& b, const P2& c, const P2& d)
{
  const double adx = a[0] - d[0], ady = a[1] - d[1];
  const double bdx = b[0] - d[0], bdy = b[1] - d[1];
  const double cdx = c[0] - d[0], cdy = c[1] - d[1];
  const double bc = bdx * cdy - cdx * bdy, ca = cdx * ady - adx * cdy, ab = adx * bdy - bdx * ady;
  const double al = adx * adx + ady * ady, bl = bdx * bdx + bdy * bdy, cl = cdx * cdx + cdy * cdy;
  const double det = al * bc + bl * ca + cl * ab;
  const double perm = (std::abs(bdx * cdy) + std::abs(cdx * bdy)) * al
                      + (std::abs(cdx * ady) + std::abs(adx * cdy)) * bl
                      + (std::abs(adx * bdy) + std::abs(bdx * ady)) * cl;
  const double bound = incircle_bound * perm;
  if (det > bound)
    return 1;
  if (-det > bound)
    return -1;
  return incircle_exact(a, b, c, d);
}

std::vector<std::array<int, 3>> delaunay_2d(const std::vector<P2>& input)
{
  const int n = static_cast<int>(input.size());
  if (n < 3)
    throw InputError("delaunay_2d: need at least 3 points");

  double xmin = input[0][0], xmax = xmin, ymin = input[0][1], ymax = ymin;
  for (const P2& p : input)
  {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const double L = std::max(xmax - xmin, ymax - ymin);
  if (!(L > 0.0))
    throw InputError("delaunay_2d: degenerate point set");
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double M = 100.0 * L;

  std::vector<P2> pts(input);
  pts.push_back({cx - 2.0 * M, cy - M});
  pts.push_back({cx + 2.0 * M, cy - M});
  pts.push_back({cx, cy + 2.0 * M});

  std::vector<Tri> tris;
  tris.reserve(2 * static_cast<std::size_t>(n) + 16);
  tris.push_back({{n, n + 1, n + 2}, {-1, -1, -1}, true});
  std::vector<int> free_slots;

  std::vector<int> cavity, stack;
  std::vector<char> in_cavity(tris.size(), 0);
  struct BEdge
  {
    int a, b, outer;
  };
  std::vector<BEdge> bedges;
  std::vector<int> created;

  int last = 0;
  for (int ip = 0; ip < n; ++ip)
  {
    const P2& p = pts[ip];

    // Walk to a triangle containing p.
    int t = last;
    int steps = 0;
    for (;;)
    {
      const Tri& T = tris[t];
      int next = -1;
      for (int k = 0; k < 3; ++k)
      {
        const int i = (k + steps) % 3;
        if (orient2d(pts[T.v[(i + 1) % 3]], pts[T.v[(i + 2) % 3]], p) < 0)
        {
          next = T.nb[i];
          break;
        }
      }
      if (next < 0)
        break;
      t = next;
      if (++steps > 4 * (n + 10))
        throw NumericalError("delaunay_2d: point location did not terminate");
    }
    for (int k = 0; k < 3; ++k)
      if (pts[tris[t].v[k]] == p)
        throw InputError("delaunay_2d: duplicate point");

    // Grow the cavity of triangles whose circumcircle strictly contains p.
    cavity.clear();
    stack.assign(1, t);
    if (in_cavity.size() < tris.size())
      in_cavity.resize(tris.size(), 0);
    in_cavity[t] = 1;
    while (!stack.empty())
    {
      const int c = stack.back();
      stack.pop_back();
      cavity.push_back(c);
      for (int i = 0; i < 3; ++i)
      {
        const int nb = tris[c].nb[i];
        if (nb < 0 || in_cavity[nb])
          continue;
        const Tri& N = tris[nb];
        if (incircle(pts[N.v[0]], pts[N.v[1]], pts[N.v[2]], p) > 0)
        {
          in_cavity[nb] = 1;
          stack.push_back(nb);
        }
      }
    }

    bedges.clear();
    for (int c : cavity)
      for (int i = 0; i < 3; ++i)
      {
        const int nb = tris[c].nb[i];
        if (nb >= 0 && in_cavity[nb])
          continue;
        bedges.push_back({tris[c].v[(i + 1) % 3], tris[c].v[(i + 2) % 3], nb});
      }
    for (int c : cavity)
    {
      in_cavity[c] = 0;
      tris[c].alive = false;
      free_slots.push_back(c);
    }

    // Star the cavity boundary from p.
    created.clear();
    for (const BEdge& e : bedges)
    {
      int id;
      Tri T{{e.a, e.b, ip}, {-1, -1, e.outer}, true};
      if (!free_slots.empty())
      {
        id = free_slots.back();
        free_slots.pop_back();
        tris[id] = T;
      }
      else
      {
        id = static_cast<int>(tris.size());
        tris.push_back(T);
      }
      created.push_back(id);
      if (e.outer >= 0)
      {
        Tri& O = tris[e.outer];
        for (int i = 0; i < 3; ++i)
        {
          const int a = O.v[(i + 1) % 3], b = O.v[(i + 2) % 3];
          if (a == e.b && b == e.a)
            O.nb[i] = id;
        }
      }
    }
    for (std::size_t i = 0; i < created.size(); ++i)
    {
      Tri& T = tris[created[i]];
      // Neighbor opposite v[0]=a shares edge (b, p): the new triangle starting at b.
      // Neighbor opposite v[1]=b shares edge (p, a): the new triangle ending at a.
      for (std::size_t j = 0; j < created.size(); ++j)
      {
        if (i == j)
          continue;
        const Tri& S = tris[created[j]];
        if (S.v[0] == T.v[1])
          T.nb[0] = created[j];
        if (S.v[1] == T.v[0])
          T.nb[1] = created[j];
      }
    }
    if (in_cavity.size() < tris.size())
      in_cavity.resize(tris.size(), 0);
    last = created.front();
  }

  std::vector<std::array<int, 3>> out;
  for (const Tri& T : tris)
  {
    if (!T.alive || T.v[0] >= n || T.v[1] >= n || T.v[2] >= n)
      continue;
    out.push_back(T.v);
  }
  return out;
}

} // namespace cecr
