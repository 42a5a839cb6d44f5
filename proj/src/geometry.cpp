// SPDX-License-Identifier: MIT
#include "cecr/geometry.hpp"

#include "cecr/delaunay.hpp"
#include "cecr/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <unordered_map>

namespace cecr
{

namespace
{

Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Point add(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Point scale(const Point& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Point cross(const Point& a, const Point& b)
{
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Point& a) { return std::sqrt(dot(a, a)); }

Point midpoint(const Point& a, const Point& b)
{
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

// Closest point of triangle abc to p (Ericson, Real-Time Collision Detection, 5.1.5).
Point closest_on_triangle(const Point& p, const Point& a, const Point& b, const Point& c)
{
  const Point ab = sub(b, a), ac = sub(c, a), ap = sub(p, a);
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0)
    return a;
  const Point bp = sub(p, b);
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3)
    return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
    return add(a, scale(ab, d1 / (d1 - d3)));
  const Point cp = sub(p, c);
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6)
    return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
    return add(a, scale(ac, d2 / (d2 - d6)));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return add(b, scale(sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6))));
  const double denom = 1.0 / (va + vb + vc);
  return add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)));
}

double det3(const Point& a, const Point& b, const Point& c) { return dot(a, cross(b, c)); }

std::uint64_t edge_key(int a, int b)
{
  if (a > b)
    std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Uniform double in [0, 1) from a 64-bit generator, portable across libraries.
struct SplitMix
{
  std::uint64_t s;
  std::uint64_t next()
  {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

void validate_box(const Box& d)
{
  for (int k = 0; k < d.dim; ++k)
    if (!(d.hi[k] > d.lo[k]) || !std::isfinite(d.lo[k]) || !std::isfinite(d.hi[k]))
      throw InputError("domain has zero or negative extent");
}

double distance_to_box_boundary(const Box& d, const Point& p)
{
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d.dim; ++k)
    m = std::min({m, p[k] - d.lo[k], d.hi[k] - p[k]});
  return m;
}

void validate_centers(const Box& d, const std::vector<Point>& centers)
{
  for (std::size_t i = 0; i < centers.size(); ++i)
  {
    for (int k = d.dim; k < 3; ++k)
      if (centers[i][k] != 0.0)
        throw InputError("center has a nonzero coordinate beyond the domain dimension");
    if (!(distance_to_box_boundary(d, centers[i]) > 0.0))
      throw InputError(fmt::format("center {} is not strictly inside the domain", i));
    for (std::size_t j = 0; j < i; ++j)
      if (centers[i] == centers[j])
        throw InputError("centers must be pairwise distinct");
  }
}

void validate_grading(const GradingSpec& g)
{
  if (!(g.h > 0.0) || !(g.vartheta > 0.0))
    throw InputError("grading requires h > 0 and vartheta > 0");
  if (g.rule == PatchRule::power && !(g.beta > 0.0 && g.gamma_p > 0.0))
    throw InputError("power patch rule requires beta > 0 and gamma_p > 0");
  if (g.rule == PatchRule::fixed && !(g.rho > 0.0))
    throw InputError("fixed patch rule requires rho > 0");
}

// Smallest distance from a center to the boundary or to half the distance of
// another center: the largest admissible patch radius.
double max_patch_radius(const Box& d, const std::vector<Point>& centers)
{
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i)
  {
    m = std::min(m, distance_to_box_boundary(d, centers[i]));
    for (std::size_t j = 0; j < i; ++j)
      m = std::min(m, 0.5 * distance(centers[i], centers[j]));
  }
  return m;
}

// ---------------------------------------------------------------- 2D generator

Mesh uniform_mesh_2d(const Box& d, double h)
{
  const double lx = d.hi[0] - d.lo[0], ly = d.hi[1] - d.lo[1];
  const int nx = std::max(1, static_cast<int>(std::ceil(lx * std::numbers::sqrt2 / h)));
  const int ny = std::max(1, static_cast<int>(std::ceil(ly * std::numbers::sqrt2 / h)));
  Mesh m;
  m.dim = 2;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
    {
      const double x = (i == nx) ? d.hi[0] : d.lo[0] + lx * i / nx;
      const double y = (j == ny) ? d.hi[1] : d.lo[1] + ly * j / ny;
      m.vertices.push_back({x, y, 0.0});
    }
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
    {
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
      m.elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
    }
  finalize_mesh(m, {});
  return m;
}

struct RingLayout
{
  double delta; // angular step of the graded rings
  double q;     // radial ratio of the graded rings
  int n;        // points per graded ring
  double s_cap; // spacing of the far field
};

RingLayout ring_layout(const GradingSpec& g)
{
  RingLayout L;
  const double t = g.vartheta * g.h;
  int n = std::max(6, static_cast<int>(std::ceil(2.0 * std::numbers::pi / (0.65 * t))));
  L.n = n;
  L.delta = 2.0 * std::numbers::pi / n;
  L.q = 1.0 + L.delta * std::sqrt(3.0) / 2.0;
  L.s_cap = g.h;
  return L;
}

struct SpacedPoint
{
  Point p;
  double s;
  int owner;
};

// Cell hash used to reject points closer than a spacing-dependent radius.
class PointHash
{
public:
  explicit PointHash(double cell) : cell_(cell) {}
  void insert(const Point& p, double s)
  {
    cells_[key(p)].push_back({p, s});
  }
  bool conflicts(const Point& p, double s, double alpha) const
  {
    const long ix = static_cast<long>(std::floor(p[0] / cell_));
    const long iy = static_cast<long>(std::floor(p[1] / cell_));
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
      {
        auto it = cells_.find(pack(ix + dx, iy + dy));
        if (it == cells_.end())
          continue;
        for (const auto& [q, sq] : it->second)
          if (distance(p, q) < alpha * std::min(s, sq))
            return true;
      }
    return false;
  }

private:
  static std::uint64_t pack(long ix, long iy)
  {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32)
           | static_cast<std::uint32_t>(iy);
  }
  std::uint64_t key(const Point& p) const
  {
    return pack(static_cast<long>(std::floor(p[0] / cell_)),
                static_cast<long>(std::floor(p[1] / cell_)));
  }
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<Point, double>>> cells_;
};

// Point spacing wanted near x: graded toward the nearest center, capped at s_cap.
double target_spacing(const Point& x, const std::vector<Point>& centers, const RingLayout& L)
{
  double r = std::numeric_limits<double>::infinity();
  for (const Point& c : centers)
    r = std::min(r, distance(x, c));
  return std::min(L.delta * r, L.s_cap);
}

Mesh graded_mesh_2d_at(const Box& d, const GradingSpec& g, double rho)
{
  const RingLayout L = ring_layout(g);
  const std::vector<Point>& C = g.centers;

  std::vector<SpacedPoint> pts;

  // Boundary points: spacing follows target_spacing along each edge.
  const Point corners[4] = {{d.lo[0], d.lo[1], 0.0},
                            {d.hi[0], d.lo[1], 0.0},
                            {d.hi[0], d.hi[1], 0.0},
                            {d.lo[0], d.hi[1], 0.0}};
  for (int e = 0; e < 4; ++e)
  {
    const Point a = corners[e], b = corners[(e + 1) % 4];
    const double len = distance(a, b);
    const int ns = 4000;
    std::vector<double> cum(ns + 1, 0.0);
    for (int i = 0; i < ns; ++i)
    {
      const double tm = (i + 0.5) / ns;
      const Point x = add(a, scale(sub(b, a), tm));
      cum[i + 1] = cum[i] + (len / ns) / target_spacing(x, C, L);
    }
    const int np = std::max(1, static_cast<int>(std::ceil(cum[ns])));
    pts.push_back({a, target_spacing(a, C, L), -1});
    for (int k = 1; k < np; ++k)
    {
      const double target = cum[ns] * k / np;
      const auto it = std::lower_bound(cum.begin(), cum.end(), target);
      const int i = std::clamp(static_cast<int>(it - cum.begin()), 1, ns);
      const double frac = (target - cum[i - 1]) / (cum[i] - cum[i - 1]);
      const double tm = (i - 1 + frac) / ns;
      const Point x = add(a, scale(sub(b, a), tm));
      pts.push_back({x, target_spacing(x, C, L), -1});
    }
  }
  const std::size_t n_boundary = pts.size();

  for (std::size_t i = 0; i < C.size(); ++i)
    pts.push_back({C[i], 0.0, static_cast<int>(i)});

  PointHash hash(L.s_cap);
  for (std::size_t i = 0; i < n_boundary; ++i)
    hash.insert(pts[i].p, pts[i].s);

  const double alpha_boundary = 0.5, alpha_conflict = 0.6;
  for (std::size_t ic = 0; ic < C.size(); ++ic)
  {
    const Point& a = C[ic];
    SplitMix rng{g.seed * 0x100000001b3ULL + ic + 1};
    double rmax = 0.0;
    for (const Point& c : corners)
      rmax = std::max(rmax, distance(a, c));
    rmax += L.s_cap;

    std::vector<SpacedPoint> own;
    double phase = 2.0 * std::numbers::pi * rng.uniform();
    double r = rho;
    bool graded = true;
    while (r < rmax)
    {
      int n;
      double s;
      if (graded)
      {
        n = L.n;
        s = r * L.delta;
      }
      else
      {
        n = static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / L.s_cap));
        s = 2.0 * std::numbers::pi * r / n;
      }
      const double step = 2.0 * std::numbers::pi / n;
      for (int k = 0; k < n; ++k)
      {
        const double phi = phase + k * step;
        const Point p{a[0] + r * std::cos(phi), a[1] + r * std::sin(phi), 0.0};
        const double ds = distance_to_box_boundary(d, p);
        if (!(ds >= alpha_boundary * s))
          continue;
        bool mine = true;
        const double ra = distance(p, a);
        for (std::size_t jc = 0; jc < C.size() && mine; ++jc)
        {
          if (jc == ic)
            continue;
          const double rj = distance(p, C[jc]);
          if (rj < ra || (rj == ra && jc < ic))
            mine = false;
        }
        if (!mine)
          continue;
        if (hash.conflicts(p, s, alpha_conflict))
          continue;
        own.push_back({p, s, static_cast<int>(ic)});
      }
      if (graded)
      {
        phase += 0.5 * step + 0.1 * step * (rng.uniform() - 0.5);
        r *= L.q;
        if (r * L.delta >= L.s_cap)
          graded = false;
      }
      else
      {
        phase = 2.0 * std::numbers::pi * rng.uniform();
        r += L.s_cap * std::sqrt(3.0) / 2.0;
      }
    }
    for (const SpacedPoint& sp : own)
    {
      hash.insert(sp.p, sp.s);
      pts.push_back(sp);
    }
  }

  // Insert centers and rings first (coherent order for the walk), boundary last.
  std::vector<Point> ordered;
  ordered.reserve(pts.size());
  for (std::size_t i = n_boundary; i < pts.size(); ++i)
    ordered.push_back(pts[i].p);
  for (std::size_t i = 0; i < n_boundary; ++i)
    ordered.push_back(pts[i].p);

  auto triangulate = [&]
  {
    std::vector<std::array<double, 2>> xy;
    xy.reserve(ordered.size());
    for (const Point& p : ordered)
      xy.push_back({p[0], p[1]});
    Mesh t;
    t.dim = 2;
    t.vertices = ordered;
    for (const auto& tri : delaunay_2d(xy))
      t.elements.push_back({tri[0], tri[1], tri[2], -1});
    finalize_mesh(t, C);
    return t;
  };

  // The point layout meets the grading law except at a few elements near the
  // box corners; split their longest edges until it holds everywhere.
  Mesh m = triangulate();
  for (int pass = 0; pass < 50; ++pass)
  {
    std::set<std::pair<double, double>> added;
    for (int e = 0; e < m.num_elements(); ++e)
    {
      bool at_center = false;
      for (int i = 0; i < 3; ++i)
        for (int c : m.nucleus_vertex_ids)
          at_center = at_center || m.elements[e][i] == c;
      if (at_center || m.h[e] <= g.vartheta * g.h * m.r[e])
        continue;
      int best = 0;
      double len = -1.0;
      for (int i = 0; i < 3; ++i)
      {
        const double l = distance(m.vertices[m.elements[e][(i + 1) % 3]],
                                  m.vertices[m.elements[e][(i + 2) % 3]]);
        if (l > len)
        {
          len = l;
          best = i;
        }
      }
      const Point mid = scale(add(m.vertices[m.elements[e][(best + 1) % 3]],
                                  m.vertices[m.elements[e][(best + 2) % 3]]),
                              0.5);
      if (added.insert({mid[0], mid[1]}).second)
        ordered.push_back(mid);
    }
    if (added.empty())
      break;
    m = triangulate();
  }

  double area = 0.0;
  for (double v : m.volume)
    area += v;
  const double exact = (d.hi[0] - d.lo[0]) * (d.hi[1] - d.lo[1]);
  if (std::abs(area - exact) > 1e-10 * exact)
    throw NumericalError("graded 2D mesh does not cover the domain");
  return m;
}

// ---------------------------------------------------------------- 3D ball

struct Icosphere
{
  std::vector<Point> verts; // unit vectors
  std::vector<std::array<int, 3>> tris;
};

Icosphere icosphere(int nsub)
{
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Point> iv = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                           {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                           {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  const int faces[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                            {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                            {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                            {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  Icosphere S;
  // A subdivision point is the integer combination sum_v w_v * iv[v] / nsub;
  // its key is the sorted list of (vertex, weight) pairs with weight > 0.
  std::map<std::vector<std::pair<int, int>>, int> ids;
  auto point_id = [&](std::array<std::pair<int, int>, 3> w)
  {
    std::vector<std::pair<int, int>> key;
    for (auto& e : w)
      if (e.second > 0)
        key.push_back(e);
    std::sort(key.begin(), key.end());
    auto it = ids.find(key);
    if (it != ids.end())
      return it->second;
    Point x{0, 0, 0};
    for (auto& [v, wt] : key)
      x = add(x, scale(iv[v], static_cast<double>(wt) / nsub));
    x = scale(x, 1.0 / norm(x));
    const int id = static_cast<int>(S.verts.size());
    S.verts.push_back(x);
    ids.emplace(key, id);
    return id;
  };
  for (const auto& f : faces)
  {
    std::vector<std::vector<int>> grid(nsub + 1);
    for (int i = 0; i <= nsub; ++i)
      for (int j = 0; j <= nsub - i; ++j)
        grid[i].push_back(point_id({{{f[0], nsub - i - j}, {f[1], i}, {f[2], j}}}));
    for (int i = 0; i < nsub; ++i)
      for (int j = 0; j < nsub - i; ++j)
      {
        S.tris.push_back({grid[i][j], grid[i + 1][j], grid[i][j + 1]});
        if (j + 1 < nsub - i)
          S.tris.push_back({grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]});
      }
  }
  return S;
}

double max_chord(const Icosphere& S)
{
  double m = 0.0;
  for (const auto& t : S.tris)
    for (int k = 0; k < 3; ++k)
      m = std::max(m, distance(S.verts[t[k]], S.verts[t[(k + 1) % 3]]));
  return m;
}

std::vector<double> shell_radii(double R, double r0, double growth, double dmax)
{
  std::vector<double> r{r0};
  while (true)
  {
    const double cur = r.back();
    if (cur * growth >= dmax)
    {
      const int m = std::max(1, static_cast<int>(std::ceil((R - cur) / dmax)));
      for (int k = 1; k <= m; ++k)
        r.push_back(k == m ? R : cur + (R - cur) * k / m);
      break;
    }
    const double next = cur * (1.0 + growth);
    if (next >= R)
    {
      if (R - cur < 0.5 * growth * cur && r.size() > 1)
        r.back() = R;
      else
        r.push_back(R);
      break;
    }
    r.push_back(next);
  }
  return r;
}

Mesh ball_from_shells(const Icosphere& S, const std::vector<double>& radii)
{
  Mesh m;
  m.dim = 3;
  const int ns = static_cast<int>(S.verts.size());
  m.vertices.push_back({0.0, 0.0, 0.0});
  for (double r : radii)
    for (const Point& u : S.verts)
      m.vertices.push_back(scale(u, r));
  auto vid = [&](int shell, int i) { return 1 + shell * ns + i; };
  for (const auto& t : S.tris)
    m.elements.push_back({0, vid(0, t[0]), vid(0, t[1]), vid(0, t[2])});
  for (int s = 0; s + 1 < static_cast<int>(radii.size()); ++s)
    for (const auto& t0 : S.tris)
    {
      // Split each prism with the vertex-index rule so that neighboring prisms
      // agree on the diagonals of their shared quadrilateral faces.
      std::array<int, 3> t = t0;
      std::sort(t.begin(), t.end());
      const int i0 = vid(s, t[0]), j0 = vid(s, t[1]), k0 = vid(s, t[2]);
      const int i1 = vid(s + 1, t[0]), j1 = vid(s + 1, t[1]), k1 = vid(s + 1, t[2]);
      m.elements.push_back({i0, j0, k0, k1});
      m.elements.push_back({i0, j0, j1, k1});
      m.elements.push_back({i0, i1, j1, k1});
    }
  finalize_mesh(m, {{0.0, 0.0, 0.0}});
  return m;
}

// ---------------------------------------------------------------- 3D box

struct BisectTet
{
  std::array<int, 4> v;
  int tag;
};

Mesh graded_box_at(const Box& d, const GradingSpec& g, double rho)
{
  const std::vector<Point>& C = g.centers;
  const double h = g.h;
  const double cap = h;
  const double slope = 0.7 * g.vartheta * h;

  // Tensor grid with breakpoints at the center coordinates.
  std::array<std::vector<double>, 3> axis;
  for (int k = 0; k < 3; ++k)
  {
    std::vector<double> br{d.lo[k], d.hi[k]};
    for (const Point& c : C)
      br.push_back(c[k]);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
    {
      const int n = std::max(1, static_cast<int>(std::ceil((br[i + 1] - br[i]) / (2.0 * h))));
      for (int j = 0; j < n; ++j)
        axis[k].push_back(j == 0 ? br[i] : br[i] + (br[i + 1] - br[i]) * j / n);
    }
    axis[k].push_back(br.back());
  }
  const int nx = static_cast<int>(axis[0].size()), ny = static_cast<int>(axis[1].size()),
            nz = static_cast<int>(axis[2].size());
  std::vector<Point> V;
  V.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        V.push_back({axis[0][i], axis[1][j], axis[2][k]});
  auto gid = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };

  std::vector<BisectTet> T;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i)
        for (const auto& p : perms)
        {
          std::array<int, 3> c{i, j, k};
          BisectTet t;
          t.tag = 3;
          t.v[0] = gid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s)
          {
            ++c[p[s]];
            t.v[s + 1] = gid(c[0], c[1], c[2]);
          }
          T.push_back(t);
        }

  std::unordered_map<std::uint64_t, int> mid;
  auto midpoint_of = [&](int a, int b)
  {
    const std::uint64_t key = edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end())
      return it->second;
    const int id = static_cast<int>(V.size());
    V.push_back(midpoint(V[a], V[b]));
    mid.emplace(key, id);
    return id;
  };
  auto bisect = [&](std::size_t e)
  {
    const BisectTet t = T[e];
    const int k = t.tag;
    const int z = midpoint_of(t.v[0], t.v[k]);
    BisectTet c1, c2;
    const int nt = (k > 1) ? k - 1 : 3;
    c1.tag = c2.tag = nt;
    // c1 = (x0..x_{k-1}, z, x_{k+1}..x3), c2 = (x1..x_k, z, x_{k+1}..x3)
    for (int s = 0; s < 4; ++s)
    {
      c1.v[s] = (s < k) ? t.v[s] : (s == k ? z : t.v[s]);
      c2.v[s] = (s < k) ? t.v[s + 1] : (s == k ? z : t.v[s]);
    }
    T[e] = c1;
    T.push_back(c2);
  };
  auto tet_diam = [&](const BisectTet& t)
  {
    double m = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        m = std::max(m, distance(V[t.v[a]], V[t.v[b]]));
    return m;
  };
  std::vector<char> is_center;
  auto center_vertex = [&](int v) { return v < static_cast<int>(is_center.size()) && is_center[v]; };
  is_center.assign(V.size(), 0);
  for (const Point& c : C)
  {
    bool found = false;
    for (std::size_t v = 0; v < V.size(); ++v)
      if (V[v] == c)
      {
        is_center[v] = 1;
        found = true;
      }
    if (!found)
      throw NumericalError("box grid lost a center vertex");
  }
  auto needs_refinement = [&](const BisectTet& t)
  {
    const double hk = tet_diam(t);
    if (hk > cap)
      return true;
    if (C.empty())
      return false;
    for (int s = 0; s < 4; ++s)
      if (center_vertex(t.v[s]))
        return hk > rho;
    Point p[4];
    for (int s = 0; s < 4; ++s)
      p[s] = V[t.v[s]];
    double r = std::numeric_limits<double>::infinity();
    for (const Point& c : C)
      r = std::min(r, point_simplex_distance(3, p, c));
    return hk > std::max(slope * r, rho);
  };

  for (int pass = 0; pass < 200; ++pass)
  {
    std::vector<std::size_t> marked;
    for (std::size_t e = 0; e < T.size(); ++e)
      if (needs_refinement(T[e]))
        marked.push_back(e);
    if (marked.empty())
      break;
    for (std::size_t e : marked)
      bisect(e);
    // Closure: bisect every tetrahedron with a hanging edge midpoint.
    for (;;)
    {
      std::vector<std::size_t> hanging;
      for (std::size_t e = 0; e < T.size(); ++e)
      {
        const auto& v = T[e].v;
        bool hang = false;
        for (int a = 0; a < 4 && !hang; ++a)
          for (int b = a + 1; b < 4 && !hang; ++b)
            hang = mid.count(edge_key(v[a], v[b])) > 0;
        if (hang)
          hanging.push_back(e);
      }
      if (hanging.empty())
        break;
      for (std::size_t e : hanging)
        bisect(e);
    }
    if (pass == 199)
      throw NumericalError("box refinement did not terminate");
  }

  Mesh m;
  m.dim = 3;
  m.vertices = std::move(V);
  m.elements.reserve(T.size());
  for (const BisectTet& t : T)
    m.elements.push_back(t.v);
  finalize_mesh(m, C);

  double vol = 0.0;
  for (double v : m.volume)
    vol += v;
  const double exact = (d.hi[0] - d.lo[0]) * (d.hi[1] - d.lo[1]) * (d.hi[2] - d.lo[2]);
  if (std::abs(vol - exact) > 1e-10 * exact)
    throw NumericalError("graded box mesh does not fill the domain");
  return m;
}

template <class Gen>
Mesh generate_with_rule(const Box& d, const GradingSpec& g, Gen&& gen)
{
  const double rmax = max_patch_radius(d, g.centers);
  double rho;
  if (g.rule == PatchRule::optimal)
  {
    if (!g.improve_rho)
      throw InputError("optimal patch rule needs a radius improvement callback");
    rho = std::min(0.1 * std::pow(g.vartheta * g.h, 2), 0.25 * rmax);
  }
  else
    rho = prescribed_patch_radius(g);
  if (!(rho < rmax))
    throw InputError("grading infeasible: patch radius reaches the boundary or another center");

  Mesh m = gen(rho);
  if (g.rule == PatchRule::optimal)
  {
    for (int it = 0; it < g.optimal_iterations; ++it)
    {
      const double next = std::clamp(g.improve_rho(m, rho), 1e-9 * rmax, 0.5 * rmax);
      if (std::abs(next - rho) <= 1e-3 * rho)
        break;
      rho = next;
      m = gen(rho);
    }
  }
  return m;
}

} // namespace

// ---------------------------------------------------------------- helpers

double distance(const Point& a, const Point& b) { return norm(sub(a, b)); }

double simplex_signed_volume(int dim, const Point* v)
{
  if (dim == 2)
  {
    const Point a = sub(v[1], v[0]), b = sub(v[2], v[0]);
    return 0.5 * (a[0] * b[1] - a[1] * b[0]);
  }
  return det3(sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])) / 6.0;
}

double simplex_diameter(int dim, const Point* v)
{
  double m = 0.0;
  for (int a = 0; a <= dim; ++a)
    for (int b = a + 1; b <= dim; ++b)
      m = std::max(m, distance(v[a], v[b]));
  return m;
}

Point closest_point_on_simplex(int dim, const Point* v, const Point& p)
{
  if (dim == 2)
    return closest_on_triangle(p, v[0], v[1], v[2]);
  // Inside test by signed sub-volumes.
  const double vol = simplex_signed_volume(3, v);
  bool inside = true;
  for (int i = 0; i < 4 && inside; ++i)
  {
    Point w[4] = {v[0], v[1], v[2], v[3]};
    w[i] = p;
    const double s = simplex_signed_volume(3, w);
    if (s * vol < 0.0)
      inside = false;
  }
  if (inside)
    return p;
  Point best = v[0];
  double bd = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i)
  {
    const Point q = closest_on_triangle(p, v[(i + 1) % 4], v[(i + 2) % 4], v[(i + 3) % 4]);
    const double dq = distance(p, q);
    if (dq < bd)
    {
      bd = dq;
      best = q;
    }
  }
  return best;
}

double point_simplex_distance(int dim, const Point* v, const Point& p)
{
  return distance(p, closest_point_on_simplex(dim, v, p));
}

double point_simplex_max_distance(int dim, const Point* v, const Point& p)
{
  double m = 0.0;
  for (int i = 0; i <= dim; ++i)
    m = std::max(m, distance(p, v[i]));
  return m;
}

void element_points(const Mesh& m, int e, Point* out)
{
  for (int i = 0; i <= m.dim; ++i)
    out[i] = m.vertices[m.elements[e][i]];
}

bool touches_center(const Mesh& m, int e)
{
  for (int i = 0; i <= m.dim; ++i)
    for (int c : m.nucleus_vertex_ids)
      if (m.elements[e][i] == c)
        return true;
  return false;
}

void finalize_mesh(Mesh& m, const std::vector<Point>& centers)
{
  if (m.dim != 2 && m.dim != 3)
    throw InputError("mesh dimension must be 2 or 3");
  const int nv = m.num_vertices(), ne = m.num_elements(), npe = m.dim + 1;
  if (ne == 0)
    throw InputError("mesh has no elements");
  m.h.assign(ne, 0.0);
  m.volume.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e)
  {
    auto& el = m.elements[e];
    for (int i = 0; i < npe; ++i)
      if (el[i] < 0 || el[i] >= nv)
        throw InputError("element references a nonexistent vertex");
    for (int i = npe; i < 4; ++i)
      el[i] = -1;
    Point p[4];
    element_points(m, e, p);
    double vol = simplex_signed_volume(m.dim, p);
    if (vol < 0.0)
    {
      std::swap(el[m.dim - 1], el[m.dim]);
      vol = -vol;
    }
    const double hk = simplex_diameter(m.dim, p);
    if (!(vol > 1e-14 * std::pow(hk, m.dim)))
      throw NumericalError(fmt::format("element {} is degenerate", e));
    m.h[e] = hk;
    m.volume[e] = vol;
  }

  struct FaceRef
  {
    std::array<int, 3> key;
    int elem;
    int local;
  };
  std::vector<FaceRef> refs;
  refs.reserve(static_cast<std::size_t>(ne) * npe);
  for (int e = 0; e < ne; ++e)
    for (int i = 0; i < npe; ++i)
    {
      std::array<int, 3> key{-1, -1, -1};
      int c = 0;
      for (int j = 0; j < npe; ++j)
        if (j != i)
          key[c++] = m.elements[e][j];
      std::sort(key.begin(), key.begin() + m.dim);
      refs.push_back({key, e, i});
    }
  std::sort(refs.begin(), refs.end(),
            [](const FaceRef& a, const FaceRef& b)
            { return a.key != b.key ? a.key < b.key : a.elem < b.elem; });
  m.faces.clear();
  m.face_elements.clear();
  m.boundary_face.clear();
  m.element_faces.assign(ne, {-1, -1, -1, -1});
  for (std::size_t i = 0; i < refs.size();)
  {
    std::size_t j = i + 1;
    while (j < refs.size() && refs[j].key == refs[i].key)
      ++j;
    if (j - i > 2)
      throw NumericalError("nonmanifold face shared by more than two elements");
    const int f = static_cast<int>(m.faces.size());
    m.faces.push_back(refs[i].key);
    m.face_elements.push_back({refs[i].elem, j - i == 2 ? refs[i + 1].elem : -1});
    m.boundary_face.push_back(j - i == 1 ? 1 : 0);
    for (std::size_t k = i; k < j; ++k)
      m.element_faces[refs[k].elem][refs[k].local] = f;
    i = j;
  }

  m.centers = centers;
  m.nucleus_vertex_ids.assign(centers.size(), -1);
  for (std::size_t c = 0; c < centers.size(); ++c)
  {
    for (int v = 0; v < nv; ++v)
      if (m.vertices[v] == centers[c])
      {
        m.nucleus_vertex_ids[c] = v;
        break;
      }
    if (m.nucleus_vertex_ids[c] < 0)
      throw NumericalError(fmt::format("center {} is not a mesh vertex", c));
  }
  m.r.assign(ne, std::numeric_limits<double>::infinity());
  if (!centers.empty())
    for (int e = 0; e < ne; ++e)
    {
      Point p[4];
      element_points(m, e, p);
      for (const Point& c : centers)
        m.r[e] = std::min(m.r[e], point_simplex_distance(m.dim, p, c));
    }
}

double prescribed_patch_radius(const GradingSpec& g)
{
  switch (g.rule)
  {
  case PatchRule::fixed:
    return g.rho;
  case PatchRule::power:
    return g.beta * std::pow(g.h, g.gamma_p);
  case PatchRule::optimal:
    break;
  }
  throw InputError("optimal patch radius is not prescribed by the grading");
}

Mesh build_graded_mesh_2d(const Box& domain, const GradingSpec& grading)
{
  if (domain.dim != 2)
    throw InputError("build_graded_mesh_2d needs a 2D rectangle");
  validate_box(domain);
  validate_grading(grading);
  validate_centers(domain, grading.centers);
  if (grading.centers.empty())
    return uniform_mesh_2d(domain, grading.h);
  return generate_with_rule(domain, grading,
                            [&](double rho) { return graded_mesh_2d_at(domain, grading, rho); });
}

Mesh build_ball_mesh_3d(double R, double h, double growth, int n_sub)
{
  if (!(R > 0.0) || !(h > 0.0) || !(growth > 0.0))
    throw InputError("ball mesh requires R > 0, h > 0 and growth > 0");
  const double r0 = h * h / (10.0 * R);
  if (!(r0 < R))
    throw InputError("first shell radius h^2/(10R) is not inside the ball");
  const double target = 1.03 * h;

  auto attempt = [&](int n) -> std::pair<bool, Mesh>
  {
    const Icosphere S = icosphere(n);
    const double c = max_chord(S) * R;
    if (!(c < target))
      return {false, Mesh{}};
    const double dmax = 0.99 * std::sqrt(target * target - c * c);
    Mesh m = ball_from_shells(S, shell_radii(R, r0, growth, dmax));
    const double hmax = *std::max_element(m.h.begin(), m.h.end());
    return {hmax < 1.05 * h, std::move(m)};
  };

  if (n_sub > 0)
  {
    auto [ok, m] = attempt(n_sub);
    if (!ok)
      throw InputError(fmt::format("n_sub = {} cannot meet h_max < 1.05 h", n_sub));
    return m;
  }
  // Smallest subdivision whose outer chord leaves room for radial steps.
  for (int n = 1; n <= 512; ++n)
  {
    const double c = max_chord(icosphere(n)) * R;
    if (c > 0.85 * h)
      continue;
    auto [ok, m] = attempt(n);
    if (ok)
      return m;
  }
  throw InputError("no subdivision level meets the ball mesh size bound");
}

Mesh build_graded_box_mesh_3d(const Box& domain, const GradingSpec& grading)
{
  if (domain.dim != 3)
    throw InputError("build_graded_box_mesh_3d needs a 3D box");
  validate_box(domain);
  validate_grading(grading);
  validate_centers(domain, grading.centers);
  if (grading.centers.empty())
    return graded_box_at(domain, grading, 0.0);
  return generate_with_rule(domain, grading,
                            [&](double rho) { return graded_box_at(domain, grading, rho); });
}

QualityReport mesh_quality(const Mesh& m, const GradingSpec& g)
{
  QualityReport q;
  q.h_max = *std::max_element(m.h.begin(), m.h.end());
  q.h_min = *std::min_element(m.h.begin(), m.h.end());
  q.min_angle = std::numbers::pi;
  q.patch_radii.assign(m.nucleus_vertex_ids.size(), 0.0);
  for (int e = 0; e < m.num_elements(); ++e)
  {
    Point p[4];
    element_points(m, e, p);
    if (m.dim == 2)
    {
      for (int i = 0; i < 3; ++i)
      {
        const Point a = sub(p[(i + 1) % 3], p[i]), b = sub(p[(i + 2) % 3], p[i]);
        const double c = std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0);
        q.min_angle = std::min(q.min_angle, std::acos(c));
      }
    }
    else
    {
      Point n[4];
      for (int i = 0; i < 4; ++i)
      {
        const Point& a = p[(i + 1) % 4];
        n[i] = cross(sub(p[(i + 2) % 4], a), sub(p[(i + 3) % 4], a));
        n[i] = scale(n[i], 1.0 / norm(n[i]));
        if (dot(n[i], sub(a, p[i])) < 0.0)
          n[i] = scale(n[i], -1.0);
      }
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
        {
          const double c = std::clamp(dot(n[i], n[j]), -1.0, 1.0);
          q.min_angle = std::min(q.min_angle, std::numbers::pi - std::acos(c));
        }
    }
    bool in_patch = false;
    for (std::size_t c = 0; c < m.nucleus_vertex_ids.size(); ++c)
      for (int i = 0; i <= m.dim; ++i)
        if (m.elements[e][i] == m.nucleus_vertex_ids[c])
        {
          in_patch = true;
          q.patch_radii[c] =
            std::max(q.patch_radii[c], point_simplex_max_distance(m.dim, p, m.centers[c]));
        }
    if (!in_patch && !m.nucleus_vertex_ids.empty())
      q.grading_ratio = std::max(q.grading_ratio, m.h[e] / (g.h * m.r[e]));
  }
  q.G1_ok = q.grading_ratio <= g.vartheta * (1.0 + 1e-12);
  if (g.rule != PatchRule::optimal)
  {
    const double rho = prescribed_patch_radius(g);
    for (double pr : q.patch_radii)
      if (pr > rho * (1.0 + 1e-12))
        q.G2_ok = false;
  }
  return q;
}

Mesh refine_uniform(const Mesh& m)
{
  Mesh out;
  out.dim = m.dim;
  out.vertices = m.vertices;
  std::unordered_map<std::uint64_t, int> mid;
  auto midv = [&](int a, int b)
  {
    const std::uint64_t key = edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end())
      return it->second;
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(midpoint(m.vertices[a], m.vertices[b]));
    mid.emplace(key, id);
    return id;
  };
  for (const auto& el : m.elements)
  {
    if (m.dim == 2)
    {
      const int a = el[0], b = el[1], c = el[2];
      const int ab = midv(a, b), bc = midv(b, c), ca = midv(c, a);
      out.elements.push_back({a, ab, ca, -1});
      out.elements.push_back({ab, b, bc, -1});
      out.elements.push_back({ca, bc, c, -1});
      out.elements.push_back({ab, bc, ca, -1});
    }
    else
    {
      // Bey's regular refinement.
      const int x0 = el[0], x1 = el[1], x2 = el[2], x3 = el[3];
      const int x01 = midv(x0, x1), x02 = midv(x0, x2), x03 = midv(x0, x3);
      const int x12 = midv(x1, x2), x13 = midv(x1, x3), x23 = midv(x2, x3);
      out.elements.push_back({x0, x01, x02, x03});
      out.elements.push_back({x01, x1, x12, x13});
      out.elements.push_back({x02, x12, x2, x23});
      out.elements.push_back({x03, x13, x23, x3});
      out.elements.push_back({x01, x02, x03, x13});
      out.elements.push_back({x01, x02, x12, x13});
      out.elements.push_back({x02, x03, x13, x23});
      out.elements.push_back({x02, x12, x13, x23});
    }
  }
  finalize_mesh(out, m.centers);
  return out;
}

double boundary_measure(const Mesh& m)
{
  double s = 0.0;
  for (int f = 0; f < m.num_faces(); ++f)
  {
    if (!m.boundary_face[f])
      continue;
    const auto& fv = m.faces[f];
    if (m.dim == 2)
      s += distance(m.vertices[fv[0]], m.vertices[fv[1]]);
    else
      s += 0.5 * norm(cross(sub(m.vertices[fv[1]], m.vertices[fv[0]]),
                            sub(m.vertices[fv[2]], m.vertices[fv[0]])));
  }
  return s;
}

void write_mesh(std::ostream& os, const Mesh& m)
{
  os << fmt::format("{} {} {} {}\n", m.dim, m.num_vertices(), m.num_elements(), m.num_faces());
  for (const Point& p : m.vertices)
  {
    os << fmt::format("{:.17g} {:.17g}", p[0], p[1]);
    if (m.dim == 3)
      os << fmt::format(" {:.17g}", p[2]);
    os << '\n';
  }
  for (const auto& el : m.elements)
  {
    for (int i = 0; i <= m.dim; ++i)
      os << (i ? " " : "") << el[i];
    os << '\n';
  }
  for (int f = 0; f < m.num_faces(); ++f)
  {
    for (int i = 0; i < m.dim; ++i)
      os << m.faces[f][i] << ' ';
    os << m.face_elements[f][0] << ' ' << m.face_elements[f][1] << ' '
       << static_cast<int>(m.boundary_face[f]) << '\n';
  }
}

Mesh read_mesh(std::istream& is, const std::vector<Point>& centers)
{
  Mesh m;
  int nv = 0, ne = 0, nf = 0;
  if (!(is >> m.dim >> nv >> ne >> nf) || (m.dim != 2 && m.dim != 3) || nv <= 0 || ne <= 0)
    throw InputError("mesh file: malformed header");
  m.vertices.resize(nv, {0.0, 0.0, 0.0});
  for (auto& p : m.vertices)
    for (int k = 0; k < m.dim; ++k)
      if (!(is >> p[k]))
        throw InputError("mesh file: truncated vertex section");
  m.elements.resize(ne, {-1, -1, -1, -1});
  for (auto& el : m.elements)
    for (int i = 0; i <= m.dim; ++i)
      if (!(is >> el[i]))
        throw InputError("mesh file: truncated element section");
  std::vector<std::array<int, 3>> faces(nf, {-1, -1, -1});
  std::vector<int> flags(nf);
  for (int f = 0; f < nf; ++f)
  {
    int e0, e1;
    for (int i = 0; i < m.dim; ++i)
      if (!(is >> faces[f][i]))
        throw InputError("mesh file: truncated face section");
    if (!(is >> e0 >> e1 >> flags[f]))
      throw InputError("mesh file: truncated face section");
  }
  finalize_mesh(m, centers);
  if (m.num_faces() != nf)
    throw InputError("mesh file: face count inconsistent with elements");
  for (int f = 0; f < nf; ++f)
  {
    std::array<int, 3> key = faces[f];
    std::sort(key.begin(), key.begin() + m.dim);
    const auto it = std::lower_bound(m.faces.begin(), m.faces.end(), key);
    if (it == m.faces.end() || *it != key)
      throw InputError("mesh file: face not present in element list");
    if (m.boundary_face[it - m.faces.begin()] != (flags[f] != 0))
      throw InputError("mesh file: boundary flag inconsistent with topology");
  }
  return m;
}

void write_mesh_file(const std::string& path, const Mesh& m)
{
  std::ofstream os(path);
  if (!os)
    throw InputError("cannot open " + path + " for writing");
  write_mesh(os, m);
}

Mesh read_mesh_file(const std::string& path, const std::vector<Point>& centers)
{
  std::ifstream is(path);
  if (!is)
    throw InputError("cannot open " + path);
  return read_mesh(is, centers);
}

} // namespace cecr
