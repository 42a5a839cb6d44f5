// SPDX-License-Identifier: MIT
#include "cecr/quadrature.hpp"

#include "cecr/errors.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace cecr
{

namespace
{

Rule1D compute_gauss_legendre(int n)
{
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i)
  {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it)
    {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k)
      {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1)
      {
        p0 = 1.0;
        p1 = t;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16)
        break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k)
    {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1)
      p0 = 1.0;
    dp = n * (t * p1 - p0) / (t * t - 1.0);
    r.x[n - 1 - i] = 0.5 * (t + 1.0);
    r.w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return r;
}

SimplexRule compute_simplex_rule(int dim, int n)
{
  const Rule1D& g = gauss_legendre(n);
  SimplexRule r;
  r.dim = dim;
  if (dim == 2)
  {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
      {
        const double u = g.x[i], v = g.x[j];
        // u is the radial-like coordinate from the origin.
        r.points.push_back({u * (1.0 - v), u * v, 0.0});
        r.weights.push_back(g.w[i] * g.w[j] * u);
      }
  }
  else
  {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
        {
          const double u = g.x[i], v = g.x[j], w = g.x[k];
          r.points.push_back({u * (1.0 - v), u * v * (1.0 - w), u * v * w});
          r.weights.push_back(g.w[i] * g.w[j] * g.w[k] * u * u * v);
        }
  }
  return r;
}

} // namespace

const Rule1D& gauss_legendre(int n)
{
  if (n < 1 || n > 256)
    throw InputError("gauss_legendre: order must be in [1, 256]");
  static std::mutex m;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

const SimplexRule& simplex_rule(int dim, int n)
{
  if (dim != 2 && dim != 3)
    throw InputError("simplex_rule: dim must be 2 or 3");
  const Rule1D& g = gauss_legendre(n);
  (void)g;
  static std::mutex m;
  static std::map<std::pair<int, int>, SimplexRule> cache;
  std::lock_guard<std::mutex> lock(m);
  auto key = std::make_pair(dim, n);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, compute_simplex_rule(dim, n)).first;
  return it->second;
}

} // namespace cecr
