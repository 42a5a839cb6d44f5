// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/geometry.hpp"
#include "cecr/potential.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cecr
{

/// Integral of 1/|x - a| over a simplex, computed independently of the
/// closed forms: signed star decomposition at a, then for each star simplex
/// the scaling identity of the homogeneous integrand over the frustum left
/// after removing the half-size copy at a, integrated adaptively.
double subdivision_inverse_distance(int dim, const Point* v, const Point& a);

/// Integral of |V - c|^p over a simplex by dyadic layers toward the
/// nearest center in the closed simplex and adaptive Gauss rules, each run to
/// the relative tolerance rel_tol.
double subdivision_deviation_pow(int dim, const Point* v, const PotentialSpec& pot, double c,
                                 double p, double rel_tol = 1e-10);

struct OracleCheck
{
  std::string name;
  bool passed = false;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct OracleSuiteOptions
{
  /// Test hook: added to one stiffness entry before the iterative solve so
  /// the dense-equivalence check must fail.
  double stiffness_perturbation = 0.0;
  int samples = 100;
  std::uint64_t seed = 11;
};

/// Dense eigensolve equivalence, subdivision quadrature, inertia count and
/// bound-formula probes.
std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& opt = {});

} // namespace cecr
