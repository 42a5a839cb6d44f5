// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <vector>

namespace cecr
{

/// Sign of the orientation determinant of (a, b, c): +1 counterclockwise.
/// Exact: a floating-point filter falls back to rational arithmetic.
int orient2d(const std::array<double, 2>& a, const std::array<double, 2>& b,
             const std::array<double, 2>& c);

/// Sign of the incircle determinant: +1 when d lies strictly inside the
/// circle through the counterclockwise triangle (a, b, c). Exact.
int incircle(const std::array<double, 2>& a, const std::array<double, 2>& b,
             const std::array<double, 2>& c, const std::array<double, 2>& d);

/// Delaunay triangulation of the convex hull of distinct points by
/// Bowyer-Watson insertion in the given order. Cocircular configurations are
/// resolved by the insertion order, so the output is deterministic.
/// Triangles are counterclockwise.
std::vector<std::array<int, 3>>
delaunay_2d(const std::vector<std::array<double, 2>>& points);

} // namespace cecr
