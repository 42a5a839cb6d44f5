// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cecr
{

using Point = std::array<double, 3>;

/// Simplicial mesh in 2D (triangles) or 3D (tetrahedra).
///
/// Unused trailing slots of the fixed-size index arrays hold -1.
/// Local face i of an element is the face opposite its local vertex i.
struct Mesh
{
  int dim = 2;
  std::vector<Point> vertices;
  std::vector<std::array<int, 4>> elements;
  /// Face vertex ids, sorted ascending.
  std::vector<std::array<int, 3>> faces;
  /// Adjacent elements of each face; the second entry is -1 on the boundary.
  std::vector<std::array<int, 2>> face_elements;
  std::vector<std::array<int, 4>> element_faces;
  std::vector<std::uint8_t> boundary_face;
  /// Vertex id of each center, in the order the centers were given.
  std::vector<int> nucleus_vertex_ids;
  std::vector<Point> centers;
  std::vector<double> h;      ///< element diameters
  std::vector<double> r;      ///< distance to the nearest center
  std::vector<double> volume; ///< element measures

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  int verts_per_element() const { return dim + 1; }
  int verts_per_face() const { return dim; }
};

/// Axis-aligned rectangle (dim 2) or box (dim 3).
struct Box
{
  int dim = 2;
  Point lo{0.0, 0.0, 0.0};
  Point hi{1.0, 1.0, 0.0};
};

enum class PatchRule
{
  fixed,
  power,
  optimal
};

/// Parameters of a graded mesh family.
struct GradingSpec
{
  double h = 0.4;
  double vartheta = 1.0;
  PatchRule rule = PatchRule::optimal;
  double rho = 0.0;     ///< patch radius for PatchRule::fixed
  double beta = 1.0;    ///< rho = beta * h^gamma_p for PatchRule::power
  double gamma_p = 2.0; ///< exponent of the power rule
  std::vector<Point> centers;
  std::uint64_t seed = 1;
  /// For PatchRule::optimal: maps a trial mesh and its first-ring radius to an
  /// improved radius. Installed by the constants module.
  std::function<double(const Mesh&, double)> improve_rho;
  int optimal_iterations = 3;
};

struct QualityReport
{
  double h_max = 0.0;
  double h_min = 0.0;
  /// Smallest interior angle (2D) or dihedral angle (3D), radians.
  double min_angle = 0.0;
  /// max over elements not touching a center of h_K / (h r_K).
  double grading_ratio = 0.0;
  /// Achieved patch radius per center: max distance of a patch vertex.
  std::vector<double> patch_radii;
  bool G1_ok = true;
  bool G2_ok = true;
};

// Simplex helpers. Points use all three coordinates; 2D data has z = 0.
double distance(const Point& a, const Point& b);
double simplex_signed_volume(int dim, const Point* v);
double simplex_diameter(int dim, const Point* v);
/// Euclidean distance from p to the closed simplex.
double point_simplex_distance(int dim, const Point* v, const Point& p);
/// Largest distance from p to a point of the simplex (attained at a vertex).
double point_simplex_max_distance(int dim, const Point* v, const Point& p);
/// Nearest point of the closed simplex to p.
Point closest_point_on_simplex(int dim, const Point* v, const Point& p);

/// Gathers the vertex coordinates of element e into out[0..dim].
void element_points(const Mesh& m, int e, Point* out);
/// True when element e has a center vertex.
bool touches_center(const Mesh& m, int e);

/// Orients elements positively, builds faces and adjacency, computes metrics,
/// locates center vertices (bitwise exact match) and validates conformity.
void finalize_mesh(Mesh& m, const std::vector<Point>& centers);

/// Graded triangulation of a rectangle. Without centers a uniform
/// triangulation with every h_K <= h is produced.
Mesh build_graded_mesh_2d(const Box& domain, const GradingSpec& grading);

/// Icosahedral shell mesh of the ball of radius R centered at the origin.
/// growth sets the radial ratio r_{j+1}/r_j - 1 of the graded shells.
/// n_sub <= 0 chooses the subdivision level automatically.
Mesh build_ball_mesh_3d(double R, double h, double growth, int n_sub);

/// Graded tetrahedral mesh of a box by newest-vertex bisection of a
/// Kuhn-split tensor grid, with centers as vertices.
Mesh build_graded_box_mesh_3d(const Box& domain, const GradingSpec& grading);

/// Patch radius prescribed by the fixed and power rules.
double prescribed_patch_radius(const GradingSpec& grading);

QualityReport mesh_quality(const Mesh& m, const GradingSpec& grading);

/// Uniform red refinement (4 children in 2D, 8 in 3D). Vertex ids are kept.
Mesh refine_uniform(const Mesh& m);

void write_mesh(std::ostream& os, const Mesh& m);
Mesh read_mesh(std::istream& is, const std::vector<Point>& centers);
void write_mesh_file(const std::string& path, const Mesh& m);
Mesh read_mesh_file(const std::string& path, const std::vector<Point>& centers);

/// Total measure of boundary faces.
double boundary_measure(const Mesh& m);

} // namespace cecr
