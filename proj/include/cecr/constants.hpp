// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/geometry.hpp"
#include "cecr/potential.hpp"

#include <functional>
#include <string>

namespace cecr
{

/// Everything the lower-bound formulas consume for one mesh.
struct ConstantsBundle
{
  double C_h_PW = 0.0;
  double Gamma_h = 0.0;
  double A_h = 0.0;
  double epsilon = 0.0;
  double C_eps = 0.0;
  double sigma = 0.0;
  double kappa_sigma = 0.0;
  double d_h = 0.0;
  double eps_h = 0.0;
  double rho_patch = 0.0;
  double c0 = 0.0;
  double c_star = 0.0;
  /// S8 in 2D, C6 in 3D.
  double embed = 0.0;
};

/// max_K h_K / pi.
double payne_weinberger(const Mesh& mesh);

/// max_K max(-c_K, 0) h_K^2 / pi^2.
double gamma_h(const Mesh& mesh, const CellField& ch);

struct ShiftConstants
{
  double A_h;
  double kappa_sigma;
};

/// A_h = Gamma_h / (1 - epsilon), kappa = min(1 - epsilon, sigma - C_eps).
/// Throws InputError unless 0 < epsilon < 1 and sigma > C_eps.
ShiftConstants a_h_and_kappa(double Gamma_h, double epsilon, double C_eps, double sigma);

/// Bound d_h on |((V - c_h)u, u)| / ||u||_{H^1}^2 split into the singular
/// patch term c0 and the off-patch term c_star.
struct PerturbationBound
{
  double d_h = 0.0;
  double c0 = 0.0;
  double c_star = 0.0;
  double rho = 0.0;
  int patch_elements = 0;
};

/// Patch: elements whose farthest point from their nearest center is within
/// rho. c0 = embed^2 * sum over centers of ||V - c_h||_{L^p(patch_i)} with
/// p = 4/3 (2D, embed = S8) or p = 3/2 (3D, embed = C6); c_star is the
/// largest (h_K / 2) sup_K |V - c_K| off the patch. Elements touching a
/// center must lie in the patch.
PerturbationBound eps_direct(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                             double rho, double embed);
PerturbationBound eps_direct_2d(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                                double rho, double S8);
PerturbationBound eps_direct_3d(const Mesh& mesh, const CellField& ch, const PotentialSpec& pot,
                                double rho, double C6);

/// Minimizes d_h over all patch radii. d_h only changes where the patch
/// gains an element, so every such radius is evaluated.
PerturbationBound optimal_patch_radius(const Mesh& mesh, const CellField& ch,
                                       const PotentialSpec& pot, double embed);

/// Radius update for graded meshes with an optimized first ring: rescales
/// rho so the singular-element term is tau times the off-patch term.
std::function<double(const Mesh&, double)> balanced_patch_rule(const PotentialSpec& pot,
                                                                double embed, double tau = 0.25);

struct RectangleSobolev
{
  double S4;
  double S6;
  double S8;
};

/// H^1 -> L^4, L^6, L^8 constants of [-a, a] x [-b, b].
RectangleSobolev sobolev_rectangle(double a, double b);

/// H^1 -> L^6 constant of [-a, a] x [-b, b] x [-c, c].
double c6_box(double a, double b, double c);

struct BallEmbedding
{
  double delta;
  double C6;
};

/// Sharp Sobolev constant of R^3 (gradient to L^6).
double sobolev_constant_r3();

/// H^1 -> L^6 constant of the ball of radius R via a reflected extension,
/// with the extension parameter that balances both terms.
BallEmbedding c6_ball(double R);

enum class FormGeometry
{
  rectangle_one_center,
  rectangle_two_center,
  ball_one_center,
  box_two_center
};

/// Inputs of the analytic bound (Z u^2 / |x - a|, u) <= eps ||grad u||^2 + C ||u||^2.
struct FormBoundSpec
{
  FormGeometry geometry = FormGeometry::rectangle_one_center;
  double epsilon = 0.5;
  double Z = 1.0;
  /// Half-widths of the rectangle or box; a[0] is the radius for the ball.
  double a[3] = {5.0, 5.0, 5.0};
  /// Distance of each center from the symmetry plane (two-center cases).
  double offset = 2.0;
  /// Overrides the computed C6 (3D) when positive.
  double C6 = 0.0;
};

double analytic_form_bound(const FormBoundSpec& spec);

/// Smallest multiple of 10^-decimals that is >= x.
double round_up(double x, int decimals);

FormGeometry parse_form_geometry(const std::string& name);

} // namespace cecr
