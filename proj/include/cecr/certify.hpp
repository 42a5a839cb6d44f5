// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/constants.hpp"
#include "cecr/eigensolver.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cecr
{

// ------------------------------------------------------------ bound formulas

/// mu / (1 + C_h^2 mu) for a positive Ritz value mu.
double cecr_lower_bound_positive(double mu_kh, double C_h);

/// (mu + g) / (1 + (mu + g) C_h^2) - g with g = ||c_h^-||_inf.
double cecr_lower_bound_gamma_shift(double mu_kh, double gamma_h, double C_h);

/// mu_sigma / ((1 + A_h)(1 + C_h^2 mu_sigma)) - sigma. Throws
/// CertificationRefused when mu_sigma <= 0 (shifted form not positive).
double cecr_lower_bound_convergent(double mu_sigma, double C_h, double A_h, double sigma);

/// (1 - eps_h)(L + sigma) - sigma. Throws CertificationRefused when eps_h > 1.
double perturbation_correct(double L_mu_sigma, double eps_h, double sigma);

// --------------------------------------------------------------- confinement

/// Truncation domain: a box or a ball.
struct TruncationDomain
{
  enum class Kind
  {
    box,
    ball
  };
  Kind kind = Kind::box;
  Box box;
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
  int dim = 2;
};

struct Confinement
{
  double sigma_ext;
  bool ok;
};

/// Infimum of V outside the domain (attained on the boundary, V is harmonic
/// there and vanishes at infinity) compared with an upper bound of lambda_1.
Confinement confinement_check(const PotentialSpec& pot, const TruncationDomain& domain,
                              double lambda1_upper);

/// Smallest ball radius whose exterior keeps V = -Z/|x| above lambda_1 < 0.
double confinement_radius(double Z, double lambda1);

// ------------------------------------------------------------ form constants

struct DiagnosticCeps
{
  double C_eps;
  double eta; ///< smallest Ritz value of eps |grad u|^2 - c_h^- u^2
};

/// P1 Neumann Ritz estimate of the sharp form constant for c_h^-. Not a
/// rigorous bound: the Ritz value is an upper bound of eta.
DiagnosticCeps ceps_diagnostic_p1(const Mesh& mesh, const CellField& ch, double epsilon,
                                  const EigenOptions& eig = {});

struct RigorousCeps
{
  double C_eps;
  double nu_sigma; ///< first shifted Ritz value of the scaled problem
  double nu_lower;
  double sigma_star;
  double Gamma_star;
  double A_star;
  int retries;
};

/// Certified upper bound of the sharp form constant from a CECR lower bound
/// of the scaled problem -Delta - c_h^-/epsilon, given a preliminary bound
/// (c_h^- u, u) <= alpha |grad u|^2 + C_alpha |u|^2 with alpha < epsilon.
/// sigma_star <= 0 selects C_alpha / epsilon + 1.
RigorousCeps certified_ceps_rigorous(const Mesh& mesh, const CellField& ch, double epsilon,
                                     double alpha, double C_alpha, double sigma_star,
                                     const EigenOptions& eig = {}, int max_retries = 8);

// ------------------------------------------------------------------ pipeline

enum class CepsSource
{
  analytic,
  diagnostic,
  rigorous,
  manual
};

CepsSource parse_ceps_source(const std::string& name);
std::string to_string(CepsSource s);

struct CertifyOptions
{
  double epsilon = 0.55;
  double C_eps = 12.0;
  double sigma = 12.5;
  int k_max = 3;
  /// S8 (2D) or C6 (3D) of the auxiliary domain.
  double embed = 0.0;
  TruncationDomain domain;
  /// Source of the form constant used for the optimal shift.
  CepsSource opt_source = CepsSource::diagnostic;
  double C_eps_manual = 0.0;
  bool optimal_shift = true;
  /// sigma_opt = C_eps_cert + kappa_target; defaults to 1 - epsilon.
  std::optional<double> kappa_target;
  /// Also compute the classical gamma_h-shift baseline (extra eigensolve).
  bool gamma_baseline = true;
  /// Also compute the rigorous form constant (extra eigensolve).
  bool rigorous_ceps = false;
  double alpha = 0.5;
  double C_alpha = 0.0;
  EigenOptions eig;
};

struct Enclosure
{
  int k = 0;
  double mu_sigma = 0.0;     ///< mu_{k,h}^sigma
  double mu_sigma_cert = 0.0; ///< residual certificate of mu_sigma
  double L_mu_sigma = 0.0;
  double L = 0.0;            ///< corrected lower bound at the rough shift
  double mu_h = 0.0;         ///< unshifted CECR Ritz value (baseline only)
  double L_gamma = 0.0;      ///< gamma_h-shift baseline
  double mu_sigma_opt = 0.0;
  double L_mu_sigma_opt = 0.0;
  double L_opt = 0.0;
  double U = 0.0; ///< P1 Dirichlet Ritz value plus its certificate
  bool has_gamma = false;
  bool has_opt = false;
};

struct LevelResult
{
  double h = 0.0;
  int num_elements = 0;
  int num_vertices = 0;
  double h_max = 0.0;
  ConstantsBundle constants;
  PerturbationBound patch;
  double gamma_inf = 0.0; ///< max c_h^-
  double C_eps_diag = 0.0;
  double C_eps_rigorous = -1.0; ///< negative when not computed
  double C_eps_cert = 0.0;      ///< value used for the optimal shift
  double sigma_opt = 0.0;
  double kappa_opt = 0.0;
  double eps_h_opt = 0.0;
  bool admissible = false;
  bool admissible_opt = false;
  double sigma_ext = 0.0;
  bool confinement_ok = false;
  std::vector<Enclosure> enclosures;
  std::vector<std::string> notes;
  /// Wall-clock seconds per stage.
  std::vector<std::pair<std::string, double>> timings;
};

/// Runs the certification chain on one mesh. Throws CertificationRefused when
/// the rough shift is inadmissible or eps_h > 1, NumericalError when a lower
/// bound exceeds its upper bound.
LevelResult certify_level(const Mesh& mesh, const PotentialSpec& pot, double h_nominal,
                          const CertifyOptions& opt);

/// Local orders log(g_i / g_{i+1}) / log(h_i / h_{i+1}); empty entries where
/// a gap is not positive.
std::vector<std::optional<double>> eoc(const std::vector<double>& gaps,
                                       const std::vector<double>& hs);

struct Separation
{
  int k;          ///< pair (k, k + 1), 1-based
  bool separated; ///< U_k < L_{k+1}
  double gap;     ///< L_{k+1} - U_k when separated
};

std::vector<Separation> spectral_separation(const std::vector<double>& lower,
                                            const std::vector<double>& upper);

/// One row per (level, k) with the table columns. Absent values are empty.
void write_enclosure_csv(std::ostream& os, const std::vector<LevelResult>& levels);

} // namespace cecr
