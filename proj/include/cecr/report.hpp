// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cecr
{

/// One parsed row of the enclosure CSV.
struct EnclosureRow
{
  double h = 0.0;
  int num_elements = 0;
  double h_max = 0.0;
  double Gamma_h = 0.0;
  double A_h = 0.0;
  double d_h = 0.0;
  double rho_patch = 0.0;
  double eps_h = 0.0;
  double C_eps_diag = 0.0;
  std::optional<double> C_eps_rigorous;
  double C_eps_cert = 0.0;
  double sigma = 0.0;
  double sigma_opt = 0.0;
  double eps_h_opt = 0.0;
  int k = 0;
  double mu_sigma_minus_sigma = 0.0;
  double L_mu_sigma = 0.0;
  double L = 0.0;
  std::optional<double> L_gamma;
  std::optional<double> L_opt;
  double U = 0.0;
  bool admissible = false;
  bool confinement_ok = false;

  /// Best certified lower bound of the row.
  double best_lower() const;
};

/// Parses the CSV written by write_enclosure_csv. Throws InputError on a
/// malformed header or row.
std::vector<EnclosureRow> read_enclosure_csv(std::istream& is);

void write_enclosure_markdown(std::ostream& os, const std::vector<EnclosureRow>& rows);

/// Convergence data for k = 1: (h_max, gap) pairs with local orders.
struct ConvergencePoint
{
  double h = 0.0;
  double h_max = 0.0;
  double gap_rough = 0.0;  ///< reference - L, or U - L without a reference
  std::optional<double> gap_opt;
  std::optional<double> gap_gamma;
  double width = 0.0; ///< U - best lower bound
  std::optional<double> eoc_rough;
  std::optional<double> eoc_opt;
};

std::vector<ConvergencePoint> convergence_table(const std::vector<EnclosureRow>& rows,
                                                std::optional<double> lambda1_reference);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergencePoint>& pts);

/// Separation verdicts per level from the best lower bounds.
void write_separation_csv(std::ostream& os, const std::vector<EnclosureRow>& rows);

/// Reads dir/enclosures.csv and writes enclosures.md, convergence.csv and
/// separation.csv next to it.
void render_report(const std::string& dir, std::optional<double> lambda1_reference);

} // namespace cecr
