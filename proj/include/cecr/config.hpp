// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/certify.hpp"
#include "cecr/geometry.hpp"
#include "cecr/potential.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cecr
{

enum class MeshKind
{
  graded_rectangle,
  ball_shells,
  graded_box
};

/// One run of the pipeline: problem, mesh family, shift parameters and
/// solver settings. All values in atomic units with the -Delta convention.
struct RunConfig
{
  std::string problem = "custom";
  PotentialSpec potential;
  TruncationDomain domain;
  MeshKind mesh_kind = MeshKind::graded_rectangle;
  /// Nominal mesh sizes, strictly decreasing.
  std::vector<double> levels;
  /// Finer levels that only run with the heavy switch.
  std::vector<double> heavy_levels;
  double vartheta = 1.0;
  double growth = 0.25; ///< radial shell growth of ball meshes
  std::uint64_t seed = 1;

  double epsilon = 0.55;
  /// Form constant of the rough shift. Must be a rigorous bound.
  double C_eps = 12.0;
  double sigma = 12.5;
  /// sigma_rule = opt(kappa_target) when set; manual(sigma) only otherwise.
  bool optimal_shift = true;
  std::optional<double> kappa_target;
  CepsSource opt_source = CepsSource::diagnostic;
  double C_eps_manual = 0.0;
  bool rigorous_ceps = false;
  double alpha = 0.5;
  double C_alpha = 0.0;
  bool gamma_baseline = true;
  /// Embedding constant override; computed from the domain when absent.
  std::optional<double> embed;

  int k_max = 3;
  EigenOptions eig;

  /// Upper surrogate of lambda_1 given with the domain, for the
  /// confinement table.
  std::optional<double> lambda1_reference_upper;
  /// Exact or literature lambda_1, used for convergence gaps when known.
  std::optional<double> lambda1_reference;

  std::string output_dir = "out";
  int threads = 1;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();

/// Built-in preset. Throws InputError for unknown names.
RunConfig preset(const std::string& name);

/// Reads a sectioned key = value file. Keys that are absent keep the value
/// of base (a preset named by problem.preset, or the defaults).
RunConfig load_config(const std::string& path);

/// Parses a comma-separated list of numbers.
std::vector<double> parse_number_list(const std::string& text);

/// Throws InputError when the configuration is inconsistent.
void validate_config(const RunConfig& cfg);

/// Embedding constant of the domain: S8 (rectangle), C6 (box or ball).
double domain_embedding(const RunConfig& cfg);

/// Certification options derived from the configuration.
CertifyOptions certify_options(const RunConfig& cfg);

/// Analytic form constant of the configured geometry, rounded up to two
/// decimals. Throws InputError for geometries without a closed form.
double analytic_ceps(const RunConfig& cfg);

/// Human-readable resolved configuration, one key = value per line.
std::string describe_config(const RunConfig& cfg);

std::string to_string(MeshKind k);
MeshKind parse_mesh_kind(const std::string& name);

} // namespace cecr
