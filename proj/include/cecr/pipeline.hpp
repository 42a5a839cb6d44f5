// SPDX-License-Identifier: MIT
#pragma once

#include "cecr/config.hpp"

#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cecr
{

/// Last stage a pipeline run executes.
enum class Stage
{
  mesh,
  constants,
  solve,
  certify
};

std::string to_string(Stage s);

struct PipelineOptions
{
  bool heavy = false;
  /// Replaces the configured levels when set.
  std::optional<std::vector<double>> levels;
  /// Reads the mesh of the single level from this file instead of meshing.
  std::string mesh_in;
  /// Directories for mesh files, c_h fields and Matrix Market dumps.
  std::string mesh_out;
  std::string ch_out;
  std::string dump_matrices;
  /// Progress messages; null silences them.
  std::ostream* log = nullptr;
};

/// Levels a run will process: configured (or overridden) levels, plus the
/// heavy levels when requested.
std::vector<double> planned_levels(const RunConfig& cfg, const PipelineOptions& opt);

GradingSpec grading_for(const RunConfig& cfg, double h);
Mesh build_level_mesh(const RunConfig& cfg, double h);

struct MemoryEstimate
{
  double h = 0.0;
  double elements = 0.0;
  double megabytes = 0.0;
};

/// Rough peak memory per level, scaled from a mesh of the coarsest level.
std::vector<MemoryEstimate> estimate_memory(const RunConfig& cfg,
                                            const std::vector<double>& levels);

/// Eigenvalues of the solve stage with their residual certificates.
struct SolveSummary
{
  std::vector<double> p1_values;
  std::vector<double> p1_certificates;
  std::vector<double> ecr_shifted_values;
  std::vector<double> ecr_shifted_certificates;
  std::string solver_tag;
};

struct LevelOutcome
{
  double h = 0.0;
  bool ok = false;
  /// 0 on success, else the CLI exit code of the failure.
  int exit_code = 0;
  std::string error;
  int num_elements = 0;
  int num_vertices = 0;
  QualityReport quality;
  std::optional<ConstantsBundle> constants;
  double sigma_ext = 0.0;
  bool confinement_ok = false;
  std::optional<SolveSummary> solve;
  std::optional<LevelResult> result;
};

struct PipelineResult
{
  std::vector<LevelOutcome> levels;
  /// Exit code of the first failed level, 0 when every level succeeded.
  int exit_code = 0;
};

/// Runs the stages up to last on every planned level. Levels run on a pool
/// of cfg.threads workers; failures are recorded per level.
PipelineResult run_pipeline(const RunConfig& cfg, Stage last, const PipelineOptions& opt);

/// Writes the stage outputs into cfg.output_dir: mesh_audit.csv always,
/// constants.csv from the constants stage on, eigenvalues.csv for solve, and
/// enclosures.csv, the rendered report and run.json for certify.
void write_outputs(const RunConfig& cfg, Stage last, const PipelineResult& res);

/// Stages, levels and output files of a run, for --dry-run.
std::string describe_plan(const RunConfig& cfg, Stage last, const PipelineOptions& opt);

/// CLI exit code of an exception: 2 input, 3 numerical, 4 refused.
int exit_code_for(const std::exception& e);

} // namespace cecr
