#pragma once

// Experiment harness: config parsing, preset instances, CSV emission,
// ground-truth sidecars, sweep fan-out, and the CLI entry point.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccmdp/solver.hpp"

namespace ccmdp {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class ComparatorMode { kNone, kEnumeration, kFrankWolfe };

struct RunConfig {
  ExperimentSpec spec;
  ComparatorMode comparator = ComparatorMode::kNone;
  double comparator_tol = 1e-7;
  long long comparator_budget = 100000;
  std::string name = "run";  // base name for emitted files
  std::vector<std::uint64_t> sweep_seeds;
  std::vector<int> sweep_T;
  bool emit_plots = false;
};

// Parse the flat key/value config text (sections [environment], [objective],
// [constraint], [algorithm], [comparator], [output], [sweep]). Unknown keys,
// malformed lines, and type errors throw ConfigError naming the line number.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config_file(const std::string& path);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names();
RunConfig make_preset(const std::string& name, std::uint64_t seed);

// Tabular feature-matching instance: random known model, expert = greedy
// policy for a random linear cost, objective = distance to the expert's
// embedding (optimum value 0). with_ball adds a ball constraint centered at
// the uniform policy's embedding with radius half the expert's distance, so
// the expert sits strictly outside and the constraint binds.
RunConfig make_apprenticeship(std::uint64_t seed, bool with_ball);

// Multi-criterion instances: I linear functionals per stage (rows bounded by
// sqrt(inner feature dim)) folded into the feature map, objective = distance
// to a reachable target in the mapped space, constraint = distance to a ball
// around a reference embedding. identity_h with I = 1 degenerates the outer
// map to the identity, which reduces the objective to a linear functional.
ExperimentSpec make_multiobjective_finite(std::uint64_t seed, int I, bool identity_h);
RunConfig make_multiobjective_knr(std::uint64_t seed);
RunConfig make_multiobjective_lowrank(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

// Column order of every emitted CSV.
extern const char* const kCsvHeader;

// One row per episode; regret_avg = f_mixed - f_star (NaN without a
// comparator), violation_avg = g_mixed. Values printed with %.17g.
void write_csv(std::ostream& out, const RunResult& result, const GroundTruth* truth);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // ConfigError if absent
  double at(int row, const std::string& name) const;
};
CsvTable read_csv(std::istream& in);

void write_truth_sidecar(std::ostream& out, const GroundTruth& truth);

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

// Grid-features view of a regulator objective: row (node*A + a) of table[h]
// holds psi_h(node, a).
TabularFeatureMap make_grid_features(const StateGrid& grid, const KnrObjectiveFeatures& features,
                                     int H, int num_actions);

// Ground truth for a spec: finite kinds solve the exact model; regulator
// kinds solve the grid-discretized dynamics (Frank-Wolfe only).
GroundTruth solve_ground_truth(const ExperimentSpec& spec, ComparatorMode mode, double tol,
                               long long budget);

struct RunOutputs {
  RunResult result;
  std::optional<GroundTruth> truth;
  std::string csv_path;
};

// Execute one run and write "<out_dir>/<name>_seed<seed>.csv" (plus the truth
// sidecar and optional gnuplot script). Empty out_dir writes to the current
// directory.
RunOutputs execute_run(const RunConfig& config, const std::string& out_dir);

// Fan the sweep block out over (T, seed) pairs in parallel; returns the
// emitted CSV paths in deterministic (T-major, then seed) order.
std::vector<std::string> execute_sweep(const RunConfig& config, const std::string& out_dir);

// CLI entry: subcommands run | sweep | oracle | presets, flags --config PATH,
// --seed N, --out DIR, --preset NAME, --emit-plots. Returns the process exit
// code (0 ok, 1 config error, 2 numerical/budget error).
int cli_run(int argc, char** argv);

}  // namespace ccmdp
