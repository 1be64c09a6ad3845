#pragma once

// End-to-end runs: model selection, synthesis with its artifact set,
// controller files and closed-loop simulation against them.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsynth/abstraction.hpp"
#include "qsynth/simulator.hpp"
#include "qsynth/synthesis.hpp"

namespace qsynth {

struct RunConfig {
  std::string model = "buck";  // built-in name or model file path
  int bits = 8;
  int inputs = 0;  // n for "multibuck" and "multibuck-robust" without ":n"
  double goal_vref = 5.0;
  double goal_eps = 0.5;
  Variant variant = Variant::Minimum;
  bool exact = false;
  long budget_nodes = 1'000'000;
  int jobs = 1;
  std::uint64_t seed = 1;
  std::string out = ".";

  /// Throws Error(InvalidArgument).
  void validate() const;
  std::string to_json() const;
  /// Hash over every field except `out` and `jobs`, which do not change
  /// results.
  std::string hash() const;
};

struct ModelSpec {
  Dtlhs model;
  PlantFamily plant;  // nominal-form plant used for simulation
  std::string tag;    // file name stem
};

/// buck, buck-robust, multibuck:n, multibuck-robust:n, or a model file.
ModelSpec resolve_model(const std::string& name, int inputs = 0);
std::vector<std::string> builtin_model_names();

struct SynthRun {
  RunConfig config;
  std::string tag;
  std::string model_hash;
  std::string config_hash;
  std::string goal_text;
  ControlAbstraction abstraction;
  Controller controller;
  std::string source;
  std::size_t source_lines = 0;
  double cpu_seconds = 0.0;  // abstraction plus synthesis
  long mem_kb = 0;

  /// True when no goal cell survived, so nothing is controllable.
  bool empty_goal() const;
  std::string source_file_name() const;
};

SynthRun run_synthesis(const RunConfig& cfg);

/// Paper-style table: b (and n), Arcs, MaxLoops, LoopFrac, CPU, MEM, |K|, μ.
void write_stats_report(std::ostream& out, const SynthRun& run);
/// Per query kind: Num, Avg, Time.
void write_milp_report(std::ostream& out, const SynthRun& run);
/// Writes run_config.json, abstraction_stats.txt, milp_stats.txt,
/// abstraction.csv, controller.csv, region.csv and the C source into
/// config.out. Throws Error(Io).
void write_artifacts(const SynthRun& run);

/// First line of every CSV artifact.
std::string provenance_line(const std::string& model_hash, const std::string& config_hash, int bits,
                            std::size_t inputs);

struct ControllerEntry {
  Cell cell;
  std::uint32_t action = 0;
  int rank = 0;
};

struct ControllerFile {
  std::string model_hash;
  std::string config_hash;
  int bits = 0;
  std::size_t inputs = 0;
  std::vector<ControllerEntry> entries;

  /// Throws Error(InvalidArgument) when an entry does not fit the schema.
  Policy policy(const QuantSchema& s) const;
};

/// Throws Error(Io) on malformed files.
ControllerFile read_controller_csv(std::istream& in);
ControllerFile read_controller_file(const std::string& path);

/// Region CSV of a controller file: cell boxes, controllable, goal
/// (rank 0).
void write_policy_region_csv(std::ostream& out, const Policy& p);

struct SimulateRequest {
  RunConfig config;  // model, bits, goal, seed, jobs and out
  std::string controller_path;
  std::vector<double> initial;  // empty: random starts in the region
  int steps = 1000;
  int trials = 1;
  Disturbance disturbance = Disturbance::PerTrial;
};

struct SimulateResult {
  std::string model_hash;
  MonteCarloSummary summary;
  std::vector<SimTrace> traces;
};

/// Throws Error(HashMismatch) when the controller was built for another
/// model.
SimulateResult run_simulation(const SimulateRequest& req);
/// trace.csv (all trials, leading trial column) and summary.txt.
void write_simulation(const SimulateRequest& req, const SimulateResult& res);

}  // namespace qsynth
