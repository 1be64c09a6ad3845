#pragma once

// Concrete closed-loop simulation: auxiliary variables are resolved by
// enumerating the boolean switching modes and solving each mode's linear
// system, parameters are redrawn within the robustness tolerances.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsynth/codegen.hpp"
#include "qsynth/dtlhs.hpp"
#include "qsynth/quantization.hpp"

namespace qsynth {

class Controller;

struct ResolvedStep {
  std::uint32_t mode = 0;    // boolean auxiliaries, first declared is the MSB
  int consistent_modes = 0;
  Valuation values;          // every variable of the model
  std::vector<double> next;  // primed state in declaration order
};

/// Per-model solver for one concrete step. The model must have real state
/// and next-state variables, boolean inputs and boolean or real
/// auxiliaries; every mode must pin the real unknowns through equalities.
class StepResolver {
 public:
  explicit StepResolver(const Dtlhs& h, double feas_tol = 1e-7);

  const Dtlhs& model() const { return model_; }
  std::uint32_t num_modes() const { return std::uint32_t{1} << bool_aux_.size(); }
  /// Mode bits as text, e.g. "01" for two boolean auxiliaries.
  std::string mode_text(std::uint32_t mode) const;

  /// Throws Error(Model) when no mode is consistent or a mode system is
  /// singular. Several consistent modes resolve to the lowest index.
  ResolvedStep resolve(std::span<const double> x, std::uint32_t action) const;

 private:
  struct Row {
    std::vector<double> coeffs;  // over all variables
    double rhs = 0.0;
    int guard = -1;              // variable index or -1
    bool positive = true;
  };

  Dtlhs model_;
  double feas_tol_;
  std::vector<std::string> names_;
  std::vector<int> state_;
  std::vector<int> inputs_;
  std::vector<int> bool_aux_;
  std::vector<int> unknowns_;  // real auxiliaries then next state
  std::vector<int> next_;
  std::vector<Row> rows_;
  std::vector<std::pair<int, int>> equalities_;  // row pairs a <= b, -a <= -b
};

/// Models that can be rebuilt with drawn load and supply values.
class PlantFamily {
 public:
  static PlantFamily fixed(Dtlhs h);
  static PlantFamily single_buck(BuckParams p);
  static PlantFamily multi_buck(BuckParams p, int n);

  bool has_parameters() const { return kind_ != Kind::Fixed; }
  const BuckParams& params() const { return params_; }
  /// Nominal parameter values.
  double load() const { return params_.load; }
  std::vector<double> supplies() const;

  /// Nominal-form model with the given load and supplies.
  Dtlhs instantiate(double load, const std::vector<double>& supplies) const;
  Dtlhs nominal() const { return instantiate(load(), supplies()); }

 private:
  enum class Kind { Fixed, Single, Multi };
  Kind kind_ = Kind::Fixed;
  Dtlhs fixed_;
  BuckParams params_;
  int inputs_ = 1;
};

/// Control law as a cell table: action per cell, kFault outside the
/// controllable region, with the rank when known.
struct Policy {
  QuantSchema schema;
  std::vector<std::int64_t> action;
  std::vector<int> rank;  // empty or one entry per cell, -1 when unknown

  static Policy from_controller(const Controller& k);
  /// Sweeps every cell through the compiled law and region trees.
  static Policy from_trees(const QuantSchema& s, const DecisionTree& law, const DecisionTree& region);
  /// The same action everywhere, with the whole rectangle as region.
  static Policy constant(const QuantSchema& s, std::uint32_t action);

  bool in_region(std::uint64_t cell) const { return action.at(cell) != kFault; }
  std::vector<std::uint64_t> region_cells() const;
};

enum class Disturbance { Nominal, PerTrial, PerStep };

const char* to_string(Disturbance d);
Disturbance disturbance_from_string(const std::string& text);

struct SimConfig {
  int steps = 1000;
  std::vector<double> initial;  // empty: uniform start inside the region
  Disturbance disturbance = Disturbance::PerTrial;
  double rho_load = 0.0;
  double rho_supply = 0.0;
  std::uint64_t seed = 1;
  Predicate goal;
};

struct SimStep {
  int step = 0;
  std::vector<double> state;
  std::optional<std::uint64_t> cell;  // nullopt once the state leaves the rectangle
  std::int64_t action = kFault;       // kFault when no action was applied
  std::string mode;                   // resolved boolean auxiliaries
  double load = 0.0;
  std::vector<double> supplies;
  bool in_goal = false;
  bool fault = false;
};

struct SimTrace {
  std::vector<std::string> state_names;
  std::vector<SimStep> steps;
  bool violation = false;  // the state left the safety rectangle
  bool fault = false;      // a state outside the controllable region was met
  int first_goal = -1;     // first step in the goal, -1 if never
  bool left_goal = false;  // the goal was reached and later left
  int start_rank = -1;
};

SimTrace run(const PlantFamily& plant, const Policy& policy, const SimConfig& cfg);

struct MonteCarloSummary {
  int trials = 0;
  int violations = 0;
  int faults = 0;
  int reached = 0;
  int reached_within_bound = 0;  // first goal step <= 2 * start rank
  int left_goal = 0;
  int max_steps_to_goal = 0;
};

/// Trial t runs with seed derived from (cfg.seed, t); results do not depend
/// on `jobs`. Throws Error(InvalidArgument) when the policy region is empty
/// and no initial state is given.
MonteCarloSummary monte_carlo(const PlantFamily& plant, const Policy& policy, const SimConfig& cfg,
                              int trials, int jobs = 1, std::vector<SimTrace>* traces = nullptr);

/// Columns: step, state variables, cell, action, q, R, V, in_goal, fault.
void write_trace_csv(std::ostream& out, const SimTrace& trace);
/// key=value lines.
void write_summary(std::ostream& out, const MonteCarloSummary& s);

}  // namespace qsynth
