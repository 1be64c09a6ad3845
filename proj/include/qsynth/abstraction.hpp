#pragma once

// Finite control abstraction of a DTLHS over quantized cells and boolean
// actions, built from MILP queries.
//
// Query kinds recorded in the MILP statistics:
//   1 cell admissibility, 2 successor bounds, 3 self-loop feasibility,
//   4 equilibrium (loop eliminability), 5 goal/initial region membership.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "qsynth/dtlhs.hpp"
#include "qsynth/milp.hpp"
#include "qsynth/quantization.hpp"

namespace qsynth {

/// Goal and initial regions as conjunctive predicates over state variables.
/// An empty initial predicate stands for the whole state rectangle.
struct RegionSpec {
  Predicate goal;
  Predicate initial;

  /// Goal |goal_var - vref| <= eps, initial region the full rectangle.
  static RegionSpec default_for(const Dtlhs& h, double vref = 5.0, double eps = 0.5);
};

enum class Variant { Maximum, Minimum };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& text);

struct AbstractionOptions {
  /// Per-candidate successor checks instead of per-coordinate bounds.
  bool exact = false;
  Variant variant = Variant::Minimum;
  int jobs = 1;
  milp::Options milp;
  /// Strict inequalities hold when a margin of this fraction of the cell
  /// width is attainable.
  double strict_margin = 1e-5;
};

/// Three-valued query answer; Unknown comes from budget exhaustion or a
/// solver failure.
enum class Verdict { No, Yes, Unknown };

struct Transition {
  bool consistent = false;  // some concrete step exists under this action
  bool unsafe = false;      // some step leaves the state rectangle
  bool self_loop = false;   // present in the maximum abstraction
  bool loop_kept = false;   // also present in the minimum abstraction
  std::vector<std::uint64_t> successors;  // sorted cell indices, excluding the source cell

  bool has_loop(Variant v) const { return v == Variant::Maximum ? self_loop : loop_kept; }
  /// Number of arcs: successors, the loop if present and the unsafe sink.
  long arcs(Variant v) const;
};

struct AbstractionStats {
  long arcs_max = 0;
  long arcs_min = 0;
  long max_loops = 0;
  long kept_loops = 0;
  double loop_frac = 0.0;
  double cpu_seconds = 0.0;
  long mem_kb = 0;
  long budget_events = 0;
  long solver_errors = 0;
  milp::StatsSnapshot milp;

  long arcs(Variant v) const { return v == Variant::Maximum ? arcs_max : arcs_min; }
};

class ControlAbstraction {
 public:
  ControlAbstraction(QuantSchema schema, std::size_t num_inputs, Variant variant, bool exact);

  const QuantSchema& schema() const { return schema_; }
  std::size_t num_inputs() const { return num_inputs_; }
  std::uint32_t num_actions() const { return num_actions_; }
  std::uint64_t num_cells() const { return schema_.cell_count(); }
  Variant variant() const { return variant_; }
  bool exact() const { return exact_; }

  bool admissible(std::uint64_t cell) const { return admissible_.at(cell) != 0; }
  bool goal(std::uint64_t cell) const { return goal_.at(cell) != 0; }
  bool initial(std::uint64_t cell) const { return initial_.at(cell) != 0; }
  const Transition& transition(std::uint64_t cell, std::uint32_t action) const;
  const AbstractionStats& stats() const { return stats_; }

  /// Successors under the configured variant, the source cell included when
  /// its loop survives.
  std::vector<std::uint64_t> successors(std::uint64_t cell, std::uint32_t action) const;

 private:
  friend class AbstractionBuilder;

  QuantSchema schema_;
  std::size_t num_inputs_;
  std::uint32_t num_actions_;
  Variant variant_;
  bool exact_;
  std::vector<char> admissible_;
  std::vector<char> goal_;
  std::vector<char> initial_;
  std::vector<Transition> transitions_;
  AbstractionStats stats_;
};

/// Issues the MILP queries for one model and schema. Thread-safe: every
/// query works on its own copy of the compiled model.
class AbstractionBuilder {
 public:
  AbstractionBuilder(const Dtlhs& h, QuantSchema schema, AbstractionOptions options = {},
                     std::shared_ptr<milp::MilpStats> stats = nullptr);

  const QuantSchema& schema() const { return schema_; }
  const AbstractionOptions& options() const { return options_; }
  const milp::MilpSolver& solver() const { return solver_; }

  /// Kind 1: some concrete step starts inside the half-open cell.
  Verdict is_admissible(const Cell& c) const;
  /// Kind 2: per next-state variable, min and max over the cell with the
  /// action fixed, open faces pulled in by the strict margin. nullopt when
  /// the action admits no step there; a coordinate whose bound could not be
  /// settled spans its full declared range.
  std::optional<std::vector<Interval>> successor_box(const Cell& c, std::uint32_t action) const;
  /// Successor cells, unsafe flag and self-loop (kinds 2, 3 and 4).
  Transition successors(const Cell& c, std::uint32_t action) const;
  /// Kind 4: true when no equilibrium lies in the cell under the action.
  Verdict self_loop_eliminable(const Cell& c, std::uint32_t action) const;
  /// Kind 5: the closed cell box lies inside every face of the region.
  bool inside_region(const Cell& c, const Predicate& region) const;
  /// Kind 5: the half-open cell meets the region.
  bool meets_region(const Cell& c, const Predicate& region) const;

  ControlAbstraction build(const RegionSpec& spec) const;

  long budget_events() const { return budget_events_->load(); }
  long solver_errors() const { return solver_errors_->load(); }

 private:
  struct Query;

  Query make_query(const Cell& c, const std::optional<std::uint32_t>& action, bool strict_cell) const;
  Verdict run(Query& q, int kind) const;
  Verdict exists_owner_below(const Cell& c, std::uint32_t action, std::size_t var, std::int64_t k) const;
  Verdict exists_owner_at_least(const Cell& c, std::uint32_t action, std::size_t var,
                                std::int64_t k) const;
  std::pair<std::int64_t, std::int64_t> index_range(const Cell& c, std::uint32_t action, std::size_t var,
                                                    const Interval& bounds) const;
  Verdict joint_check(const Cell& c, std::uint32_t action, const Cell& target) const;
  void note(Verdict v) const;

  Dtlhs model_;
  QuantSchema schema_;
  AbstractionOptions options_;
  milp::MilpSolver solver_;
  milp::Model base_;
  std::vector<int> state_cols_;
  std::vector<int> input_cols_;
  std::vector<int> next_cols_;
  std::shared_ptr<std::atomic<long>> budget_events_;
  std::shared_ptr<std::atomic<long>> solver_errors_;
};

/// Rows: cell, action, successors (cell indices joined by '|', plus UNSAFE),
/// self_loop, loop_kept.
void write_abstraction_csv(std::ostream& out, const ControlAbstraction& abs);

/// Peak resident set size of this process in kB (0 when unavailable).
long peak_memory_kb();

}  // namespace qsynth
