#pragma once

// Controller synthesis on a control abstraction: the cells from which the
// goal can be reached while avoiding the unsafe sink, ranked by worst-case
// steps to the goal.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsynth/abstraction.hpp"

namespace qsynth {

enum class Outcome { Sol, NoSol, Unk };

const char* to_string(Outcome o);

class Controller {
 public:
  Controller(QuantSchema schema, std::size_t num_inputs);

  const QuantSchema& schema() const { return schema_; }
  std::size_t num_inputs() const { return num_inputs_; }
  std::uint64_t num_cells() const { return schema_.cell_count(); }

  bool controllable(std::uint64_t cell) const { return rank_.at(cell) >= 0; }
  bool goal(std::uint64_t cell) const { return goal_.at(cell) != 0; }
  /// -1 for uncontrollable cells.
  int rank(std::uint64_t cell) const { return rank_.at(cell); }
  const std::vector<std::uint32_t>& enabled(std::uint64_t cell) const { return enabled_.at(cell); }
  /// Lexicographically least enabled action.
  std::optional<std::uint32_t> chosen(std::uint64_t cell) const;

  std::uint64_t controllable_count() const;
  double controllable_fraction() const;
  int max_rank() const { return max_rank_; }
  Outcome outcome() const { return outcome_; }
  const std::string& diagnostic() const { return diagnostic_; }

 private:
  friend Controller synthesize(const ControlAbstraction& abs);

  QuantSchema schema_;
  std::size_t num_inputs_;
  std::vector<int> rank_;
  std::vector<char> goal_;
  std::vector<std::vector<std::uint32_t>> enabled_;
  int max_rank_ = 0;
  Outcome outcome_ = Outcome::Unk;
  std::string diagnostic_;
};

/// Backward fixed point over the abstraction's configured variant, starting
/// from the goal cells at rank 0. Goal cells enable the actions that keep
/// them among goal cells when there are any, otherwise the actions that stay
/// inside the winning set; a goal cell with neither has no enabled action.
Controller synthesize(const ControlAbstraction& abs);

/// Rank of a controllable cell; throws Error(InvalidArgument) otherwise.
int steps_to_goal(const Controller& k, std::uint64_t cell);

/// Sol when every initial cell is controllable; NoSol when the goal set is
/// empty, or when an exact abstraction without unresolved queries leaves an
/// initial cell uncontrollable; Unk otherwise.
Outcome classify_outcome(const Controller& k, const ControlAbstraction& abs);

/// Rows: cell, action, rank for controllable cells.
void write_controller_csv(std::ostream& out, const Controller& k);
/// Rows: cell, per-variable box bounds, controllable, goal for every cell.
void write_region_csv(std::ostream& out, const Controller& k);

}  // namespace qsynth
