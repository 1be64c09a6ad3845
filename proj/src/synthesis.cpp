#include "qsynth/synthesis.hpp"

#include <algorithm>
#include <ostream>

#include <spdlog/spdlog.h>

#include "qsynth/error.hpp"

namespace qsynth {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Sol:
      return "Sol";
    case Outcome::NoSol:
      return "NoSol";
    case Outcome::Unk:
      return "Unk";
  }
  return "?";
}

Controller::Controller(QuantSchema schema, std::size_t num_inputs)
    : schema_(std::move(schema)),
      num_inputs_(num_inputs),
      rank_(schema_.cell_count(), -1),
      goal_(schema_.cell_count(), 0),
      enabled_(schema_.cell_count()) {}

std::optional<std::uint32_t> Controller::chosen(std::uint64_t cell) const {
  const auto& e = enabled_.at(cell);
  if (e.empty()) return std::nullopt;
  return e.front();
}

std::uint64_t Controller::controllable_count() const {
  return static_cast<std::uint64_t>(std::count_if(rank_.begin(), rank_.end(), [](int r) { return r >= 0; }));
}

double Controller::controllable_fraction() const {
  return static_cast<double>(controllable_count()) / static_cast<double>(num_cells());
}

namespace {

// Successors under the abstraction's variant, or nullopt when the action
// cannot be used: inconsistent, possibly unsafe, or without successors.
std::optional<std::vector<std::uint64_t>> usable(const ControlAbstraction& abs, std::uint64_t c,
                                                 std::uint32_t a) {
  const Transition& t = abs.transition(c, a);
  if (!t.consistent || t.unsafe) return std::nullopt;
  auto succ = abs.successors(c, a);
  if (succ.empty()) return std::nullopt;
  return succ;
}

bool all_in(const std::vector<std::uint64_t>& succ, const std::vector<int>& rank, int below) {
  return std::all_of(succ.begin(), succ.end(), [&](std::uint64_t d) { return rank[d] >= 0 && rank[d] < below; });
}

}  // namespace

Controller synthesize(const ControlAbstraction& abs) {
  Controller k(abs.schema(), abs.num_inputs());
  const std::uint64_t n = abs.num_cells();
  const std::uint32_t actions = abs.num_actions();
  std::vector<char> goal(n, 0);
  for (std::uint64_t c = 0; c < n; ++c) goal[c] = abs.admissible(c) && abs.goal(c) ? 1 : 0;
  const bool any_goal_cell = std::any_of(goal.begin(), goal.end(), [](char g) { return g != 0; });
  constexpr int kFar = 1 << 30;

  // Reverse edges of usable actions; a pair becomes ready once all of its
  // successors are ranked.
  std::vector<std::vector<std::uint64_t>> succ_of(n * actions);
  std::vector<char> usable_pair(n * actions, 0);
  std::vector<std::vector<std::uint64_t>> preds(n);
  for (std::uint64_t c = 0; c < n; ++c) {
    if (!abs.admissible(c)) continue;
    for (std::uint32_t a = 0; a < actions; ++a) {
      auto succ = usable(abs, c, a);
      if (!succ) continue;
      usable_pair[c * actions + a] = 1;
      for (auto d : *succ) preds[d].push_back(c * actions + a);
      succ_of[c * actions + a] = std::move(*succ);
    }
  }

  std::vector<int>& rank = k.rank_;
  std::vector<std::size_t> pending(n * actions);
  for (std::size_t p = 0; p < pending.size(); ++p) pending[p] = succ_of[p].size();
  std::vector<std::uint64_t> frontier;
  for (std::uint64_t c = 0; c < n; ++c) {
    if (goal[c]) {
      rank[c] = 0;
      frontier.push_back(c);
    }
  }
  for (int level = 1; !frontier.empty(); ++level) {
    std::vector<std::uint64_t> added;
    for (auto d : frontier) {
      for (auto p : preds[d]) {
        const std::uint64_t c = p / actions;
        if (--pending[p] == 0 && rank[c] < 0) {
          rank[c] = level;
          added.push_back(c);
        }
      }
    }
    std::sort(added.begin(), added.end());
    frontier = std::move(added);
  }

  for (std::uint64_t c = 0; c < n; ++c) {
    if (rank[c] < 0) continue;
    k.goal_[c] = goal[c];
    k.max_rank_ = std::max(k.max_rank_, rank[c]);
    // Goal cells prefer actions that stay among goal cells (rank 0) and fall
    // back to staying in the winning set.
    for (const int bound : goal[c] ? std::vector<int>{1, kFar} : std::vector<int>{rank[c]}) {
      for (std::uint32_t a = 0; a < actions; ++a) {
        if (usable_pair[c * actions + a] && all_in(succ_of[c * actions + a], rank, bound)) {
          k.enabled_[c].push_back(a);
        }
      }
      if (!k.enabled_[c].empty()) break;
    }
  }
  k.outcome_ = classify_outcome(k, abs);
  if (!any_goal_cell) k.diagnostic_ = "goal finer than quantization";
  spdlog::debug("synthesis: {} of {} cells controllable, max rank {}, outcome {}", k.controllable_count(), n,
                k.max_rank_, to_string(k.outcome_));
  return k;
}

int steps_to_goal(const Controller& k, std::uint64_t cell) {
  if (cell >= k.num_cells() || !k.controllable(cell)) {
    throw Error(ErrorCode::InvalidArgument, "cell is not controllable");
  }
  return k.rank(cell);
}

Outcome classify_outcome(const Controller& k, const ControlAbstraction& abs) {
  bool any_goal = false;
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) any_goal = any_goal || (k.controllable(c) && k.goal(c));
  if (!any_goal) return Outcome::NoSol;
  bool covered = true;
  for (std::uint64_t c = 0; c < abs.num_cells(); ++c) {
    if (abs.admissible(c) && abs.initial(c) && !k.controllable(c)) covered = false;
  }
  if (covered) return Outcome::Sol;
  const auto& st = abs.stats();
  if (abs.exact() && st.budget_events == 0 && st.solver_errors == 0) return Outcome::NoSol;
  return Outcome::Unk;
}

void write_controller_csv(std::ostream& out, const Controller& k) {
  out << "cell,action,rank\n";
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) {
    const auto a = k.chosen(c);
    if (!a) continue;
    out << cell_text(k.schema().cell_at(c)) << ',' << action_string(*a, k.num_inputs()) << ',' << k.rank(c)
        << '\n';
  }
}

void write_region_csv(std::ostream& out, const Controller& k) {
  const QuantSchema& s = k.schema();
  out << "cell";
  for (const auto& ax : s.axes()) out << ',' << ax.var << "_lo," << ax.var << "_hi";
  out << ",controllable,goal\n";
  const auto precision = out.precision(17);
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) {
    const Cell cell = s.cell_at(c);
    const CellBox box = s.cell_box(cell);
    out << cell_text(cell);
    for (const auto& b : box.bounds) out << ',' << b.lo << ',' << b.hi;
    out << ',' << (k.controllable(c) ? 1 : 0) << ',' << (k.goal(c) ? 1 : 0) << '\n';
  }
  out.precision(precision);
}

}  // namespace qsynth
