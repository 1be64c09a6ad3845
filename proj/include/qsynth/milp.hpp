#pragma once

// Bounded mixed-integer linear programming: an indexed model used on hot
// paths, a named front end (MilpProblem) over predicates, per-query-kind
// statistics and LP-format export.

#include <array>
#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsynth/error.hpp"
#include "qsynth/predicate.hpp"

namespace qsynth::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
  int col = 0;
  double coeff = 0.0;
};

/// lo <= sum(coeff * x[col]) <= hi; lo may be -inf, hi may be +inf.
struct Row {
  std::vector<Entry> entries;
  double lo = -kInf;
  double hi = kInf;
};

/// Indexed bounded MILP. Every variable carries finite bounds.
struct Model {
  std::vector<std::string> names;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<char> integer;
  std::vector<Row> rows;

  int add_variable(std::string name, double lo, double hi, bool is_integer);
  void add_row(std::vector<Entry> entries, double lo, double hi);
  int index_of(const std::string& name) const;  // -1 if absent
  int num_vars() const { return static_cast<int>(lower.size()); }
};

enum class Sense { Minimize, Maximize };

struct Objective {
  std::vector<Entry> terms;
  Sense sense = Sense::Minimize;
  double constant = 0.0;
};

struct Options {
  double integrality_tol = 1e-6;
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-6;  // relative gap for optimal termination
  long node_budget = 1'000'000;
};

enum class Status { Optimal, Feasible, Infeasible, BudgetExhausted };

const char* to_string(Status s);

struct Solution {
  Status status = Status::Infeasible;
  double value = 0.0;
  std::vector<double> x;
  long nodes = 0;
};

/// Raised when the simplex hits its anti-cycling pivot cap.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(ErrorCode::Solver, what) {}
};

/// Branch-and-bound over LP relaxations. With no objective the search stops
/// at the first integer-feasible point (status Feasible).
Solution solve(const Model& model, const Objective* objective, const Options& options = {});

/// True when `x` satisfies bounds, integrality (exactly) and every row of
/// `model` within the feasibility tolerance (scaled by row magnitude).
bool check_witness(const Model& model, const std::vector<double>& x, double feas_tol);

// ---------------------------------------------------------------------------
// Named front end.

struct MilpProblem {
  std::vector<VariableDecl> decls;
  Predicate constraints;  // conjunctive: guards are normalized upstream
  std::optional<std::pair<LinearExpression, Sense>> objective;
  int query_kind = 0;  // 1..5, 0 for uncategorized
};

enum class MilpStatus { Optimal, Feasible, Infeasible, BudgetExhausted };

const char* to_string(MilpStatus s);

struct MilpResult {
  MilpStatus status = MilpStatus::Infeasible;
  std::optional<double> value;
  std::optional<Valuation> witness;
};

/// Compiles a conjunctive problem into the indexed form. Opposite
/// constraint pairs are merged into equality rows.
Model compile(const MilpProblem& problem);

inline constexpr int kQueryKinds = 5;

struct KindStats {
  long count = 0;
  double total_seconds = 0.0;
  double average_seconds() const { return count > 0 ? total_seconds / count : 0.0; }
};

/// Index 0 collects uncategorized queries; 1..5 the abstraction query kinds.
struct StatsSnapshot {
  std::array<KindStats, kQueryKinds + 1> kinds{};
  long total_count() const;
};

/// Lock-free accumulator; safe to update from concurrent solver calls.
class MilpStats {
 public:
  void record(int kind, double seconds);
  StatsSnapshot snapshot() const;
  void reset();

 private:
  std::array<std::atomic<long>, kQueryKinds + 1> counts_{};
  std::array<std::atomic<std::int64_t>, kQueryKinds + 1> nanos_{};
};

class MilpSolver {
 public:
  explicit MilpSolver(Options options = {}, std::shared_ptr<MilpStats> stats = nullptr);

  MilpResult solve(const MilpProblem& problem) const;
  /// Objective-free solve; status is Feasible, Infeasible or BudgetExhausted.
  MilpResult feasible(const MilpProblem& problem) const;

  /// Indexed entry point used by the abstraction builder.
  Solution solve(const Model& model, const Objective* objective, int query_kind) const;

  StatsSnapshot stats_snapshot() const;
  const Options& options() const { return options_; }
  const std::shared_ptr<MilpStats>& stats() const { return stats_; }

 private:
  Options options_;
  std::shared_ptr<MilpStats> stats_;
};

/// Writes `problem` in CPLEX LP file format for cross-checking with
/// external solvers.
void write_lp_format(std::ostream& out, const MilpProblem& problem);

}  // namespace qsynth::milp
