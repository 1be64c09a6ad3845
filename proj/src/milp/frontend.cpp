#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <unordered_map>

#include "qsynth/milp.hpp"

namespace qsynth::milp {

const char* to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::Optimal:
      return "optimal";
    case MilpStatus::Feasible:
      return "feasible";
    case MilpStatus::Infeasible:
      return "infeasible";
    case MilpStatus::BudgetExhausted:
      return "budget_exhausted";
  }
  return "?";
}

Model compile(const MilpProblem& problem) {
  if (!problem.constraints.is_conjunctive()) {
    throw Error(ErrorCode::Model, "MILP constraints must be conjunctive (normalize guards first)");
  }
  Model model;
  std::unordered_map<std::string, int> index;
  for (const auto& d : problem.decls) {
    validate(d);
    if (index.count(d.name)) throw Error(ErrorCode::Model, "duplicate variable '" + d.name + "'");
    index[d.name] = model.add_variable(d.name, d.lower, d.upper, d.is_discrete());
  }

  // Rows keyed by their sign-normalized left-hand side so that a <= b and
  // -a <= -c collapse into one ranged row.
  std::map<std::vector<std::pair<int, double>>, std::pair<double, double>> ranged;
  std::vector<std::vector<std::pair<int, double>>> order;
  for (const auto& c : problem.constraints.plain) {
    std::vector<std::pair<int, double>> key;
    for (const auto& [name, coeff] : c.lhs.terms()) {
      auto it = index.find(name);
      if (it == index.end()) throw Error(ErrorCode::Model, "undeclared variable '" + name + "'");
      key.emplace_back(it->second, coeff);
    }
    std::sort(key.begin(), key.end());
    if (key.empty()) {
      if (c.rhs < -kCompareTolerance * std::max(1.0, std::abs(c.rhs))) {
        // 0 <= negative: keep as an unsatisfiable empty row.
        model.add_row({}, -kInf, c.rhs);
      }
      continue;
    }
    const bool flip = key.front().second < 0;
    if (flip) {
      for (auto& kv : key) kv.second = -kv.second;
    }
    auto [it, inserted] = ranged.try_emplace(key, -kInf, kInf);
    if (inserted) order.push_back(key);
    if (flip) {
      it->second.first = std::max(it->second.first, -c.rhs);
    } else {
      it->second.second = std::min(it->second.second, c.rhs);
    }
  }
  for (const auto& key : order) {
    const auto& [lo, hi] = ranged.at(key);
    std::vector<Entry> entries;
    entries.reserve(key.size());
    for (const auto& [col, coeff] : key) entries.push_back({col, coeff});
    model.add_row(std::move(entries), lo, hi);
  }
  return model;
}

long StatsSnapshot::total_count() const {
  long n = 0;
  for (const auto& k : kinds) n += k.count;
  return n;
}

void MilpStats::record(int kind, double seconds) {
  if (kind < 0 || kind > kQueryKinds) kind = 0;
  counts_[kind].fetch_add(1, std::memory_order_relaxed);
  nanos_[kind].fetch_add(static_cast<std::int64_t>(seconds * 1e9), std::memory_order_relaxed);
}

StatsSnapshot MilpStats::snapshot() const {
  StatsSnapshot s;
  for (int k = 0; k <= kQueryKinds; ++k) {
    s.kinds[k].count = counts_[k].load(std::memory_order_relaxed);
    s.kinds[k].total_seconds = static_cast<double>(nanos_[k].load(std::memory_order_relaxed)) * 1e-9;
  }
  return s;
}

void MilpStats::reset() {
  for (int k = 0; k <= kQueryKinds; ++k) {
    counts_[k].store(0);
    nanos_[k].store(0);
  }
}

MilpSolver::MilpSolver(Options options, std::shared_ptr<MilpStats> stats)
    : options_(options), stats_(stats ? std::move(stats) : std::make_shared<MilpStats>()) {}

Solution MilpSolver::solve(const Model& model, const Objective* objective, int query_kind) const {
  const auto start = std::chrono::steady_clock::now();
  struct Recorder {
    const MilpSolver* self;
    int kind;
    std::chrono::steady_clock::time_point start;
    ~Recorder() {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      self->stats_->record(kind, dt.count());
    }
  } recorder{this, query_kind, start};
  return milp::solve(model, objective, options_);
}

namespace {

MilpResult to_result(const MilpProblem& problem, const Solution& sol, bool optimize) {
  MilpResult out;
  switch (sol.status) {
    case Status::Infeasible:
      out.status = MilpStatus::Infeasible;
      return out;
    case Status::BudgetExhausted:
      out.status = MilpStatus::BudgetExhausted;
      break;
    case Status::Optimal:
      out.status = optimize ? MilpStatus::Optimal : MilpStatus::Feasible;
      break;
    case Status::Feasible:
      out.status = MilpStatus::Feasible;
      break;
  }
  if (!sol.x.empty()) {
    Valuation w;
    for (std::size_t j = 0; j < problem.decls.size(); ++j) w[problem.decls[j].name] = sol.x[j];
    out.witness = std::move(w);
    if (optimize) out.value = sol.value;
  }
  return out;
}

}  // namespace

MilpResult MilpSolver::solve(const MilpProblem& problem) const {
  const Model model = compile(problem);
  if (!problem.objective) return feasible(problem);
  Objective obj;
  const auto& [expr, sense] = *problem.objective;
  obj.sense = sense;
  obj.constant = expr.constant();
  for (const auto& [name, coeff] : expr.terms()) {
    const int j = model.index_of(name);
    if (j < 0) throw Error(ErrorCode::Model, "objective uses undeclared variable '" + name + "'");
    obj.terms.push_back({j, coeff});
  }
  return to_result(problem, solve(model, &obj, problem.query_kind), true);
}

MilpResult MilpSolver::feasible(const MilpProblem& problem) const {
  const Model model = compile(problem);
  return to_result(problem, solve(model, nullptr, problem.query_kind), false);
}

StatsSnapshot MilpSolver::stats_snapshot() const { return stats_->snapshot(); }

}  // namespace qsynth::milp
