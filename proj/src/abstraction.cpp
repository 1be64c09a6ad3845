#include "qsynth/abstraction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "qsynth/error.hpp"

namespace qsynth {

RegionSpec RegionSpec::default_for(const Dtlhs& h, double vref, double eps) {
  if (h.goal_var.empty()) throw Error(ErrorCode::Model, "model '" + h.name + "' names no goal variable");
  if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "goal tolerance must be positive");
  h.state_decl(h.goal_var);
  RegionSpec spec;
  spec.goal.add_le(LinearExpression::variable(h.goal_var), vref + eps);
  spec.goal.add_ge(LinearExpression::variable(h.goal_var), vref - eps);
  return spec;
}

const char* to_string(Variant v) { return v == Variant::Maximum ? "max" : "min"; }

Variant variant_from_string(const std::string& text) {
  if (text == "max" || text == "maximum") return Variant::Maximum;
  if (text == "min" || text == "minimum") return Variant::Minimum;
  throw Error(ErrorCode::InvalidArgument, "unknown abstraction variant '" + text + "'");
}

long Transition::arcs(Variant v) const {
  if (!consistent) return 0;
  return static_cast<long>(successors.size()) + (unsafe ? 1 : 0) + (has_loop(v) ? 1 : 0);
}

ControlAbstraction::ControlAbstraction(QuantSchema schema, std::size_t num_inputs, Variant variant,
                                       bool exact)
    : schema_(std::move(schema)),
      num_inputs_(num_inputs),
      num_actions_(action_count(num_inputs)),
      variant_(variant),
      exact_(exact),
      admissible_(schema_.cell_count(), 0),
      goal_(schema_.cell_count(), 0),
      initial_(schema_.cell_count(), 0),
      transitions_(schema_.cell_count() * num_actions_) {}

const Transition& ControlAbstraction::transition(std::uint64_t cell, std::uint32_t action) const {
  if (cell >= num_cells() || action >= num_actions_) {
    throw Error(ErrorCode::InvalidArgument, "transition index out of range");
  }
  return transitions_[cell * num_actions_ + action];
}

std::vector<std::uint64_t> ControlAbstraction::successors(std::uint64_t cell, std::uint32_t action) const {
  const Transition& t = transition(cell, action);
  std::vector<std::uint64_t> out = t.successors;
  if (t.consistent && t.has_loop(variant_)) {
    out.insert(std::lower_bound(out.begin(), out.end(), cell), cell);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AbstractionBuilder::Query {
  milp::Model m;
  bool empty = false;

  void clamp_col(int col, double lo, double hi) {
    m.lower[col] = std::max(m.lower[col], lo);
    m.upper[col] = std::min(m.upper[col], hi);
    if (m.lower[col] > m.upper[col]) empty = true;
  }
};

AbstractionBuilder::AbstractionBuilder(const Dtlhs& h, QuantSchema schema, AbstractionOptions options,
                                       std::shared_ptr<milp::MilpStats> stats)
    : model_(h),
      schema_(std::move(schema)),
      options_(options),
      solver_(options.milp, std::move(stats)),
      budget_events_(std::make_shared<std::atomic<long>>(0)),
      solver_errors_(std::make_shared<std::atomic<long>>(0)) {
  model_.validate();
  if (options_.jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be at least 1");
  if (!(options_.strict_margin > 0 && options_.strict_margin < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "strict margin must lie in (0, 0.5)");
  }
  const auto decls = model_.all_decls();
  milp::MilpProblem problem;
  problem.decls = decls;
  problem.constraints = to_conjunctive(model_.transition, decls);
  base_ = milp::compile(problem);
  for (const auto& ax : schema_.axes()) {
    model_.state_decl(ax.var);
    state_cols_.push_back(base_.index_of(ax.var));
    next_cols_.push_back(base_.index_of(primed_name(ax.var)));
  }
  if (schema_.dims() != model_.state.size()) {
    throw Error(ErrorCode::InvalidArgument, "quantization must cover every state variable");
  }
  for (const auto& d : model_.inputs) {
    if (d.kind != VarKind::Boolean) throw Error(ErrorCode::Model, "input '" + d.name + "' is not boolean");
    input_cols_.push_back(base_.index_of(d.name));
  }
}

AbstractionBuilder::Query AbstractionBuilder::make_query(const Cell& c,
                                                         const std::optional<std::uint32_t>& action,
                                                         bool strict_cell) const {
  Query q{base_};
  const CellBox box = schema_.cell_box(c);
  for (std::size_t i = 0; i < state_cols_.size(); ++i) {
    double hi = box.bounds[i].hi;
    if (strict_cell && box.upper_open[i]) hi -= options_.strict_margin * schema_.axes()[i].width();
    q.clamp_col(state_cols_[i], box.bounds[i].lo, hi);
  }
  if (action) {
    const auto bits = action_bits(*action, input_cols_.size());
    for (std::size_t j = 0; j < input_cols_.size(); ++j) q.clamp_col(input_cols_[j], bits[j], bits[j]);
  }
  return q;
}

void AbstractionBuilder::note(Verdict v) const {
  if (v == Verdict::Unknown) budget_events_->fetch_add(1);
}

Verdict AbstractionBuilder::run(Query& q, int kind) const {
  if (q.empty) return Verdict::No;
  Verdict v = Verdict::Unknown;
  try {
    const milp::Solution sol = solver_.solve(q.m, nullptr, kind);
    if (sol.status == milp::Status::Infeasible) {
      v = Verdict::No;
    } else if (sol.status == milp::Status::BudgetExhausted && sol.x.empty()) {
      v = Verdict::Unknown;
    } else {
      v = Verdict::Yes;
    }
  } catch (const milp::SolverError& e) {
    solver_errors_->fetch_add(1);
    spdlog::warn("solver failure on a kind {} query: {}", kind, e.what());
  }
  note(v);
  return v;
}

Verdict AbstractionBuilder::is_admissible(const Cell& c) const {
  Query q = make_query(c, std::nullopt, true);
  return run(q, 1);
}

std::optional<std::vector<Interval>> AbstractionBuilder::successor_box(const Cell& c,
                                                                      std::uint32_t action) const {
  Query q = make_query(c, action, true);
  if (q.empty) return std::nullopt;
  std::vector<Interval> out;
  for (int col : next_cols_) {
    Interval range{base_.lower[col], base_.upper[col]};
    for (const auto sense : {milp::Sense::Minimize, milp::Sense::Maximize}) {
      milp::Objective obj;
      obj.sense = sense;
      obj.terms.push_back({col, 1.0});
      milp::Solution sol;
      try {
        sol = solver_.solve(q.m, &obj, 2);
      } catch (const milp::SolverError& e) {
        solver_errors_->fetch_add(1);
        spdlog::warn("solver failure on a successor bound: {}", e.what());
        sol.status = milp::Status::BudgetExhausted;
        sol.x.clear();
      }
      if (sol.status == milp::Status::Infeasible) return std::nullopt;
      if (sol.status == milp::Status::BudgetExhausted) {
        note(Verdict::Unknown);
        continue;  // keep the declared bound on this side
      }
      if (sense == milp::Sense::Minimize) {
        range.lo = sol.value;
      } else {
        range.hi = sol.value;
      }
    }
    out.push_back(range);
  }
  return out;
}

Verdict AbstractionBuilder::exists_owner_below(const Cell& c, std::uint32_t action, std::size_t var,
                                               std::int64_t k) const {
  const Axis& ax = schema_.axes()[var];
  Query q = make_query(c, action, true);
  const double margin = options_.strict_margin * ax.width();
  const double bound = k >= ax.count() ? ax.hi : ax.boundary(k) - margin;
  q.clamp_col(next_cols_[var], -milp::kInf, bound);
  return run(q, 2);
}

Verdict AbstractionBuilder::exists_owner_at_least(const Cell& c, std::uint32_t action, std::size_t var,
                                                  std::int64_t k) const {
  const Axis& ax = schema_.axes()[var];
  Query q = make_query(c, action, true);
  const double margin = options_.strict_margin * ax.width();
  const double bound = k >= ax.count() ? ax.hi + margin : ax.boundary(k);
  q.clamp_col(next_cols_[var], bound, milp::kInf);
  return run(q, 2);
}

std::pair<std::int64_t, std::int64_t> AbstractionBuilder::index_range(const Cell& c, std::uint32_t action,
                                                                      std::size_t var,
                                                                      const Interval& bounds) const {
  const Axis& ax = schema_.axes()[var];
  auto window = [&](double v) {
    const double scale = std::max(1.0, std::abs(v));
    return (options_.milp.optimality_tol + 1e-7) * scale + 2 * options_.strict_margin * ax.width();
  };
  // Lower index: settle every boundary the minimum might sit on.
  std::int64_t lo = ax.owner(bounds.lo + window(bounds.lo));
  const std::int64_t lo_floor = ax.owner(bounds.lo - window(bounds.lo));
  while (lo > lo_floor && exists_owner_below(c, action, var, lo) != Verdict::No) --lo;
  std::int64_t hi = ax.owner(bounds.hi - window(bounds.hi));
  const std::int64_t hi_ceil = ax.owner(bounds.hi + window(bounds.hi));
  while (hi < hi_ceil && exists_owner_at_least(c, action, var, hi + 1) != Verdict::No) ++hi;
  return {lo, hi};
}

Verdict AbstractionBuilder::joint_check(const Cell& c, std::uint32_t action, const Cell& target) const {
  Query q = make_query(c, action, true);
  const CellBox box = schema_.cell_box(target);
  for (std::size_t i = 0; i < next_cols_.size(); ++i) {
    double hi = box.bounds[i].hi;
    if (box.upper_open[i]) hi -= options_.strict_margin * schema_.axes()[i].width();
    q.clamp_col(next_cols_[i], box.bounds[i].lo, hi);
  }
  return run(q, 3);
}

Verdict AbstractionBuilder::self_loop_eliminable(const Cell& c, std::uint32_t action) const {
  Query q = make_query(c, action, true);
  for (std::size_t i = 0; i < next_cols_.size(); ++i) {
    q.m.add_row({{next_cols_[i], 1.0}, {state_cols_[i], -1.0}}, 0.0, 0.0);
  }
  switch (run(q, 4)) {
    case Verdict::Yes:
      return Verdict::No;
    case Verdict::No:
      return Verdict::Yes;
    case Verdict::Unknown:
      break;
  }
  return Verdict::Unknown;
}

namespace {

// Odometer step over the box [lo, hi], last coordinate fastest.
bool advance(Cell& d, const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi) {
  for (std::size_t i = d.size(); i-- > 0;) {
    if (d[i] < hi[i]) {
      ++d[i];
      return true;
    }
    d[i] = lo[i];
  }
  return false;
}

}  // namespace

Transition AbstractionBuilder::successors(const Cell& c, std::uint32_t action) const {
  Transition t;
  const auto box = successor_box(c, action);
  if (!box) return t;
  t.consistent = true;
  const std::size_t n = schema_.dims();
  std::vector<std::int64_t> lo(n);
  std::vector<std::int64_t> hi(n);
  bool any_cell = true;
  bool contains_source = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Axis& ax = schema_.axes()[i];
    std::tie(lo[i], hi[i]) = index_range(c, action, i, (*box)[i]);
    if (lo[i] < 0 || hi[i] >= ax.count()) t.unsafe = true;
    lo[i] = std::max<std::int64_t>(lo[i], 0);
    hi[i] = std::min<std::int64_t>(hi[i], ax.count() - 1);
    if (lo[i] > hi[i]) any_cell = false;
    if (c[i] < lo[i] || c[i] > hi[i]) contains_source = false;
  }
  if (!any_cell) return t;

  Cell d = lo;
  do {
    if (d != c && (!options_.exact || joint_check(c, action, d) != Verdict::No)) {
      t.successors.push_back(schema_.index_of(d));
    }
  } while (advance(d, lo, hi));
  std::sort(t.successors.begin(), t.successors.end());
  if (contains_source && joint_check(c, action, c) != Verdict::No) {
    t.self_loop = true;
    t.loop_kept = self_loop_eliminable(c, action) != Verdict::Yes;
  }
  return t;
}

namespace {

// Closed or half-open cell box as a standalone model over the state
// variables, plus the region's rows.
milp::Model region_model(const QuantSchema& schema, const Cell& c, double margin) {
  milp::Model m;
  const CellBox box = schema.cell_box(c);
  for (std::size_t i = 0; i < schema.dims(); ++i) {
    double hi = box.bounds[i].hi;
    if (box.upper_open[i]) hi -= margin * schema.axes()[i].width();
    m.add_variable(schema.axes()[i].var, box.bounds[i].lo, hi, false);
  }
  return m;
}

std::vector<milp::Entry> entries_for(const milp::Model& m, const LinearExpression& e) {
  std::vector<milp::Entry> out;
  for (const auto& [name, coeff] : e.terms()) {
    const int col = m.index_of(name);
    if (col < 0) throw Error(ErrorCode::InvalidArgument, "region uses non-state variable '" + name + "'");
    out.push_back({col, coeff});
  }
  return out;
}

void require_conjunctive(const Predicate& p) {
  if (!p.is_conjunctive()) throw Error(ErrorCode::InvalidArgument, "regions must be conjunctive");
}

}  // namespace

bool AbstractionBuilder::inside_region(const Cell& c, const Predicate& region) const {
  require_conjunctive(region);
  const milp::Model m = region_model(schema_, c, 0.0);
  for (const auto& face : region.plain) {
    milp::Objective obj;
    obj.sense = milp::Sense::Maximize;
    obj.terms = entries_for(m, face.lhs);
    const milp::Solution sol = solver_.solve(m, &obj, 5);
    if (sol.status != milp::Status::Optimal) return false;
    const double value = sol.value + face.lhs.constant();
    if (value > face.rhs + kCompareTolerance * std::max(1.0, std::abs(face.rhs))) return false;
  }
  return true;
}

bool AbstractionBuilder::meets_region(const Cell& c, const Predicate& region) const {
  require_conjunctive(region);
  milp::Model m = region_model(schema_, c, options_.strict_margin);
  for (const auto& face : region.plain) {
    m.add_row(entries_for(m, face.lhs), -milp::kInf, face.rhs - face.lhs.constant());
  }
  const milp::Solution sol = solver_.solve(m, nullptr, 5);
  if (sol.status == milp::Status::BudgetExhausted && sol.x.empty()) {
    note(Verdict::Unknown);
    return true;
  }
  return sol.status != milp::Status::Infeasible;
}

ControlAbstraction AbstractionBuilder::build(const RegionSpec& spec) const {
  require_conjunctive(spec.goal);
  require_conjunctive(spec.initial);
  const std::clock_t cpu_start = std::clock();
  const long budget_before = budget_events();
  const long errors_before = solver_errors();
  const milp::StatsSnapshot milp_before = solver_.stats_snapshot();

  ControlAbstraction abs(schema_, input_cols_.size(), options_.variant, options_.exact);
  const std::uint64_t cells = schema_.cell_count();
  const std::uint32_t actions = abs.num_actions();
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      for (;;) {
        const std::uint64_t idx = next.fetch_add(1);
        if (idx >= cells) return;
        const Cell c = schema_.cell_at(idx);
        if (is_admissible(c) != Verdict::No) {
          abs.admissible_[idx] = 1;
          for (std::uint32_t a = 0; a < actions; ++a) abs.transitions_[idx * actions + a] = successors(c, a);
          abs.goal_[idx] = inside_region(c, spec.goal) ? 1 : 0;
          abs.initial_[idx] = spec.initial.plain.empty() || meets_region(c, spec.initial) ? 1 : 0;
        }
        const std::uint64_t finished = done.fetch_add(1) + 1;
        if (cells >= 20 && finished % (cells / 10) == 0) {
          spdlog::debug("abstraction: {}/{} cells", finished, cells);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(cells);
    }
  };
  const int jobs = static_cast<int>(std::min<std::uint64_t>(options_.jobs, std::max<std::uint64_t>(cells, 1)));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  AbstractionStats& st = abs.stats_;
  for (const auto& t : abs.transitions_) {
    st.arcs_max += t.arcs(Variant::Maximum);
    st.arcs_min += t.arcs(Variant::Minimum);
    st.max_loops += t.consistent && t.self_loop ? 1 : 0;
    st.kept_loops += t.consistent && t.loop_kept ? 1 : 0;
  }
  st.loop_frac = st.max_loops > 0 ? static_cast<double>(st.kept_loops) / st.max_loops : 0.0;
  st.cpu_seconds = static_cast<double>(std::clock() - cpu_start) / CLOCKS_PER_SEC;
  st.mem_kb = peak_memory_kb();
  st.budget_events = budget_events() - budget_before;
  st.solver_errors = solver_errors() - errors_before;
  const milp::StatsSnapshot after = solver_.stats_snapshot();
  for (int k = 0; k <= milp::kQueryKinds; ++k) {
    st.milp.kinds[k].count = after.kinds[k].count - milp_before.kinds[k].count;
    st.milp.kinds[k].total_seconds = after.kinds[k].total_seconds - milp_before.kinds[k].total_seconds;
  }
  spdlog::debug("abstraction built: {} cells, {} arcs (max), {} arcs (min), {} budget events",
               cells, st.arcs_max, st.arcs_min, st.budget_events);
  return abs;
}

void write_abstraction_csv(std::ostream& out, const ControlAbstraction& abs) {
  out << "cell,action,successors,self_loop,loop_kept\n";
  for (std::uint64_t c = 0; c < abs.num_cells(); ++c) {
    if (!abs.admissible(c)) continue;
    for (std::uint32_t a = 0; a < abs.num_actions(); ++a) {
      const Transition& t = abs.transition(c, a);
      if (!t.consistent) continue;
      std::string succ;
      for (auto d : t.successors) {
        if (!succ.empty()) succ += '|';
        succ += cell_text(abs.schema().cell_at(d));
      }
      if (t.unsafe) succ += succ.empty() ? "UNSAFE" : "|UNSAFE";
      out << cell_text(abs.schema().cell_at(c)) << ',' << action_string(a, abs.num_inputs()) << ',' << succ << ','
          << (t.self_loop ? 1 : 0) << ',' << (t.loop_kept ? 1 : 0) << '\n';
    }
  }
}

long peak_memory_kb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream fields(line.substr(6));
      long kb = 0;
      fields >> kb;
      return kb;
    }
  }
  return 0;
}

}  // namespace qsynth
