#include "qsynth/simulator.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "qsynth/error.hpp"
#include "qsynth/synthesis.hpp"

namespace qsynth {

namespace {

constexpr int kMaxBoolAux = 20;

std::string join(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::setprecision(12);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ";" : "") << v[i];
  return s.str();
}

}  // namespace

StepResolver::StepResolver(const Dtlhs& h, double feas_tol) : model_(h), feas_tol_(feas_tol) {
  const auto decls = h.all_decls();
  std::map<std::string, int> index;
  for (const auto& d : decls) {
    index[d.name] = static_cast<int>(names_.size());
    names_.push_back(d.name);
  }
  for (const auto& d : h.state) {
    if (d.kind != VarKind::Real) throw Error(ErrorCode::Model, "simulation needs real state variables: " + d.name);
    state_.push_back(index.at(d.name));
  }
  for (const auto& d : h.inputs) {
    if (d.kind != VarKind::Boolean) throw Error(ErrorCode::Model, "simulation needs boolean inputs: " + d.name);
    inputs_.push_back(index.at(d.name));
  }
  for (const auto& d : h.aux) {
    if (d.kind == VarKind::Boolean) {
      bool_aux_.push_back(index.at(d.name));
    } else if (d.kind == VarKind::Real) {
      unknowns_.push_back(index.at(d.name));
    } else {
      throw Error(ErrorCode::Model, "simulation does not support integer auxiliaries: " + d.name);
    }
  }
  if (bool_aux_.size() > static_cast<std::size_t>(kMaxBoolAux)) {
    throw Error(ErrorCode::Model, "too many boolean auxiliaries to enumerate modes");
  }
  for (const auto& d : h.next) {
    next_.push_back(index.at(d.name));
    unknowns_.push_back(index.at(d.name));
  }

  auto make_row = [&](const Constraint& c) {
    Row r;
    r.coeffs.assign(names_.size(), 0.0);
    for (const auto& [name, a] : c.lhs.terms()) {
      auto it = index.find(name);
      if (it == index.end()) throw Error(ErrorCode::Model, "undeclared variable " + name);
      r.coeffs[it->second] = a;
    }
    r.rhs = c.rhs;
    return r;
  };
  for (const auto& c : h.transition.plain) rows_.push_back(make_row(c));
  for (const auto& g : h.transition.guarded) {
    Row r = make_row(g.body);
    r.guard = index.at(g.guard);
    r.positive = g.polarity == Polarity::Positive;
    rows_.push_back(std::move(r));
  }

  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (std::size_t j = i + 1; j < rows_.size(); ++j) {
      const Row& a = rows_[i];
      const Row& b = rows_[j];
      if (a.guard != b.guard || a.positive != b.positive || a.rhs != -b.rhs) continue;
      bool opposite = true;
      for (std::size_t k = 0; k < a.coeffs.size() && opposite; ++k) opposite = a.coeffs[k] == -b.coeffs[k];
      if (opposite) equalities_.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
}

std::string StepResolver::mode_text(std::uint32_t mode) const {
  std::string s;
  const int n = static_cast<int>(bool_aux_.size());
  for (int k = n - 1; k >= 0; --k) s += ((mode >> k) & 1) ? '1' : '0';
  return s;
}

ResolvedStep StepResolver::resolve(std::span<const double> x, std::uint32_t action) const {
  if (x.size() != state_.size()) throw Error(ErrorCode::InvalidArgument, "state dimension mismatch");
  if (action >= action_count(inputs_.size())) throw Error(ErrorCode::InvalidArgument, "action out of range");

  std::vector<double> val(names_.size(), 0.0);
  for (std::size_t i = 0; i < state_.size(); ++i) val[state_[i]] = x[i];
  const auto bits = action_bits(action, inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i) val[inputs_[i]] = bits[i];

  std::vector<char> is_unknown(names_.size(), 0);
  for (int u : unknowns_) is_unknown[u] = 1;
  const int nu = static_cast<int>(unknowns_.size());

  std::optional<ResolvedStep> found;
  int consistent = 0;
  const int nb = static_cast<int>(bool_aux_.size());
  for (std::uint32_t mode = 0; mode < num_modes(); ++mode) {
    for (int k = 0; k < nb; ++k) val[bool_aux_[k]] = (mode >> (nb - 1 - k)) & 1;
    auto active = [&](const Row& r) {
      if (r.guard < 0) return true;
      return (val[r.guard] >= 0.5) == r.positive;
    };

    std::vector<int> eq;
    for (const auto& [i, j] : equalities_) {
      if (!active(rows_[i])) continue;
      bool touches = false;
      for (int u : unknowns_) touches = touches || rows_[i].coeffs[u] != 0.0;
      if (touches) eq.push_back(i);
    }
    Eigen::MatrixXd a(eq.size(), nu);
    Eigen::VectorXd b(eq.size());
    for (std::size_t r = 0; r < eq.size(); ++r) {
      const Row& row = rows_[eq[r]];
      double rhs = row.rhs;
      for (std::size_t k = 0; k < names_.size(); ++k) {
        if (!is_unknown[k]) rhs -= row.coeffs[k] * val[k];
      }
      for (int c = 0; c < nu; ++c) a(r, c) = row.coeffs[unknowns_[c]];
      b(r) = rhs;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::VectorXd sol = eq.empty() ? Eigen::VectorXd::Zero(nu) : Eigen::VectorXd(qr.solve(b));
    for (int c = 0; c < nu; ++c) val[unknowns_[c]] = sol(c);

    bool ok = true;
    for (const Row& row : rows_) {
      if (!active(row)) continue;
      double lhs = 0.0;
      double scale = std::max(1.0, std::abs(row.rhs));
      for (std::size_t k = 0; k < names_.size(); ++k) {
        const double t = row.coeffs[k] * val[k];
        lhs += t;
        scale = std::max(scale, std::abs(t));
      }
      if (lhs > row.rhs + feas_tol_ * scale) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    // A rank-deficient system with a consistent solution leaves some value free.
    if (static_cast<int>(eq.size()) < nu || qr.rank() < nu) {
      throw Error(ErrorCode::Model, "mode " + mode_text(mode) + " leaves auxiliary or next-state values undetermined");
    }
    ++consistent;
    if (found) continue;
    ResolvedStep r;
    r.mode = mode;
    for (std::size_t k = 0; k < names_.size(); ++k) r.values[names_[k]] = val[k];
    for (int n : next_) r.next.push_back(val[n]);
    found = std::move(r);
  }
  if (!found) throw Error(ErrorCode::Model, "no consistent switching mode for this state and action");
  found->consistent_modes = consistent;
  if (consistent > 1) {
    spdlog::warn("{} consistent switching modes, using mode {}", consistent, mode_text(found->mode));
  }
  return *found;
}

// ---------------------------------------------------------------------------

PlantFamily PlantFamily::fixed(Dtlhs h) {
  PlantFamily f;
  f.fixed_ = std::move(h);
  return f;
}

PlantFamily PlantFamily::single_buck(BuckParams p) {
  p.validate();
  PlantFamily f;
  f.kind_ = Kind::Single;
  f.params_ = std::move(p);
  return f;
}

PlantFamily PlantFamily::multi_buck(BuckParams p, int n) {
  p.validate();
  p.supplies = p.supplies_for(n);
  PlantFamily f;
  f.kind_ = Kind::Multi;
  f.params_ = std::move(p);
  f.inputs_ = n;
  return f;
}

std::vector<double> PlantFamily::supplies() const {
  switch (kind_) {
    case Kind::Single:
      return {params_.supply};
    case Kind::Multi:
      return params_.supplies;
    case Kind::Fixed:
      break;
  }
  return {};
}

Dtlhs PlantFamily::instantiate(double load, const std::vector<double>& supplies) const {
  BuckParams p = params_;
  p.load = load;
  switch (kind_) {
    case Kind::Single:
      p.supply = supplies.at(0);
      return qsynth::single_buck(p);
    case Kind::Multi:
      p.supplies = supplies;
      return qsynth::multi_buck(p, inputs_);
    case Kind::Fixed:
      break;
  }
  return fixed_;
}

// ---------------------------------------------------------------------------

Policy Policy::from_controller(const Controller& k) {
  Policy p{k.schema(), std::vector<std::int64_t>(k.num_cells(), kFault), std::vector<int>(k.num_cells(), -1)};
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) {
    if (auto a = k.chosen(c)) p.action[c] = *a;
    p.rank[c] = k.rank(c);
  }
  return p;
}

Policy Policy::from_trees(const QuantSchema& s, const DecisionTree& law, const DecisionTree& region) {
  Policy p{s, std::vector<std::int64_t>(s.cell_count(), kFault), {}};
  for (std::uint64_t c = 0; c < s.cell_count(); ++c) {
    const Cell cell = s.cell_at(c);
    if (interpret(region, s, cell).value == 1) p.action[c] = interpret(law, s, cell).value;
  }
  return p;
}

Policy Policy::constant(const QuantSchema& s, std::uint32_t action) {
  return Policy{s, std::vector<std::int64_t>(s.cell_count(), action), {}};
}

std::vector<std::uint64_t> Policy::region_cells() const {
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 0; c < action.size(); ++c) {
    if (action[c] != kFault) out.push_back(c);
  }
  return out;
}

const char* to_string(Disturbance d) {
  switch (d) {
    case Disturbance::Nominal:
      return "nominal";
    case Disturbance::PerTrial:
      return "per-trial";
    case Disturbance::PerStep:
      return "per-step";
  }
  return "?";
}

Disturbance disturbance_from_string(const std::string& text) {
  if (text == "nominal") return Disturbance::Nominal;
  if (text == "per-trial") return Disturbance::PerTrial;
  if (text == "per-step") return Disturbance::PerStep;
  throw Error(ErrorCode::InvalidArgument, "unknown disturbance mode: " + text);
}

namespace {

struct Draw {
  double load = 0.0;
  std::vector<double> supplies;
};

// Load and a common supply scale drawn uniformly over the tolerance
// intervals. One factor scales every supply so their order is preserved.
Draw draw(const PlantFamily& plant, const SimConfig& cfg, std::mt19937_64& rng) {
  Draw d{plant.load(), plant.supplies()};
  if (!plant.has_parameters() || cfg.disturbance == Disturbance::Nominal) return d;
  std::uniform_real_distribution<double> load(std::max(0.0, 1.0 - cfg.rho_load), 1.0 + cfg.rho_load);
  std::uniform_real_distribution<double> supply(1.0 - cfg.rho_supply, 1.0 + cfg.rho_supply);
  d.load *= load(rng);
  const double f = supply(rng);
  for (double& v : d.supplies) v *= f;
  return d;
}

std::vector<double> random_start(const Policy& policy, std::mt19937_64& rng) {
  const auto cells = policy.region_cells();
  if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "controllable region is empty");
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  const CellBox box = policy.schema.cell_box(policy.schema.cell_at(cells[pick(rng)]));
  std::vector<double> x;
  for (const auto& iv : box.bounds) x.push_back(std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng));
  return x;
}

SimTrace run_with(const PlantFamily& plant, const Policy& policy, const SimConfig& cfg, std::mt19937_64& rng) {
  if (cfg.steps < 0) throw Error(ErrorCode::InvalidArgument, "steps must be non-negative");
  std::vector<double> x = cfg.initial.empty() ? random_start(policy, rng) : cfg.initial;
  if (x.size() != policy.schema.dims()) throw Error(ErrorCode::InvalidArgument, "initial state dimension mismatch");

  Draw params = draw(plant, cfg, rng);
  std::optional<StepResolver> resolver;
  resolver.emplace(plant.instantiate(params.load, params.supplies));

  SimTrace trace;
  trace.state_names = resolver->model().state_names();
  const bool has_goal = !cfg.goal.plain.empty() || !cfg.goal.guarded.empty();

  for (int t = 0; t <= cfg.steps; ++t) {
    if (t > 0 && cfg.disturbance == Disturbance::PerStep && plant.has_parameters()) {
      params = draw(plant, cfg, rng);
      resolver.emplace(plant.instantiate(params.load, params.supplies));
    }
    SimStep s;
    s.step = t;
    s.state = x;
    if (plant.has_parameters()) {
      s.load = params.load;
      s.supplies = params.supplies;
    }
    if (has_goal) {
      Valuation v;
      for (std::size_t i = 0; i < x.size(); ++i) v[trace.state_names[i]] = x[i];
      s.in_goal = evaluate(cfg.goal, v);
    }
    const auto cell = policy.schema.quantize(x);
    if (!cell) {
      trace.violation = true;
      trace.steps.push_back(std::move(s));
      break;
    }
    const std::uint64_t ci = policy.schema.index_of(*cell);
    s.cell = ci;
    if (t == 0 && !policy.rank.empty()) trace.start_rank = policy.rank[ci];
    if (s.in_goal && trace.first_goal < 0) trace.first_goal = t;
    if (!s.in_goal && trace.first_goal >= 0) trace.left_goal = true;
    if (t == cfg.steps) {
      trace.steps.push_back(std::move(s));
      break;
    }
    if (!policy.in_region(ci)) {
      s.fault = true;
      trace.fault = true;
      trace.steps.push_back(std::move(s));
      break;
    }
    s.action = policy.action[ci];
    const ResolvedStep r = resolver->resolve(x, static_cast<std::uint32_t>(s.action));
    s.mode = resolver->mode_text(r.mode);
    x = r.next;
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

}  // namespace

SimTrace run(const PlantFamily& plant, const Policy& policy, const SimConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return run_with(plant, policy, cfg, rng);
}

MonteCarloSummary monte_carlo(const PlantFamily& plant, const Policy& policy, const SimConfig& cfg, int trials,
                              int jobs, std::vector<SimTrace>* traces) {
  if (trials < 0) throw Error(ErrorCode::InvalidArgument, "trials must be non-negative");
  if (cfg.initial.empty() && policy.region_cells().empty()) {
    throw Error(ErrorCode::InvalidArgument, "controllable region is empty");
  }
  std::vector<SimTrace> results(trials);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(std::max(1, jobs));
  auto worker = [&](int id) {
    try {
      for (int t = next++; t < trials; t = next++) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        results[t] = run_with(plant, policy, cfg, rng);
      }
    } catch (...) {
      errors[id] = std::current_exception();
      next = trials;
    }
  };
  const int n = std::clamp(jobs, 1, std::max(1, trials));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker, i);
  worker(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MonteCarloSummary s;
  s.trials = trials;
  for (const SimTrace& r : results) {
    s.violations += r.violation;
    s.faults += r.fault;
    s.left_goal += r.left_goal;
    if (r.first_goal >= 0) {
      ++s.reached;
      s.max_steps_to_goal = std::max(s.max_steps_to_goal, r.first_goal);
      if (r.start_rank >= 0 && r.first_goal <= 2 * r.start_rank) ++s.reached_within_bound;
    }
  }
  if (traces) *traces = std::move(results);
  return s;
}

void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  out << "step";
  for (const auto& n : trace.state_names) out << ',' << n;
  out << ",cell,action,q,R,V,in_goal,fault\n";
  out << std::setprecision(12);
  for (const SimStep& s : trace.steps) {
    out << s.step;
    for (double v : s.state) out << ',' << v;
    out << ',';
    if (s.cell) out << *s.cell;
    out << ',';
    if (s.action != kFault) out << s.action;
    out << ',' << s.mode << ',';
    if (!s.supplies.empty()) out << s.load;
    out << ',' << join(s.supplies) << ',' << s.in_goal << ',' << s.fault << '\n';
  }
}

void write_summary(std::ostream& out, const MonteCarloSummary& s) {
  out << "trials=" << s.trials << '\n'
      << "safety_violations=" << s.violations << '\n'
      << "faults=" << s.faults << '\n'
      << "goal_reached=" << s.reached << '\n'
      << "goal_reached_within_rank_bound=" << s.reached_within_bound << '\n'
      << "goal_left_after_reach=" << s.left_goal << '\n'
      << "max_steps_to_goal=" << s.max_steps_to_goal << '\n';
}

}  // namespace qsynth
