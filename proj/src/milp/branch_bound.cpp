#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "qsynth/milp.hpp"
#include "simplex.hpp"

namespace qsynth::milp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal:
      return "optimal";
    case Status::Feasible:
      return "feasible";
    case Status::Infeasible:
      return "infeasible";
    case Status::BudgetExhausted:
      return "budget_exhausted";
  }
  return "?";
}

int Model::add_variable(std::string name, double lo, double hi, bool is_integer) {
  names.push_back(std::move(name));
  lower.push_back(lo);
  upper.push_back(hi);
  integer.push_back(is_integer ? 1 : 0);
  return static_cast<int>(lower.size()) - 1;
}

void Model::add_row(std::vector<Entry> entries, double lo, double hi) {
  rows.push_back({std::move(entries), lo, hi});
}

int Model::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

namespace {

struct RowScale {
  double amax = 0.0;       // largest |coefficient|
  double magnitude = 0.0;  // sum |a_j| * max(|lo_j|, |hi_j|)
};

RowScale row_scale(const Row& row, const std::vector<double>& lo, const std::vector<double>& hi) {
  RowScale s;
  for (const auto& e : row.entries) {
    const double a = std::abs(e.coeff);
    s.amax = std::max(s.amax, a);
    s.magnitude += a * std::max(std::abs(lo[e.col]), std::abs(hi[e.col]));
  }
  return s;
}

// Tolerance on a row activity, measured after scaling the row to unit
// largest coefficient.
double row_tol(double bound, const RowScale& s, double feas_tol) {
  if (s.amax == 0.0) return feas_tol;
  const double scaled = std::isfinite(bound) ? std::abs(bound) / s.amax : 0.0;
  return feas_tol * std::max(1.0, scaled) * s.amax + 1e-12 * s.magnitude;
}

bool is_fixed(double lo, double hi) { return hi - lo <= 1e-9 * std::max(1.0, std::abs(lo)); }

// Activity-based bound tightening. Returns false when the node is proven
// infeasible.
bool propagate(const Model& m, std::vector<double>& lo, std::vector<double>& hi,
               const Options& opt) {
  const double itol = opt.integrality_tol;
  for (int pass = 0; pass < 20; ++pass) {
    bool changed = false;
    for (const auto& row : m.rows) {
      double minact = 0.0;
      double maxact = 0.0;
      for (const auto& e : row.entries) {
        if (e.coeff > 0) {
          minact += e.coeff * lo[e.col];
          maxact += e.coeff * hi[e.col];
        } else {
          minact += e.coeff * hi[e.col];
          maxact += e.coeff * lo[e.col];
        }
      }
      const RowScale s = row_scale(row, lo, hi);
      if (minact > row.hi + row_tol(row.hi, s, opt.feasibility_tol)) return false;
      if (maxact < row.lo - row_tol(row.lo, s, opt.feasibility_tol)) return false;

      for (const auto& e : row.entries) {
        const int j = e.col;
        const double a = e.coeff;
        const double slack = 1e-12 * s.magnitude / std::abs(a);
        const double min_rest = minact - (a > 0 ? a * lo[j] : a * hi[j]);
        const double max_rest = maxact - (a > 0 ? a * hi[j] : a * lo[j]);
        double new_lo = -kInf;
        double new_hi = kInf;
        if (std::isfinite(row.hi)) {
          const double v = (row.hi - min_rest) / a;
          if (a > 0) new_hi = v; else new_lo = v;
        }
        if (std::isfinite(row.lo)) {
          const double v = (row.lo - max_rest) / a;
          if (a > 0) new_lo = std::max(new_lo, v); else new_hi = std::min(new_hi, v);
        }
        if (m.integer[j]) {
          new_hi = std::floor(new_hi + itol + slack);
          new_lo = std::ceil(new_lo - itol - slack);
          if (new_hi < hi[j]) {
            hi[j] = new_hi;
            changed = true;
          }
          if (new_lo > lo[j]) {
            lo[j] = new_lo;
            changed = true;
          }
        } else {
          const double range = hi[j] - lo[j];
          const double min_gain = std::max(1e-9, 1e-3 * range);
          new_hi += 1e-9 * std::max(1.0, std::abs(new_hi)) + slack;
          new_lo -= 1e-9 * std::max(1.0, std::abs(new_lo)) + slack;
          if (new_hi < hi[j] - min_gain) {
            hi[j] = new_hi;
            changed = true;
          }
          if (new_lo > lo[j] + min_gain) {
            lo[j] = new_lo;
            changed = true;
          }
        }
        if (lo[j] > hi[j]) {
          if (lo[j] > hi[j] + opt.feasibility_tol * std::max(1.0, std::abs(hi[j]))) return false;
          const double mid = 0.5 * (lo[j] + hi[j]);
          lo[j] = hi[j] = m.integer[j] ? std::round(mid) : mid;
        }
      }
    }
    if (!changed) break;
  }
  return true;
}

struct NodeLp {
  bool feasible = false;
  double value = 0.0;  // minimization form, without constant
  std::vector<double> x;
};

// Solves the LP relaxation with fixed columns substituted and rows that are
// redundant under the current bounds dropped.
NodeLp solve_node_lp(const Model& m, const std::vector<double>& lo, const std::vector<double>& hi,
                     const std::vector<double>& cost, const Options& opt) {
  const int nv = m.num_vars();
  NodeLp out;
  out.x.resize(nv);
  std::vector<int> col_of(nv, -1);
  std::vector<int> free_cols;
  for (int j = 0; j < nv; ++j) {
    if (is_fixed(lo[j], hi[j])) {
      out.x[j] = lo[j] == hi[j] ? lo[j] : 0.5 * (lo[j] + hi[j]);
    } else {
      col_of[j] = static_cast<int>(free_cols.size());
      free_cols.push_back(j);
    }
  }

  struct ReducedRow {
    const Row* row;
    double lo;
    double hi;
  };
  std::vector<ReducedRow> kept;
  for (const auto& row : m.rows) {
    double constant = 0.0;
    double fmin = 0.0;
    double fmax = 0.0;
    bool has_free = false;
    for (const auto& e : row.entries) {
      if (col_of[e.col] < 0) {
        constant += e.coeff * out.x[e.col];
      } else {
        has_free = true;
        if (e.coeff > 0) {
          fmin += e.coeff * lo[e.col];
          fmax += e.coeff * hi[e.col];
        } else {
          fmin += e.coeff * hi[e.col];
          fmax += e.coeff * lo[e.col];
        }
      }
    }
    const RowScale s = row_scale(row, lo, hi);
    const double tlo = row_tol(row.lo, s, opt.feasibility_tol);
    const double thi = row_tol(row.hi, s, opt.feasibility_tol);
    const double rlo = row.lo - constant;
    const double rhi = row.hi - constant;
    if (!has_free) {
      if (0.0 < rlo - tlo || 0.0 > rhi + thi) return out;
      continue;
    }
    if (fmin > rhi + thi || fmax < rlo - tlo) return out;
    if (fmin >= rlo - tlo && fmax <= rhi + thi) continue;
    double l = std::max(rlo, fmin);
    double h = std::min(rhi, fmax);
    if (l > h) l = h = 0.5 * (l + h);
    kept.push_back({&row, l, h});
  }

  const int nf = static_cast<int>(free_cols.size());
  const int nr = static_cast<int>(kept.size());
  if (nf == 0) {
    out.feasible = true;
    for (int j = 0; j < nv; ++j) out.value += cost[j] * out.x[j];
    return out;
  }
  detail::LpProblem lp;
  lp.A.setZero(nr, nf);
  lp.row_lo.resize(nr);
  lp.row_hi.resize(nr);
  lp.col_lo.resize(nf);
  lp.col_hi.resize(nf);
  lp.cost.resize(nf);
  for (int c = 0; c < nf; ++c) {
    lp.col_lo[c] = lo[free_cols[c]];
    lp.col_hi[c] = hi[free_cols[c]];
    lp.cost[c] = cost[free_cols[c]];
  }
  for (int r = 0; r < nr; ++r) {
    for (const auto& e : kept[r].row->entries) {
      if (col_of[e.col] >= 0) lp.A(r, col_of[e.col]) += e.coeff;
    }
    lp.row_lo[r] = kept[r].lo;
    lp.row_hi[r] = kept[r].hi;
  }

  detail::LpOptions lopt;
  lopt.feasibility_tol = opt.feasibility_tol;
  const detail::LpResult res = detail::solve_lp(lp, lopt);
  if (!res.feasible) return out;
  for (int c = 0; c < nf; ++c) {
    const int j = free_cols[c];
    out.x[j] = std::clamp(res.x[c], lo[j], hi[j]);
  }
  out.feasible = true;
  out.value = 0.0;
  for (int j = 0; j < nv; ++j) out.value += cost[j] * out.x[j];
  return out;
}

struct Node {
  std::vector<double> lo;
  std::vector<double> hi;
  double bound = -kInf;
  int depth = 0;
  long id = 0;
};

struct NodeOrder {
  // Best bound first, then deepest, then oldest.
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

double gap(double incumbent, const Options& opt) {
  return opt.optimality_tol * std::max(1.0, std::abs(incumbent));
}

}  // namespace

bool check_witness(const Model& model, const std::vector<double>& x, double feas_tol) {
  const int nv = model.num_vars();
  if (static_cast<int>(x.size()) != nv) return false;
  for (int j = 0; j < nv; ++j) {
    const double t = feas_tol * std::max(1.0, std::max(std::abs(model.lower[j]), std::abs(model.upper[j])));
    if (x[j] < model.lower[j] - t || x[j] > model.upper[j] + t) return false;
    if (model.integer[j] && x[j] != std::round(x[j])) return false;
  }
  for (const auto& row : model.rows) {
    double act = 0.0;
    double amax = 0.0;
    double mag = 0.0;
    for (const auto& e : row.entries) {
      act += e.coeff * x[e.col];
      amax = std::max(amax, std::abs(e.coeff));
      mag += std::abs(e.coeff * x[e.col]);
    }
    const RowScale s{amax, mag};
    if (act > row.hi + row_tol(row.hi, s, feas_tol)) return false;
    if (act < row.lo - row_tol(row.lo, s, feas_tol)) return false;
  }
  return true;
}

Solution solve(const Model& model, const Objective* objective, const Options& opt) {
  const int nv = model.num_vars();
  std::vector<double> cost(nv, 0.0);
  const double sign = objective && objective->sense == Sense::Maximize ? -1.0 : 1.0;
  if (objective) {
    for (const auto& t : objective->terms) cost[t.col] += sign * t.coeff;
  }
  const bool optimize = objective != nullptr;

  Solution sol;
  double incumbent = kInf;
  std::vector<double> best_x;

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  open.push({model.lower, model.upper, -kInf, 0, next_id++});

  auto finish = [&](Status status) {
    sol.status = status;
    if (!best_x.empty()) {
      sol.x = best_x;
      double v = objective ? objective->constant : 0.0;
      if (objective) {
        for (const auto& t : objective->terms) v += t.coeff * best_x[t.col];
      }
      sol.value = v;
    }
    return sol;
  };

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (optimize && node.bound >= incumbent - gap(incumbent, opt)) continue;
    if (++sol.nodes > opt.node_budget) return finish(Status::BudgetExhausted);

    if (!propagate(model, node.lo, node.hi, opt)) continue;
    NodeLp lp = solve_node_lp(model, node.lo, node.hi, cost, opt);
    if (!lp.feasible) continue;
    if (optimize && lp.value >= incumbent - gap(incumbent, opt)) continue;

    int branch = -1;
    double best_frac = opt.integrality_tol;
    for (int j = 0; j < nv; ++j) {
      if (!model.integer[j]) continue;
      const double f = std::abs(lp.x[j] - std::round(lp.x[j]));
      if (f > best_frac) {
        best_frac = f;
        branch = j;
      }
    }

    if (branch < 0) {
      // Integral within tolerance: fix the integers exactly and re-solve
      // so that big-M rows see exact guard values.
      std::vector<double> lo = node.lo;
      std::vector<double> hi = node.hi;
      bool any_integer = false;
      for (int j = 0; j < nv; ++j) {
        if (!model.integer[j]) continue;
        any_integer = true;
        lo[j] = hi[j] = std::round(lp.x[j]);
      }
      NodeLp fixed = lp;
      if (any_integer) {
        fixed = NodeLp{};
        if (propagate(model, lo, hi, opt)) fixed = solve_node_lp(model, lo, hi, cost, opt);
      }
      if (fixed.feasible) {
        for (int j = 0; j < nv; ++j) {
          if (model.integer[j]) fixed.x[j] = std::round(fixed.x[j]);
        }
        if (fixed.value < incumbent) {
          incumbent = fixed.value;
          best_x = fixed.x;
        }
        if (!optimize) return finish(Status::Feasible);
        continue;
      }
      // Rounding broke feasibility: keep branching on any residual fraction.
      best_frac = 0.0;
      for (int j = 0; j < nv; ++j) {
        if (!model.integer[j]) continue;
        const double f = std::abs(lp.x[j] - std::round(lp.x[j]));
        if (f > best_frac) {
          best_frac = f;
          branch = j;
        }
      }
      if (branch < 0) continue;
    }

    const double v = lp.x[branch];
    Node down{node.lo, node.hi, lp.value, node.depth + 1, 0};
    Node up{std::move(node.lo), std::move(node.hi), lp.value, node.depth + 1, 0};
    down.hi[branch] = std::floor(v);
    up.lo[branch] = std::ceil(v);
    if (down.hi[branch] == up.lo[branch]) {
      // v was integral up to noise; split around it.
      down.hi[branch] = std::round(v) - 1;
      up.lo[branch] = std::round(v);
      if (v - std::round(v) > 0) {
        down.hi[branch] = std::round(v);
        up.lo[branch] = std::round(v) + 1;
      }
    }
    const bool up_first = v - std::floor(v) >= 0.5;
    Node& first = up_first ? up : down;
    Node& second = up_first ? down : up;
    first.id = next_id++;
    second.id = next_id++;
    if (first.lo[branch] <= first.hi[branch]) open.push(std::move(first));
    if (second.lo[branch] <= second.hi[branch]) open.push(std::move(second));
  }

  if (best_x.empty()) return finish(Status::Infeasible);
  return finish(optimize ? Status::Optimal : Status::Feasible);
}

}  // namespace qsynth::milp
