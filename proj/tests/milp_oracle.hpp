#pragma once

// Brute-force MILP reference: enumerate the integer grid, then every vertex
// candidate of the remaining LP over the reals.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qsynth/milp.hpp"

namespace oracle {

using namespace qsynth;
using namespace qsynth::milp;

inline bool witness_ok(const MilpProblem& p, const Valuation& w) {
  for (const auto& d : p.decls) {
    const double v = w.at(d.name);
    if (v < d.lower - 1e-7 || v > d.upper + 1e-7) return false;
    if (d.is_discrete() && v != std::round(v)) return false;
  }
  for (const auto& c : p.constraints.plain) {
    if (!c.holds(w, 1e-7)) return false;
  }
  return true;
}

struct OracleResult {
  bool feasible = false;
  double best = 0.0;
};

inline OracleResult solve_by_enumeration(const MilpProblem& p) {
  std::vector<int> ints;
  std::vector<int> reals;
  for (int j = 0; j < static_cast<int>(p.decls.size()); ++j) {
    (p.decls[j].is_discrete() ? ints : reals).push_back(j);
  }
  const bool maximize = p.objective && p.objective->second == Sense::Maximize;
  OracleResult out;
  std::vector<double> point(p.decls.size(), 0.0);

  auto value_of = [&](const std::vector<double>& x) {
    Valuation v;
    for (std::size_t j = 0; j < x.size(); ++j) v[p.decls[j].name] = x[j];
    return v;
  };

  auto consider = [&](const std::vector<double>& x) {
    Valuation v = value_of(x);
    for (int j : reals) {
      if (x[j] < p.decls[j].lower - 1e-9 || x[j] > p.decls[j].upper + 1e-9) return;
    }
    for (const auto& c : p.constraints.plain) {
      if (!c.holds(v, 1e-9)) return;
    }
    const double obj = p.objective ? p.objective->first.evaluate(v) : 0.0;
    if (!out.feasible || (maximize ? obj > out.best : obj < out.best)) out.best = obj;
    out.feasible = true;
  };

  // Hyperplanes over the reals: rows (after substituting integers) and bounds.
  auto leaf = [&]() {
    const int r = static_cast<int>(reals.size());
    if (r == 0) {
      consider(point);
      return;
    }
    std::vector<Eigen::VectorXd> normals;
    std::vector<double> rhs;
    Valuation iv = value_of(point);
    for (const auto& c : p.constraints.plain) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(r);
      double b = c.rhs;
      for (const auto& [name, coeff] : c.lhs.terms()) {
        int j = 0;
        while (p.decls[j].name != name) ++j;
        auto it = std::find(reals.begin(), reals.end(), j);
        if (it == reals.end()) {
          b -= coeff * point[j];
        } else {
          a[it - reals.begin()] = coeff;
        }
      }
      normals.push_back(a);
      rhs.push_back(b);
    }
    for (int k = 0; k < r; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
      e[k] = 1.0;
      normals.push_back(e);
      rhs.push_back(p.decls[reals[k]].lower);
      normals.push_back(e);
      rhs.push_back(p.decls[reals[k]].upper);
    }
    const int h = static_cast<int>(normals.size());
    std::vector<int> pick(r);
    std::function<void(int, int)> choose = [&](int start, int depth) {
      if (depth == r) {
        Eigen::MatrixXd A(r, r);
        Eigen::VectorXd b(r);
        for (int k = 0; k < r; ++k) {
          A.row(k) = normals[pick[k]].transpose();
          b[k] = rhs[pick[k]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (lu.rank() < r) return;
        Eigen::VectorXd x = lu.solve(b);
        std::vector<double> full = point;
        for (int k = 0; k < r; ++k) full[reals[k]] = x[k];
        consider(full);
        return;
      }
      for (int i = start; i < h; ++i) {
        pick[depth] = i;
        choose(i + 1, depth + 1);
      }
    };
    choose(0, 0);
  };

  std::function<void(std::size_t)> grid = [&](std::size_t k) {
    if (k == ints.size()) {
      leaf();
      return;
    }
    const auto& d = p.decls[ints[k]];
    for (double v = d.lower; v <= d.upper; v += 1.0) {
      point[ints[k]] = v;
      grid(k + 1);
    }
  };
  grid(0);
  return out;
}

inline MilpProblem random_problem(std::mt19937& rng, bool with_objective) {
  std::uniform_int_distribution<int> nint(1, 4);
  std::uniform_int_distribution<int> nreal(0, 3);
  std::uniform_int_distribution<int> coef(-4, 4);
  std::uniform_int_distribution<int> dom(0, 7);
  std::uniform_int_distribution<int> nrows(1, 4);
  std::uniform_int_distribution<int> coin(0, 1);
  MilpProblem p;
  const int ni = nint(rng);
  const int nr = nreal(rng);
  for (int k = 0; k < ni; ++k) {
    if (coin(rng)) {
      p.decls.push_back(VariableDecl::boolean("b" + std::to_string(k)));
    } else {
      const int lo = -dom(rng) / 2;
      p.decls.push_back(VariableDecl::integer("k" + std::to_string(k), lo, lo + dom(rng)));
    }
  }
  for (int k = 0; k < nr; ++k) {
    const double lo = -0.5 * dom(rng);
    p.decls.push_back(VariableDecl::real("r" + std::to_string(k), lo, lo + 0.5 + dom(rng)));
  }
  const int m = nrows(rng);
  for (int i = 0; i < m; ++i) {
    LinearExpression e;
    for (const auto& d : p.decls) e.add(d.name, coef(rng));
    if (e.terms().empty()) continue;
    const double rhs = 0.5 * coef(rng) + 2.0;
    if (coin(rng)) {
      p.constraints.add_le(e, rhs);
    } else {
      p.constraints.add_ge(e, -rhs);
    }
  }
  if (with_objective) {
    LinearExpression obj;
    for (const auto& d : p.decls) obj.add(d.name, coef(rng));
    p.objective = std::make_pair(obj, coin(rng) ? Sense::Maximize : Sense::Minimize);
  }
  return p;
}

}  // namespace oracle
