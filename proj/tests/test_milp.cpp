#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "doctest.h"
#include "milp_oracle.hpp"
#include "qsynth/milp.hpp"

using namespace qsynth;
using namespace qsynth::milp;

namespace {

LinearExpression var(const std::string& n, double c = 1.0) { return LinearExpression::variable(n, c); }

MilpProblem problem(std::vector<VariableDecl> decls) {
  MilpProblem p;
  p.decls = std::move(decls);
  return p;
}

}  // namespace

TEST_CASE("solve: single-constraint maximum") {
  auto p = problem({VariableDecl::real("x", 0, 10)});
  p.constraints.add_le(var("x"), 3);
  p.objective = std::make_pair(var("x"), Sense::Maximize);
  MilpSolver s;
  auto r = s.solve(p);
  CHECK(r.status == MilpStatus::Optimal);
  REQUIRE(r.value);
  CHECK(*r.value == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("solve: contradictory constraints are infeasible") {
  auto p = problem({VariableDecl::real("x", 0, 10)});
  p.constraints.add_le(var("x"), 0).add_ge(var("x"), 1);
  MilpSolver s;
  CHECK(s.solve(p).status == MilpStatus::Infeasible);
  CHECK_FALSE(s.solve(p).witness);
}

TEST_CASE("solve: boolean knapsack") {
  auto p = problem({VariableDecl::boolean("a"), VariableDecl::boolean("b")});
  p.constraints.add_le(var("a") + var("b"), 1);
  p.objective = std::make_pair(var("a", 3) + var("b", 2), Sense::Maximize);
  // Enumerate all four boolean points.
  double best = -1;
  int best_a = -1;
  int best_b = -1;
  for (int a = 0; a <= 1; ++a) {
    for (int b = 0; b <= 1; ++b) {
      if (a + b <= 1 && 3 * a + 2 * b > best) {
        best = 3 * a + 2 * b;
        best_a = a;
        best_b = b;
      }
    }
  }
  MilpSolver s;
  auto r = s.solve(p);
  REQUIRE(r.status == MilpStatus::Optimal);
  CHECK(*r.value == best);
  CHECK(r.witness->at("a") == best_a);
  CHECK(r.witness->at("b") == best_b);
}

TEST_CASE("feasible: normalized guard with fixed guard") {
  std::vector<VariableDecl> decls{VariableDecl::real("x", 6, 10), VariableDecl::boolean("y")};
  Predicate g;
  g.add_guarded_le("y", Polarity::Positive, var("x"), 5);
  g.add_eq(var("y"), 1);
  auto p = problem(decls);
  p.constraints = to_conjunctive(g, decls);
  // Grid oracle over x in [6, 10] at step 0.25 and y = 1.
  bool any = false;
  for (double x = 6; x <= 10; x += 0.25) any = any || evaluate(g, {{"x", x}, {"y", 1}});
  MilpSolver s;
  CHECK(any == false);
  CHECK(s.feasible(p).status == MilpStatus::Infeasible);
}

TEST_CASE("feasible: empty constraints and point boxes") {
  MilpSolver s;
  auto p = problem({VariableDecl::real("x", -1, 2), VariableDecl::integer("k", 0, 3)});
  auto r = s.feasible(p);
  CHECK(r.status == MilpStatus::Feasible);
  CHECK(r.witness);

  auto q = problem({VariableDecl::real("x", 1.5, 1.5), VariableDecl::integer("k", 2, 2)});
  q.constraints.add_le(var("x") + var("k"), 4);
  auto rq = s.feasible(q);
  REQUIRE(rq.status == MilpStatus::Feasible);
  CHECK(rq.witness->at("x") == 1.5);
  CHECK(rq.witness->at("k") == 2);
}

TEST_CASE("feasible: equality through opposite rows") {
  auto p = problem({VariableDecl::real("x", -5, 5), VariableDecl::real("y", -5, 5),
                    VariableDecl::boolean("q")});
  p.constraints.add_eq(var("x") + var("y", 2), 1);
  p.constraints.add_eq(var("x") - var("q", 3), 0);
  p.constraints.add_ge(var("y"), -0.5);
  MilpSolver s;
  auto r = s.feasible(p);
  REQUIRE(r.status == MilpStatus::Feasible);
  CHECK(oracle::witness_ok(p, *r.witness));
  CHECK(r.witness->at("q") == 0);
}

TEST_CASE("stats: counts and averages") {
  MilpSolver s;
  auto snap0 = s.stats_snapshot();
  CHECK(snap0.total_count() == 0);
  auto p = problem({VariableDecl::real("x", 0, 1)});
  p.query_kind = 1;
  s.feasible(p);
  s.feasible(p);
  auto snap = s.stats_snapshot();
  CHECK(snap.kinds[1].count == 2);
  CHECK(snap.kinds[2].count == 0);
  CHECK(snap.kinds[1].average_seconds() == doctest::Approx(snap.kinds[1].total_seconds / 2));
  s.stats()->reset();
  CHECK(s.stats_snapshot().total_count() == 0);
}

TEST_CASE("stats: concurrent updates are not lost") {
  auto stats = std::make_shared<MilpStats>();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([stats, t] {
      for (int i = 0; i < 1000; ++i) stats->record(1 + (t % 5), 1e-6);
    });
  }
  for (auto& th : threads) th.join();
  CHECK(stats->snapshot().total_count() == 4000);
}

TEST_CASE("budget exhaustion is reported") {
  // The root relaxation is fractional, so a one-node budget cannot finish.
  auto p = problem({VariableDecl::integer("a", 0, 20), VariableDecl::integer("b", 0, 20)});
  p.constraints.add_le(var("a", 2) + var("b", 2), 7);
  p.objective = std::make_pair(var("a") + var("b"), Sense::Maximize);
  Options opt;
  opt.node_budget = 1;
  MilpSolver s(opt);
  CHECK(s.solve(p).status == MilpStatus::BudgetExhausted);
  MilpSolver full;
  auto r = full.solve(p);
  CHECK(r.status == MilpStatus::Optimal);
  CHECK(*r.value == 3.0);
}

TEST_CASE("non-conjunctive input is rejected") {
  auto p = problem({VariableDecl::real("x", 0, 1), VariableDecl::boolean("y")});
  p.constraints.add_guarded_le("y", Polarity::Positive, var("x"), 0.5);
  MilpSolver s;
  CHECK_THROWS_AS(s.feasible(p), Error);
}

TEST_CASE("LP format export") {
  auto p = problem({VariableDecl::real("x", 0, 10), VariableDecl::boolean("y"),
                    VariableDecl::integer("k", -2, 3)});
  p.constraints.add_le(var("x") - var("y", 2), 3);
  p.objective = std::make_pair(var("x") + var("k"), Sense::Maximize);
  std::ostringstream os;
  write_lp_format(os, p);
  const std::string text = os.str();
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("c0: 1 x - 2 y <= 3") != std::string::npos);
  CHECK(text.find("0 <= x <= 10") != std::string::npos);
  CHECK(text.find("General\n k") != std::string::npos);
  CHECK(text.find("Binary\n y") != std::string::npos);
  CHECK(text.rfind("End\n") == text.size() - 4);
}

TEST_CASE("property: agrees with grid enumeration oracle") {
  std::mt19937 rng(20240611);
  MilpSolver s;
  for (int trial = 0; trial < 300; ++trial) {
    CAPTURE(trial);
    const MilpProblem p = oracle::random_problem(rng, trial % 4 != 0);
    const oracle::OracleResult o = oracle::solve_by_enumeration(p);
    const MilpResult r = s.solve(p);
    REQUIRE(r.status != MilpStatus::BudgetExhausted);
    const bool feasible = r.status != MilpStatus::Infeasible;
    CHECK(feasible == o.feasible);
    if (!feasible || !o.feasible) continue;
    REQUIRE(r.witness);
    CHECK(oracle::witness_ok(p, *r.witness));
    if (p.objective) {
      CHECK(r.status == MilpStatus::Optimal);
      CHECK(std::abs(*r.value - o.best) <= 1e-6 * std::max(1.0, std::abs(o.best)));
      CHECK(std::abs(*r.value - p.objective->first.evaluate(*r.witness)) <= 1e-9 * std::max(1.0, std::abs(o.best)));
    }
  }
}

TEST_CASE("property: adding a constraint never improves the maximum") {
  std::mt19937 rng(5150);
  std::uniform_int_distribution<int> coef(-4, 4);
  MilpSolver s;
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    MilpProblem p = oracle::random_problem(rng, true);
    p.objective->second = Sense::Maximize;
    const MilpResult base = s.solve(p);
    if (base.status != MilpStatus::Optimal) continue;
    LinearExpression e;
    for (const auto& d : p.decls) e.add(d.name, coef(rng));
    p.constraints.add_le(e, 1.0);
    const MilpResult tighter = s.solve(p);
    if (tighter.status != MilpStatus::Optimal) continue;
    ++compared;
    CHECK(*tighter.value <= *base.value + 1e-6 * std::max(1.0, std::abs(*base.value)));
  }
  CHECK(compared > 30);
}
