#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "qsynth/abstraction.hpp"

using namespace qsynth;

namespace {

QuantSchema toy_schema(const Dtlhs& h, int bits) { return QuantSchema::uniform(h, bits); }

std::string describe(const Cell& c, std::uint32_t a) {
  std::string s = "cell (";
  for (auto k : c) s += std::to_string(k) + " ";
  return s + ") action " + std::to_string(a);
}

// Compares a built abstraction against the grid oracle; `exact` demands
// equality, otherwise containment.
void compare(const ControlAbstraction& abs, const oracle::GridAbstraction& g, bool exact) {
  const QuantSchema& s = abs.schema();
  for (std::uint64_t c = 0; c < s.cell_count(); ++c) {
    CHECK(abs.admissible(c) == (g.admissible[c] != 0));
    for (std::uint32_t a = 0; a < abs.num_actions(); ++a) {
      const Transition& t = abs.transition(c, a);
      const auto& o = g.transitions[c * abs.num_actions() + a];
      INFO(describe(s.cell_at(c), a));
      const std::set<std::uint64_t> got(t.successors.begin(), t.successors.end());
      CHECK(t.consistent == o.consistent);
      if (exact) {
        CHECK(t.unsafe == o.unsafe);
        CHECK(t.self_loop == o.self_loop);
        CHECK(t.loop_kept == o.loop_kept);
        CHECK(got == o.successors);
      } else {
        CHECK((t.unsafe || !o.unsafe));
        CHECK((t.self_loop || !o.self_loop));
        CHECK((t.loop_kept || !o.loop_kept));
        CHECK(std::includes(got.begin(), got.end(), o.successors.begin(), o.successors.end()));
      }
    }
  }
}

RegionSpec toy_region(double lo, double hi, const std::string& var) {
  RegionSpec r;
  r.goal.add_bounds(var, lo, hi);
  return r;
}

}  // namespace

TEST_CASE("successor_box and successors on the shift system") {
  const auto toy = oracle::shift_toy();
  AbstractionBuilder b(toy.model, toy_schema(toy.model, 2));
  const auto up = b.successor_box({1}, 1);
  REQUIRE(up);
  CHECK((*up)[0].lo == doctest::Approx(2.0));
  CHECK((*up)[0].hi == doctest::Approx(3.0));
  const auto down = b.successor_box({1}, 0);
  REQUIRE(down);
  CHECK((*down)[0].lo == doctest::Approx(0.0));
  CHECK((*down)[0].hi == doctest::Approx(1.0));

  // x + 1 over [1, 2) lands in [2, 3): the closed image touches 3 only at
  // the excluded point x = 2.
  const Transition t1 = b.successors({1}, 1);
  CHECK(t1.consistent);
  CHECK(t1.successors == std::vector<std::uint64_t>{2});
  CHECK_FALSE(t1.self_loop);
  CHECK_FALSE(t1.unsafe);
  const Transition t0 = b.successors({1}, 0);
  CHECK(t0.successors == std::vector<std::uint64_t>{0});
  CHECK_FALSE(t0.self_loop);
  const Transition top = b.successors({3}, 1);
  CHECK(top.unsafe);
  CHECK(top.successors.empty());
  CHECK(top.self_loop);
}

TEST_CASE("admissibility") {
  const auto toy = oracle::shift_toy();
  AbstractionBuilder b(toy.model, toy_schema(toy.model, 2));
  for (std::int64_t k = 0; k < 4; ++k) CHECK(b.is_admissible({k}) == Verdict::Yes);

  Dtlhs limited = toy.model;
  limited.transition.add_le(oracle::var("x"), 1.0);
  const QuantSchema s({{"x", 0, 4, 2}});
  AbstractionBuilder lb(limited, s);
  CHECK(lb.is_admissible({2}) == Verdict::No);
  CHECK(lb.is_admissible({0}) == Verdict::Yes);
  // x <= 1 touches cell [1, 2) only on its closed lower face.
  CHECK(lb.is_admissible({1}) == Verdict::Yes);

  const Dtlhs buck = single_buck();
  AbstractionBuilder bb(buck, QuantSchema::uniform(buck, 4));
  const double origin[] = {0.0, 0.0};
  CHECK(bb.is_admissible(*bb.schema().quantize(origin)) == Verdict::Yes);
}

TEST_CASE("self-loop eliminability") {
  const auto toy = oracle::shift_toy();
  const QuantSchema s({{"x", 0, 4, 1}});
  AbstractionBuilder b(toy.model, s);
  const Transition t = b.successors({0}, 0);
  CHECK(t.self_loop);
  CHECK_FALSE(t.loop_kept);
  CHECK(b.self_loop_eliminable({0}, 0) == Verdict::Yes);

  Dtlhs identity = toy.model;
  identity.transition = Predicate{};
  identity.transition.add_eq(oracle::var("x'") - oracle::var("x"), 0.0);
  AbstractionBuilder ib(identity, QuantSchema({{"x", 0, 4, 2}}));
  for (std::int64_t k = 0; k < 4; ++k) {
    for (std::uint32_t a = 0; a < 2; ++a) {
      const Transition it = ib.successors({k}, a);
      CHECK(it.self_loop);
      CHECK(it.loop_kept);
      CHECK(it.successors.empty());
    }
  }
}

TEST_CASE("buck equilibrium cell keeps its loop") {
  // With u = 0 and the diode blocking, the switch leaks through R_off and
  // v_D = (R_off i_L - V) / 2; the fixed point solves a 2x2 linear system.
  const BuckParams p;
  const Dtlhs buck = single_buck(p);
  const double r = p.load;
  const double rc = p.r_capacitor;
  const double rl = p.r_inductor;
  const double l = p.inductance;
  const double c = p.capacitance;
  const double a21 = r / (rc + r) * (-rc * rl / l + 1 / c);
  const double a22 = -1 / (rc + r) * (rc * r / l + 1 / c);
  const double a23 = -rc * r / (l * (rc + r));
  Eigen::Matrix2d m;
  Eigen::Vector2d rhs;
  m << -rl / l - p.r_off / (2 * l), -1 / l, a21 + a23 * p.r_off / 2, a22;
  rhs << -p.supply / (2 * l), a23 * p.supply / 2;
  const Eigen::Vector2d eq = m.colPivHouseholderQr().solve(rhs);
  REQUIRE(eq(0) < p.supply / p.r_off);  // diode blocking branch is the active one
  const auto step = oracle::buck_step(p, p.load, p.supply, eq(0), eq(1), 0);
  CHECK(step.i_l_next == doctest::Approx(eq(0)).epsilon(1e-9));
  CHECK(step.v_o_next == doctest::Approx(eq(1)).epsilon(1e-9));

  AbstractionBuilder b(buck, QuantSchema::uniform(buck, 4));
  const double point[] = {eq(0), eq(1)};
  const Cell cell = *b.schema().quantize(point);
  CHECK(b.self_loop_eliminable(cell, 0) == Verdict::No);
  const Transition t = b.successors(cell, 0);
  CHECK(t.self_loop);
  CHECK(t.loop_kept);
  // The closed-switch equilibrium sits near v_O = 14.7, outside the box.
  CHECK(b.self_loop_eliminable(cell, 1) != Verdict::No);
}

TEST_CASE("toy abstractions match the dense grid oracle") {
  for (const auto& toy : oracle::all_toys()) {
    for (int bits = 1; bits <= 3; ++bits) {
      INFO(toy.model.name << " bits " << bits);
      const QuantSchema s = toy_schema(toy.model, bits);
      const auto grid = oracle::grid_abstraction(toy, s);
      const RegionSpec region = toy_region(2, 3, toy.model.goal_var);
      AbstractionOptions exact;
      exact.exact = true;
      compare(AbstractionBuilder(toy.model, s, exact).build(region), grid, true);
      const auto boxed = AbstractionBuilder(toy.model, s).build(region);
      compare(boxed, grid, toy.model.state.size() == 1);
    }
  }
}

TEST_CASE("build: variants, statistics and determinism") {
  const auto toy = oracle::shift_toy();
  const QuantSchema s = toy_schema(toy.model, 2);
  AbstractionBuilder b(toy.model, s);
  const auto abs = b.build(toy_region(2, 3, "x"));
  const auto& st = abs.stats();
  CHECK(st.arcs_min <= st.arcs_max);
  CHECK(st.arcs_max - st.arcs_min == st.max_loops - st.kept_loops);
  CHECK(st.kept_loops == 0);
  CHECK(st.loop_frac == 0.0);
  CHECK(st.milp.kinds[1].count == 4);
  CHECK(st.milp.kinds[5].count > 0);
  for (std::uint64_t c = 0; c < 4; ++c) CHECK(abs.goal(c) == (c == 2));
  for (std::uint64_t c = 0; c < 4; ++c) CHECK(abs.initial(c));

  const auto again = b.build(toy_region(2, 3, "x"));
  std::ostringstream one;
  std::ostringstream two;
  write_abstraction_csv(one, abs);
  write_abstraction_csv(two, again);
  CHECK(one.str() == two.str());
  CHECK(one.str().find("3,1,UNSAFE,1,0") != std::string::npos);

  AbstractionOptions parallel;
  parallel.jobs = 3;
  const auto rot = oracle::rotation_toy();
  const QuantSchema rs = toy_schema(rot.model, 2);
  std::ostringstream serial_csv;
  std::ostringstream parallel_csv;
  write_abstraction_csv(serial_csv, AbstractionBuilder(rot.model, rs).build(toy_region(2, 3, "x1")));
  write_abstraction_csv(parallel_csv, AbstractionBuilder(rot.model, rs, parallel).build(toy_region(2, 3, "x1")));
  CHECK(serial_csv.str() == parallel_csv.str());
}

TEST_CASE("regions") {
  const auto toy = oracle::rotation_toy();
  const QuantSchema s = toy_schema(toy.model, 1);
  AbstractionBuilder b(toy.model, s);
  Predicate half;
  half.add_le(oracle::var("x1"), 2.0);
  CHECK(b.inside_region({0, 1}, half));
  CHECK_FALSE(b.inside_region({1, 0}, half));
  // x1 <= 2 touches cell x1 in [2, 4] on its closed lower face.
  CHECK(b.meets_region({1, 0}, half));
  Predicate strict_left;
  strict_left.add_le(oracle::var("x1"), 1.0);
  CHECK_FALSE(b.meets_region({1, 1}, strict_left));
  CHECK_THROWS_AS(b.inside_region({0, 0}, [] {
    Predicate p;
    p.add_le(oracle::var("x1'"), 1.0);
    return p;
  }()), Error);

  const Dtlhs buck = single_buck();
  const RegionSpec spec = RegionSpec::default_for(buck);
  CHECK(spec.goal.plain.size() == 2);
  CHECK(spec.initial.plain.empty());
  CHECK_THROWS_AS(RegionSpec::default_for(buck, 5.0, 0.0), Error);
}

TEST_CASE("property: single buck abstraction covers sampled concrete steps") {
  const BuckParams p;
  const Dtlhs buck = single_buck(p);
  AbstractionBuilder b(buck, QuantSchema::uniform(buck, 4));
  const auto abs = b.build(RegionSpec::default_for(buck));
  const QuantSchema& s = abs.schema();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> il(-4, 4);
  std::uniform_real_distribution<double> vo(-1, 7);
  int uncovered = 0;
  for (int k = 0; k < 10000; ++k) {
    const double x[] = {il(rng), vo(rng)};
    const int u = static_cast<int>(rng() & 1);
    const auto step = oracle::buck_step(p, p.load, p.supply, x[0], x[1], u);
    const Cell c = *s.quantize(x);
    const std::uint64_t ci = s.index_of(c);
    REQUIRE(abs.admissible(ci));
    const Transition& t = abs.transition(ci, static_cast<std::uint32_t>(u));
    REQUIRE(t.consistent);
    const double xn[] = {step.i_l_next, step.v_o_next};
    const auto d = s.quantize(xn);
    bool covered = false;
    if (!d) {
      covered = t.unsafe;
    } else if (*d == c) {
      covered = t.self_loop;
    } else {
      covered = std::binary_search(t.successors.begin(), t.successors.end(), s.index_of(*d));
    }
    uncovered += covered ? 0 : 1;
  }
  CHECK(uncovered == 0);
}
