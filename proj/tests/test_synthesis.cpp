#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "qsynth/abstraction.hpp"
#include "qsynth/codegen.hpp"
#include "qsynth/synthesis.hpp"

using namespace qsynth;

namespace {

RegionSpec goal_box(const std::string& var, double lo, double hi) {
  RegionSpec r;
  r.goal.add_bounds(var, lo, hi);
  return r;
}

ControlAbstraction build(const Dtlhs& h, int bits, const RegionSpec& r, bool exact = false) {
  AbstractionOptions o;
  o.exact = exact;
  return AbstractionBuilder(h, QuantSchema::uniform(h, bits), o).build(r);
}

// Shift system where u = 1 needs x >= 1, so every action from [0, 1) is
// unusable.
Dtlhs stuck_shift() {
  Dtlhs h = oracle::shift_toy().model;
  h.transition.add_ge(oracle::var("x") - oracle::var("u"), 0.0);
  return h;
}

void check_rank_soundness(const Controller& k, const ControlAbstraction& abs) {
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) {
    if (!k.controllable(c)) {
      CHECK(k.enabled(c).empty());
      continue;
    }
    if (!k.goal(c)) CHECK_FALSE(k.enabled(c).empty());
    for (auto a : k.enabled(c)) {
      const Transition& t = abs.transition(c, a);
      CHECK(t.consistent);
      CHECK_FALSE(t.unsafe);
      const auto succ = abs.successors(c, a);
      CHECK_FALSE(succ.empty());
      for (auto d : succ) {
        CHECK(k.controllable(d));
        if (!k.goal(c)) CHECK(k.rank(d) < k.rank(c));
      }
    }
  }
}

}  // namespace

TEST_CASE("shift system controller") {
  const Dtlhs h = oracle::shift_toy().model;
  const auto abs = build(h, 2, goal_box("x", 2, 3));
  const Controller k = synthesize(abs);
  CHECK(k.outcome() == Outcome::Sol);
  CHECK(k.controllable_count() == 4);
  CHECK(*k.chosen(0) == 1);
  CHECK(*k.chosen(1) == 1);
  CHECK(*k.chosen(2) == 0);
  CHECK(*k.chosen(3) == 0);
  CHECK(steps_to_goal(k, 2) == 0);
  CHECK(steps_to_goal(k, 1) == 1);
  CHECK(steps_to_goal(k, 0) == 2);
  CHECK(steps_to_goal(k, 3) == 1);
  CHECK(k.max_rank() == 2);
  // The loop at cell 3 under u = 0 exists only in the maximum abstraction.
  CHECK(abs.transition(3, 0).self_loop);
  CHECK_FALSE(abs.transition(3, 0).loop_kept);
  check_rank_soundness(k, abs);

  std::ostringstream csv;
  write_controller_csv(csv, k);
  CHECK(csv.str() == "cell,action,rank\n0,1,2\n1,1,1\n2,0,0\n3,0,1\n");
  std::ostringstream region;
  write_region_csv(region, k);
  CHECK(region.str().rfind("cell,x_lo,x_hi,controllable,goal\n0,0,1,1,0\n", 0) == 0);
}

TEST_CASE("maximum variant blocks progress through kept loops") {
  const Dtlhs h = oracle::shift_toy().model;
  AbstractionOptions o;
  o.variant = Variant::Maximum;
  const auto abs = AbstractionBuilder(h, QuantSchema::uniform(h, 2), o).build(goal_box("x", 2, 3));
  const Controller k = synthesize(abs);
  // Cell 3 only reaches the goal through u = 0, whose loop now counts.
  CHECK_FALSE(k.controllable(3));
  CHECK(k.outcome() == Outcome::Unk);
}

TEST_CASE("goal cells prefer actions that stay in the goal") {
  const Controller k = synthesize(build(oracle::shift_toy().model, 2, goal_box("x", 1, 3)));
  CHECK(k.outcome() == Outcome::Sol);
  // From [1, 2) the action 0 would also stay winning through cell 0.
  CHECK(k.enabled(1) == std::vector<std::uint32_t>{1});
  CHECK(k.enabled(2) == std::vector<std::uint32_t>{0});
}

TEST_CASE("whole-rectangle goal") {
  const Dtlhs h = oracle::shift_toy().model;
  const Controller k = synthesize(build(h, 2, goal_box("x", 0, 4)));
  CHECK(k.outcome() == Outcome::Sol);
  for (std::uint64_t c = 0; c < 4; ++c) CHECK(steps_to_goal(k, c) == 0);
}

TEST_CASE("outcomes: unusable cells and goals finer than the grid") {
  const Dtlhs h = stuck_shift();
  const auto boxed = build(h, 2, goal_box("x", 2, 3));
  const Controller k = synthesize(boxed);
  CHECK_FALSE(k.controllable(0));
  CHECK(k.controllable(1));
  CHECK(k.outcome() == Outcome::Unk);
  CHECK(classify_outcome(k, boxed) == Outcome::Unk);
  CHECK_THROWS_AS(steps_to_goal(k, 0), Error);
  CHECK(synthesize(build(h, 2, goal_box("x", 2, 3), true)).outcome() == Outcome::NoSol);

  RegionSpec partial = goal_box("x", 2, 3);
  partial.initial.add_ge(oracle::var("x"), 1.5);
  CHECK(synthesize(build(h, 2, partial)).outcome() == Outcome::Sol);

  const Controller tight = synthesize(build(oracle::shift_toy().model, 1, goal_box("x", 2.2, 2.6)));
  CHECK(tight.outcome() == Outcome::NoSol);
  CHECK(tight.diagnostic() == "goal finer than quantization");
  CHECK(tight.controllable_count() == 0);

  // Under a pure drift every cell is left for good: the goal cell stays
  // controllable at rank 0 but no action keeps it in the winning set.
  Dtlhs drift = oracle::shift_toy().model;
  drift.transition = Predicate{};
  drift.transition.add_eq(oracle::var("x'") - oracle::var("x"), 1.0);
  const Controller fleeting = synthesize(build(drift, 2, goal_box("x", 0, 1)));
  CHECK(fleeting.controllable_count() == 1);
  CHECK(fleeting.rank(0) == 0);
  CHECK(fleeting.enabled(0).empty());
  CHECK_FALSE(fleeting.chosen(0));
  CHECK(fleeting.diagnostic().empty());
}

TEST_CASE("property: rank soundness and region growth with bits on the toys") {
  for (const auto& toy : oracle::all_toys()) {
    std::vector<Controller> ks;
    for (int bits = 1; bits <= 4; ++bits) {
      const auto abs = build(toy.model, bits, goal_box(toy.model.goal_var, 2, 3));
      ks.push_back(synthesize(abs));
      INFO(toy.model.name << " bits " << bits);
      check_rank_soundness(ks.back(), abs);
      for (std::uint64_t c = 0; c < abs.num_cells(); ++c) {
        if (ks.back().controllable(c)) CHECK(ks.back().rank(c) <= static_cast<int>(abs.num_cells()));
      }
    }
    // A controllable cell at b bits splits into cells controllable at b + 1.
    for (std::size_t j = 0; j + 1 < ks.size(); ++j) {
      const QuantSchema& coarse = ks[j].schema();
      const QuantSchema& fine = ks[j + 1].schema();
      for (std::uint64_t f = 0; f < fine.cell_count(); ++f) {
        Cell parent = fine.cell_at(f);
        for (auto& k : parent) k /= 2;
        if (ks[j].controllable(coarse.index_of(parent))) {
          INFO(toy.model.name << " fine cell " << cell_text(fine.cell_at(f)) << " bits " << j + 2);
          CHECK(ks[j + 1].controllable(f));
        }
      }
    }
  }
}

TEST_CASE("closed loop on the shift system reaches the goal within the rank bound") {
  const auto toy = oracle::shift_toy();
  const auto abs = build(toy.model, 2, goal_box("x", 2, 3));
  const Controller k = synthesize(abs);
  const QuantSchema& s = abs.schema();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> start(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    oracle::Point x{start(rng)};
    int reached = -1;
    for (int step = 0; step < 50; ++step) {
      const auto c = s.quantize(x);
      REQUIRE(c);
      const std::uint64_t ci = s.index_of(*c);
      REQUIRE(k.controllable(ci));
      if (k.goal(ci) && reached < 0) reached = step;
      x = toy.step(x, static_cast<int>(*k.chosen(ci)))[0];
    }
    CHECK(reached >= 0);
    CHECK(reached <= 2 * k.max_rank());
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("codegen: shift controller") {
  const auto abs = build(oracle::shift_toy().model, 2, goal_box("x", 2, 3));
  const Controller k = synthesize(abs);
  const DecisionTree law = compile_controller(k);
  CHECK(law.depth() <= 2);
  for (std::uint64_t c = 0; c < 4; ++c) {
    const Lookup l = interpret(law, k.schema(), k.schema().cell_at(c));
    CHECK(l.value == *k.chosen(c));
    CHECK(l.tests <= 2);
  }
  const DecisionTree region = compile_region(k);
  CHECK(region.nodes.size() == 1);
  const std::string src = emit_source(law, region, k.schema(), {"shift", "abc", "x in [2, 3]", 2, 1});
  const ParsedSource parsed = parse_source(src);
  CHECK(canonical(parsed.law) == canonical(law));
  CHECK(canonical(parsed.region) == canonical(region));
  CHECK(src.find("int controllable_region(unsigned long bits) {\n  return 1;\n}") != std::string::npos);
  CHECK(src.find("model_hash=abc") != std::string::npos);
}

TEST_CASE("codegen: merging, faults and bit order") {
  const QuantSchema s({{"a", 0, 1, 2}, {"b", 0, 1, 1}});
  const auto order = interleaved_order(s);
  REQUIRE(order.size() == 3);
  CHECK(order[0] == BitRef{0, 1});
  CHECK(order[1] == BitRef{0, 0});
  CHECK(order[2] == BitRef{1, 0});
  CHECK(cell_bits(s, order, {2, 1}) == 0b101);

  const DecisionTree same = compile_table(s, std::vector<std::int64_t>(8, 3));
  CHECK(same.nodes.size() == 1);
  CHECK(same.depth() == 0);
  CHECK(interpret(same, 0b101).value == 3);

  std::vector<std::int64_t> table(8, kFault);
  table[s.index_of({1, 0})] = 2;
  const DecisionTree t = compile_table(s, table);
  for (std::uint64_t c = 0; c < 8; ++c) CHECK(interpret(t, s, s.cell_at(c)).value == table[c]);
  CHECK_THROWS_AS(parse_source("int control_law(unsigned long bits) {\n"), Error);
}

TEST_CASE("property: compiled trees agree with their tables") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const int b1 = 1 + static_cast<int>(rng() % 4);
    const int b2 = 1 + static_cast<int>(rng() % 3);
    const QuantSchema s({{"p", -1, 1, b1}, {"q", 0, 3, b2}});
    std::vector<std::int64_t> table(s.cell_count());
    const int values = 1 + static_cast<int>(rng() % 4);
    // Blocky tables so merging has something to do.
    for (std::uint64_t c = 0; c < table.size(); ++c) {
      const Cell cell = s.cell_at(c);
      table[c] = (rng() % 5 == 0) ? kFault : static_cast<std::int64_t>((cell[0] / 2 + cell[1]) % values);
    }
    const DecisionTree merged = compile_table(s, table);
    const DecisionTree plain = compile_table_unmerged(s, table);
    CHECK(merged.depth() <= s.total_bits());
    CHECK(plain.depth() == s.total_bits());
    CHECK(merged.nodes.size() <= plain.nodes.size());
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << s.total_bits()); ++bits) {
      CHECK(interpret(merged, bits).value == interpret(plain, bits).value);
    }
    for (std::uint64_t c = 0; c < table.size(); ++c) {
      const Lookup l = interpret(merged, s, s.cell_at(c));
      CHECK(l.value == table[c]);
      CHECK(l.tests <= s.total_bits());
    }
    const std::string src = emit_source(merged, merged, s, {"random", "0", "none", b1, 2});
    CHECK(canonical(parse_source(src).law) == canonical(merged));
  }
}
