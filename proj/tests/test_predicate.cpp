#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "qsynth/error.hpp"
#include "qsynth/predicate.hpp"

using namespace qsynth;

namespace {

LinearExpression var(const std::string& n, double c = 1.0) { return LinearExpression::variable(n, c); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("linear expressions drop zero coefficients") {
  LinearExpression e{{"x", 2.0}, {"y", 0.0}};
  CHECK(e.terms().size() == 1);
  e.add("x", -2.0);
  CHECK(e.terms().empty());
  LinearExpression f = var("a", 3) + var("b", -1) + LinearExpression::constant_value(2);
  CHECK(f.evaluate({{"a", 1}, {"b", 4}}) == doctest::Approx(1.0));
}

TEST_CASE("evaluate: boundary and guards") {
  Predicate p;
  p.add_le(var("x"), 5);
  CHECK(evaluate(p, {{"x", 5}}));

  Predicate g;
  g.add_guarded_le("y", Polarity::Positive, var("x"), 5);
  CHECK(evaluate(g, {{"y", 0}, {"x", 9}}));
  CHECK_FALSE(evaluate(g, {{"y", 1}, {"x", 9}}));

  Predicate n;
  n.add_guarded_le("y", Polarity::Negated, var("x"), 5);
  CHECK(evaluate(n, {{"y", 1}, {"x", 9}}));
  CHECK_FALSE(evaluate(n, {{"y", 0}, {"x", 9}}));
}

TEST_CASE("evaluate names the missing variable") {
  Predicate p;
  p.add_le(var("x") + var("speed"), 5);
  try {
    evaluate(p, {{"x", 1}});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
    CHECK(std::string(e.what()).find("speed") != std::string::npos);
  }
}

TEST_CASE("to_conjunctive: big-M with positive guard") {
  std::vector<VariableDecl> decls{VariableDecl::real("x", -10, 10), VariableDecl::boolean("y")};
  Predicate p;
  p.add_guarded_le("y", Polarity::Positive, var("x"), 5);
  Predicate c = to_conjunctive(p, decls);
  REQUIRE(c.is_conjunctive());
  REQUIRE(c.plain.size() == 1);
  CHECK(c.plain[0].lhs.coefficient("x") == 1.0);
  CHECK(c.plain[0].lhs.coefficient("y") == 5.0);
  CHECK(c.plain[0].rhs == 10.0);
  for (int x = -10; x <= 10; ++x) {
    for (int y = 0; y <= 1; ++y) {
      Valuation v{{"x", x}, {"y", y}};
      CHECK(evaluate(p, v) == evaluate(c, v));
    }
  }
}

TEST_CASE("to_conjunctive: body implied by bounds gives M = 0") {
  std::vector<VariableDecl> decls{VariableDecl::real("x", 0, 3), VariableDecl::boolean("y")};
  Predicate p;
  p.add_guarded_le("y", Polarity::Positive, var("x"), 5);
  Predicate c = to_conjunctive(p, decls);
  REQUIRE(c.plain.size() == 1);
  CHECK(c.plain[0].lhs.coefficient("y") == 0.0);
  CHECK(c.plain[0].rhs == 5.0);
}

TEST_CASE("to_conjunctive: identity without guards, errors on bad guards") {
  std::vector<VariableDecl> decls{VariableDecl::real("x", 0, 3), VariableDecl::real("r", 0, 1)};
  Predicate p;
  p.add_le(var("x"), 2);
  CHECK(to_conjunctive(p, decls) == p);

  Predicate g;
  g.add_guarded_le("r", Polarity::Positive, var("x"), 1);
  CHECK(code_of([&] { to_conjunctive(g, decls); }) == ErrorCode::Model);

  std::vector<VariableDecl> unbounded{VariableDecl::real("x", 0, INFINITY), VariableDecl::boolean("y")};
  Predicate h;
  h.add_guarded_le("y", Polarity::Positive, var("x"), 1);
  CHECK(code_of([&] { to_conjunctive(h, unbounded); }) == ErrorCode::Model);
}

TEST_CASE("to_conjunctive keeps contradictory predicates unsatisfiable") {
  std::vector<VariableDecl> decls{VariableDecl::integer("x", -3, 3), VariableDecl::boolean("y")};
  Predicate p;
  p.add_le(var("x"), -1).add_ge(var("x"), 1);
  p.add_guarded_le("y", Polarity::Positive, var("x"), 0);
  const Predicate c = to_conjunctive(p, decls);
  CHECK(c.is_conjunctive());
  for (int x = -3; x <= 3; ++x) {
    for (int y = 0; y <= 1; ++y) CHECK_FALSE(evaluate(c, {{"x", x}, {"y", y}}));
  }
}

TEST_CASE("bound_box") {
  std::vector<VariableDecl> decls{VariableDecl::real("x", -10, 10), VariableDecl::real("z", 1, 2)};
  Predicate p;
  p.add_le(var("x"), 5);
  Box b = bound_box(p, decls);
  CHECK(b["x"].lo == -10);
  CHECK(b["x"].hi == 5);
  CHECK(b["z"].lo == 1);
  CHECK(b["z"].hi == 2);

  Predicate q;
  q.add_le(var("x"), 5).add_le(var("x", -1), -7);
  CHECK(code_of([&] { bound_box(q, decls); }) == ErrorCode::Infeasible);

  Predicate r;
  r.add_le(var("w"), 1);
  CHECK(code_of([&] { bound_box(r, decls); }) == ErrorCode::Model);
}

TEST_CASE("prime and unprime") {
  Predicate p;
  p.add_le(var("x"), 5);
  std::vector<std::string> x{"x"};
  Predicate q = prime(p, x);
  CHECK(q.plain[0].lhs.coefficient("x'") == 1.0);
  CHECK(q.plain[0].lhs.coefficient("x") == 0.0);

  Predicate s;
  s.add_le(var("x") + var("u"), 1);
  Predicate t = prime(s, x);
  CHECK(t.plain[0].lhs.coefficient("x'") == 1.0);
  CHECK(t.plain[0].lhs.coefficient("u") == 1.0);

  CHECK(prime(s, std::vector<std::string>{}) == s);

  std::vector<std::string> xp{"x'"};
  CHECK(unprime(t, xp) == s);

  Predicate clash;
  clash.add_le(var("x") + var("x'"), 1);
  CHECK(code_of([&] { prime(clash, x); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("validate rejects malformed declarations") {
  CHECK(code_of([] { validate(VariableDecl::real("x", 2, 1)); }) == ErrorCode::Model);
  CHECK(code_of([] { validate({"b", VarKind::Boolean, 0, 2}); }) == ErrorCode::Model);
  CHECK(code_of([] { validate(VariableDecl::integer("k", 0.5, 3)); }) == ErrorCode::Model);
  validate(VariableDecl::integer("k", -3, 3));
}

TEST_CASE("property: equality holds iff both desugared constraints hold") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> coef(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    LinearExpression e = var("a", coef(rng)) + var("b", coef(rng));
    const double rhs = coef(rng);
    auto [le, ge] = equal_to(e, rhs);
    for (int a = -3; a <= 3; ++a) {
      for (int b = -3; b <= 3; ++b) {
        Valuation v{{"a", a}, {"b", b}};
        const bool eq = e.evaluate(v) == rhs;
        CHECK(eq == (le.holds(v) && ge.holds(v)));
      }
    }
  }
}

TEST_CASE("property: guarded and conjunctive forms have the same models") {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_int_distribution<int> small(0, 2);
  for (int trial = 0; trial < 120; ++trial) {
    // Two integer variables on small grids, two boolean guards.
    const int lo1 = -small(rng) - 1;
    const int hi1 = small(rng) + 1;
    const int lo2 = -small(rng);
    const int hi2 = small(rng) + 2;
    std::vector<VariableDecl> decls{VariableDecl::integer("p", lo1, hi1),
                                    VariableDecl::integer("q", lo2, hi2),
                                    VariableDecl::boolean("g"), VariableDecl::boolean("h")};
    Predicate pred;
    const int nconstraints = 1 + small(rng) + small(rng);
    for (int k = 0; k < nconstraints; ++k) {
      LinearExpression e = var("p", coef(rng)) + var("q", coef(rng));
      if (k % 3 == 2) e.add("h", coef(rng));
      const double rhs = coef(rng);
      switch (k % 3) {
        case 0:
          pred.add_guarded_le("g", Polarity::Positive, e, rhs);
          break;
        case 1:
          pred.add_guarded_ge("h", Polarity::Negated, e, rhs);
          break;
        default:
          pred.add_le(e, rhs + 3);
      }
    }
    const Predicate conj = to_conjunctive(pred, decls);
    REQUIRE(conj.is_conjunctive());
    for (int p = lo1; p <= hi1; ++p) {
      for (int q = lo2; q <= hi2; ++q) {
        for (int g = 0; g <= 1; ++g) {
          for (int h = 0; h <= 1; ++h) {
            Valuation v{{"p", p}, {"q", q}, {"g", g}, {"h", h}};
            CHECK(evaluate(pred, v) == evaluate(conj, v));
          }
        }
      }
    }
  }
}

TEST_CASE("property: unprime after prime is the identity") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> coef(-4, 4);
  std::vector<std::string> vars{"x", "y"};
  std::vector<std::string> primed{"x'", "y'"};
  for (int trial = 0; trial < 50; ++trial) {
    Predicate p;
    p.add_le(var("x", coef(rng)) + var("y", coef(rng)) + var("u", coef(rng)), coef(rng));
    p.add_guarded_le("b", Polarity::Negated, var("y", coef(rng)), coef(rng));
    CHECK(unprime(prime(p, vars), primed) == p);
  }
}
