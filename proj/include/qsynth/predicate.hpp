#pragma once

// Linear expressions, constraints, guarded constraints and bounded
// conjunctive predicates over named, typed variables.

#include <initializer_list>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qsynth {

/// Default comparison tolerance used when evaluating constraints.
inline constexpr double kCompareTolerance = 1e-9;

enum class VarKind { Real, Integer, Boolean };

const char* to_string(VarKind kind);
VarKind var_kind_from_string(const std::string& text);

struct VariableDecl {
  std::string name;
  VarKind kind = VarKind::Real;
  double lower = 0.0;
  double upper = 0.0;

  static VariableDecl real(std::string name, double lower, double upper);
  static VariableDecl integer(std::string name, double lower, double upper);
  static VariableDecl boolean(std::string name);

  bool is_discrete() const { return kind != VarKind::Real; }
};

/// Throws Error(Model) when the declaration is malformed or unbounded.
void validate(const VariableDecl& decl);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const { return lo > hi; }
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

using Valuation = std::map<std::string, double>;
using Box = std::map<std::string, Interval>;

/// Sum of coefficient * variable plus a constant. Zero coefficients are
/// never stored.
class LinearExpression {
 public:
  LinearExpression() = default;
  LinearExpression(std::initializer_list<std::pair<const std::string, double>> terms,
                   double constant = 0.0);

  static LinearExpression variable(const std::string& name, double coeff = 1.0);
  static LinearExpression constant_value(double value);

  LinearExpression& add(const std::string& name, double coeff);
  LinearExpression& add_constant(double value);

  const std::map<std::string, double>& terms() const { return terms_; }
  double constant() const { return constant_; }
  double coefficient(const std::string& name) const;

  /// Throws Error(InvalidArgument) naming the first unassigned variable.
  double evaluate(const Valuation& v) const;

  /// Range of the expression over a box; every variable must be in `box`.
  Interval range(const Box& box) const;

  LinearExpression operator-() const;
  LinearExpression& operator+=(const LinearExpression& other);
  LinearExpression& operator-=(const LinearExpression& other);
  LinearExpression& operator*=(double factor);

  friend LinearExpression operator+(LinearExpression a, const LinearExpression& b) {
    return a += b;
  }
  friend LinearExpression operator-(LinearExpression a, const LinearExpression& b) {
    return a -= b;
  }
  friend LinearExpression operator*(double k, LinearExpression a) { return a *= k; }

  bool operator==(const LinearExpression&) const = default;

 private:
  std::map<std::string, double> terms_;
  double constant_ = 0.0;
};

/// Canonical constraint `lhs <= rhs`; lhs carries no constant term.
struct Constraint {
  LinearExpression lhs;
  double rhs = 0.0;

  bool holds(const Valuation& v, double eps = kCompareTolerance) const;
  bool operator==(const Constraint&) const = default;
};

Constraint less_equal(const LinearExpression& lhs, double rhs);
Constraint greater_equal(const LinearExpression& lhs, double rhs);
/// `lhs = rhs` as the pair (lhs <= rhs, -lhs <= -rhs).
std::pair<Constraint, Constraint> equal_to(const LinearExpression& lhs, double rhs);

enum class Polarity { Positive, Negated };

/// `guard -> body` (Positive) or `!guard -> body` (Negated).
struct GuardedConstraint {
  std::string guard;
  Polarity polarity = Polarity::Positive;
  Constraint body;

  bool guard_active(const Valuation& v) const;
  bool holds(const Valuation& v, double eps = kCompareTolerance) const;
  bool operator==(const GuardedConstraint&) const = default;
};

class Predicate {
 public:
  std::vector<Constraint> plain;
  std::vector<GuardedConstraint> guarded;

  Predicate& add(Constraint c);
  Predicate& add_le(const LinearExpression& lhs, double rhs);
  Predicate& add_ge(const LinearExpression& lhs, double rhs);
  Predicate& add_eq(const LinearExpression& lhs, double rhs);
  Predicate& add_bounds(const std::string& name, double lo, double hi);
  Predicate& add_guarded(const std::string& guard, Polarity polarity, Constraint body);
  Predicate& add_guarded_le(const std::string& guard, Polarity polarity,
                            const LinearExpression& lhs, double rhs);
  Predicate& add_guarded_ge(const std::string& guard, Polarity polarity,
                            const LinearExpression& lhs, double rhs);
  Predicate& add_guarded_eq(const std::string& guard, Polarity polarity,
                            const LinearExpression& lhs, double rhs);
  Predicate& append(const Predicate& other);

  bool is_conjunctive() const { return guarded.empty(); }
  std::set<std::string> variables() const;
  bool operator==(const Predicate&) const = default;
};

bool evaluate(const Predicate& p, const Valuation& v, double eps = kCompareTolerance);

/// Tightest box implied by the declarations and the single-variable plain
/// constraints of `p`. Throws Error(Infeasible) if some interval is empty
/// and Error(Model) if a variable of `p` is undeclared.
Box bound_box(const Predicate& p, std::span<const VariableDecl> decls);

/// Big-M rewrite of every guarded constraint into a plain one, with M
/// computed per constraint from bound_box. Throws Error(Model) on unbounded
/// or non-boolean guards.
Predicate to_conjunctive(const Predicate& p, std::span<const VariableDecl> decls);

std::string primed_name(const std::string& name);
std::string unprimed_name(const std::string& name);

/// Renames each listed variable x to x'. Throws Error(InvalidArgument) when
/// a primed name already occurs in `p`.
Predicate prime(const Predicate& p, std::span<const std::string> vars);
Predicate unprime(const Predicate& p, std::span<const std::string> vars);

}  // namespace qsynth
