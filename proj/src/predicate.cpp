#include "qsynth/predicate.hpp"

#include <algorithm>
#include <cmath>

#include "qsynth/error.hpp"

namespace qsynth {

const char* to_string(VarKind kind) {
  switch (kind) {
    case VarKind::Real:
      return "real";
    case VarKind::Integer:
      return "integer";
    case VarKind::Boolean:
      return "boolean";
  }
  return "real";
}

VarKind var_kind_from_string(const std::string& text) {
  if (text == "real") return VarKind::Real;
  if (text == "integer") return VarKind::Integer;
  if (text == "boolean") return VarKind::Boolean;
  throw Error(ErrorCode::Model, "unknown variable kind '" + text + "'");
}

VariableDecl VariableDecl::real(std::string name, double lower, double upper) {
  return {std::move(name), VarKind::Real, lower, upper};
}

VariableDecl VariableDecl::integer(std::string name, double lower, double upper) {
  return {std::move(name), VarKind::Integer, lower, upper};
}

VariableDecl VariableDecl::boolean(std::string name) {
  return {std::move(name), VarKind::Boolean, 0.0, 1.0};
}

void validate(const VariableDecl& decl) {
  if (decl.name.empty()) throw Error(ErrorCode::Model, "variable with empty name");
  if (!std::isfinite(decl.lower) || !std::isfinite(decl.upper)) {
    throw Error(ErrorCode::Model, "variable '" + decl.name + "' is unbounded");
  }
  if (decl.lower > decl.upper) {
    throw Error(ErrorCode::Model, "variable '" + decl.name + "' has lower > upper");
  }
  if (decl.kind == VarKind::Boolean && (decl.lower != 0.0 || decl.upper != 1.0)) {
    throw Error(ErrorCode::Model, "boolean variable '" + decl.name + "' must range over [0, 1]");
  }
  if (decl.kind == VarKind::Integer &&
      (decl.lower != std::floor(decl.lower) || decl.upper != std::floor(decl.upper))) {
    throw Error(ErrorCode::Model, "integer variable '" + decl.name + "' has fractional bounds");
  }
}

// ---------------------------------------------------------------------------

LinearExpression::LinearExpression(
    std::initializer_list<std::pair<const std::string, double>> terms, double constant)
    : constant_(constant) {
  for (const auto& [name, coeff] : terms) add(name, coeff);
}

LinearExpression LinearExpression::variable(const std::string& name, double coeff) {
  LinearExpression e;
  e.add(name, coeff);
  return e;
}

LinearExpression LinearExpression::constant_value(double value) {
  LinearExpression e;
  e.constant_ = value;
  return e;
}

LinearExpression& LinearExpression::add(const std::string& name, double coeff) {
  auto it = terms_.find(name);
  if (it == terms_.end()) {
    if (coeff != 0.0) terms_.emplace(name, coeff);
  } else {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

LinearExpression& LinearExpression::add_constant(double value) {
  constant_ += value;
  return *this;
}

double LinearExpression::coefficient(const std::string& name) const {
  auto it = terms_.find(name);
  return it == terms_.end() ? 0.0 : it->second;
}

double LinearExpression::evaluate(const Valuation& v) const {
  double sum = constant_;
  for (const auto& [name, coeff] : terms_) {
    auto it = v.find(name);
    if (it == v.end()) {
      throw Error(ErrorCode::InvalidArgument, "valuation has no value for variable '" + name + "'");
    }
    sum += coeff * it->second;
  }
  return sum;
}

Interval LinearExpression::range(const Box& box) const {
  Interval r{constant_, constant_};
  for (const auto& [name, coeff] : terms_) {
    auto it = box.find(name);
    if (it == box.end()) {
      throw Error(ErrorCode::Model, "no bounds known for variable '" + name + "'");
    }
    const double a = coeff * it->second.lo;
    const double b = coeff * it->second.hi;
    r.lo += std::min(a, b);
    r.hi += std::max(a, b);
  }
  return r;
}

LinearExpression LinearExpression::operator-() const {
  LinearExpression e = *this;
  e *= -1.0;
  return e;
}

LinearExpression& LinearExpression::operator+=(const LinearExpression& other) {
  for (const auto& [name, coeff] : other.terms_) add(name, coeff);
  constant_ += other.constant_;
  return *this;
}

LinearExpression& LinearExpression::operator-=(const LinearExpression& other) {
  for (const auto& [name, coeff] : other.terms_) add(name, -coeff);
  constant_ -= other.constant_;
  return *this;
}

LinearExpression& LinearExpression::operator*=(double factor) {
  if (factor == 0.0) {
    terms_.clear();
    constant_ = 0.0;
    return *this;
  }
  for (auto& [name, coeff] : terms_) coeff *= factor;
  constant_ *= factor;
  return *this;
}

// ---------------------------------------------------------------------------

namespace {

bool within(double lhs, double rhs, double eps) {
  return lhs <= rhs + eps * std::max(1.0, std::abs(rhs));
}

}  // namespace

bool Constraint::holds(const Valuation& v, double eps) const {
  return within(lhs.evaluate(v), rhs, eps);
}

Constraint less_equal(const LinearExpression& lhs, double rhs) {
  Constraint c;
  c.lhs = lhs;
  c.rhs = rhs - lhs.constant();
  c.lhs.add_constant(-lhs.constant());
  return c;
}

Constraint greater_equal(const LinearExpression& lhs, double rhs) {
  return less_equal(-lhs, -rhs);
}

std::pair<Constraint, Constraint> equal_to(const LinearExpression& lhs, double rhs) {
  return {less_equal(lhs, rhs), greater_equal(lhs, rhs)};
}

bool GuardedConstraint::guard_active(const Valuation& v) const {
  auto it = v.find(guard);
  if (it == v.end()) {
    throw Error(ErrorCode::InvalidArgument, "valuation has no value for variable '" + guard + "'");
  }
  const bool on = it->second >= 0.5;
  return polarity == Polarity::Positive ? on : !on;
}

bool GuardedConstraint::holds(const Valuation& v, double eps) const {
  if (!guard_active(v)) {
    // Body variables still have to be assigned.
    (void)body.lhs.evaluate(v);
    return true;
  }
  return body.holds(v, eps);
}

// ---------------------------------------------------------------------------

Predicate& Predicate::add(Constraint c) {
  plain.push_back(std::move(c));
  return *this;
}

Predicate& Predicate::add_le(const LinearExpression& lhs, double rhs) {
  return add(less_equal(lhs, rhs));
}

Predicate& Predicate::add_ge(const LinearExpression& lhs, double rhs) {
  return add(greater_equal(lhs, rhs));
}

Predicate& Predicate::add_eq(const LinearExpression& lhs, double rhs) {
  auto [a, b] = equal_to(lhs, rhs);
  add(std::move(a));
  return add(std::move(b));
}

Predicate& Predicate::add_bounds(const std::string& name, double lo, double hi) {
  add_ge(LinearExpression::variable(name), lo);
  return add_le(LinearExpression::variable(name), hi);
}

Predicate& Predicate::add_guarded(const std::string& guard, Polarity polarity, Constraint body) {
  guarded.push_back({guard, polarity, std::move(body)});
  return *this;
}

Predicate& Predicate::add_guarded_le(const std::string& guard, Polarity polarity,
                                     const LinearExpression& lhs, double rhs) {
  return add_guarded(guard, polarity, less_equal(lhs, rhs));
}

Predicate& Predicate::add_guarded_ge(const std::string& guard, Polarity polarity,
                                     const LinearExpression& lhs, double rhs) {
  return add_guarded(guard, polarity, greater_equal(lhs, rhs));
}

Predicate& Predicate::add_guarded_eq(const std::string& guard, Polarity polarity,
                                     const LinearExpression& lhs, double rhs) {
  auto [a, b] = equal_to(lhs, rhs);
  add_guarded(guard, polarity, std::move(a));
  return add_guarded(guard, polarity, std::move(b));
}

Predicate& Predicate::append(const Predicate& other) {
  plain.insert(plain.end(), other.plain.begin(), other.plain.end());
  guarded.insert(guarded.end(), other.guarded.begin(), other.guarded.end());
  return *this;
}

std::set<std::string> Predicate::variables() const {
  std::set<std::string> out;
  for (const auto& c : plain) {
    for (const auto& [name, _] : c.lhs.terms()) out.insert(name);
  }
  for (const auto& g : guarded) {
    out.insert(g.guard);
    for (const auto& [name, _] : g.body.lhs.terms()) out.insert(name);
  }
  return out;
}

bool evaluate(const Predicate& p, const Valuation& v, double eps) {
  bool ok = true;
  // Every constraint is evaluated so that missing assignments are always
  // reported, even after a violation has been found.
  for (const auto& c : p.plain) ok = c.holds(v, eps) && ok;
  for (const auto& g : p.guarded) ok = g.holds(v, eps) && ok;
  return ok;
}

// ---------------------------------------------------------------------------

Box bound_box(const Predicate& p, std::span<const VariableDecl> decls) {
  Box box;
  for (const auto& d : decls) box[d.name] = Interval{d.lower, d.upper};
  for (const auto& name : p.variables()) {
    if (!box.count(name)) {
      throw Error(ErrorCode::Model, "variable '" + name + "' is not declared");
    }
  }
  for (const auto& c : p.plain) {
    if (c.lhs.terms().size() != 1) continue;
    const auto& [name, a] = *c.lhs.terms().begin();
    Interval& iv = box[name];
    const double bound = c.rhs / a;
    if (a > 0) {
      iv.hi = std::min(iv.hi, bound);
    } else {
      iv.lo = std::max(iv.lo, bound);
    }
  }
  for (const auto& [name, iv] : box) {
    if (iv.empty()) {
      throw Error(ErrorCode::Infeasible,
                  "predicate is infeasible: empty interval for variable '" + name + "'");
    }
  }
  return box;
}

Predicate to_conjunctive(const Predicate& p, std::span<const VariableDecl> decls) {
  for (const auto& d : decls) validate(d);
  if (p.guarded.empty()) return p;

  // Contradictory single-variable rows stay in the output, so big-M values
  // taken over the declared box keep the result equivalent.
  Box box;
  try {
    box = bound_box(p, decls);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    box = bound_box(Predicate{}, decls);
  }
  Predicate out;
  out.plain = p.plain;
  for (const auto& g : p.guarded) {
    auto it = std::find_if(decls.begin(), decls.end(),
                           [&](const VariableDecl& d) { return d.name == g.guard; });
    if (it == decls.end() || it->kind != VarKind::Boolean) {
      throw Error(ErrorCode::Model, "guard '" + g.guard + "' is not a declared boolean");
    }
    const double big_m = std::max(0.0, g.body.lhs.range(box).hi - g.body.rhs);
    Constraint c;
    c.lhs = g.body.lhs;
    if (g.polarity == Polarity::Positive) {
      // L - M(1 - y) <= b
      c.lhs.add(g.guard, big_m);
      c.rhs = g.body.rhs + big_m;
    } else {
      // L - M y <= b
      c.lhs.add(g.guard, -big_m);
      c.rhs = g.body.rhs;
    }
    out.plain.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string primed_name(const std::string& name) { return name + "'"; }

std::string unprimed_name(const std::string& name) {
  if (name.empty() || name.back() != '\'') {
    throw Error(ErrorCode::InvalidArgument, "'" + name + "' is not a primed name");
  }
  return name.substr(0, name.size() - 1);
}

namespace {

LinearExpression rename(const LinearExpression& e, const std::map<std::string, std::string>& map) {
  LinearExpression out = LinearExpression::constant_value(e.constant());
  for (const auto& [name, coeff] : e.terms()) {
    auto it = map.find(name);
    out.add(it == map.end() ? name : it->second, coeff);
  }
  return out;
}

Predicate rename(const Predicate& p, const std::map<std::string, std::string>& map) {
  const auto vars = p.variables();
  for (const auto& [from, to] : map) {
    if (vars.count(to) && !map.count(to)) {
      throw Error(ErrorCode::InvalidArgument,
                  "renaming '" + from + "' collides with existing variable '" + to + "'");
    }
  }
  Predicate out;
  for (const auto& c : p.plain) out.plain.push_back({rename(c.lhs, map), c.rhs});
  for (const auto& g : p.guarded) {
    auto it = map.find(g.guard);
    out.guarded.push_back({it == map.end() ? g.guard : it->second, g.polarity,
                           {rename(g.body.lhs, map), g.body.rhs}});
  }
  return out;
}

}  // namespace

Predicate prime(const Predicate& p, std::span<const std::string> vars) {
  std::map<std::string, std::string> map;
  for (const auto& v : vars) map[v] = primed_name(v);
  return rename(p, map);
}

Predicate unprime(const Predicate& p, std::span<const std::string> vars) {
  std::map<std::string, std::string> map;
  for (const auto& v : vars) map[v] = unprimed_name(v);
  return rename(p, map);
}

}  // namespace qsynth
