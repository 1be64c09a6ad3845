#include <cmath>

#include "qsynth/dtlhs.hpp"
#include "qsynth/error.hpp"

namespace qsynth {

namespace {

constexpr double kCurrentBound = 1e3;
constexpr double kVoltageBound = 1e7;

LinearExpression var(const std::string& name, double coeff = 1.0) {
  return LinearExpression::variable(name, coeff);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid buck parameter: " + what);
}

// Range of sum(coeff_i * x_i) over the given intervals.
Interval affine_range(const std::vector<std::pair<double, Interval>>& terms) {
  Interval r{0.0, 0.0};
  for (const auto& [a, iv] : terms) {
    r.lo += std::min(a * iv.lo, a * iv.hi);
    r.hi += std::max(a * iv.lo, a * iv.hi);
  }
  return r;
}

Interval widen(Interval iv) {
  const double pad = 1e-6 * std::max(1.0, std::max(std::abs(iv.lo), std::abs(iv.hi)));
  return {iv.lo - pad, iv.hi + pad};
}

struct Skeleton {
  Dtlhs h;
  Interval i_l{-4.0, 4.0};
  Interval v_o{-1.0, 7.0};
  Interval v_d{-kVoltageBound, kVoltageBound};
};

Skeleton skeleton(const std::string& name) {
  Skeleton s;
  s.h.name = name;
  s.h.state = {VariableDecl::real("i_L", s.i_l.lo, s.i_l.hi),
               VariableDecl::real("v_O", s.v_o.lo, s.v_o.hi)};
  s.h.goal_var = "v_O";
  return s;
}

void add_current(Dtlhs& h, const std::string& name) {
  h.aux.push_back(VariableDecl::real(name, -kCurrentBound, kCurrentBound));
}

void add_voltage(Dtlhs& h, const std::string& name) {
  h.aux.push_back(VariableDecl::real(name, -kVoltageBound, kVoltageBound));
}

// Explicit safety bounds on every state and auxiliary real variable.
void add_safety_bounds(Dtlhs& h) {
  for (const auto* list : {&h.state, &h.aux}) {
    for (const auto& d : *list) {
      if (d.kind == VarKind::Real) h.transition.add_bounds(d.name, d.lower, d.upper);
    }
  }
}

// Inductor current dynamics (shared by every variant).
void add_current_dynamics(Dtlhs& h, const BuckParams& p, const DynamicsCoefficients& a) {
  const double t = p.sampling;
  h.transition.add_eq(var("i_L'") - var("i_L", 1.0 + t * a.a11) - var("v_O", t * a.a12) -
                          var("v_D", t * a.a13),
                      0.0);
}

void add_voltage_dynamics(Dtlhs& h, const BuckParams& p, const DynamicsCoefficients& a) {
  const double t = p.sampling;
  h.transition.add_eq(var("v_O'") - var("i_L", t * a.a21) - var("v_O", 1.0 + t * a.a22) -
                          var("v_D", t * a.a23),
                      0.0);
}

// Next-state bounds by interval arithmetic over the state rectangle and the
// declared diode voltage range. For the robust variant every load in the
// tolerance interval is covered.
void set_next_bounds(Skeleton& s, const BuckParams& p, bool robust) {
  const double t = p.sampling;
  std::vector<double> loads{p.load};
  if (robust) loads = {p.load * (1.0 - p.rho_load), p.load * (1.0 + p.rho_load)};
  Interval il{INFINITY, -INFINITY};
  Interval vo{INFINITY, -INFINITY};
  for (double r : loads) {
    const DynamicsCoefficients a = coefficients(p, r);
    const Interval x = affine_range({{1.0 + t * a.a11, s.i_l}, {t * a.a12, s.v_o}, {t * a.a13, s.v_d}});
    const Interval y = affine_range({{t * a.a21, s.i_l}, {1.0 + t * a.a22, s.v_o}, {t * a.a23, s.v_d}});
    il = {std::min(il.lo, x.lo), std::max(il.hi, x.hi)};
    vo = {std::min(vo.lo, y.lo), std::max(vo.hi, y.hi)};
  }
  s.h.next = primed_decls(s.h.state, {widen(il), widen(vo)});
}

// Switch constitutive equations: on -> v = R_on i, off -> v = R_off i.
void add_switch(Dtlhs& h, const BuckParams& p, const std::string& u, const std::string& v,
                const std::string& i) {
  h.transition.add_guarded_eq(u, Polarity::Positive, var(v) - var(i, p.r_on), 0.0);
  h.transition.add_guarded_eq(u, Polarity::Negated, var(v) - var(i, p.r_off), 0.0);
}

// Diode: conducting -> v = R_on i and i >= 0; blocking -> v = R_off i and v <= 0.
void add_diode(Dtlhs& h, const BuckParams& p, const std::string& q, const std::string& v,
               const std::string& i) {
  h.transition.add_guarded_eq(q, Polarity::Positive, var(v) - var(i, p.r_on), 0.0);
  h.transition.add_guarded_ge(q, Polarity::Positive, var(i), 0.0);
  h.transition.add_guarded_eq(q, Polarity::Negated, var(v) - var(i, p.r_off), 0.0);
  h.transition.add_guarded_le(q, Polarity::Negated, var(v), 0.0);
}

// v_D = v_u + v_extra - V, or the interval pair for a supply tolerance.
void add_supply_loop(Dtlhs& h, const LinearExpression& loop, double supply, double rho, bool robust) {
  const LinearExpression e = var("v_D") - loop;
  if (!robust) {
    h.transition.add_eq(e, -supply);
  } else {
    h.transition.add_le(e, -supply * (1.0 - rho));
    h.transition.add_ge(e, -supply * (1.0 + rho));
  }
}

const char* kSignFlags[3] = {"z_iL", "z_vO", "z_vD"};
const char* kSignVars[3] = {"i_L", "v_O", "v_D"};

// Sign flags, octant selection and the octant-guarded output-voltage
// envelope replacing the nominal voltage dynamics.
void add_load_envelope(Dtlhs& h, const BuckParams& p) {
  for (const char* z : kSignFlags) h.aux.push_back(VariableDecl::boolean(z));
  for (int o = 0; o < 8; ++o) h.aux.push_back(VariableDecl::boolean("z_" + octant_name(o)));

  for (int k = 0; k < 3; ++k) {
    h.transition.add_guarded_ge(kSignFlags[k], Polarity::Positive, var(kSignVars[k]), 0.0);
    h.transition.add_guarded_le(kSignFlags[k], Polarity::Negated, var(kSignVars[k]), 0.0);
  }

  // !z_abc -> at least one sign flag disagrees with abc.
  for (int o = 0; o < 8; ++o) {
    LinearExpression mismatch;
    for (int k = 0; k < 3; ++k) {
      const bool positive = (o >> (2 - k)) & 1;
      if (positive) {
        mismatch.add_constant(1.0);
        mismatch.add(kSignFlags[k], -1.0);
      } else {
        mismatch.add(kSignFlags[k], 1.0);
      }
    }
    h.transition.add_guarded_ge("z_" + octant_name(o), Polarity::Negated, mismatch, 1.0);
  }

  const double t = p.sampling;
  const DynamicsCoefficients lo = coefficients(p, p.load * (1.0 - p.rho_load));
  const DynamicsCoefficients hi = coefficients(p, p.load * (1.0 + p.rho_load));
  auto rhs = [&](const std::array<bool, 3>& at_high) {
    const DynamicsCoefficients& c1 = at_high[0] ? hi : lo;
    const DynamicsCoefficients& c2 = at_high[1] ? hi : lo;
    const DynamicsCoefficients& c3 = at_high[2] ? hi : lo;
    return var("i_L", t * c1.a21) + var("v_O", 1.0 + t * c2.a22) + var("v_D", t * c3.a23);
  };
  const auto& table = envelope_table();
  for (int o = 0; o < 8; ++o) {
    const std::string z = "z_" + octant_name(o);
    h.transition.add_guarded_le(z, Polarity::Positive, var("v_O'") - rhs(table[o].upper), 0.0);
    h.transition.add_guarded_ge(z, Polarity::Positive, var("v_O'") - rhs(table[o].lower), 0.0);
  }
}

Dtlhs build_single(const BuckParams& p, bool robust) {
  p.validate();
  Skeleton s = skeleton(robust ? "buck-robust" : "buck");
  Dtlhs& h = s.h;
  h.inputs = {VariableDecl::boolean("u")};
  add_current(h, "i_u");
  add_voltage(h, "v_u");
  add_current(h, "i_D");
  add_voltage(h, "v_D");
  h.aux.push_back(VariableDecl::boolean("q"));

  const DynamicsCoefficients a = coefficients(p, p.load);
  add_current_dynamics(h, p, a);
  if (robust) {
    add_load_envelope(h, p);
  } else {
    add_voltage_dynamics(h, p, a);
  }
  add_diode(h, p, "q", "v_D", "i_D");
  add_switch(h, p, "u", "v_u", "i_u");
  add_supply_loop(h, var("v_u"), p.supply, p.rho_supply, robust);
  h.transition.add_eq(var("i_D") - var("i_L") + var("i_u"), 0.0);
  add_safety_bounds(h);
  set_next_bounds(s, p, robust);
  h.validate();
  return h;
}

Dtlhs build_multi(const BuckParams& p, int n, bool robust) {
  p.validate();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "multi-input buck needs n >= 1");
  const std::vector<double> supplies = p.supplies_for(n);
  Skeleton s = skeleton((robust ? "multibuck-robust:" : "multibuck:") + std::to_string(n));
  Dtlhs& h = s.h;
  auto idx = [](const std::string& base, int i) { return base + std::to_string(i); };

  for (int j = 1; j <= n; ++j) h.inputs.push_back(VariableDecl::boolean(idx("u", j)));
  add_voltage(h, "v_D");
  for (int i = 1; i < n; ++i) add_voltage(h, idx("v_D", i));
  add_current(h, "i_D");
  for (int j = 1; j <= n; ++j) add_current(h, idx("I_u", j));
  for (int j = 1; j <= n; ++j) add_voltage(h, idx("v_u", j));
  for (int i = 0; i < n; ++i) h.aux.push_back(VariableDecl::boolean(idx("q", i)));

  const DynamicsCoefficients a = coefficients(p, p.load);
  add_current_dynamics(h, p, a);
  if (robust) {
    add_load_envelope(h, p);
  } else {
    add_voltage_dynamics(h, p, a);
  }
  add_diode(h, p, "q0", "v_D", "i_D");
  for (int i = 1; i < n; ++i) add_diode(h, p, idx("q", i), idx("v_D", i), idx("I_u", i));
  for (int j = 1; j <= n; ++j) add_switch(h, p, idx("u", j), idx("v_u", j), idx("I_u", j));

  LinearExpression kcl = var("i_L") - var("i_D");
  for (int j = 1; j <= n; ++j) kcl.add(idx("I_u", j), -1.0);
  h.transition.add_eq(kcl, 0.0);

  for (int i = 1; i < n; ++i) {
    add_supply_loop(h, var(idx("v_u", i)) + var(idx("v_D", i)), supplies[i - 1], p.rho_supply, robust);
  }
  add_supply_loop(h, var(idx("v_u", n)), supplies[n - 1], p.rho_supply, robust);
  add_safety_bounds(h);
  set_next_bounds(s, p, robust);
  h.validate();
  return h;
}

}  // namespace

void BuckParams::validate() const {
  require(sampling > 0, "sampling time must be positive");
  require(inductance > 0, "inductance must be positive");
  require(capacitance > 0, "capacitance must be positive");
  require(load > 0, "load must be positive");
  require(r_inductor > 0, "inductor resistance must be positive");
  require(r_capacitor >= 0, "capacitor resistance must be non-negative");
  require(supply > 0, "supply voltage must be positive");
  require(r_on >= 0, "on resistance must be non-negative");
  require(r_off > 0, "off resistance must be positive");
  require(rho_load >= 0 && rho_load < 1, "load tolerance must lie in [0, 1)");
  require(rho_supply >= 0 && rho_supply < 1, "supply tolerance must lie in [0, 1)");
  for (std::size_t i = 0; i < supplies.size(); ++i) {
    require(supplies[i] > 0, "supply voltages must be positive");
    require(i == 0 || supplies[i] > supplies[i - 1], "supply voltages must be strictly increasing");
  }
}

std::vector<double> BuckParams::supplies_for(int n) const {
  if (!supplies.empty()) {
    if (static_cast<int>(supplies.size()) != n) {
      throw Error(ErrorCode::InvalidArgument,
                  "expected " + std::to_string(n) + " supply voltages, got " + std::to_string(supplies.size()));
    }
    return supplies;
  }
  std::vector<double> out;
  for (int i = 1; i <= n; ++i) out.push_back(10.0 * i);
  return out;
}

DynamicsCoefficients coefficients(const BuckParams& p, double load) {
  if (!(load > 0)) throw Error(ErrorCode::InvalidArgument, "load resistance must be positive");
  const double l = p.inductance;
  const double c = p.capacitance;
  const double rc = p.r_capacitor;
  DynamicsCoefficients a;
  a.a11 = -p.r_inductor / l;
  a.a12 = -1.0 / l;
  a.a13 = -1.0 / l;
  a.a21 = load / (rc + load) * (-rc * p.r_inductor / l + 1.0 / c);
  a.a22 = -1.0 / (rc + load) * (rc * load / l + 1.0 / c);
  a.a23 = -1.0 / l * (rc * load / (rc + load));
  return a;
}

std::string octant_name(int octant) {
  std::string s;
  for (int k = 2; k >= 0; --k) s += ((octant >> k) & 1) ? 'p' : 'n';
  return s;
}

// Envelope of the output-voltage update per sign octant. a21 and a22 grow
// with the load and a23 shrinks, so the upper bound takes the high load for
// a non-negative i_L or v_O and for a non-positive v_D; the lower bound takes
// the opposite ends. Rows are indexed by octant bits (i_L, v_O, v_D).
const std::array<EnvelopeChoice, 8>& envelope_table() {
  constexpr bool m = false;  // R(1 - rho)
  constexpr bool M = true;   // R(1 + rho)
  static const std::array<EnvelopeChoice, 8> table{{
      {{m, m, M}, {M, M, m}},  // nnn
      {{m, m, m}, {M, M, M}},  // nnp
      {{m, M, M}, {M, m, m}},  // npn
      {{m, M, m}, {M, m, M}},  // npp
      {{M, m, M}, {m, M, m}},  // pnn
      {{M, m, m}, {m, M, M}},  // pnp
      {{M, M, M}, {m, m, m}},  // ppn
      {{M, M, m}, {m, m, M}},  // ppp
  }};
  return table;
}

Dtlhs single_buck(const BuckParams& p) { return build_single(p, false); }
Dtlhs single_buck_robust(const BuckParams& p) { return build_single(p, true); }
Dtlhs multi_buck(const BuckParams& p, int n) { return build_multi(p, n, false); }
Dtlhs multi_buck_robust(const BuckParams& p, int n) { return build_multi(p, n, true); }

}  // namespace qsynth
