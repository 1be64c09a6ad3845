#pragma once

// Discrete time linear hybrid systems and the built-in buck converter
// models.

#include <array>
#include <string>
#include <vector>

#include "qsynth/predicate.hpp"

namespace qsynth {

/// A DTLHS (X, U, Y, N). `next` holds the primed state declarations; their
/// bounds are wide enough to contain every image of the dynamics so that
/// exits from the state rectangle stay representable.
struct Dtlhs {
  std::string name;
  std::vector<VariableDecl> state;
  std::vector<VariableDecl> inputs;
  std::vector<VariableDecl> aux;
  std::vector<VariableDecl> next;
  Predicate transition;
  std::string goal_var;  // state variable targeted by the default goal

  /// Throws Error(Model) on overlapping lists, undeclared variables,
  /// unbounded declarations or mismatched primed names.
  void validate() const;

  /// X, U, Y and X' in that order.
  std::vector<VariableDecl> all_decls() const;
  std::vector<std::string> state_names() const;
  std::vector<std::string> input_names() const;
  const VariableDecl& state_decl(const std::string& name) const;
};

/// Next-state declarations for `state` with bounds given per variable.
std::vector<VariableDecl> primed_decls(const std::vector<VariableDecl>& state,
                                       const std::vector<Interval>& bounds);

struct BuckParams {
  double sampling = 1e-6;    // T, seconds
  double inductance = 2e-4;  // L, henry
  double capacitance = 5e-5; // C, farad
  double load = 5.0;         // R, ohm
  double r_inductor = 0.1;   // inductor series resistance, ohm
  double r_capacitor = 0.1;  // capacitor series resistance, ohm
  double supply = 15.0;      // single-input supply voltage
  std::vector<double> supplies;  // multi-input supplies V_1 < ... < V_n; empty = 10 i
  double r_on = 0.0;
  double r_off = 1e4;
  double rho_load = 0.25;
  double rho_supply = 0.25;

  /// Throws Error(InvalidArgument) when a parameter is out of range.
  void validate() const;
  /// Supplies for an n-input converter (explicit list or the 10 i default).
  std::vector<double> supplies_for(int n) const;
};

/// Continuous-time rates of the two state equations.
struct DynamicsCoefficients {
  double a11 = 0.0;
  double a12 = 0.0;
  double a13 = 0.0;
  double a21 = 0.0;
  double a22 = 0.0;
  double a23 = 0.0;
};

/// Throws Error(InvalidArgument) when `load` <= 0.
DynamicsCoefficients coefficients(const BuckParams& p, double load);

/// Which end of the load interval each output-voltage coefficient takes in
/// one octant's envelope: false = R(1 - rho), true = R(1 + rho).
struct EnvelopeChoice {
  std::array<bool, 3> upper{};  // coefficients of i_L, v_O, v_D
  std::array<bool, 3> lower{};
};

/// Octant index bits: 4 = i_L >= 0, 2 = v_O >= 0, 1 = v_D >= 0. Octant
/// names follow "ppp" .. "nnn" in (i_L, v_O, v_D) order.
std::string octant_name(int octant);
const std::array<EnvelopeChoice, 8>& envelope_table();

Dtlhs single_buck(const BuckParams& p = {});
Dtlhs single_buck_robust(const BuckParams& p = {});
Dtlhs multi_buck(const BuckParams& p, int n);
Dtlhs multi_buck_robust(const BuckParams& p, int n);

}  // namespace qsynth
