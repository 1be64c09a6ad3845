#include "qsynth/dtlhs.hpp"

#include <set>

#include "qsynth/error.hpp"

namespace qsynth {

void Dtlhs::validate() const {
  std::set<std::string> names;
  auto declare = [&](const std::vector<VariableDecl>& list) {
    for (const auto& d : list) {
      qsynth::validate(d);
      if (!names.insert(d.name).second) {
        throw Error(ErrorCode::Model, "variable '" + d.name + "' is declared more than once");
      }
    }
  };
  declare(state);
  declare(inputs);
  declare(aux);
  declare(next);
  if (state.empty()) throw Error(ErrorCode::Model, "model has no state variables");
  if (next.size() != state.size()) {
    throw Error(ErrorCode::Model, "every state variable needs exactly one next-state declaration");
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (next[i].name != primed_name(state[i].name) || next[i].kind != state[i].kind) {
      throw Error(ErrorCode::Model, "next-state declaration for '" + state[i].name +
                                        "' must be '" + primed_name(state[i].name) +
                                        "' of the same kind");
    }
  }
  for (const auto& v : transition.variables()) {
    if (!names.count(v)) throw Error(ErrorCode::Model, "transition uses undeclared variable '" + v + "'");
  }
  for (const auto& g : transition.guarded) {
    bool boolean = false;
    for (const auto* list : {&inputs, &aux, &state}) {
      for (const auto& d : *list) boolean = boolean || (d.name == g.guard && d.kind == VarKind::Boolean);
    }
    if (!boolean) throw Error(ErrorCode::Model, "guard '" + g.guard + "' is not a boolean variable");
  }
  if (!goal_var.empty()) state_decl(goal_var);
}

std::vector<VariableDecl> Dtlhs::all_decls() const {
  std::vector<VariableDecl> out;
  out.reserve(state.size() + inputs.size() + aux.size() + next.size());
  out.insert(out.end(), state.begin(), state.end());
  out.insert(out.end(), inputs.begin(), inputs.end());
  out.insert(out.end(), aux.begin(), aux.end());
  out.insert(out.end(), next.begin(), next.end());
  return out;
}

std::vector<std::string> Dtlhs::state_names() const {
  std::vector<std::string> out;
  for (const auto& d : state) out.push_back(d.name);
  return out;
}

std::vector<std::string> Dtlhs::input_names() const {
  std::vector<std::string> out;
  for (const auto& d : inputs) out.push_back(d.name);
  return out;
}

const VariableDecl& Dtlhs::state_decl(const std::string& var) const {
  for (const auto& d : state) {
    if (d.name == var) return d;
  }
  throw Error(ErrorCode::Model, "'" + var + "' is not a state variable");
}

std::vector<VariableDecl> primed_decls(const std::vector<VariableDecl>& state,
                                       const std::vector<Interval>& bounds) {
  std::vector<VariableDecl> out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    VariableDecl d = state[i];
    d.name = primed_name(d.name);
    d.lower = bounds[i].lo;
    d.upper = bounds[i].hi;
    out.push_back(d);
  }
  return out;
}

}  // namespace qsynth
