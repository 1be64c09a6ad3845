#include "qsynth/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qsynth/error.hpp"

namespace qsynth {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::Model, "model file: " + what); }

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

VariableDecl read_decl(const json& j, bool primed) {
  if (!j.is_object()) bad("variable entries must be objects");
  const std::string name = field(j, "name").get<std::string>();
  const VarKind kind = var_kind_from_string(j.value("kind", primed ? "real" : ""));
  if (kind == VarKind::Boolean) return VariableDecl::boolean(name);
  const double lo = field(j, "lower").get<double>();
  const double hi = field(j, "upper").get<double>();
  return kind == VarKind::Real ? VariableDecl::real(name, lo, hi) : VariableDecl::integer(name, lo, hi);
}

std::vector<VariableDecl> read_decls(const json& doc, const char* key, bool primed = false) {
  std::vector<VariableDecl> out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) bad(std::string("'") + key + "' must be an array");
  for (const auto& j : *it) out.push_back(read_decl(j, primed));
  return out;
}

void read_constraint(const json& j, Predicate& p) {
  if (!j.is_object()) bad("constraints must be objects");
  LinearExpression e;
  for (const auto& [name, coeff] : field(j, "terms").items()) e.add(name, coeff.get<double>());
  const std::string sense = field(j, "sense").get<std::string>();
  const double rhs = field(j, "rhs").get<double>();
  std::vector<Constraint> parts;
  if (sense == "<=") {
    parts.push_back(less_equal(e, rhs));
  } else if (sense == ">=") {
    parts.push_back(greater_equal(e, rhs));
  } else if (sense == "==") {
    auto [a, b] = equal_to(e, rhs);
    parts = {a, b};
  } else {
    bad("unknown sense '" + sense + "'");
  }
  auto g = j.find("guard");
  const bool negated = j.value("negated", false);
  for (auto& c : parts) {
    if (g == j.end()) {
      if (negated) bad("'negated' needs a guard");
      p.add(std::move(c));
    } else {
      p.add_guarded(g->get<std::string>(), negated ? Polarity::Negated : Polarity::Positive, std::move(c));
    }
  }
}

json decl_json(const VariableDecl& d) {
  json j{{"name", d.name}, {"kind", to_string(d.kind)}};
  if (d.kind != VarKind::Boolean) {
    j["lower"] = d.lower;
    j["upper"] = d.upper;
  }
  return j;
}

json constraint_json(const Constraint& c) {
  json terms = json::object();
  for (const auto& [name, a] : c.lhs.terms()) terms[name] = a;
  return json{{"terms", terms}, {"sense", "<="}, {"rhs", c.rhs}};
}

}  // namespace

Dtlhs model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad(e.what());
  }
  if (!doc.is_object()) bad("top level must be an object");
  Dtlhs h;
  try {
    h.name = doc.value("name", "model");
    h.state = read_decls(doc, "state");
    h.inputs = read_decls(doc, "inputs");
    h.aux = read_decls(doc, "aux");
    h.next = read_decls(doc, "next", true);
    h.goal_var = doc.value("goal_var", h.state.empty() ? "" : h.state.front().name);
    for (const auto& c : field(doc, "constraints")) read_constraint(c, h.transition);
  } catch (const json::exception& e) {
    bad(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Model) throw;
    bad(e.what());
  }
  h.validate();
  return h;
}

Dtlhs load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read model file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return model_from_json(text.str());
}

std::string model_to_json(const Dtlhs& h) {
  json doc;
  doc["name"] = h.name;
  doc["goal_var"] = h.goal_var;
  for (const auto& [key, list] : {std::pair{"state", &h.state}, {"inputs", &h.inputs}, {"aux", &h.aux},
                                  {"next", &h.next}}) {
    json arr = json::array();
    for (const auto& d : *list) arr.push_back(decl_json(d));
    doc[key] = arr;
  }
  json cs = json::array();
  for (const auto& c : h.transition.plain) cs.push_back(constraint_json(c));
  for (const auto& g : h.transition.guarded) {
    json j = constraint_json(g.body);
    j["guard"] = g.guard;
    j["negated"] = g.polarity == Polarity::Negated;
    cs.push_back(j);
  }
  doc["constraints"] = cs;
  return doc.dump(2);
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string model_hash(const Dtlhs& h) { return hex_hash(fnv1a(model_to_json(h))); }

}  // namespace qsynth
