#include <cctype>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "qsynth/milp.hpp"

namespace qsynth::milp {

namespace {

// LP-format names may not contain spaces or operators; primes are legal.
std::string lp_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' ||
                    c == '.' || c == '[' || c == ']';
    out += ok ? c : '_';
  }
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0])) || out[0] == '.') {
    out = "v_" + out;
  }
  return out;
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_terms(std::ostream& out, const LinearExpression& e) {
  bool first = true;
  for (const auto& [name, coeff] : e.terms()) {
    if (coeff < 0) {
      out << (first ? "- " : " - ");
    } else if (!first) {
      out << " + ";
    }
    out << number(std::abs(coeff)) << ' ' << lp_name(name);
    first = false;
  }
}

}  // namespace

void write_lp_format(std::ostream& out, const MilpProblem& problem) {
  if (!problem.constraints.is_conjunctive()) {
    throw Error(ErrorCode::Model, "LP export requires a conjunctive problem");
  }
  out << "\\ query kind " << problem.query_kind << '\n';
  if (problem.objective) {
    const auto& [expr, sense] = *problem.objective;
    out << (sense == Sense::Maximize ? "Maximize\n" : "Minimize\n") << " obj: ";
    if (expr.terms().empty()) {
      out << "0 " << lp_name(problem.decls.empty() ? "x" : problem.decls.front().name);
    } else {
      write_terms(out, expr);
    }
    if (expr.constant() != 0.0) {
      out << (expr.constant() < 0 ? " - " : " + ") << number(std::abs(expr.constant()));
    }
    out << '\n';
  } else {
    out << "Minimize\n obj: ";
    if (problem.decls.empty()) {
      out << '\n';
    } else {
      out << "0 " << lp_name(problem.decls.front().name) << '\n';
    }
  }

  out << "Subject To\n";
  int k = 0;
  for (const auto& c : problem.constraints.plain) {
    if (c.lhs.terms().empty()) continue;
    out << " c" << k++ << ": ";
    write_terms(out, c.lhs);
    out << " <= " << number(c.rhs) << '\n';
  }

  out << "Bounds\n";
  for (const auto& d : problem.decls) {
    if (d.kind == VarKind::Boolean) continue;
    out << ' ' << number(d.lower) << " <= " << lp_name(d.name) << " <= " << number(d.upper)
        << '\n';
  }

  bool header = false;
  for (const auto& d : problem.decls) {
    if (d.kind != VarKind::Integer) continue;
    if (!header) out << "General\n";
    header = true;
    out << ' ' << lp_name(d.name) << '\n';
  }
  header = false;
  for (const auto& d : problem.decls) {
    if (d.kind != VarKind::Boolean) continue;
    if (!header) out << "Binary\n";
    header = true;
    out << ' ' << lp_name(d.name) << '\n';
  }
  out << "End\n";
}

}  // namespace qsynth::milp
