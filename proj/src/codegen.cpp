#include "qsynth/codegen.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <tuple>

#include "qsynth/error.hpp"
#include "qsynth/synthesis.hpp"

namespace qsynth {

int DecisionTree::depth() const {
  std::vector<int> memo(nodes.size(), -1);
  std::function<int(int)> visit = [&](int id) -> int {
    const TreeNode& n = nodes.at(id);
    if (n.leaf()) return 0;
    if (memo[id] >= 0) return memo[id];
    return memo[id] = 1 + std::max(visit(n.zero), visit(n.one));
  };
  return root < 0 ? 0 : visit(root);
}

std::vector<BitRef> interleaved_order(const QuantSchema& s) {
  int top = 0;
  for (const auto& ax : s.axes()) top = std::max(top, ax.bits);
  std::vector<BitRef> order;
  for (int level = top - 1; level >= 0; --level) {
    for (std::size_t i = 0; i < s.dims(); ++i) {
      if (s.axes()[i].bits > level) order.push_back({i, level});
    }
  }
  return order;
}

std::uint64_t cell_bits(const QuantSchema& s, const std::vector<BitRef>& order, const Cell& c) {
  if (c.size() != s.dims()) throw Error(ErrorCode::InvalidArgument, "cell has the wrong dimension");
  std::uint64_t bits = 0;
  for (const auto& ref : order) bits = (bits << 1) | ((static_cast<std::uint64_t>(c[ref.axis]) >> ref.level) & 1);
  return bits;
}

namespace {

Cell cell_of_bits(const QuantSchema& s, const std::vector<BitRef>& order, std::uint64_t bits) {
  Cell c(s.dims(), 0);
  const int total = static_cast<int>(order.size());
  for (int j = 0; j < total; ++j) {
    if ((bits >> (total - 1 - j)) & 1) c[order[j].axis] |= std::int64_t{1} << order[j].level;
  }
  return c;
}

class Builder {
 public:
  explicit Builder(bool merge) : merge_(merge) {}

  int leaf(std::int64_t value) { return intern({-1, value, -1, -1}); }
  int node(int bit, int zero, int one) {
    if (merge_ && zero == one) return zero;
    return intern({bit, kFault, zero, one});
  }
  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  int intern(const TreeNode& n) {
    const auto key = std::make_tuple(n.bit, n.value, n.zero, n.one);
    if (merge_) {
      auto it = index_.find(key);
      if (it != index_.end()) return it->second;
    }
    nodes_.push_back(n);
    const int id = static_cast<int>(nodes_.size()) - 1;
    if (merge_) index_.emplace(key, id);
    return id;
  }

  bool merge_;
  std::vector<TreeNode> nodes_;
  std::map<std::tuple<int, std::int64_t, int, int>, int> index_;
};

DecisionTree build_tree(const QuantSchema& s, const std::vector<std::int64_t>& table, bool merge) {
  if (table.size() != s.cell_count()) throw Error(ErrorCode::InvalidArgument, "table size does not match the schema");
  DecisionTree t;
  t.order = interleaved_order(s);
  const int total = t.total_bits();
  if (total > 24) throw Error(ErrorCode::InvalidArgument, "too many state bits for a decision tree");
  Builder b(merge);
  std::vector<int> level(std::size_t{1} << total);
  for (std::uint64_t bits = 0; bits < level.size(); ++bits) {
    level[bits] = b.leaf(table[s.index_of(cell_of_bits(s, t.order, bits))]);
  }
  for (int depth = total - 1; depth >= 0; --depth) {
    std::vector<int> up(std::size_t{1} << depth);
    for (std::size_t p = 0; p < up.size(); ++p) up[p] = b.node(depth, level[2 * p], level[2 * p + 1]);
    level = std::move(up);
  }
  t.root = level[0];
  t.nodes = b.take();
  return t;
}

}  // namespace

DecisionTree compile_table(const QuantSchema& s, const std::vector<std::int64_t>& table) {
  return build_tree(s, table, true);
}

DecisionTree compile_table_unmerged(const QuantSchema& s, const std::vector<std::int64_t>& table) {
  return build_tree(s, table, false);
}

DecisionTree compile_controller(const Controller& k) {
  std::vector<std::int64_t> table(k.num_cells(), kFault);
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) {
    if (auto a = k.chosen(c)) table[c] = *a;
  }
  return compile_table(k.schema(), table);
}

DecisionTree compile_region(const Controller& k) {
  std::vector<std::int64_t> table(k.num_cells(), 0);
  for (std::uint64_t c = 0; c < k.num_cells(); ++c) table[c] = k.controllable(c) ? 1 : 0;
  return compile_table(k.schema(), table);
}

Lookup interpret(const DecisionTree& t, std::uint64_t bits) {
  Lookup out;
  const int total = t.total_bits();
  int id = t.root;
  while (!t.nodes.at(id).leaf()) {
    const TreeNode& n = t.nodes[id];
    ++out.tests;
    id = ((bits >> (total - 1 - n.bit)) & 1) ? n.one : n.zero;
  }
  out.value = t.nodes[id].value;
  return out;
}

Lookup interpret(const DecisionTree& t, const QuantSchema& s, const Cell& c) {
  return interpret(t, cell_bits(s, t.order, c));
}

DecisionTree canonical(const DecisionTree& t) {
  DecisionTree out;
  out.order = t.order;
  Builder b(true);
  std::map<int, int> seen;
  std::function<int(int)> visit = [&](int id) -> int {
    if (auto it = seen.find(id); it != seen.end()) return it->second;
    const TreeNode& n = t.nodes.at(id);
    const int mapped = n.leaf() ? b.leaf(n.value) : [&] {
      const int zero = visit(n.zero);
      const int one = visit(n.one);
      return b.node(n.bit, zero, one);
    }();
    seen.emplace(id, mapped);
    return mapped;
  };
  out.root = t.root < 0 ? -1 : visit(t.root);
  out.nodes = b.take();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string value_text(std::int64_t v) { return v == kFault ? "FAULT" : std::to_string(v); }

void emit_node(std::ostringstream& out, const DecisionTree& t, int id, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const TreeNode& n = t.nodes.at(id);
  if (n.leaf()) {
    out << pad << "return " << value_text(n.value) << ";\n";
    return;
  }
  out << pad << "if ((bits >> " << (t.total_bits() - 1 - n.bit) << ") & 1) {\n";
  emit_node(out, t, n.one, indent + 1);
  out << pad << "} else {\n";
  emit_node(out, t, n.zero, indent + 1);
  out << pad << "}\n";
}

void emit_function(std::ostringstream& out, const std::string& name, const DecisionTree& t) {
  out << "int " << name << "(unsigned long bits) {\n";
  emit_node(out, t, t.root, 1);
  out << "}\n";
}

}  // namespace

std::string emit_source(const DecisionTree& law, const DecisionTree& region, const QuantSchema& s,
                        const SourceInfo& info) {
  if (law.order != region.order) throw Error(ErrorCode::InvalidArgument, "trees use different bit orders");
  std::ostringstream out;
  out << "/* Quantized controller for " << info.model << ".\n"
      << " * model_hash=" << info.model_hash;
  if (!info.config_hash.empty()) out << " config_hash=" << info.config_hash;
  out << " bits=" << info.bits << " inputs=" << info.num_inputs << "\n"
      << " * goal: " << info.goal << "\n"
      << " * control_law returns the action with the first input in its most\n"
      << " * significant bit, or FAULT outside the controllable region.\n"
      << " */\n";
  out << "/* order:";
  for (const auto& ref : law.order) out << ' ' << s.axes()[ref.axis].var << ':' << ref.axis << ':' << ref.level;
  out << " */\n";
  out << "#define FAULT (-1)\n";
  out << "#define STATE_BITS " << law.total_bits() << "\n\n";
  emit_function(out, "control_law", law);
  out << '\n';
  emit_function(out, "controllable_region", region);
  return out.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& what, std::size_t line) {
  throw Error(ErrorCode::InvalidArgument, "controller source line " + std::to_string(line + 1) + ": " + what);
}

class Parser {
 public:
  Parser(const std::vector<std::string>& lines, int total) : lines_(lines), total_(total) {}

  DecisionTree function(std::size_t& pos, const std::string& name, const std::vector<BitRef>& order) {
    skip_blank(pos);
    if (pos >= lines_.size() || lines_[pos] != "int " + name + "(unsigned long bits) {") {
      bad("expected definition of " + name, pos);
    }
    ++pos;
    Builder b(true);
    DecisionTree t;
    t.order = order;
    t.root = statement(pos, b);
    if (pos >= lines_.size() || lines_[pos] != "}") bad("expected end of " + name, pos);
    ++pos;
    t.nodes = b.take();
    return t;
  }

  static void skip_blank(std::size_t& pos, const std::vector<std::string>& lines) {
    while (pos < lines.size() && lines[pos].empty()) ++pos;
  }

 private:
  void skip_blank(std::size_t& pos) { skip_blank(pos, lines_); }

  int statement(std::size_t& pos, Builder& b) {
    if (pos >= lines_.size()) bad("unexpected end of text", pos);
    const std::string& l = lines_[pos];
    if (l.rfind("return ", 0) == 0 && l.back() == ';') {
      const std::string v = l.substr(7, l.size() - 8);
      ++pos;
      if (v == "FAULT") return b.leaf(kFault);
      try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) bad("bad return value", pos - 1);
        return b.leaf(x);
      } catch (const std::logic_error&) {
        bad("bad return value", pos - 1);
      }
    }
    const std::string head = "if ((bits >> ";
    const std::string tail = ") & 1) {";
    if (l.rfind(head, 0) != 0 || l.size() <= head.size() + tail.size() ||
        l.compare(l.size() - tail.size(), tail.size(), tail) != 0) {
      bad("expected a conditional or return", pos);
    }
    int shift = -1;
    try {
      shift = std::stoi(l.substr(head.size(), l.size() - head.size() - tail.size()));
    } catch (const std::logic_error&) {
      bad("bad shift", pos);
    }
    if (shift < 0 || shift >= total_) bad("shift out of range", pos);
    ++pos;
    const int one = statement(pos, b);
    if (pos >= lines_.size() || lines_[pos] != "} else {") bad("expected else branch", pos);
    ++pos;
    const int zero = statement(pos, b);
    if (pos >= lines_.size() || lines_[pos] != "}") bad("expected closing brace", pos);
    ++pos;
    return b.node(total_ - 1 - shift, zero, one);
  }

  const std::vector<std::string>& lines_;
  int total_;
};

}  // namespace

ParsedSource parse_source(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) lines.push_back(trim(raw));
  ParsedSource out;
  out.lines = lines.size();

  std::vector<BitRef> order;
  int total = -1;
  std::size_t pos = 0;
  bool have_order = false;
  for (; pos < lines.size(); ++pos) {
    const std::string& l = lines[pos];
    if (l.rfind("/* order:", 0) == 0) {
      std::istringstream fields(l.substr(9, l.size() - 9 - 2));
      std::string f;
      while (fields >> f) {
        const auto a = f.rfind(':');
        const auto b = f.rfind(':', a - 1);
        if (a == std::string::npos || b == std::string::npos) bad("bad bit order entry", pos);
        order.push_back({static_cast<std::size_t>(std::stoul(f.substr(b + 1, a - b - 1))),
                         std::stoi(f.substr(a + 1))});
      }
      have_order = true;
    } else if (l.rfind("#define STATE_BITS ", 0) == 0) {
      total = std::stoi(l.substr(19));
      ++pos;
      break;
    }
  }
  if (!have_order || total != static_cast<int>(order.size())) bad("missing or inconsistent bit order", pos);
  Parser p(lines, total);
  out.law = p.function(pos, "control_law", order);
  out.region = p.function(pos, "controllable_region", order);
  Parser::skip_blank(pos, lines);
  if (pos != lines.size()) bad("trailing text", pos);
  return out;
}

}  // namespace qsynth
