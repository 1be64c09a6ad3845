#pragma once

// Decision-tree form of a controller: a trie over the quantized cell bits,
// identical subtrees shared, emitted as nested conditionals and read back
// by a small interpreter.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsynth/quantization.hpp"

namespace qsynth {

class Controller;

inline constexpr std::int64_t kFault = -1;

struct TreeNode {
  int bit = -1;               // position in the interleaved bit string; -1 for leaves
  std::int64_t value = kFault;  // leaf payload
  int zero = -1;
  int one = -1;

  bool leaf() const { return bit < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Which state variable and which of its bits a position reads.
struct BitRef {
  std::size_t axis = 0;
  int level = 0;  // 0 = least significant
  bool operator==(const BitRef&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int root = -1;
  std::vector<BitRef> order;  // interleaved, most significant first

  int total_bits() const { return static_cast<int>(order.size()); }
  /// Longest root-to-leaf path counted in tests.
  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

/// Interleaved bit order: the top bit of every variable, then the next, ...
std::vector<BitRef> interleaved_order(const QuantSchema& s);

/// Packs a cell into the interleaved bit string (first position in the most
/// significant bit).
std::uint64_t cell_bits(const QuantSchema& s, const std::vector<BitRef>& order, const Cell& c);

/// Tree whose leaves are `table[cell index]` (kFault for no entry), with
/// identical subtrees shared and redundant tests removed.
DecisionTree compile_table(const QuantSchema& s, const std::vector<std::int64_t>& table);
/// Unmerged trie of the same table, for checking the merge.
DecisionTree compile_table_unmerged(const QuantSchema& s, const std::vector<std::int64_t>& table);

/// Control law: chosen action per controllable cell, FAULT elsewhere.
DecisionTree compile_controller(const Controller& k);
/// Controllable-region test: 1 inside, 0 outside.
DecisionTree compile_region(const Controller& k);

struct Lookup {
  std::int64_t value = kFault;
  int tests = 0;  // conditionals evaluated on the path
};

Lookup interpret(const DecisionTree& t, std::uint64_t bits);
Lookup interpret(const DecisionTree& t, const QuantSchema& s, const Cell& c);

/// Reassigns node ids in depth-first order so structurally equal trees
/// compare equal.
DecisionTree canonical(const DecisionTree& t);

struct SourceInfo {
  std::string model;
  std::string model_hash;
  std::string goal;
  int bits = 0;
  std::size_t num_inputs = 0;
  std::string config_hash;
};

/// C source defining control_law(bits) and controllable_region(bits) as
/// nested conditionals.
std::string emit_source(const DecisionTree& law, const DecisionTree& region, const QuantSchema& s,
                        const SourceInfo& info);

struct ParsedSource {
  DecisionTree law;
  DecisionTree region;
  std::size_t lines = 0;
};

/// Reads back text produced by emit_source. Throws Error(InvalidArgument)
/// on anything else.
ParsedSource parse_source(const std::string& text);

}  // namespace qsynth
