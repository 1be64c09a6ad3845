#pragma once

// Uniform b-bit quantization of the state rectangle into cells, and the
// boolean action vectors sent through the DA converter.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsynth/dtlhs.hpp"

namespace qsynth {

struct Axis {
  std::string var;
  double lo = 0.0;
  double hi = 0.0;
  int bits = 1;

  std::int64_t count() const { return std::int64_t{1} << bits; }
  double width() const { return (hi - lo) / static_cast<double>(count()); }
  /// Boundary k in [0, count]; boundary count is exactly hi.
  double boundary(std::int64_t k) const;
  /// Index owning y: -1 below lo, count() above hi, otherwise the cell whose
  /// half-open interval contains y (hi belongs to the top cell).
  std::int64_t owner(double y) const;
};

/// Cell coordinates, one index per axis.
using Cell = std::vector<std::int64_t>;

/// Closed hull of a cell plus which upper faces are excluded.
struct CellBox {
  std::vector<Interval> bounds;
  std::vector<bool> upper_open;
};

class QuantSchema {
 public:
  /// Throws Error(InvalidArgument) on empty ranges or bits outside [1, 20].
  explicit QuantSchema(std::vector<Axis> axes);

  /// One axis per state variable over its declared bounds.
  static QuantSchema uniform(const Dtlhs& h, int bits);

  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t dims() const { return axes_.size(); }
  std::uint64_t cell_count() const { return cell_count_; }
  int total_bits() const;

  /// nullopt when some coordinate lies outside its range.
  std::optional<Cell> quantize(std::span<const double> x) const;
  /// Throws Error(InvalidArgument) on out-of-range indices.
  CellBox cell_box(const Cell& c) const;

  /// Lexicographic linear index, first axis most significant.
  std::uint64_t index_of(const Cell& c) const;
  Cell cell_at(std::uint64_t index) const;
  std::vector<Cell> enumerate_cells() const;

 private:
  std::vector<Axis> axes_;
  std::uint64_t cell_count_ = 1;
};

/// "i;j;..." cell text used in CSV files.
std::string cell_text(const Cell& c);

/// Actions are encoded as integers whose bits are the boolean inputs, the
/// first input being the most significant bit.
std::uint32_t action_count(std::size_t num_inputs);
std::vector<int> action_bits(std::uint32_t action, std::size_t num_inputs);
std::uint32_t action_index(std::span<const int> bits);
std::string action_string(std::uint32_t action, std::size_t num_inputs);

}  // namespace qsynth
