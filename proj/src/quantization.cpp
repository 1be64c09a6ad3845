#include "qsynth/quantization.hpp"

#include <algorithm>
#include <cmath>

#include "qsynth/error.hpp"

namespace qsynth {

double Axis::boundary(std::int64_t k) const {
  if (k >= count()) return hi;
  return lo + static_cast<double>(k) * width();
}

std::int64_t Axis::owner(double y) const {
  if (y < lo) return -1;
  if (y > hi) return count();
  std::int64_t k = static_cast<std::int64_t>(std::floor((y - lo) / width()));
  k = std::clamp<std::int64_t>(k, 0, count() - 1);
  // Settle rounding so the result agrees with boundary().
  while (k > 0 && y < boundary(k)) --k;
  while (k + 1 < count() && y >= boundary(k + 1)) ++k;
  return k;
}

QuantSchema::QuantSchema(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw Error(ErrorCode::InvalidArgument, "quantization needs at least one axis");
  int total = 0;
  for (const auto& a : axes_) {
    if (!(a.lo < a.hi)) {
      throw Error(ErrorCode::InvalidArgument, "empty quantization range for '" + a.var + "'");
    }
    if (a.bits < 1 || a.bits > 20) {
      throw Error(ErrorCode::InvalidArgument, "bits for '" + a.var + "' must lie in [1, 20]");
    }
    total += a.bits;
  }
  if (total > 40) throw Error(ErrorCode::InvalidArgument, "too many quantization bits in total");
  for (const auto& a : axes_) cell_count_ *= static_cast<std::uint64_t>(a.count());
}

QuantSchema QuantSchema::uniform(const Dtlhs& h, int bits) {
  std::vector<Axis> axes;
  for (const auto& d : h.state) axes.push_back({d.name, d.lower, d.upper, bits});
  return QuantSchema(std::move(axes));
}

int QuantSchema::total_bits() const {
  int t = 0;
  for (const auto& a : axes_) t += a.bits;
  return t;
}

std::optional<Cell> QuantSchema::quantize(std::span<const double> x) const {
  if (x.size() != axes_.size()) {
    throw Error(ErrorCode::InvalidArgument, "state vector has the wrong dimension");
  }
  Cell c(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const std::int64_t k = axes_[i].owner(x[i]);
    if (k < 0 || k >= axes_[i].count()) return std::nullopt;
    c[i] = k;
  }
  return c;
}

CellBox QuantSchema::cell_box(const Cell& c) const {
  if (c.size() != axes_.size()) throw Error(ErrorCode::InvalidArgument, "cell has the wrong dimension");
  CellBox box;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const Axis& a = axes_[i];
    if (c[i] < 0 || c[i] >= a.count()) {
      throw Error(ErrorCode::InvalidArgument, "cell index out of range for '" + a.var + "'");
    }
    box.bounds.push_back({a.boundary(c[i]), a.boundary(c[i] + 1)});
    box.upper_open.push_back(c[i] + 1 < a.count());
  }
  return box;
}

std::uint64_t QuantSchema::index_of(const Cell& c) const {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (c[i] < 0 || c[i] >= axes_[i].count()) {
      throw Error(ErrorCode::InvalidArgument, "cell index out of range for '" + axes_[i].var + "'");
    }
    idx = idx * static_cast<std::uint64_t>(axes_[i].count()) + static_cast<std::uint64_t>(c[i]);
  }
  return idx;
}

Cell QuantSchema::cell_at(std::uint64_t index) const {
  if (index >= cell_count_) throw Error(ErrorCode::InvalidArgument, "cell index out of range");
  Cell c(axes_.size());
  for (std::size_t i = axes_.size(); i-- > 0;) {
    const auto n = static_cast<std::uint64_t>(axes_[i].count());
    c[i] = static_cast<std::int64_t>(index % n);
    index /= n;
  }
  return c;
}

std::vector<Cell> QuantSchema::enumerate_cells() const {
  std::vector<Cell> out;
  out.reserve(cell_count_);
  for (std::uint64_t i = 0; i < cell_count_; ++i) out.push_back(cell_at(i));
  return out;
}

std::string cell_text(const Cell& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(c[i]);
  }
  return out;
}

std::uint32_t action_count(std::size_t num_inputs) {
  if (num_inputs > 16) throw Error(ErrorCode::InvalidArgument, "too many boolean inputs");
  return std::uint32_t{1} << num_inputs;
}

std::vector<int> action_bits(std::uint32_t action, std::size_t num_inputs) {
  std::vector<int> bits(num_inputs);
  for (std::size_t j = 0; j < num_inputs; ++j) bits[j] = (action >> (num_inputs - 1 - j)) & 1;
  return bits;
}

std::uint32_t action_index(std::span<const int> bits) {
  std::uint32_t a = 0;
  for (int b : bits) a = (a << 1) | (b ? 1u : 0u);
  return a;
}

std::string action_string(std::uint32_t action, std::size_t num_inputs) {
  std::string s;
  for (int b : action_bits(action, num_inputs)) s += b ? '1' : '0';
  return s;
}

}  // namespace qsynth
