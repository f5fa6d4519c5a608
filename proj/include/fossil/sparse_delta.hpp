#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fossil/common.hpp"

namespace fossil {

// Named parameter group exposed by a trainable model. Vectors such as item
// biases are stored as single-column matrices.
struct ParamBlock {
  std::string_view name;
  Matrix* values;
};

struct ConstParamBlock {
  std::string_view name;
  const Matrix* values;
};

// Row-sparse set of parameter partials. Rows touched more than once are
// accumulated into a single entry.
class SparseDelta {
 public:
  struct Entry {
    std::size_t block;
    std::size_t row;
    std::size_t offset;
    std::size_t width;
  };

  void clear() {
    entries_.clear();
    values_.clear();
    index_.clear();
  }

  // Zero-initialised on first access.
  std::span<double> row(std::size_t block, std::size_t row, std::size_t width) {
    const std::uint64_t key = (std::uint64_t(block) << 48) | std::uint64_t(row);
    auto [it, inserted] = index_.try_emplace(key, entries_.size());
    if (inserted) {
      entries_.push_back({block, row, values_.size(), width});
      values_.resize(values_.size() + width, 0.0);
    }
    const Entry& e = entries_[it->second];
    return {values_.data() + e.offset, e.width};
  }

  std::span<const Entry> entries() const { return entries_; }
  std::span<const double> values(const Entry& e) const {
    return {values_.data() + e.offset, e.width};
  }

  bool empty() const { return entries_.empty(); }

  // Partial for one coordinate, 0 when the row was never touched.
  double at(std::size_t block, std::size_t row, std::size_t col) const {
    const std::uint64_t key = (std::uint64_t(block) << 48) | std::uint64_t(row);
    auto it = index_.find(key);
    if (it == index_.end()) return 0.0;
    return values_[entries_[it->second].offset + col];
  }

 private:
  std::vector<Entry> entries_;
  std::vector<double> values_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace fossil
