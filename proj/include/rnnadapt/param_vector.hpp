#pragma once

#include "rnnadapt/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rnnadapt {

/// One named block of a flat parameter vector. Matrices are stored row-major
/// inside the flat vector; a bias is a block with cols == 1.
struct LayoutEntry {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

/// Ordered list of named blocks covering [0, n_theta) exactly once.
/// Blocks are contiguous and disjoint by construction (each add() appends
/// at the current end).
class ParamLayout {
 public:
  Index add(std::string name, Index rows, Index cols) {
    if (rows < 1 || cols < 1) throw DimensionError("layout entry '" + name + "': bad shape");
    const Index offset = total_;
    entries_.push_back(LayoutEntry{std::move(name), offset, rows, cols});
    total_ += rows * cols;
    return offset;
  }

  const std::vector<LayoutEntry>& entries() const { return entries_; }
  Index total() const { return total_; }

  const LayoutEntry& entry(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e;
    }
    throw DimensionError("no layout entry named '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return true;
    }
    return false;
  }

 private:
  std::vector<LayoutEntry> entries_;
  Index total_ = 0;
};

/// Flat parameter vector plus the layout that names its blocks.
struct ParamVector {
  Vec values;
  ParamLayout layout;

  Index size() const { return values.size(); }

  Eigen::Map<const RowMajorMat> matrix(const std::string& name) const {
    const LayoutEntry& e = layout.entry(name);
    return {values.data() + e.offset, e.rows, e.cols};
  }

  Eigen::Map<RowMajorMat> matrix(const std::string& name) {
    const LayoutEntry& e = layout.entry(name);
    return {values.data() + e.offset, e.rows, e.cols};
  }

  Eigen::Map<const Vec> vector(const std::string& name) const {
    const LayoutEntry& e = layout.entry(name);
    if (e.cols != 1) throw DimensionError("'" + name + "' is not a vector block");
    return {values.data() + e.offset, e.rows};
  }

  Eigen::Map<Vec> vector(const std::string& name) {
    const LayoutEntry& e = layout.entry(name);
    if (e.cols != 1) throw DimensionError("'" + name + "' is not a vector block");
    return {values.data() + e.offset, e.rows};
  }

  bool all_finite() const { return values.allFinite(); }
};

inline ParamVector make_params(ParamLayout layout) {
  ParamVector p;
  p.values = Vec::Zero(layout.total());
  p.layout = std::move(layout);
  return p;
}

}  // namespace rnnadapt
