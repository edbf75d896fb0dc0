#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gcope {

using Index = std::int64_t;

// Dense row-major storage: row gathers and CSR products walk rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Edge = std::pair<Index, Index>;

/// Square compressed-sparse-row matrix. `values` is empty for binary
/// patterns (every stored entry is 1).
struct Csr {
  Index rows = 0;
  std::vector<Index> row_ptr{0};
  std::vector<Index> cols;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(cols.size()); }
  Index degree(Index r) const { return row_ptr[r + 1] - row_ptr[r]; }
  double value(Index k) const { return values.empty() ? 1.0 : values[k]; }
  bool contains(Index r, Index c) const;

  /// Builds a binary pattern from directed entries. Entries are sorted and
  /// deduplicated; callers wanting symmetry must supply both directions.
  static Csr from_entries(Index n, std::vector<Edge> entries);

  /// Both directions of every undirected edge; (u,u) becomes one diagonal entry.
  static Csr from_undirected(Index n, const std::vector<Edge>& edges);

  bool operator==(const Csr&) const = default;
};

/// Half-open index range [begin, end).
struct Range {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
  bool operator==(const Range&) const = default;
};

}  // namespace gcope
