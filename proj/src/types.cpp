#include "gcope/types.hpp"

#include <algorithm>
#include <iostream>

#include "gcope/error.hpp"

namespace gcope {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::NoEdges: return "NoEdges";
    case ErrorCode::UnlabeledNode: return "UnlabeledNode";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::EmptyDatasetList: return "EmptyDatasetList";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ZeroEmbedding: return "ZeroEmbedding";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::InsufficientClassSupport: return "InsufficientClassSupport";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::UnknownKey: return "UnknownKey";
  }
  return "Unknown";
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

bool Csr::contains(Index r, Index c) const {
  auto first = cols.begin() + row_ptr[r];
  auto last = cols.begin() + row_ptr[r + 1];
  return std::binary_search(first, last, c);
}

Csr Csr::from_entries(Index n, std::vector<Edge> entries) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  Csr m;
  m.rows = n;
  m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  m.cols.reserve(entries.size());
  for (const auto& [r, c] : entries) {
    ++m.row_ptr[r + 1];
    m.cols.push_back(c);
  }
  for (Index r = 0; r < n; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

Csr Csr::from_undirected(Index n, const std::vector<Edge>& edges) {
  std::vector<Edge> entries;
  entries.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    entries.emplace_back(u, v);
    if (u != v) entries.emplace_back(v, u);
  }
  return from_entries(n, std::move(entries));
}

}  // namespace gcope
