#pragma once

#include <functional>
#include <vector>

#include "gcope/rng.hpp"
#include "gcope/types.hpp"

namespace gcope {

/// An induced subgraph referring back to a host graph by node id.
struct Subgraph {
  std::vector<Index> nodes;  // host ids; nodes[center] is the center
  std::vector<Edge> edges;   // local indices, u <= v (u == v for a self-loop)
  Index center = 0;
  // Feature entries zeroed by attribute masking, as row * dim + col.
  std::vector<Index> masked;

  Index size() const { return static_cast<Index>(nodes.size()); }
  Csr local_adjacency() const { return Csr::from_undirected(size(), edges); }

  bool operator==(const Subgraph&) const = default;
};

/// Subgraph on `nodes` (kept in the given order) with every host edge
/// between them.
Subgraph induce_on(const Csr& host, std::vector<Index> nodes, Index center_pos);

struct BallOptions {
  int hops = 2;
  // 0 keeps the whole ball. Otherwise the ball is filled layer by layer and
  // the first layer that would overflow is subsampled, taking nodes for
  // which `priority` holds first.
  Index max_nodes = 0;
  std::function<bool(Index)> priority;
};

/// Nodes within `hops` of `center`, center first, then by BFS layer with
/// each layer in increasing id order.
std::vector<Index> bfs_ball(const Csr& host, Index center, const BallOptions& opts, Rng* rng = nullptr);

}  // namespace gcope
