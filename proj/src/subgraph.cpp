#include "gcope/subgraph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "gcope/error.hpp"

namespace gcope {

Subgraph induce_on(const Csr& host, std::vector<Index> nodes, Index center_pos) {
  Subgraph s;
  std::unordered_map<Index, Index> local;
  local.reserve(nodes.size() * 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], static_cast<Index>(i));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Index u = nodes[i];
    for (Index k = host.row_ptr[u]; k < host.row_ptr[u + 1]; ++k) {
      auto it = local.find(host.cols[k]);
      if (it == local.end()) continue;
      const Index a = static_cast<Index>(i), b = it->second;
      if (a <= b) s.edges.emplace_back(a, b);
    }
  }
  std::sort(s.edges.begin(), s.edges.end());
  s.nodes = std::move(nodes);
  s.center = center_pos;
  return s;
}

std::vector<Index> bfs_ball(const Csr& host, Index center, const BallOptions& opts, Rng* rng) {
  if (center < 0 || center >= host.rows) {
    fail(ErrorCode::IndexOutOfRange, "center " + std::to_string(center) + " outside graph of " +
                                         std::to_string(host.rows) + " nodes");
  }
  std::vector<Index> out{center};
  std::unordered_set<Index> seen{center};
  std::vector<Index> frontier{center};
  for (int hop = 0; hop < opts.hops && !frontier.empty(); ++hop) {
    std::vector<Index> layer;
    for (Index u : frontier) {
      for (Index k = host.row_ptr[u]; k < host.row_ptr[u + 1]; ++k) {
        const Index v = host.cols[k];
        if (seen.insert(v).second) layer.push_back(v);
      }
    }
    std::sort(layer.begin(), layer.end());
    if (opts.max_nodes > 0 && static_cast<Index>(out.size() + layer.size()) > opts.max_nodes) {
      const auto room = static_cast<std::size_t>(opts.max_nodes - static_cast<Index>(out.size()));
      std::vector<Index> first, rest;
      for (Index v : layer) ((opts.priority && opts.priority(v)) ? first : rest).push_back(v);
      std::vector<Index> keep;
      keep.insert(keep.end(), first.begin(), first.begin() + std::min(room, first.size()));
      if (keep.size() < room) {
        const std::size_t need = room - keep.size();
        if (rng == nullptr) fail(ErrorCode::InvalidArgument, "capped ball sampling needs an rng");
        for (std::size_t i = 0; i < need; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
          std::swap(rest[i], rest[pick(*rng)]);
        }
        keep.insert(keep.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(need));
      }
      std::sort(keep.begin(), keep.end());
      out.insert(out.end(), keep.begin(), keep.end());
      break;
    }
    out.insert(out.end(), layer.begin(), layer.end());
    frontier = std::move(layer);
  }
  return out;
}

}  // namespace gcope
