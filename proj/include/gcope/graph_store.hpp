#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gcope/types.hpp"

namespace gcope {

inline constexpr int kUnlabeled = -1;

/// One source or target graph. Edges are stored once per undirected pair
/// with u < v; the adjacency holds both directions.
struct GraphDataset {
  std::string name;
  FeatureMatrix features;
  std::vector<Edge> edges;
  std::vector<int> labels;
  int num_classes = 0;
  Csr adjacency;

  Index num_nodes() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }

  bool operator==(const GraphDataset& other) const;
};

struct DatasetMeta {
  Index node_count = 0;
  Index edge_count = 0;  // directed entries, i.e. 2x undirected edges
  Index feature_dim = 0;
  int label_count = 0;
  double homophily = 0.0;
};

/// Canonicalizes edges (drops self-loops, orders endpoints, dedups), builds
/// the adjacency and checks every invariant. Throws Error on violation.
GraphDataset make_dataset(std::string name, FeatureMatrix features, std::vector<Edge> edges,
                          std::vector<int> labels, int num_classes);

/// Reads meta.tsv / features.tsv / edges.tsv / labels.tsv from `dir`.
GraphDataset load_dataset(const std::filesystem::path& dir);

/// Inverse of load_dataset. Features are written with enough digits to
/// round-trip 32-bit floats exactly.
void write_dataset(const GraphDataset& g, const std::filesystem::path& dir);

/// Stochastic-block style generator: labels are balanced, every node gets at
/// least one edge, and each edge joins same-label endpoints with
/// probability `target_h`. Features are class-conditional Gaussians.
GraphDataset synth_dataset(Index n, int num_classes, Index dim, double target_h,
                           std::uint64_t seed, std::string name = "synth");

/// Edge homophily ratio: fraction of undirected edges whose endpoints share
/// a label.
double compute_homophily(const GraphDataset& g);

DatasetMeta describe(const GraphDataset& g);

}  // namespace gcope
