#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcope/autodiff.hpp"
#include "gcope/graph_store.hpp"
#include "gcope/projection.hpp"
#include "gcope/rng.hpp"
#include "gcope/subgraph.hpp"
#include "gcope/types.hpp"

namespace gcope {

enum class CoordinatorInit { Zeros, Gaussian };

struct InterMode {
  enum class Kind { Full, None, Dynamic };
  Kind kind = Kind::Full;
  double threshold = 0.0;  // cosine cutoff for Dynamic

  bool operator==(const InterMode&) const = default;
};

std::string to_string(InterMode m);
/// "full", "none", "dynamic" or "dynamic:T".
InterMode parse_inter_mode(const std::string& s);
std::string to_string(CoordinatorInit i);
CoordinatorInit parse_coordinator_init(const std::string& s);

struct CoordinatorConfig {
  int per_dataset = 1;  // 0 builds the isolated (block-diagonal) joint graph
  CoordinatorInit init = CoordinatorInit::Gaussian;
  double init_sigma = 0.0;  // 0 selects 1/sqrt(proj_dim)
  InterMode inter_mode;
  bool self_loops = true;
};

/// Learnable coordinator features: rows [i*c, (i+1)*c) belong to dataset i.
struct CoordinatorSet {
  CoordinatorConfig config;
  Index num_datasets = 0;
  Param features;

  Index count() const { return features.value.rows(); }
};

CoordinatorSet make_coordinators(Index num_datasets, Index proj_dim, const CoordinatorConfig& cfg, Rng& rng);

/// Joint graph of all projected datasets plus coordinators. Ordinary nodes
/// occupy [0, N) in dataset order; coordinators occupy [N, N + M*c).
struct JointGraph {
  Matrix base_features;  // N x proj_dim, ordinary rows only
  Csr adjacency;
  std::vector<Range> dataset_ranges;
  std::vector<Range> coordinator_ranges;
  std::vector<Index> origin;  // dataset index of every node, coordinators included

  Index num_ordinary() const { return base_features.rows(); }
  Index num_nodes() const { return adjacency.rows; }
  Index num_coordinators() const { return num_nodes() - num_ordinary(); }
  bool is_coordinator(Index v) const { return v >= num_ordinary(); }
};

/// 1 iff global node j lies in dataset i's block.
int r_a_indicator(Index i, Index j, const std::vector<Index>& sizes);

JointGraph build_joint_graph(const std::vector<GraphDataset>& graphs,
                             const std::vector<ProjectedFeatures>& projected,
                             const CoordinatorSet& coords);

/// Recomputes coordinator-coordinator edges from cosine similarity of the
/// current coordinator features; everything else is kept.
JointGraph refresh_dynamic_edges(const JointGraph& jg, const CoordinatorSet& coords);

/// Full feature matrix: base rows followed by the coordinator parameter rows.
Var joint_features(Tape& tape, const JointGraph& jg, CoordinatorSet& coords);

struct BatchOptions {
  Index batch_size = 128;
  int hops = 2;
  Index max_nodes = 64;  // per-sample cap, 0 = whole ball
};

/// Centers drawn uniformly from ordinary nodes; sample s of `epoch` uses the
/// stream derive_seed(seed, {epoch, s}) so results never depend on
/// scheduling. Coordinators are preferred when a capped layer is subsampled.
std::vector<Subgraph> sample_joint_batch(const JointGraph& jg, const BatchOptions& opts, std::uint64_t seed,
                                         std::uint64_t epoch = 0);

}  // namespace gcope
