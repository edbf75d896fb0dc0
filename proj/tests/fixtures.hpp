#pragma once

// Builders shared by the unit tests and the acceptance binary.

#include "gcope/amalgam.hpp"
#include "gcope/projection.hpp"
#include "helpers.hpp"

namespace fixtures {

using namespace gcope;

struct Built {
  std::vector<GraphDataset> graphs;
  std::vector<ProjectedFeatures> projected;
};

inline Built make_sources(const std::vector<Index>& sizes, Index dim, std::mt19937_64& rng, double p = 0.5) {
  Built b;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    auto edges = testutil::random_edges(sizes[i], p, rng);
    b.graphs.push_back(testutil::toy_graph(sizes[i], dim, 1, edges, rng(), "g" + std::to_string(i)));
    ProjectedFeatures pf;
    pf.matrix = to_matrix(b.graphs.back().features);
    pf.source_name = b.graphs.back().name;
    b.projected.push_back(std::move(pf));
  }
  return b;
}

inline CoordinatorSet coords_for(Index m, Index dim, int c, InterMode mode, bool self_loops, std::uint64_t seed = 1) {
  CoordinatorConfig cfg;
  cfg.per_dataset = c;
  cfg.inter_mode = mode;
  cfg.self_loops = self_loops;
  Rng rng(seed);
  return make_coordinators(m, dim, cfg, rng);
}

inline oracle::JointSpec spec_of(const Built& b, int c, bool full, bool self_loops) {
  oracle::JointSpec s;
  for (const auto& g : b.graphs) {
    s.sizes.push_back(static_cast<std::size_t>(g.num_nodes()));
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (auto [u, v] : g.edges) e.emplace_back(u, v);
    s.edges.push_back(e);
  }
  s.per_dataset = static_cast<std::size_t>(c);
  s.full = full;
  s.self_loops = self_loops;
  return s;
}

inline InterMode full() { return {InterMode::Kind::Full, 0.0}; }
inline InterMode none() { return {InterMode::Kind::None, 0.0}; }

// Error of reconstructing x from the score columns: the rank-k projector
// onto span(scores) applied to x.
inline double truncation_error(const Matrix& x, const ProjectedFeatures& pf) {
  Matrix recon = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t j = 0; j < pf.singular_values.size(); ++j) {
    const double s = pf.singular_values[j];
    if (s <= 0.0) continue;
    const Vector col = pf.matrix.col(static_cast<Index>(j));
    recon += col * (col.transpose() * x) / (s * s);
  }
  return (x - recon).norm();
}

}  // namespace fixtures
