#include "gcope/amalgam.hpp"

#include <charconv>
#include <cmath>
#include <random>

#include "gcope/error.hpp"

namespace gcope {

std::string to_string(InterMode m) {
  switch (m.kind) {
    case InterMode::Kind::Full: return "full";
    case InterMode::Kind::None: return "none";
    case InterMode::Kind::Dynamic: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m.threshold);
      return "dynamic:" + std::string(buf, ptr);
    }
  }
  return "full";
}

InterMode parse_inter_mode(const std::string& s) {
  if (s == "full") return {InterMode::Kind::Full, 0.0};
  if (s == "none") return {InterMode::Kind::None, 0.0};
  if (s == "dynamic") return {InterMode::Kind::Dynamic, 0.0};
  if (s.rfind("dynamic:", 0) == 0) {
    const std::string t = s.substr(8);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v < -1.0 || v > 1.0) {
      fail(ErrorCode::InvalidArgument, "bad dynamic threshold '" + t + "' (expected a cosine in [-1,1])");
    }
    return {InterMode::Kind::Dynamic, v};
  }
  fail(ErrorCode::InvalidArgument, "unknown inter mode '" + s + "' (expected full|none|dynamic:T)");
}

std::string to_string(CoordinatorInit i) { return i == CoordinatorInit::Zeros ? "zeros" : "gaussian"; }

CoordinatorInit parse_coordinator_init(const std::string& s) {
  if (s == "zeros") return CoordinatorInit::Zeros;
  if (s == "gaussian") return CoordinatorInit::Gaussian;
  fail(ErrorCode::InvalidArgument, "unknown coordinator init '" + s + "' (expected zeros|gaussian)");
}

CoordinatorSet make_coordinators(Index num_datasets, Index proj_dim, const CoordinatorConfig& cfg, Rng& rng) {
  if (cfg.per_dataset < 0) fail(ErrorCode::InvalidArgument, "coordinators per dataset must be >= 0");
  if (num_datasets < 1) fail(ErrorCode::EmptyDatasetList, "coordinators need at least one dataset");
  CoordinatorSet set;
  set.config = cfg;
  set.num_datasets = num_datasets;
  Matrix f = Matrix::Zero(num_datasets * cfg.per_dataset, proj_dim);
  if (cfg.init == CoordinatorInit::Gaussian) {
    const double sigma = cfg.init_sigma > 0.0 ? cfg.init_sigma : 1.0 / std::sqrt(static_cast<double>(proj_dim));
    std::normal_distribution<double> normal(0.0, sigma);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = normal(rng);
  }
  set.features = Param("coordinators", std::move(f));
  return set;
}

int r_a_indicator(Index i, Index j, const std::vector<Index>& sizes) {
  const Index m = static_cast<Index>(sizes.size());
  Index total = 0;
  for (Index s : sizes) total += s;
  if (i < 0 || i >= m || j < 0 || j >= total) {
    fail(ErrorCode::IndexOutOfRange, "r_a_indicator(" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  }
  Index lo = 0;
  for (Index k = 0; k < i; ++k) lo += sizes[k];
  return (lo <= j && j < lo + sizes[i]) ? 1 : 0;
}

namespace {

void append_coordinator_block(std::vector<Edge>& entries, const JointGraph& jg, const CoordinatorSet& coords) {
  const Index n = jg.num_ordinary();
  const Index total = coords.count();
  const auto& cfg = coords.config;
  if (cfg.self_loops) {
    for (Index p = 0; p < total; ++p) entries.emplace_back(n + p, n + p);
  }
  switch (cfg.inter_mode.kind) {
    case InterMode::Kind::None:
      break;
    case InterMode::Kind::Full:
      for (Index p = 0; p < total; ++p)
        for (Index q = 0; q < total; ++q)
          if (p != q) entries.emplace_back(n + p, n + q);
      break;
    case InterMode::Kind::Dynamic: {
      const Matrix& f = coords.features.value;
      const Vector norms = f.rowwise().norm();
      for (Index p = 0; p < total; ++p) {
        if (norms[p] == 0.0) warn("coordinator " + std::to_string(p) + " has a zero feature vector; left unconnected");
      }
      for (Index p = 0; p < total; ++p) {
        for (Index q = 0; q < total; ++q) {
          if (p == q || norms[p] == 0.0 || norms[q] == 0.0) continue;
          const double cos = f.row(p).dot(f.row(q)) / (norms[p] * norms[q]);
          if (cos >= cfg.inter_mode.threshold) entries.emplace_back(n + p, n + q);
        }
      }
      break;
    }
  }
}

}  // namespace

JointGraph build_joint_graph(const std::vector<GraphDataset>& graphs,
                             const std::vector<ProjectedFeatures>& projected,
                             const CoordinatorSet& coords) {
  if (graphs.empty() || projected.empty()) fail(ErrorCode::EmptyDatasetList, "joint graph needs at least one dataset");
  if (graphs.size() != projected.size()) fail(ErrorCode::ShapeMismatch, "one projection per dataset required");
  if (coords.num_datasets != static_cast<Index>(graphs.size())) {
    fail(ErrorCode::ShapeMismatch, "coordinator set was built for a different dataset count");
  }
  const Index dim = projected.front().matrix.cols();
  Index n = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (projected[i].matrix.cols() != dim) {
      fail(ErrorCode::DimensionMismatch, "projected dataset " + projected[i].source_name + " has " +
                                             std::to_string(projected[i].matrix.cols()) + " columns, expected " +
                                             std::to_string(dim));
    }
    if (projected[i].matrix.rows() != graphs[i].num_nodes()) {
      fail(ErrorCode::ShapeMismatch, "projection of " + graphs[i].name + " has the wrong row count");
    }
    n += graphs[i].num_nodes();
  }
  if (coords.count() > 0 && coords.features.value.cols() != dim) {
    fail(ErrorCode::DimensionMismatch, "coordinator feature dim differs from projected dim");
  }

  const Index c = coords.config.per_dataset;
  const Index m = static_cast<Index>(graphs.size());
  JointGraph jg;
  jg.base_features.resize(n, dim);
  jg.origin.resize(static_cast<std::size_t>(n + m * c));

  std::vector<Edge> entries;
  Index offset = 0;
  for (Index i = 0; i < m; ++i) {
    const auto& g = graphs[i];
    const Range block{offset, offset + g.num_nodes()};
    jg.dataset_ranges.push_back(block);
    jg.coordinator_ranges.push_back({n + i * c, n + (i + 1) * c});
    jg.base_features.middleRows(offset, g.num_nodes()) = projected[i].matrix;
    for (Index v = block.begin; v < block.end; ++v) jg.origin[v] = i;
    for (Index p = 0; p < c; ++p) jg.origin[n + i * c + p] = i;

    for (auto [u, v] : g.edges) {
      entries.emplace_back(offset + u, offset + v);
      entries.emplace_back(offset + v, offset + u);
    }
    for (Index p = 0; p < c; ++p) {
      const Index coord = n + i * c + p;
      for (Index v = block.begin; v < block.end; ++v) {
        entries.emplace_back(coord, v);
        entries.emplace_back(v, coord);
      }
    }
    offset = block.end;
  }
  jg.adjacency.rows = n + m * c;  // needed by append_coordinator_block
  append_coordinator_block(entries, jg, coords);
  jg.adjacency = Csr::from_entries(n + m * c, std::move(entries));
  return jg;
}

JointGraph refresh_dynamic_edges(const JointGraph& jg, const CoordinatorSet& coords) {
  if (coords.config.inter_mode.kind != InterMode::Kind::Dynamic) {
    fail(ErrorCode::InvalidArgument, "refresh_dynamic_edges needs inter mode dynamic");
  }
  const Index n = jg.num_ordinary();
  std::vector<Edge> entries;
  entries.reserve(static_cast<std::size_t>(jg.adjacency.nnz()));
  for (Index r = 0; r < jg.adjacency.rows; ++r) {
    for (Index k = jg.adjacency.row_ptr[r]; k < jg.adjacency.row_ptr[r + 1]; ++k) {
      const Index col = jg.adjacency.cols[k];
      if (r >= n && col >= n) continue;
      entries.emplace_back(r, col);
    }
  }
  JointGraph out;
  out.base_features = jg.base_features;
  out.dataset_ranges = jg.dataset_ranges;
  out.coordinator_ranges = jg.coordinator_ranges;
  out.origin = jg.origin;
  out.adjacency.rows = jg.adjacency.rows;
  append_coordinator_block(entries, jg, coords);
  out.adjacency = Csr::from_entries(jg.adjacency.rows, std::move(entries));
  return out;
}

Var joint_features(Tape& tape, const JointGraph& jg, CoordinatorSet& coords) {
  Var base = tape.constant(jg.base_features);
  if (coords.count() == 0) return base;
  return ad::concat_rows(base, tape.param(coords.features));
}

std::vector<Subgraph> sample_joint_batch(const JointGraph& jg, const BatchOptions& opts, std::uint64_t seed,
                                         std::uint64_t epoch) {
  if (opts.batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (opts.hops < 1) fail(ErrorCode::InvalidArgument, "hops must be >= 1");
  if (opts.max_nodes < 0) fail(ErrorCode::InvalidArgument, "max_nodes must be >= 0");
  if (jg.num_ordinary() < 1) fail(ErrorCode::InvalidArgument, "joint graph has no ordinary nodes");

  BallOptions ball;
  ball.hops = opts.hops;
  ball.max_nodes = opts.max_nodes;
  ball.priority = [&jg](Index v) { return jg.is_coordinator(v); };

  std::vector<Subgraph> out;
  out.reserve(static_cast<std::size_t>(opts.batch_size));
  std::uniform_int_distribution<Index> pick(0, jg.num_ordinary() - 1);
  for (Index s = 0; s < opts.batch_size; ++s) {
    Rng rng(derive_seed(seed, {epoch, static_cast<std::uint64_t>(s)}));
    const Index center = pick(rng);
    out.push_back(induce_on(jg.adjacency, bfs_ball(jg.adjacency, center, ball, &rng), 0));
  }
  return out;
}

}  // namespace gcope
