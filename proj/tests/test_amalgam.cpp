#include <gtest/gtest.h>

#include <queue>
#include <set>

#include "gcope/amalgam.hpp"
#include "gcope/error.hpp"
#include "fixtures.hpp"
#include "helpers.hpp"

using namespace gcope;
using namespace fixtures;

namespace {

std::set<Index> neighbours(const Csr& a, Index r) {
  return {a.cols.begin() + a.row_ptr[r], a.cols.begin() + a.row_ptr[r + 1]};
}

}  // namespace

TEST(Amalgam, IndicatorExamples) {
  EXPECT_EQ(r_a_indicator(1, 3, {3, 2}), 1);
  EXPECT_EQ(r_a_indicator(1, 2, {3, 2}), 0);
  for (Index j = 0; j < 4; ++j) EXPECT_EQ(r_a_indicator(0, j, {4}), 1);
  EXPECT_THROW(r_a_indicator(2, 0, {3, 2}), Error);
  EXPECT_THROW(r_a_indicator(0, 5, {3, 2}), Error);
}

TEST(Amalgam, TwoDatasetFullExample) {
  std::mt19937_64 rng(1);
  auto b = make_sources({3, 2}, 4, rng);
  auto coords = coords_for(2, 4, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  EXPECT_EQ(jg.num_nodes(), 7);
  EXPECT_EQ(neighbours(jg.adjacency, 5), (std::set<Index>{0, 1, 2, 5, 6}));
  EXPECT_EQ(neighbours(jg.adjacency, 6), (std::set<Index>{3, 4, 5, 6}));
}

TEST(Amalgam, NoneWithoutSelfLoops) {
  std::mt19937_64 rng(1);
  auto b = make_sources({3, 2}, 4, rng);
  auto coords = coords_for(2, 4, 1, none(), false);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  EXPECT_EQ(neighbours(jg.adjacency, 5), (std::set<Index>{0, 1, 2}));
}

TEST(Amalgam, ThreeDatasetsTwoCoordinatorsMatchesDense) {
  std::mt19937_64 rng(4);
  auto b = make_sources({2, 2, 2}, 3, rng);
  auto coords = coords_for(3, 3, 2, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  EXPECT_EQ(jg.num_nodes(), 12);
  for (Index v = 6; v < 12; ++v) EXPECT_EQ(jg.adjacency.degree(v), 2 + 5 + 1);
  EXPECT_EQ(testutil::csr_to_dense(jg.adjacency), oracle::dense_joint_adjacency(spec_of(b, 2, true, true)));
}

TEST(Amalgam, DenseOracleSweep) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> sz(1, 5);
  long mismatches = 0, cases = 0;
  for (int m = 1; m <= 4; ++m) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<Index> sizes;
      for (int i = 0; i < m; ++i) sizes.push_back(sz(rng));
      auto b = make_sources(sizes, 2, rng);
      for (int c = 1; c <= 3; ++c)
        for (bool f : {true, false})
          for (bool loops : {true, false}) {
            auto coords = coords_for(m, 2, c, f ? full() : none(), loops);
            const auto jg = build_joint_graph(b.graphs, b.projected, coords);
            if (testutil::csr_to_dense(jg.adjacency) != oracle::dense_joint_adjacency(spec_of(b, c, f, loops)))
              ++mismatches;
            ++cases;
          }
    }
  }
  EXPECT_EQ(mismatches, 0) << "over " << cases << " cases";
}

TEST(Amalgam, StructuralInvariants) {
  std::mt19937_64 rng(23);
  auto b = make_sources({4, 3, 5}, 3, rng);
  for (bool loops : {true, false}) {
    auto coords = coords_for(3, 3, 2, full(), loops);
    const auto jg = build_joint_graph(b.graphs, b.projected, coords);
    const Index mc = 6;
    for (Index r = 0; r < jg.num_nodes(); ++r)
      for (Index k = jg.adjacency.row_ptr[r]; k < jg.adjacency.row_ptr[r + 1]; ++k) {
        const Index c = jg.adjacency.cols[k];
        EXPECT_TRUE(jg.adjacency.contains(c, r));
        if (!jg.is_coordinator(r) && !jg.is_coordinator(c)) EXPECT_EQ(jg.origin[r], jg.origin[c]);
      }
    for (std::size_t i = 0; i < 3; ++i)
      for (Index v = jg.coordinator_ranges[i].begin; v < jg.coordinator_ranges[i].end; ++v) {
        EXPECT_EQ(jg.adjacency.degree(v), jg.dataset_ranges[i].size() + (mc - 1) + (loops ? 1 : 0));
        for (Index u = jg.dataset_ranges[i].begin; u < jg.dataset_ranges[i].end; ++u)
          EXPECT_TRUE(jg.adjacency.contains(v, u));
      }
  }
}

TEST(Amalgam, ZeroCoordinatorsIsBlockDiagonal) {
  std::mt19937_64 rng(2);
  auto b = make_sources({4, 4}, 3, rng, 0.9);
  auto coords = coords_for(2, 3, 0, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  EXPECT_EQ(jg.num_nodes(), 8);
  EXPECT_EQ(jg.num_coordinators(), 0);
}

TEST(Amalgam, BfsWithoutCoordinatorsStaysInDataset) {
  std::mt19937_64 rng(31);
  auto b = make_sources({5, 4, 3}, 2, rng, 0.7);
  auto coords = coords_for(3, 2, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  for (Index s = 0; s < jg.num_ordinary(); ++s) {
    std::vector<bool> seen(static_cast<std::size_t>(jg.num_nodes()), false);
    std::queue<Index> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      EXPECT_EQ(jg.origin[u], jg.origin[s]);
      for (Index v : neighbours(jg.adjacency, u)) {
        if (jg.is_coordinator(v) || seen[v]) continue;
        seen[v] = true;
        q.push(v);
      }
    }
  }
}

TEST(Amalgam, RejectsMismatchedDims) {
  std::mt19937_64 rng(1);
  auto b = make_sources({3, 2}, 4, rng);
  b.projected[1].matrix = Matrix::Zero(2, 3);
  auto coords = coords_for(2, 4, 1, full(), true);
  try {
    build_joint_graph(b.graphs, b.projected, coords);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    build_joint_graph({}, {}, coords);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDatasetList);
  }
}

TEST(Amalgam, CoordinatorFeaturesReceiveGradient) {
  std::mt19937_64 rng(1);
  auto b = make_sources({3, 2}, 4, rng);
  auto coords = coords_for(2, 4, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  Tape tape;
  Var x = joint_features(tape, jg, coords);
  EXPECT_EQ(x.rows(), 7);
  tape.backward(ad::sum_all(x));
  EXPECT_EQ(coords.features.grad, Matrix::Ones(2, 4));
}

TEST(Amalgam, DynamicEdgesFollowCosine) {
  std::mt19937_64 rng(6);
  auto b = make_sources({2, 2}, 3, rng);
  auto coords = coords_for(2, 3, 1, {InterMode::Kind::Dynamic, 0.9}, false);
  coords.features.value << 1, 2, 3, 1, 2, 3;
  auto jg = refresh_dynamic_edges(build_joint_graph(b.graphs, b.projected, coords), coords);
  EXPECT_TRUE(jg.adjacency.contains(4, 5));

  coords.config.inter_mode.threshold = 0.1;
  coords.features.value << 1, 0, 0, 0, 1, 0;
  jg = refresh_dynamic_edges(jg, coords);
  EXPECT_FALSE(jg.adjacency.contains(4, 5));
}

TEST(Amalgam, DynamicEdgesMatchBruteForce) {
  std::mt19937_64 rng(12);
  auto b = make_sources({2, 3, 2, 2}, 5, rng);
  auto coords = coords_for(4, 5, 1, {InterMode::Kind::Dynamic, 0.3}, true, 99);
  const auto base = build_joint_graph(b.graphs, b.projected, coords);
  const auto jg = refresh_dynamic_edges(base, coords);
  const Index n = jg.num_ordinary();
  const Matrix& f = coords.features.value;
  for (Index p = 0; p < 4; ++p)
    for (Index q = 0; q < 4; ++q) {
      if (p == q) {
        EXPECT_TRUE(jg.adjacency.contains(n + p, n + q));
        continue;
      }
      double dot = 0, np = 0, nq = 0;
      for (Index k = 0; k < 5; ++k) {
        dot += f(p, k) * f(q, k);
        np += f(p, k) * f(p, k);
        nq += f(q, k) * f(q, k);
      }
      EXPECT_EQ(jg.adjacency.contains(n + p, n + q), dot / std::sqrt(np * nq) >= 0.3) << p << "," << q;
    }
  // Everything outside the coordinator block is untouched, symmetry kept.
  for (Index r = 0; r < jg.num_nodes(); ++r)
    for (Index k = jg.adjacency.row_ptr[r]; k < jg.adjacency.row_ptr[r + 1]; ++k) {
      const Index c = jg.adjacency.cols[k];
      EXPECT_TRUE(jg.adjacency.contains(c, r));
      if (r < n || c < n) EXPECT_TRUE(base.adjacency.contains(r, c));
    }
}

TEST(Amalgam, DynamicZeroCoordinatorLeftUnconnected) {
  std::mt19937_64 rng(6);
  auto b = make_sources({2, 2}, 3, rng);
  auto coords = coords_for(2, 3, 1, {InterMode::Kind::Dynamic, 0.0}, false);
  coords.features.value.row(0).setZero();
  const auto jg = refresh_dynamic_edges(build_joint_graph(b.graphs, b.projected, coords), coords);
  EXPECT_FALSE(jg.adjacency.contains(4, 5));
}

TEST(Amalgam, SampleReachesForeignCoordinatorAtTwoHops) {
  std::mt19937_64 rng(3);
  auto b = make_sources({6, 6}, 3, rng, 0.3);
  auto coords = coords_for(2, 3, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  BatchOptions opts;
  opts.batch_size = 40;
  opts.max_nodes = 0;
  for (const auto& s : sample_joint_batch(jg, opts, 5)) {
    const Index center = s.nodes[s.center];
    ASSERT_FALSE(jg.is_coordinator(center));
    const Index own = jg.coordinator_ranges[jg.origin[center]].begin;
    const Index other = jg.coordinator_ranges[1 - jg.origin[center]].begin;
    EXPECT_NE(std::find(s.nodes.begin(), s.nodes.end(), own), s.nodes.end());
    EXPECT_NE(std::find(s.nodes.begin(), s.nodes.end(), other), s.nodes.end());
  }
}

TEST(Amalgam, SampleWithoutBridgesStaysHome) {
  std::mt19937_64 rng(3);
  auto b = make_sources({6, 6}, 3, rng, 0.3);
  auto coords = coords_for(2, 3, 1, none(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  BatchOptions opts;
  opts.batch_size = 60;
  for (const auto& s : sample_joint_batch(jg, opts, 8)) {
    const Index home = jg.origin[s.nodes[s.center]];
    for (Index v : s.nodes)
      if (!jg.is_coordinator(v)) EXPECT_EQ(jg.origin[v], home);
  }
}

TEST(Amalgam, CentersUniformOverDatasets) {
  std::mt19937_64 rng(3);
  auto b = make_sources({5, 5}, 2, rng, 0.4);
  auto coords = coords_for(2, 2, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  BatchOptions opts;
  opts.batch_size = 10000;
  opts.hops = 1;
  long first = 0;
  for (const auto& s : sample_joint_batch(jg, opts, 2)) first += jg.origin[s.nodes[s.center]] == 0;
  const double sigma = std::sqrt(10000 * 0.25);
  EXPECT_LT(std::abs(first - 5000.0), 3 * sigma);
}

TEST(Amalgam, SamplingDeterministicPerSeedAndEpoch) {
  std::mt19937_64 rng(3);
  auto b = make_sources({20, 20}, 2, rng, 0.2);
  auto coords = coords_for(2, 2, 1, full(), true);
  const auto jg = build_joint_graph(b.graphs, b.projected, coords);
  BatchOptions opts;
  opts.batch_size = 16;
  opts.max_nodes = 8;
  EXPECT_EQ(sample_joint_batch(jg, opts, 4, 2), sample_joint_batch(jg, opts, 4, 2));
  EXPECT_NE(sample_joint_batch(jg, opts, 4, 2), sample_joint_batch(jg, opts, 4, 3));
  for (const auto& s : sample_joint_batch(jg, opts, 4, 2)) EXPECT_LE(s.size(), 8);
}

TEST(Amalgam, CoordinatorInit) {
  CoordinatorConfig cfg;
  cfg.per_dataset = 3;
  cfg.init = CoordinatorInit::Zeros;
  Rng rng(1);
  auto z = make_coordinators(2, 5, cfg, rng);
  EXPECT_EQ(z.count(), 6);
  EXPECT_EQ(z.features.value.norm(), 0.0);
  cfg.init = CoordinatorInit::Gaussian;
  auto g = make_coordinators(2, 5, cfg, rng);
  EXPECT_GT(g.features.value.norm(), 0.0);
  EXPECT_TRUE(g.features.value.allFinite());
}

TEST(Amalgam, InterModeParsing) {
  EXPECT_EQ(parse_inter_mode("full").kind, InterMode::Kind::Full);
  EXPECT_EQ(parse_inter_mode("none").kind, InterMode::Kind::None);
  const auto d = parse_inter_mode("dynamic:0.25");
  EXPECT_EQ(d.kind, InterMode::Kind::Dynamic);
  EXPECT_DOUBLE_EQ(d.threshold, 0.25);
  EXPECT_EQ(parse_inter_mode(to_string(d)), d);
  EXPECT_THROW(parse_inter_mode("partial"), Error);
}
