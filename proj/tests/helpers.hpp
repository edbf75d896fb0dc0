#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gcope/graph_store.hpp"
#include "gcope/types.hpp"
#include "oracles.hpp"

namespace testutil {

inline oracle::Dense to_dense(const gcope::Matrix& m) {
  oracle::Dense d = oracle::zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (gcope::Index i = 0; i < m.rows(); ++i)
    for (gcope::Index j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline gcope::Matrix from_dense(const oracle::Dense& d) {
  gcope::Matrix m(static_cast<gcope::Index>(d.size()), d.empty() ? 0 : static_cast<gcope::Index>(d[0].size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d[i].size(); ++j) m(i, j) = d[i][j];
  return m;
}

inline oracle::Dense csr_to_dense(const gcope::Csr& a) {
  oracle::Dense d = oracle::zeros(static_cast<std::size_t>(a.rows), static_cast<std::size_t>(a.rows));
  for (gcope::Index r = 0; r < a.rows; ++r)
    for (gcope::Index k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) d[r][a.cols[k]] = a.value(k);
  return d;
}

inline gcope::Matrix random_matrix(gcope::Index r, gcope::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  gcope::Matrix m(r, c);
  for (gcope::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline std::vector<gcope::Edge> random_edges(gcope::Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<gcope::Edge> e;
  for (gcope::Index u = 0; u < n; ++u)
    for (gcope::Index v = u + 1; v < n; ++v)
      if (coin(rng)) e.emplace_back(u, v);
  return e;
}

// Small labelled dataset with Gaussian features.
inline gcope::GraphDataset toy_graph(gcope::Index n, gcope::Index dim, int classes, std::vector<gcope::Edge> edges,
                                     std::uint64_t seed, std::string name = "toy") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  gcope::FeatureMatrix f(n, dim);
  for (gcope::Index i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (gcope::Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  return gcope::make_dataset(std::move(name), std::move(f), std::move(edges), std::move(labels), classes);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gcope_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
