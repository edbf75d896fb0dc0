#pragma once

#include <string>
#include <vector>

#include "gcope/graph_store.hpp"
#include "gcope/types.hpp"

namespace gcope {

enum class SignConvention { LargestComponentPositive };

struct ProjectionConfig {
  Index proj_dim = 100;
  SignConvention sign_convention = SignConvention::LargestComponentPositive;
  int max_power_iterations = 300;
  double tolerance = 1e-9;
  // Row-wise L2 normalization of the projected scores; off by default.
  bool l2_normalize = false;

  void validate() const;
};

struct ProjectedFeatures {
  Matrix matrix;                        // n x proj_dim scores U_k * S_k
  std::vector<double> singular_values;  // nonincreasing, length min(proj_dim, rank)
  std::string source_name;
};

/// Truncated SVD by block orthogonal iteration on the smaller Gram matrix
/// (X^T X or X X^T) with Rayleigh-Ritz extraction. Columns beyond the
/// numerical rank are zero. Deterministic for a given input.
ProjectedFeatures svd_project(const Matrix& x, const ProjectionConfig& cfg);

/// svd_project on each dataset independently; output order follows input.
std::vector<ProjectedFeatures> project_all(const std::vector<GraphDataset>& graphs,
                                           const ProjectionConfig& cfg);

Matrix to_matrix(const FeatureMatrix& f);

}  // namespace gcope
