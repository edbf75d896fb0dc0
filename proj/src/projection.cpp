#include "gcope/projection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "gcope/error.hpp"
#include "gcope/rng.hpp"

namespace gcope {

namespace {

using ColMatrix = Eigen::MatrixXd;

constexpr std::uint64_t kStartSeed = 0x5F0E7A11C0FFEEULL;
constexpr double kRankCutoff = 1e-10;

void fill_gaussian(Eigen::Ref<Eigen::VectorXd> v, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
}

// Modified Gram-Schmidt, two passes. Columns that collapse (the block
// exceeds the numerical rank of the operator) are refilled from `rng`.
void orthonormalize(ColMatrix& q, Rng& rng) {
  const Index cols = q.cols();
  for (Index j = 0; j < cols; ++j) {
    for (int attempt = 0;; ++attempt) {
      const double before = q.col(j).norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
      }
      const double after = q.col(j).norm();
      if (before > 0.0 && after > 1e-10 * before) {
        q.col(j) /= after;
        break;
      }
      if (attempt > 8) fail(ErrorCode::ConvergenceFailure, "cannot complete orthonormal basis");
      fill_gaussian(q.col(j), rng);
    }
  }
}

}  // namespace

void ProjectionConfig::validate() const {
  if (proj_dim < 1) fail(ErrorCode::InvalidArgument, "proj_dim must be >= 1");
  if (!(tolerance > 0.0)) fail(ErrorCode::InvalidArgument, "projection tolerance must be > 0");
  if (max_power_iterations < 1) fail(ErrorCode::InvalidArgument, "max_power_iterations must be >= 1");
}

Matrix to_matrix(const FeatureMatrix& f) { return f.cast<double>(); }

ProjectedFeatures svd_project(const Matrix& x, const ProjectionConfig& cfg) {
  cfg.validate();
  const Index n = x.rows();
  const Index d = x.cols();
  if (n < 1 || d < 1) fail(ErrorCode::InvalidArgument, "svd_project needs a non-empty matrix");
  if (!x.allFinite()) fail(ErrorCode::NonFiniteInput, "svd_project input has non-finite entries");

  const bool right_side = d <= n;  // eigen-decompose X^T X, else X X^T
  const Index m = std::min(n, d);
  const Index k = std::min<Index>(cfg.proj_dim, m);
  const Index block = std::min<Index>(m, k + std::max<Index>(8, k / 4));

  const ColMatrix gram = right_side ? ColMatrix(x.transpose() * x) : ColMatrix(x * x.transpose());

  Rng rng(kStartSeed);
  ColMatrix q(m, block);
  for (Index j = 0; j < block; ++j) fill_gaussian(q.col(j), rng);
  orthonormalize(q, rng);

  Eigen::VectorXd ritz_prev;
  ColMatrix ritz_vectors;
  bool converged = false;
  for (int it = 0; it < cfg.max_power_iterations; ++it) {
    const ColMatrix z = gram * q;
    ColMatrix h = q.transpose() * z;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<ColMatrix> eig(h);
    // Ascending from Eigen; reverse to descending.
    const ColMatrix w = eig.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd ritz = eig.eigenvalues().reverse();
    ritz_vectors = q * w;

    if (block == m) {
      converged = true;  // the block spans the whole space: Rayleigh-Ritz is exact
      break;
    }
    const double scale = std::max(std::abs(ritz[0]), 1e-300);
    if (ritz_prev.size() == ritz.size()) {
      const double change = (ritz.head(k) - ritz_prev.head(k)).cwiseAbs().maxCoeff();
      if (change <= cfg.tolerance * scale || ritz[0] == 0.0) {
        converged = true;
        break;
      }
    }
    ritz_prev = ritz;
    q = z * w;
    orthonormalize(q, rng);
  }
  if (!converged) {
    fail(ErrorCode::ConvergenceFailure, "orthogonal iteration did not converge within " +
                                            std::to_string(cfg.max_power_iterations) + " iterations");
  }

  ProjectedFeatures out;
  out.matrix = Matrix::Zero(n, cfg.proj_dim);
  double sigma_max = 0.0;
  for (Index j = 0; j < k; ++j) {
    Eigen::VectorXd v;
    if (right_side) {
      v = ritz_vectors.col(j);
    } else {
      v = x.transpose() * ritz_vectors.col(j);
      const double norm = v.norm();
      if (!(norm > kRankCutoff * sigma_max) || norm == 0.0) break;
      v /= norm;
    }
    Eigen::VectorXd score = x * v;
    const double sigma = score.norm();
    if (j == 0) sigma_max = sigma;
    if (sigma == 0.0 || sigma <= kRankCutoff * sigma_max) break;

    Index arg = 0;
    for (Index i = 1; i < n; ++i) {
      if (std::abs(score[i]) > std::abs(score[arg])) arg = i;
    }
    if (score[arg] < 0.0) score = -score;
    out.matrix.col(j) = score;
    out.singular_values.push_back(sigma);
  }
  // Ritz ordering is by eigenvalue; recomputed norms can swap near-ties.
  for (std::size_t j = 1; j < out.singular_values.size(); ++j) {
    for (std::size_t i = j; i > 0 && out.singular_values[i] > out.singular_values[i - 1]; --i) {
      std::swap(out.singular_values[i], out.singular_values[i - 1]);
      out.matrix.col(static_cast<Index>(i)).swap(out.matrix.col(static_cast<Index>(i - 1)));
    }
  }

  if (cfg.l2_normalize) {
    for (Index i = 0; i < n; ++i) {
      const double norm = out.matrix.row(i).norm();
      if (norm > 0.0) out.matrix.row(i) /= norm;
    }
  }
  return out;
}

std::vector<ProjectedFeatures> project_all(const std::vector<GraphDataset>& graphs,
                                           const ProjectionConfig& cfg) {
  if (graphs.empty()) fail(ErrorCode::EmptyDatasetList, "project_all needs at least one graph");
  std::vector<ProjectedFeatures> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    try {
      auto p = svd_project(to_matrix(g.features), cfg);
      p.source_name = g.name;
      out.push_back(std::move(p));
    } catch (const Error& e) {
      throw Error(e.code(), g.name + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gcope
