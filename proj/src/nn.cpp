#include "gcope/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gcope/error.hpp"

namespace gcope {

std::string to_string(EncoderKind k) { return k == EncoderKind::Gcn ? "gcn" : "fagcn"; }
std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }
std::string to_string(Readout r) {
  switch (r) {
    case Readout::Mean: return "mean";
    case Readout::Sum: return "sum";
    case Readout::Max: return "max";
  }
  return "mean";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "gcn") return EncoderKind::Gcn;
  if (s == "fagcn") return EncoderKind::Fagcn;
  fail(ErrorCode::InvalidArgument, "unknown encoder '" + s + "' (expected gcn|fagcn)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  fail(ErrorCode::InvalidArgument, "unknown activation '" + s + "' (expected relu|tanh)");
}

Readout parse_readout(const std::string& s) {
  if (s == "mean") return Readout::Mean;
  if (s == "sum") return Readout::Sum;
  if (s == "max") return Readout::Max;
  fail(ErrorCode::InvalidArgument, "unknown readout '" + s + "' (expected mean|sum|max)");
}

ad::Reduce to_reduce(Readout r) {
  switch (r) {
    case Readout::Mean: return ad::Reduce::Mean;
    case Readout::Sum: return ad::Reduce::Sum;
    case Readout::Max: return ad::Reduce::Max;
  }
  return ad::Reduce::Mean;
}

Var activate(Var x, Activation a) { return a == Activation::Relu ? ad::relu(x) : ad::tanh(x); }

Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < fan_in; ++i)
    for (Index j = 0; j < fan_out; ++j) m(i, j) = dist(rng);
  return m;
}

std::vector<const Param*> Encoder::params_view() const {
  auto ps = const_cast<Encoder*>(this)->params();
  return {ps.begin(), ps.end()};
}

namespace {

void check_input(const EncoderConfig& cfg, Var features, const Csr& adjacency) {
  if (features.cols() != cfg.input_dim) {
    fail(ErrorCode::ShapeMismatch, "encoder expects " + std::to_string(cfg.input_dim) +
                                       " input columns, got " + std::to_string(features.cols()));
  }
  if (adjacency.rows != features.rows()) {
    fail(ErrorCode::ShapeMismatch, "adjacency has " + std::to_string(adjacency.rows) + " rows, features " +
                                       std::to_string(features.rows()));
  }
}

void check_finite(Var out) {
  if (!out.value().allFinite()) fail(ErrorCode::NonFiniteActivation, "encoder produced non-finite activations");
}

void check_config(const EncoderConfig& cfg) {
  if (cfg.num_layers < 1) fail(ErrorCode::InvalidArgument, "encoder needs at least one layer");
  if (cfg.input_dim < 1 || cfg.hidden_dim < 1) fail(ErrorCode::InvalidArgument, "encoder dims must be positive");
  if (cfg.kind == EncoderKind::Fagcn && !(cfg.fagcn_eps >= 0.0 && cfg.fagcn_eps <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "fagcn eps must lie in [0,1]");
  }
}

}  // namespace

Csr gcn_normalize(const Csr& adjacency) {
  const Index n = adjacency.rows;
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
  for (Index r = 0; r < n; ++r) {
    for (Index k = adjacency.row_ptr[r]; k < adjacency.row_ptr[r + 1]; ++k) degree[r] += adjacency.value(k);
  }
  Csr out;
  out.rows = n;
  out.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  out.cols.reserve(static_cast<std::size_t>(adjacency.nnz() + n));
  out.values.reserve(out.cols.capacity());
  for (Index r = 0; r < n; ++r) {
    bool diag_done = false;
    auto emit = [&](Index c, double a) {
      out.cols.push_back(c);
      out.values.push_back(a / std::sqrt(degree[r] * degree[c]));
    };
    for (Index k = adjacency.row_ptr[r]; k < adjacency.row_ptr[r + 1]; ++k) {
      const Index c = adjacency.cols[k];
      if (!diag_done && c >= r) {
        if (c == r) {
          emit(r, adjacency.value(k) + 1.0);
          diag_done = true;
          continue;
        }
        emit(r, 1.0);
        diag_done = true;
      }
      emit(c, adjacency.value(k));
    }
    if (!diag_done) emit(r, 1.0);
    out.row_ptr[r + 1] = static_cast<Index>(out.cols.size());
  }
  return out;
}

GcnEncoder::GcnEncoder(const EncoderConfig& cfg, Rng& rng) : Encoder(cfg) {
  check_config(cfg);
  Index in = cfg.input_dim;
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    weights_.emplace_back(prefix + ".weight", glorot_uniform(in, cfg.hidden_dim, rng));
    biases_.emplace_back(prefix + ".bias", Matrix::Zero(1, cfg.hidden_dim));
    in = cfg.hidden_dim;
  }
}

Var GcnEncoder::forward(Tape& tape, Var features, const Csr& adjacency) {
  check_input(cfg_, features, adjacency);
  auto norm = std::make_shared<const Csr>(gcn_normalize(adjacency));
  Var h = features;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::matmul(h, tape.param(weights_[l]));
    h = ad::spmm(norm, h);
    h = ad::add_row(h, tape.param(biases_[l]));
    if (l + 1 < weights_.size()) h = activate(h, cfg_.activation);
  }
  check_finite(h);
  return h;
}

std::vector<Param*> GcnEncoder::params() {
  std::vector<Param*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

FagcnEncoder::FagcnEncoder(const EncoderConfig& cfg, Rng& rng)
    : Encoder(cfg),
      input_weight_("encoder.input.weight", glorot_uniform(cfg.input_dim, cfg.hidden_dim, rng)),
      input_bias_("encoder.input.bias", Matrix::Zero(1, cfg.hidden_dim)) {
  check_config(cfg);
  for (int l = 0; l < cfg.num_layers; ++l) {
    Matrix g = glorot_uniform(2 * cfg.hidden_dim, 1, rng);
    Matrix gate(cfg.hidden_dim, 2);
    gate.col(0) = g.topRows(cfg.hidden_dim);
    gate.col(1) = g.bottomRows(cfg.hidden_dim);
    gates_.emplace_back("encoder.layer" + std::to_string(l) + ".gate", std::move(gate));
  }
}

Var FagcnEncoder::forward(Tape& tape, Var features, const Csr& adjacency) {
  check_input(cfg_, features, adjacency);
  auto pattern = std::make_shared<const Csr>(adjacency);
  Matrix norm(adjacency.nnz(), 1);
  for (Index r = 0; r < adjacency.rows; ++r) {
    for (Index k = adjacency.row_ptr[r]; k < adjacency.row_ptr[r + 1]; ++k) {
      const double dr = static_cast<double>(adjacency.degree(r));
      const double dc = static_cast<double>(adjacency.degree(adjacency.cols[k]));
      norm(k, 0) = 1.0 / std::sqrt(dr * dc);
    }
  }

  Var h0 = ad::add_row(ad::matmul(features, tape.param(input_weight_)), tape.param(input_bias_));
  h0 = activate(h0, cfg_.activation);
  Var residual = ad::scale(h0, cfg_.fagcn_eps);
  Var h = h0;
  for (auto& gate : gates_) {
    Var scores = ad::matmul(h, tape.param(gate));
    Var alpha = ad::tanh(ad::edge_score(pattern, scores));
    Var weights = ad::hadamard_const(alpha, norm);
    h = ad::add(residual, ad::spmm_edge(pattern, weights, h));
  }
  check_finite(h);
  return h;
}

std::vector<Param*> FagcnEncoder::params() {
  std::vector<Param*> out{&input_weight_, &input_bias_};
  for (auto& g : gates_) out.push_back(&g);
  return out;
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.kind == EncoderKind::Gcn) return std::make_unique<GcnEncoder>(cfg, rng);
  return std::make_unique<FagcnEncoder>(cfg, rng);
}

MlpDecoder::MlpDecoder(Index input_dim, Index hidden_dim, Index output_dim, Rng& rng)
    : w1_("decoder.fc1.weight", glorot_uniform(input_dim, hidden_dim, rng)),
      b1_("decoder.fc1.bias", Matrix::Zero(1, hidden_dim)),
      w2_("decoder.fc2.weight", glorot_uniform(hidden_dim, output_dim, rng)),
      b2_("decoder.fc2.bias", Matrix::Zero(1, output_dim)) {}

Var MlpDecoder::forward(Tape& tape, Var embeddings) {
  Var h = ad::relu(ad::add_row(ad::matmul(embeddings, tape.param(w1_)), tape.param(b1_)));
  return ad::add_row(ad::matmul(h, tape.param(w2_)), tape.param(b2_));
}

std::vector<Param*> MlpDecoder::params() { return {&w1_, &b1_, &w2_, &b2_}; }

LinearHead::LinearHead(Index input_dim, Index classes, std::string prefix)
    : weight_(prefix + ".weight", Matrix::Zero(input_dim, classes)),
      bias_(prefix + ".bias", Matrix::Zero(1, classes)) {}

Var LinearHead::forward(Tape& tape, Var x) {
  return ad::add_row(ad::matmul(x, tape.param(weight_)), tape.param(bias_));
}

Vector graph_readout(const Matrix& embeddings, std::vector<Index> subset) {
  if (subset.empty()) fail(ErrorCode::EmptySubset, "graph_readout needs at least one node");
  std::sort(subset.begin(), subset.end());
  Vector sum = Vector::Zero(embeddings.cols());
  for (Index i : subset) {
    if (i < 0 || i >= embeddings.rows()) fail(ErrorCode::IndexOutOfRange, "graph_readout: node index out of range");
    sum += embeddings.row(i).transpose();
  }
  return sum / static_cast<double>(subset.size());
}

}  // namespace gcope
