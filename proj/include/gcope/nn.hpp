#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gcope/autodiff.hpp"
#include "gcope/rng.hpp"
#include "gcope/types.hpp"

namespace gcope {

enum class EncoderKind { Gcn, Fagcn };
enum class Activation { Relu, Tanh };
enum class Readout { Mean, Sum, Max };

std::string to_string(EncoderKind k);
std::string to_string(Activation a);
std::string to_string(Readout r);
EncoderKind parse_encoder_kind(const std::string& s);
Activation parse_activation(const std::string& s);
Readout parse_readout(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Gcn;
  Index input_dim = 100;
  Index hidden_dim = 100;
  int num_layers = 2;
  Activation activation = Activation::Relu;
  double fagcn_eps = 0.3;
};

Var activate(Var x, Activation a);

/// Glorot-uniform fan_in x fan_out matrix.
Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng);

/// Graph encoder h(.). Parameters live inside the encoder; forward() binds
/// them onto the tape so gradients land in Param::grad.
class Encoder {
 public:
  virtual ~Encoder() = default;

  /// `adjacency` is the binary symmetric pattern; self-loops the encoder
  /// needs are added internally and never stored.
  virtual Var forward(Tape& tape, Var features, const Csr& adjacency) = 0;
  virtual std::vector<Param*> params() = 0;
  virtual std::unique_ptr<Encoder> clone() const = 0;

  const EncoderConfig& config() const { return cfg_; }
  Index output_dim() const { return cfg_.hidden_dim; }
  std::vector<const Param*> params_view() const;

 protected:
  explicit Encoder(EncoderConfig cfg) : cfg_(cfg) {}
  EncoderConfig cfg_;
};

/// Stacked GCN: H' = act(D^-1/2 (A+I) D^-1/2 H W + b). The activation is
/// applied between layers; the last layer is linear.
class GcnEncoder final : public Encoder {
 public:
  GcnEncoder(const EncoderConfig& cfg, Rng& rng);

  Var forward(Tape& tape, Var features, const Csr& adjacency) override;
  std::vector<Param*> params() override;
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<GcnEncoder>(*this); }

  std::vector<Param>& weights() { return weights_; }
  std::vector<Param>& biases() { return biases_; }

 private:
  std::vector<Param> weights_;
  std::vector<Param> biases_;
};

/// FAGCN: h0 = act(X W + b); each layer h' = eps*h0 + sum_j alpha_ij/sqrt(d_i d_j) h_j
/// with alpha_ij = tanh(g_l.h_i + g_r.h_j). The gate of a layer is stored as
/// a hidden x 2 matrix [g_l g_r].
class FagcnEncoder final : public Encoder {
 public:
  FagcnEncoder(const EncoderConfig& cfg, Rng& rng);

  Var forward(Tape& tape, Var features, const Csr& adjacency) override;
  std::vector<Param*> params() override;
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<FagcnEncoder>(*this); }

  Param& input_weight() { return input_weight_; }
  Param& input_bias() { return input_bias_; }
  std::vector<Param>& gates() { return gates_; }

 private:
  Param input_weight_;
  Param input_bias_;
  std::vector<Param> gates_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, Rng& rng);

/// D^-1/2 (A+I) D^-1/2 as a weighted CSR; diagonal entries already present in
/// A are incremented rather than duplicated.
Csr gcn_normalize(const Csr& adjacency);

/// Two affine layers emb -> hidden -> out with relu between.
class MlpDecoder {
 public:
  MlpDecoder() = default;
  MlpDecoder(Index input_dim, Index hidden_dim, Index output_dim, Rng& rng);

  Var forward(Tape& tape, Var embeddings);
  std::vector<Param*> params();
  Index output_dim() const { return w2_.value.cols(); }

 private:
  Param w1_, b1_, w2_, b2_;
};

/// Affine classifier head. Zero-initialized.
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(Index input_dim, Index classes, std::string prefix = "head");

  Var forward(Tape& tape, Var x);
  std::vector<Param*> params() { return {&weight_, &bias_}; }
  Index classes() const { return weight_.value.cols(); }

 private:
  Param weight_, bias_;
};

/// Mean of the selected rows; indices are sorted before summation so any
/// ordering of `subset` gives identical bits.
Vector graph_readout(const Matrix& embeddings, std::vector<Index> subset);

ad::Reduce to_reduce(Readout r);

}  // namespace gcope
