#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gcope/amalgam.hpp"
#include "gcope/autodiff.hpp"
#include "gcope/checkpoint.hpp"
#include "gcope/nn.hpp"
#include "gcope/optim.hpp"
#include "gcope/projection.hpp"
#include "gcope/subgraph.hpp"

namespace gcope {

enum class AugKind { NodeDrop, EdgePerturb, AttrMask, Subgraph };
enum class Objective { GraphCl, SimGrace };

std::string to_string(AugKind k);
std::string to_string(Objective o);
AugKind parse_aug_kind(const std::string& s);
Objective parse_objective(const std::string& s);

struct AugmentationSpec {
  AugKind kind = AugKind::NodeDrop;
  double ratio = 0.2;
  void validate() const;
};

/// Number of items an augmentation touches out of `n`: ceil(ratio * n), with
/// a small slack so that exact products such as 0.2 * 10 are not rounded up
/// by floating-point noise.
Index augment_count(double ratio, Index n);

/// Returns a perturbed copy of `s`. The center and every node for which
/// `keep` holds are never removed. `feature_dim` sizes the attribute mask.
Subgraph augment(const Subgraph& s, const AugmentationSpec& spec, Rng& rng, Index feature_dim,
                 const std::function<bool(Index)>& keep = {});

struct PretrainConfig {
  Objective objective = Objective::GraphCl;
  double temperature = 0.5;
  double lambda = 0.2;
  int epochs = 100;
  Index batch_size = 128;
  int hops = 2;
  Index max_sample_nodes = 64;
  double perturb_scale = 0.1;
  double lr = 1e-4;
  Index decoder_hidden = 100;
  Readout readout = Readout::Mean;
  AugmentationSpec view_a{AugKind::NodeDrop, 0.2};
  AugmentationSpec view_b{AugKind::AttrMask, 0.2};
  // Stop once the total loss moved by less than this relative amount over
  // the last 10 epochs. 0 disables.
  double early_stop_tol = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossReport {
  int epoch = 0;
  double contrastive = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;

  bool operator==(const LossReport&) const = default;
};

/// Mean over anchors of -log softmax_j(cos(a_i, p_j) / tau)[i].
Var nt_xent(Var anchors, Var positives, double tau);

/// Mean squared error between decoder(embeddings) and targets.
Var reconstruction_loss(Tape& tape, MlpDecoder& decoder, Var embeddings, const Matrix& targets);

/// Copy of `enc` with every tensor W replaced by W + eta * std(W) * xi,
/// xi ~ N(0,1) drawn in parameter order, row-major. std is the population
/// standard deviation of W's entries.
std::unique_ptr<Encoder> perturbed_copy(const Encoder& enc, double eta, Rng& rng);

struct ViewPair {
  Var clean;
  Var perturbed;
};
/// Embeddings of the same input under `enc` and under a perturbed copy.
/// The perturbed weights are constants; gradients reach `features` through
/// both views.
ViewPair simgrace_views(Tape& tape, Encoder& enc, Var features, const Csr& adjacency, double eta, Rng& rng);

/// Everything that is optimized during pretraining.
struct PretrainModel {
  std::unique_ptr<Encoder> encoder;
  MlpDecoder decoder;
  CoordinatorSet coords;

  std::vector<Param*> params();
  PretrainModel clone() const;
};

/// Block-diagonal union of subgraphs of the joint graph.
struct PackedBatch {
  std::vector<Index> host_ids;   // row r of the batch is joint node host_ids[r]
  std::vector<Index> offsets;    // sample s spans rows [offsets[s], offsets[s+1])
  Csr adjacency;
  Matrix mask;                   // 1 everywhere except masked feature entries; empty if none
};
PackedBatch pack(const std::vector<Subgraph>& samples, Index feature_dim);

/// Clean samples plus the two contrastive views. Under simgrace view_b is
/// empty and `perturbed` holds the perturbed encoder.
struct PretrainBatch {
  std::vector<Subgraph> clean;
  std::vector<Subgraph> view_a;
  std::vector<Subgraph> view_b;
  std::unique_ptr<Encoder> perturbed;
};

PretrainBatch make_views(const PretrainModel& model, const JointGraph& jg, std::vector<Subgraph> clean,
                         const PretrainConfig& cfg, Rng& rng);

struct StepLoss {
  Var contrastive;
  Var reconstruction;
  Var total;
};

/// Contrastive term over the two views plus lambda times the reconstruction
/// of ordinary-node features from the clean view's embeddings.
StepLoss pretrain_loss(Tape& tape, PretrainModel& model, const JointGraph& jg, const PretrainBatch& batch,
                       const PretrainConfig& cfg);

/// Hyperparameter record shared by checkpoints and transfer-side checks.
std::vector<std::pair<std::string, std::string>> hyper_record(const ProjectionConfig& proj,
                                                              const EncoderConfig& enc,
                                                              const CoordinatorSet& coords,
                                                              const PretrainConfig& cfg);

/// The subset of the record that decides whether a checkpoint's encoder fits
/// a downstream configuration.
std::vector<std::pair<std::string, std::string>> architecture_record(const ProjectionConfig& proj,
                                                                     const EncoderConfig& enc, Readout readout);
std::uint64_t architecture_fingerprint(const Checkpoint& ckpt);

Checkpoint make_checkpoint(PretrainModel& model, const ProjectionConfig& proj, const PretrainConfig& cfg);

/// Rebuilds the encoder described by a checkpoint and loads its weights.
std::unique_ptr<Encoder> load_encoder(const Checkpoint& ckpt);
EncoderConfig encoder_config_from(const Checkpoint& ckpt);

/// Owns the joint graph, model and optimizer; one call per epoch.
class PretrainSession {
 public:
  PretrainSession(const std::vector<GraphDataset>& graphs, const ProjectionConfig& proj,
                  const CoordinatorConfig& coords, const EncoderConfig& enc, const PretrainConfig& cfg);
  PretrainSession(const PretrainSession&) = delete;
  PretrainSession& operator=(const PretrainSession&) = delete;

  LossReport run_epoch();
  int epochs_run() const { return epoch_; }
  Index steps_per_epoch() const;

  PretrainModel& model() { return model_; }
  const JointGraph& joint() const { return joint_; }
  const ProjectionConfig& projection() const { return proj_; }
  const PretrainConfig& config() const { return cfg_; }
  Checkpoint checkpoint() { return make_checkpoint(model_, proj_, cfg_); }

 private:
  ProjectionConfig proj_;
  PretrainConfig cfg_;
  PretrainModel model_;
  JointGraph joint_;
  std::unique_ptr<Adam> adam_;
  int epoch_ = 0;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<LossReport> history;
  JointGraph joint;
};

PretrainResult pretrain(const std::vector<GraphDataset>& graphs, const ProjectionConfig& proj,
                        const CoordinatorConfig& coords, const EncoderConfig& enc, const PretrainConfig& cfg);

}  // namespace gcope
