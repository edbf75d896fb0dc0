#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcope/checkpoint.hpp"
#include "gcope/graph_store.hpp"
#include "gcope/nn.hpp"
#include "gcope/projection.hpp"
#include "gcope/subgraph.hpp"

namespace gcope {

struct FewShotTask {
  std::shared_ptr<const GraphDataset> target;
  int num_classes = 0;
  int shots = 0;
  std::vector<Index> train_ids;
  std::vector<Index> val_ids;
  std::vector<Index> test_ids;
  int hops = 2;
  std::uint64_t split_seed = 0;

  bool operator==(const FewShotTask& o) const {
    return num_classes == o.num_classes && shots == o.shots && train_ids == o.train_ids && val_ids == o.val_ids &&
           test_ids == o.test_ids && hops == o.hops && split_seed == o.split_seed;
  }
};

/// K training nodes per class, the remaining labeled nodes split 1:9 into
/// validation and test (validation gets round(R/10)).
FewShotTask build_fewshot_task(std::shared_ptr<const GraphDataset> g, int shots, int hops, std::uint64_t seed);

struct InducedSubgraph {
  std::vector<Index> nodes;  // BFS order, each layer by increasing id
  Csr adjacency;
  Matrix features;
  Index center = 0;
};

InducedSubgraph induce_subgraph(const GraphDataset& g, Index center, int hops);
/// Same node set and edges, with rows taken from an already projected matrix.
InducedSubgraph induce_subgraph(const GraphDataset& g, const Matrix& features, Index center, int hops);

enum class TransferMode { Finetune, Prompt };
std::string to_string(TransferMode m);
TransferMode parse_transfer_mode(const std::string& s);

struct TransferConfig {
  TransferMode mode = TransferMode::Finetune;
  int epochs = 100;
  double lr = 1e-4;
  int patience = 20;
  int prompt_tokens = 10;
  Readout readout = Readout::Mean;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learnable tokens inserted into every node feature as
/// x + sum_t softmax_t(p_t . x) p_t. Zero-initialized.
class PromptModule {
 public:
  PromptModule() = default;
  PromptModule(int tokens, Index dim);
  Var apply(Tape& tape, Var features);
  Param& tokens() { return tokens_; }
  const Param& tokens() const { return tokens_; }

 private:
  Param tokens_;
};

struct TrainedModel {
  TransferMode mode = TransferMode::Finetune;
  std::unique_ptr<Encoder> encoder;
  LinearHead head;
  std::optional<PromptModule> prompt;
  Readout readout = Readout::Mean;
  Matrix features;  // the target's projected features
  int best_epoch = 0;
  double best_val_acc = 0.0;

  /// Parameters the optimizer updates in this mode.
  std::vector<Param*> trainable();
  Index trainable_count();
};

/// Logits (one row per center) for the induced subgraphs of `centers`.
Var forward_logits(Tape& tape, TrainedModel& model, const FewShotTask& task, const std::vector<Index>& centers);

/// Trains in place for cfg.epochs with early stopping on validation
/// accuracy; the best-validation weights are restored at the end.
void train_model(TrainedModel& model, const FewShotTask& task, const TransferConfig& cfg);

/// Encoder from the checkpoint plus a fresh head; target features are
/// projected with `proj` (which must match the checkpoint's proj_dim).
TrainedModel finetune(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                      TransferConfig cfg);
TrainedModel prompt_transfer(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                             TransferConfig cfg);
/// Dispatches on cfg.mode.
TrainedModel transfer(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                      const TransferConfig& cfg);

/// Wraps an encoder (pretrained or fresh) for the task without training.
TrainedModel make_trained_model(std::unique_ptr<Encoder> encoder, const FewShotTask& task, const Matrix& features,
                                const TransferConfig& cfg);

enum class Split { Train, Val, Test };

struct MetricReport {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  Index count = 0;

  bool operator==(const MetricReport&) const = default;
};

/// Accuracy, macro one-vs-rest AUC (ties count half) and macro F1. AUC
/// averages over classes having both positives and negatives in the split;
/// F1 averages over classes that occur in the labels or predictions.
MetricReport compute_metrics(const Matrix& scores, const std::vector<int>& labels, int num_classes);

MetricReport evaluate_model(TrainedModel& model, const FewShotTask& task, Split split);

}  // namespace gcope
