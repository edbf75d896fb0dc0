#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "gcope/amalgam.hpp"
#include "gcope/pretrain.hpp"
#include "gcope/transfer.hpp"

namespace gcope {

enum class Scheme { Supervised, IsolatedPretrain, Gcope };
std::string to_string(Scheme s);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single repeat
};

struct RunSummary {
  Scheme scheme = Scheme::Gcope;
  TransferMode mode = TransferMode::Finetune;
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricReport> repeats;
  MetricStats acc, auc, f1;
  std::vector<LossReport> pretrain_history;
  Index joint_nodes = 0;    // 0 when nothing was pretrained
  Index joint_entries = 0;  // stored adjacency entries of the joint graph
};

/// Mean and sample std per metric over the repeats.
RunSummary summarize(Scheme scheme, TransferMode mode, std::string label, std::vector<std::uint64_t> seeds,
                     std::vector<MetricReport> repeats);

struct ExperimentSpec {
  std::vector<GraphDataset> sources;
  std::shared_ptr<const GraphDataset> target;
  ProjectionConfig proj;
  CoordinatorConfig coords;
  EncoderConfig encoder;
  PretrainConfig pretrain;
  TransferConfig transfer;
  int shots = 1;
  int hops = 2;
  int repeats = 5;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = GCOPE_THREADS, then hardware concurrency
};

/// Split seed of every repeat.
std::vector<std::uint64_t> repeat_seeds(std::uint64_t seed, int repeats);

/// Worker count: `requested` if positive, else GCOPE_THREADS if set and
/// positive, else the hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions are rethrown
/// on the caller, lowest index first.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

RunSummary run_supervised(const ExperimentSpec& spec);
/// Transfer repeats from an existing checkpoint.
RunSummary run_transfer_repeats(const ExperimentSpec& spec, const Checkpoint& ckpt, Scheme scheme,
                                std::string label);
/// Pretraining on sources without coordinators, then transfer.
RunSummary run_isolated_pretrain(const ExperimentSpec& spec);
RunSummary run_gcope(const ExperimentSpec& spec);

enum class AblationKind { InterEdges, LambdaSweep, CoordinatorCount };
std::string to_string(AblationKind k);
AblationKind parse_ablation_kind(const std::string& s);

struct AblationRow {
  std::string factor;
  std::string value;
  RunSummary summary;
};

/// One gcope run per grid point; everything except the ablated factor,
/// seeds included, is held fixed.
std::vector<AblationRow> run_ablation(AblationKind kind, const std::vector<std::string>& grid,
                                      const ExperimentSpec& spec);

struct Improvement {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};
/// (gcope mean / mean of baseline means - 1) * 100 per metric.
Improvement improvement_pct(const RunSummary& gcope, const std::vector<RunSummary>& baselines);

struct ScalingRow {
  Index nodes = 0;
  Index datasets = 0;
  double seconds_per_epoch = 0.0;
};

struct ScalingProbeConfig {
  Index datasets = 2;
  int coordinators = 1;
  EncoderKind encoder = EncoderKind::Gcn;
  Index feature_dim = 32;
  Index proj_dim = 100;
  int timed_epochs = 3;
  std::uint64_t seed = 7;
};

/// Median wall time of a pretraining epoch on synthetic data of each total
/// size, after one warm-up epoch.
std::vector<ScalingRow> runtime_scaling_probe(const std::vector<Index>& sizes, const ScalingProbeConfig& cfg);

void write_repeats_csv(std::ostream& out, const std::vector<RunSummary>& runs);
void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& runs);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history);
/// Scheme x metric table of mean±std with an IMP row comparing the last
/// gcope run against every other run.
std::string markdown_report(const std::vector<RunSummary>& runs);

/// Shortest decimal that round-trips the double.
std::string format_number(double v);

}  // namespace gcope
