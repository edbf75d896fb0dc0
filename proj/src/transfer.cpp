#include "gcope/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gcope/error.hpp"
#include "gcope/optim.hpp"
#include "gcope/pretrain.hpp"

namespace gcope {

FewShotTask build_fewshot_task(std::shared_ptr<const GraphDataset> g, int shots, int hops, std::uint64_t seed) {
  if (!g) fail(ErrorCode::InvalidArgument, "few-shot task needs a target graph");
  if (shots < 1) fail(ErrorCode::InvalidArgument, "shots must be >= 1");
  if (hops < 0) fail(ErrorCode::InvalidArgument, "hops must be >= 0");
  const int c = g->num_classes;
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(c));
  for (Index v = 0; v < g->num_nodes(); ++v) {
    const int y = g->labels[v];
    if (y != kUnlabeled) by_class[y].push_back(v);
  }
  for (int k = 0; k < c; ++k) {
    if (static_cast<int>(by_class[k].size()) < shots + 2) {
      fail(ErrorCode::InsufficientClassSupport, "class " + std::to_string(k) + " has " +
                                                    std::to_string(by_class[k].size()) + " labeled nodes, " +
                                                    std::to_string(shots) + "-shot needs at least " +
                                                    std::to_string(shots + 2));
    }
  }

  auto shuffle = [](std::vector<Index>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(v[i - 1], v[pick(rng)]);
    }
  };

  FewShotTask task;
  task.target = g;
  task.num_classes = c;
  task.shots = shots;
  task.hops = hops;
  task.split_seed = seed;
  Rng rng(seed);
  std::vector<bool> in_train(static_cast<std::size_t>(g->num_nodes()), false);
  for (int k = 0; k < c; ++k) {
    shuffle(by_class[k], rng);
    for (int s = 0; s < shots; ++s) {
      task.train_ids.push_back(by_class[k][s]);
      in_train[by_class[k][s]] = true;
    }
  }
  std::vector<Index> rest;
  for (Index v = 0; v < g->num_nodes(); ++v)
    if (g->labels[v] != kUnlabeled && !in_train[v]) rest.push_back(v);
  shuffle(rest, rng);
  const std::size_t n_val = (rest.size() + 5) / 10;
  task.val_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
  task.test_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
  std::sort(task.val_ids.begin(), task.val_ids.end());
  std::sort(task.test_ids.begin(), task.test_ids.end());
  return task;
}

InducedSubgraph induce_subgraph(const GraphDataset& g, const Matrix& features, Index center, int hops) {
  if (features.rows() != g.num_nodes()) fail(ErrorCode::ShapeMismatch, "feature rows differ from node count");
  BallOptions opts;
  opts.hops = hops;
  const Subgraph s = induce_on(g.adjacency, bfs_ball(g.adjacency, center, opts), 0);
  InducedSubgraph out;
  out.adjacency = s.local_adjacency();
  out.features.resize(s.size(), features.cols());
  for (Index i = 0; i < s.size(); ++i) out.features.row(i) = features.row(s.nodes[i]);
  out.nodes = s.nodes;
  out.center = 0;
  return out;
}

InducedSubgraph induce_subgraph(const GraphDataset& g, Index center, int hops) {
  return induce_subgraph(g, to_matrix(g.features), center, hops);
}

std::string to_string(TransferMode m) { return m == TransferMode::Finetune ? "finetune" : "prompt"; }

TransferMode parse_transfer_mode(const std::string& s) {
  if (s == "finetune") return TransferMode::Finetune;
  if (s == "prompt") return TransferMode::Prompt;
  fail(ErrorCode::InvalidArgument, "unknown transfer mode '" + s + "' (expected finetune|prompt)");
}

void TransferConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::InvalidArgument, "transfer epochs must be >= 1");
  if (!(lr >= 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (patience < 1) fail(ErrorCode::InvalidArgument, "patience must be >= 1");
  if (prompt_tokens < 1) fail(ErrorCode::InvalidArgument, "prompt_tokens must be >= 1");
}

PromptModule::PromptModule(int tokens, Index dim) : tokens_("prompt.tokens", Matrix::Zero(tokens, dim)) {
  if (tokens < 1) fail(ErrorCode::InvalidArgument, "prompt needs at least one token");
}

Var PromptModule::apply(Tape& tape, Var features) {
  Var p = tape.param(tokens_);
  Var weights = ad::softmax_rows(ad::matmul(features, ad::transpose(p)));
  return ad::add(features, ad::matmul(weights, p));
}

std::vector<Param*> TrainedModel::trainable() {
  std::vector<Param*> out;
  if (mode == TransferMode::Finetune) {
    out = encoder->params();
  } else {
    out.push_back(&prompt->tokens());
  }
  for (Param* p : head.params()) out.push_back(p);
  return out;
}

Index TrainedModel::trainable_count() {
  Index n = 0;
  for (Param* p : trainable()) n += p->size();
  return n;
}

namespace {

struct TaskBatch {
  PackedBatch packed;
  Matrix x;
  std::vector<int> labels;
};

TaskBatch make_batch(const TrainedModel& model, const FewShotTask& task, const std::vector<Index>& centers) {
  const GraphDataset& g = *task.target;
  std::vector<Subgraph> subs;
  subs.reserve(centers.size());
  BallOptions opts;
  opts.hops = task.hops;
  TaskBatch b;
  for (Index c : centers) {
    subs.push_back(induce_on(g.adjacency, bfs_ball(g.adjacency, c, opts), 0));
    b.labels.push_back(g.labels[c]);
  }
  b.packed = pack(subs, model.features.cols());
  b.x.resize(static_cast<Index>(b.packed.host_ids.size()), model.features.cols());
  for (std::size_t r = 0; r < b.packed.host_ids.size(); ++r) b.x.row(r) = model.features.row(b.packed.host_ids[r]);
  return b;
}

Var batch_logits(Tape& tape, TrainedModel& model, const TaskBatch& b) {
  Var x = tape.constant(b.x);
  if (model.mode == TransferMode::Prompt) x = model.prompt->apply(tape, x);
  Var h = model.encoder->forward(tape, x, b.packed.adjacency);
  Var pooled = ad::segment_reduce(h, b.packed.offsets, to_reduce(model.readout));
  return model.head.forward(tape, pooled);
}

Matrix softmax_scores(const Matrix& logits) {
  Matrix out = logits;
  for (Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

double accuracy_of(const Matrix& logits, const std::vector<int>& labels) {
  Index hit = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (arg == labels[r]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace

Var forward_logits(Tape& tape, TrainedModel& model, const FewShotTask& task, const std::vector<Index>& centers) {
  return batch_logits(tape, model, make_batch(model, task, centers));
}

TrainedModel make_trained_model(std::unique_ptr<Encoder> encoder, const FewShotTask& task, const Matrix& features,
                                const TransferConfig& cfg) {
  if (!task.target) fail(ErrorCode::InvalidArgument, "task has no target graph");
  if (features.rows() != task.target->num_nodes()) fail(ErrorCode::ShapeMismatch, "projected target has wrong row count");
  if (features.cols() != encoder->config().input_dim) {
    fail(ErrorCode::DimensionMismatch, "target features have " + std::to_string(features.cols()) +
                                           " columns, encoder expects " + std::to_string(encoder->config().input_dim));
  }
  TrainedModel m;
  m.mode = cfg.mode;
  m.readout = cfg.readout;
  m.head = LinearHead(encoder->output_dim(), task.num_classes);
  if (cfg.mode == TransferMode::Prompt) m.prompt = PromptModule(cfg.prompt_tokens, features.cols());
  m.encoder = std::move(encoder);
  m.features = features;
  return m;
}

void train_model(TrainedModel& model, const FewShotTask& task, const TransferConfig& cfg) {
  cfg.validate();
  if (task.train_ids.empty()) fail(ErrorCode::EmptySplit, "task has no training nodes");
  const TaskBatch train = make_batch(model, task, task.train_ids);
  const bool has_val = !task.val_ids.empty();
  const TaskBatch val = has_val ? make_batch(model, task, task.val_ids) : TaskBatch{};

  std::vector<Param*> params = model.trainable();
  AdamConfig ac;
  ac.lr = cfg.lr;
  Adam adam(params, ac);
  std::vector<Param*> frozen;
  if (model.mode == TransferMode::Prompt) frozen = model.encoder->params();

  std::vector<Matrix> best;
  double best_acc = -1.0;
  double best_loss = 0.0;
  int best_epoch = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    {
      Tape tape;
      Var loss = ad::softmax_cross_entropy(batch_logits(tape, model, train), train.labels);
      if (!std::isfinite(loss.scalar())) {
        fail(ErrorCode::Diverged, "transfer loss became non-finite at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      adam.step();
      for (Param* p : frozen) p->zero_grad();
    }
    const TaskBatch& probe = has_val ? val : train;
    Tape eval_tape;
    Var probe_logits = batch_logits(eval_tape, model, probe);
    const double acc = accuracy_of(probe_logits.value(), probe.labels);
    const double loss = ad::softmax_cross_entropy(probe_logits, probe.labels).scalar();
    for (Param* p : model.encoder->params()) p->zero_grad();
    for (Param* p : params) p->zero_grad();
    // Accuracy plateaus for long stretches at small learning rates; a lower
    // validation loss at equal accuracy still counts as progress.
    if (acc > best_acc || (acc == best_acc && loss < best_loss)) {
      best_acc = acc;
      best_loss = loss;
      best_epoch = epoch;
      best.clear();
      for (Param* p : params) best.push_back(p->value);
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  model.best_epoch = best_epoch;
  model.best_val_acc = best_acc;
}

namespace {

TrainedModel prepare(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                     const TransferConfig& cfg) {
  const Index ckpt_dim = std::stoll(ckpt.hyper_value("proj_dim"));
  if (ckpt_dim != proj.proj_dim) {
    fail(ErrorCode::DimensionMismatch, "checkpoint was pretrained with proj_dim " + std::to_string(ckpt_dim) +
                                           ", transfer configured with " + std::to_string(proj.proj_dim));
  }
  const ProjectedFeatures projected = svd_project(to_matrix(task.target->features), proj);
  return make_trained_model(load_encoder(ckpt), task, projected.matrix, cfg);
}

}  // namespace

TrainedModel finetune(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                      TransferConfig cfg) {
  cfg.mode = TransferMode::Finetune;
  TrainedModel m = prepare(ckpt, task, proj, cfg);
  train_model(m, task, cfg);
  return m;
}

TrainedModel prompt_transfer(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                             TransferConfig cfg) {
  cfg.mode = TransferMode::Prompt;
  TrainedModel m = prepare(ckpt, task, proj, cfg);
  train_model(m, task, cfg);
  return m;
}

TrainedModel transfer(const Checkpoint& ckpt, const FewShotTask& task, const ProjectionConfig& proj,
                      const TransferConfig& cfg) {
  return cfg.mode == TransferMode::Finetune ? finetune(ckpt, task, proj, cfg) : prompt_transfer(ckpt, task, proj, cfg);
}

MetricReport compute_metrics(const Matrix& scores, const std::vector<int>& labels, int num_classes) {
  const Index n = static_cast<Index>(labels.size());
  if (n == 0) fail(ErrorCode::EmptySplit, "cannot score an empty split");
  if (scores.rows() != n || scores.cols() != num_classes) fail(ErrorCode::ShapeMismatch, "score matrix shape");

  std::vector<Index> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  Index hit = 0;
  for (Index r = 0; r < n; ++r) {
    Index pred = 0;
    scores.row(r).maxCoeff(&pred);
    const int y = labels[r];
    if (pred == y) {
      ++hit;
      ++tp[y];
    } else {
      ++fp[pred];
      ++fn[y];
    }
  }
  MetricReport m;
  m.count = n;
  m.acc = static_cast<double>(hit) / static_cast<double>(n);

  double f1_sum = 0.0;
  int f1_classes = 0;
  for (int k = 0; k < num_classes; ++k) {
    const Index denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom == 0) continue;
    f1_sum += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
    ++f1_classes;
  }
  m.f1 = f1_sum / f1_classes;

  // Rank-sum AUC per class with midranks for ties.
  double auc_sum = 0.0;
  int auc_classes = 0;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (int k = 0; k < num_classes; ++k) {
    Index pos = 0;
    for (int y : labels) pos += (y == k);
    const Index neg = n - pos;
    if (pos == 0 || neg == 0) continue;
    for (Index i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a, k) < scores(b, k); });
    double pos_rank_sum = 0.0;
    for (Index i = 0; i < n;) {
      Index j = i;
      while (j + 1 < n && scores(order[j + 1], k) == scores(order[i], k)) ++j;
      const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
      for (Index t = i; t <= j; ++t)
        if (labels[order[t]] == k) pos_rank_sum += midrank;
      i = j + 1;
    }
    const double u = pos_rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
    auc_sum += u / (static_cast<double>(pos) * static_cast<double>(neg));
    ++auc_classes;
  }
  m.auc = auc_classes > 0 ? auc_sum / auc_classes : 0.5;
  return m;
}

MetricReport evaluate_model(TrainedModel& model, const FewShotTask& task, Split split) {
  const std::vector<Index>& ids = split == Split::Train ? task.train_ids
                                  : split == Split::Val ? task.val_ids
                                                        : task.test_ids;
  if (ids.empty()) fail(ErrorCode::EmptySplit, "requested split is empty");
  const TaskBatch b = make_batch(model, task, ids);
  Tape tape;
  const Matrix logits = batch_logits(tape, model, b).value();
  return compute_metrics(softmax_scores(logits), b.labels, task.num_classes);
}

}  // namespace gcope
