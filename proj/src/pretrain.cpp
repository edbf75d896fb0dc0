#include "gcope/pretrain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>

#include "gcope/error.hpp"

namespace gcope {

std::string to_string(AugKind k) {
  switch (k) {
    case AugKind::NodeDrop: return "node_drop";
    case AugKind::EdgePerturb: return "edge_perturb";
    case AugKind::AttrMask: return "attr_mask";
    case AugKind::Subgraph: return "subgraph";
  }
  return "node_drop";
}

std::string to_string(Objective o) { return o == Objective::GraphCl ? "graphcl" : "simgrace"; }

AugKind parse_aug_kind(const std::string& s) {
  if (s == "node_drop") return AugKind::NodeDrop;
  if (s == "edge_perturb") return AugKind::EdgePerturb;
  if (s == "attr_mask") return AugKind::AttrMask;
  if (s == "subgraph") return AugKind::Subgraph;
  fail(ErrorCode::InvalidArgument,
       "unknown augmentation '" + s + "' (expected node_drop|edge_perturb|attr_mask|subgraph)");
}

Objective parse_objective(const std::string& s) {
  if (s == "graphcl") return Objective::GraphCl;
  if (s == "simgrace") return Objective::SimGrace;
  fail(ErrorCode::InvalidArgument, "unknown objective '" + s + "' (expected graphcl|simgrace)");
}

void AugmentationSpec::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::InvalidArgument, "augmentation ratio must lie in (0,1)");
}

void PretrainConfig::validate() const {
  if (!(temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be > 0");
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidArgument, "lambda must be >= 0");
  if (epochs < 0) fail(ErrorCode::InvalidArgument, "epochs must be >= 0");
  if (batch_size < 2) fail(ErrorCode::InvalidArgument, "batch_size must be >= 2 (in-batch negatives)");
  if (hops < 1) fail(ErrorCode::InvalidArgument, "hops must be >= 1");
  if (max_sample_nodes < 0) fail(ErrorCode::InvalidArgument, "max_sample_nodes must be >= 0");
  if (!(perturb_scale >= 0.0)) fail(ErrorCode::InvalidArgument, "perturb_scale must be >= 0");
  if (!(lr >= 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (decoder_hidden < 1) fail(ErrorCode::InvalidArgument, "decoder_hidden must be >= 1");
  if (!(early_stop_tol >= 0.0)) fail(ErrorCode::InvalidArgument, "early_stop_tol must be >= 0");
  view_a.validate();
  view_b.validate();
}

Index augment_count(double ratio, Index n) {
  const double raw = std::ceil(ratio * static_cast<double>(n) - 1e-6);
  return std::clamp<Index>(static_cast<Index>(raw), 0, n);
}

namespace {

// Partial Fisher-Yates: the first k entries of `items` become a uniform
// random k-subset.
template <typename T>
void choose_prefix(std::vector<T>& items, std::size_t k, Rng& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

Subgraph keep_positions(const Subgraph& s, const std::vector<bool>& keep, Index feature_dim) {
  std::vector<Index> remap(s.nodes.size(), -1);
  Subgraph out;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<Index>(out.nodes.size());
    out.nodes.push_back(s.nodes[i]);
  }
  out.center = remap[static_cast<std::size_t>(s.center)];
  for (auto [u, v] : s.edges) {
    if (remap[u] >= 0 && remap[v] >= 0) out.edges.emplace_back(remap[u], remap[v]);
  }
  for (Index m : s.masked) {
    const Index r = remap[static_cast<std::size_t>(m / feature_dim)];
    if (r >= 0) out.masked.push_back(r * feature_dim + m % feature_dim);
  }
  return out;
}

bool protected_pos(const Subgraph& s, std::size_t i, const std::function<bool(Index)>& keep) {
  return static_cast<Index>(i) == s.center || (keep && keep(s.nodes[i]));
}

Subgraph node_drop(const Subgraph& s, double ratio, Rng& rng, Index dim, const std::function<bool(Index)>& keep) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < s.nodes.size(); ++i)
    if (!protected_pos(s, i, keep)) candidates.push_back(i);
  const auto count = static_cast<std::size_t>(augment_count(ratio, s.size()));
  choose_prefix(candidates, count, rng);
  std::vector<bool> kept(s.nodes.size(), true);
  for (std::size_t i = 0; i < std::min(count, candidates.size()); ++i) kept[candidates[i]] = false;
  return keep_positions(s, kept, dim);
}

Subgraph edge_perturb(const Subgraph& s, double ratio, Rng& rng) {
  std::vector<Edge> loops, proper;
  for (const auto& e : s.edges) (e.first == e.second ? loops : proper).push_back(e);
  const auto count = static_cast<std::size_t>(augment_count(ratio, static_cast<Index>(proper.size())));
  choose_prefix(proper, count, rng);
  std::set<Edge> present(proper.begin(), proper.end());
  std::vector<Edge> kept(proper.begin() + static_cast<std::ptrdiff_t>(count), proper.end());

  const Index n = s.size();
  std::size_t added = 0;
  if (n >= 2) {
    std::uniform_int_distribution<Index> node(0, n - 1);
    const std::size_t max_attempts = 100 * count + 10;
    for (std::size_t attempt = 0; added < count && attempt < max_attempts; ++attempt) {
      Index u = node(rng), v = node(rng);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (!present.insert({u, v}).second) continue;
      kept.emplace_back(u, v);
      ++added;
    }
  }
  Subgraph out = s;
  out.edges = std::move(kept);
  out.edges.insert(out.edges.end(), loops.begin(), loops.end());
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

Subgraph attr_mask(const Subgraph& s, double ratio, Rng& rng, Index dim) {
  const Index total = s.size() * dim;
  std::vector<bool> already(static_cast<std::size_t>(total), false);
  for (Index m : s.masked) already[static_cast<std::size_t>(m)] = true;
  std::vector<Index> free;
  free.reserve(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i)
    if (!already[static_cast<std::size_t>(i)]) free.push_back(i);
  const auto count = static_cast<std::size_t>(augment_count(ratio, total));
  choose_prefix(free, count, rng);
  Subgraph out = s;
  out.masked.insert(out.masked.end(), free.begin(), free.begin() + static_cast<std::ptrdiff_t>(std::min(count, free.size())));
  std::sort(out.masked.begin(), out.masked.end());
  return out;
}

Subgraph random_walk_subgraph(const Subgraph& s, double ratio, Rng& rng, Index dim,
                              const std::function<bool(Index)>& keep) {
  const Index n = s.size();
  const Index target = n - augment_count(ratio, n);
  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  for (auto [u, v] : s.edges) {
    if (u == v) continue;
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  std::vector<bool> queued(static_cast<std::size_t>(n), false);
  std::vector<Index> frontier;
  Index count = 0;
  auto take = [&](Index i) {
    kept[i] = true;
    ++count;
    for (Index j : nbrs[i]) {
      if (!kept[j] && !queued[j]) {
        queued[j] = true;
        frontier.push_back(j);
      }
    }
  };
  for (std::size_t i = 0; i < s.nodes.size(); ++i)
    if (protected_pos(s, i, keep)) take(static_cast<Index>(i));
  while (count < target && !frontier.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    const std::size_t at = pick(rng);
    const Index next = frontier[at];
    frontier[at] = frontier.back();
    frontier.pop_back();
    if (!kept[next]) take(next);
  }
  return keep_positions(s, kept, dim);
}

}  // namespace

Subgraph augment(const Subgraph& s, const AugmentationSpec& spec, Rng& rng, Index feature_dim,
                 const std::function<bool(Index)>& keep) {
  spec.validate();
  if (s.nodes.empty()) fail(ErrorCode::EmptySubset, "cannot augment an empty subgraph");
  switch (spec.kind) {
    case AugKind::NodeDrop: return node_drop(s, spec.ratio, rng, feature_dim, keep);
    case AugKind::EdgePerturb: return edge_perturb(s, spec.ratio, rng);
    case AugKind::AttrMask: return attr_mask(s, spec.ratio, rng, feature_dim);
    case AugKind::Subgraph: return random_walk_subgraph(s, spec.ratio, rng, feature_dim, keep);
  }
  return s;
}

Var nt_xent(Var anchors, Var positives, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be > 0");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    fail(ErrorCode::ShapeMismatch, "nt_xent: anchors and positives differ in shape");
  }
  if (anchors.rows() < 2) fail(ErrorCode::InvalidArgument, "nt_xent needs a batch of at least 2");
  Var logits = ad::scale(ad::cosine_similarity(anchors, positives), 1.0 / tau);
  // Row i shifted by its positive logit: -log softmax_i = lse_j(s_ij - s_ii).
  Var shift = ad::matmul(ad::diag(logits), anchors.tape->constant(Matrix::Ones(1, logits.cols())));
  return ad::mean_all(ad::logsumexp_rows(ad::sub(logits, shift)));
}

Var reconstruction_loss(Tape& tape, MlpDecoder& decoder, Var embeddings, const Matrix& targets) {
  if (embeddings.rows() != targets.rows()) {
    fail(ErrorCode::ShapeMismatch, "reconstruction: " + std::to_string(embeddings.rows()) + " embeddings for " +
                                       std::to_string(targets.rows()) + " targets");
  }
  Var out = decoder.forward(tape, embeddings);
  if (out.cols() != targets.cols()) fail(ErrorCode::ShapeMismatch, "reconstruction: decoder width differs from targets");
  return ad::mse(out, targets);
}

std::unique_ptr<Encoder> perturbed_copy(const Encoder& enc, double eta, Rng& rng) {
  if (!(eta >= 0.0)) fail(ErrorCode::InvalidArgument, "perturbation scale must be >= 0");
  auto copy = enc.clone();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Param* p : copy->params()) {
    const double mean = p->value.mean();
    const double var = (p->value.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += eta * sd * normal(rng);
  }
  return copy;
}

ViewPair simgrace_views(Tape& tape, Encoder& enc, Var features, const Csr& adjacency, double eta, Rng& rng) {
  auto noisy = perturbed_copy(enc, eta, rng);
  Var clean = enc.forward(tape, features, adjacency);
  // The copy's weights are bound on the same tape but never stepped; only
  // the input receives gradient through this view.
  Var other = noisy->forward(tape, features, adjacency);
  return {clean, other};
}

std::vector<Param*> PretrainModel::params() {
  std::vector<Param*> out = encoder->params();
  for (Param* p : decoder.params()) out.push_back(p);
  if (coords.count() > 0) out.push_back(&coords.features);
  return out;
}

PretrainModel PretrainModel::clone() const {
  PretrainModel m;
  m.encoder = encoder->clone();
  m.decoder = decoder;
  m.coords = coords;
  return m;
}

PackedBatch pack(const std::vector<Subgraph>& samples, Index feature_dim) {
  PackedBatch pb;
  pb.offsets.push_back(0);
  std::vector<Edge> edges;
  bool any_mask = false;
  for (const auto& s : samples) {
    const Index base = pb.offsets.back();
    pb.host_ids.insert(pb.host_ids.end(), s.nodes.begin(), s.nodes.end());
    for (auto [u, v] : s.edges) edges.emplace_back(base + u, base + v);
    pb.offsets.push_back(base + s.size());
    any_mask = any_mask || !s.masked.empty();
  }
  const Index n = pb.offsets.back();
  pb.adjacency = Csr::from_undirected(n, edges);
  if (any_mask) {
    pb.mask = Matrix::Ones(n, feature_dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Index base = pb.offsets[i];
      for (Index m : samples[i].masked) pb.mask(base + m / feature_dim, m % feature_dim) = 0.0;
    }
  }
  return pb;
}

PretrainBatch make_views(const PretrainModel& model, const JointGraph& jg, std::vector<Subgraph> clean,
                         const PretrainConfig& cfg, Rng& rng) {
  PretrainBatch b;
  const Index dim = jg.base_features.cols();
  auto is_coord = [&jg](Index v) { return jg.is_coordinator(v); };
  if (cfg.objective == Objective::GraphCl) {
    for (const auto& s : clean) {
      b.view_a.push_back(augment(s, cfg.view_a, rng, dim, is_coord));
      b.view_b.push_back(augment(s, cfg.view_b, rng, dim, is_coord));
    }
  } else {
    b.perturbed = perturbed_copy(*model.encoder, cfg.perturb_scale, rng);
  }
  b.clean = std::move(clean);
  return b;
}

StepLoss pretrain_loss(Tape& tape, PretrainModel& model, const JointGraph& jg, const PretrainBatch& batch,
                       const PretrainConfig& cfg) {
  const Index dim = jg.base_features.cols();
  const Index b = static_cast<Index>(batch.clean.size());
  const auto reduce = to_reduce(cfg.readout);
  Var full = joint_features(tape, jg, model.coords);

  std::vector<Subgraph> all;
  if (cfg.objective == Objective::GraphCl) {
    all.insert(all.end(), batch.view_a.begin(), batch.view_a.end());
    all.insert(all.end(), batch.view_b.begin(), batch.view_b.end());
  }
  all.insert(all.end(), batch.clean.begin(), batch.clean.end());
  const PackedBatch pb = pack(all, dim);

  Var x = ad::gather_rows(full, pb.host_ids);
  if (pb.mask.size() > 0) x = ad::hadamard_const(x, pb.mask);
  Var h = model.encoder->forward(tape, x, pb.adjacency);
  Var pooled = ad::segment_reduce(h, pb.offsets, reduce);

  auto rows = [](Index from, Index count) {
    std::vector<Index> r(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) r[i] = from + i;
    return r;
  };

  Var anchors, positives;
  Index clean_sample0 = 0;
  if (cfg.objective == Objective::GraphCl) {
    anchors = ad::gather_rows(pooled, rows(0, b));
    positives = ad::gather_rows(pooled, rows(b, b));
    clean_sample0 = 2 * b;
  } else {
    if (!batch.perturbed) fail(ErrorCode::InvalidArgument, "simgrace batch lacks a perturbed encoder");
    anchors = pooled;
    Var other = batch.perturbed->forward(tape, x, pb.adjacency);
    positives = ad::segment_reduce(other, pb.offsets, reduce);
  }

  std::vector<Index> recon_rows;
  std::vector<Index> recon_hosts;
  for (Index r = pb.offsets[clean_sample0]; r < pb.offsets.back(); ++r) {
    const Index host = pb.host_ids[r];
    if (jg.is_coordinator(host)) continue;
    recon_rows.push_back(r);
    recon_hosts.push_back(host);
  }
  Matrix targets(static_cast<Index>(recon_hosts.size()), dim);
  for (std::size_t i = 0; i < recon_hosts.size(); ++i) targets.row(i) = jg.base_features.row(recon_hosts[i]);

  StepLoss out;
  out.contrastive = nt_xent(anchors, positives, cfg.temperature);
  out.reconstruction = reconstruction_loss(tape, model.decoder, ad::gather_rows(h, recon_rows), targets);
  out.total = ad::add(out.contrastive, ad::scale(out.reconstruction, cfg.lambda));
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_num(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::ParseError, "checkpoint hyperparameter " + key + " is not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> hyper_record(const ProjectionConfig& proj,
                                                              const EncoderConfig& enc,
                                                              const CoordinatorSet& coords,
                                                              const PretrainConfig& cfg) {
  return {
      {"proj_dim", std::to_string(proj.proj_dim)},
      {"encoder", to_string(enc.kind)},
      {"num_layers", std::to_string(enc.num_layers)},
      {"hidden_dim", std::to_string(enc.hidden_dim)},
      {"activation", to_string(enc.activation)},
      {"fagcn_eps", num(enc.fagcn_eps)},
      {"readout", to_string(cfg.readout)},
      {"decoder_hidden", std::to_string(cfg.decoder_hidden)},
      {"objective", to_string(cfg.objective)},
      {"lambda", num(cfg.lambda)},
      {"tau", num(cfg.temperature)},
      {"num_sources", std::to_string(coords.num_datasets)},
      {"coordinators_per_dataset", std::to_string(coords.config.per_dataset)},
      {"inter_mode", to_string(coords.config.inter_mode)},
  };
}

std::vector<std::pair<std::string, std::string>> architecture_record(const ProjectionConfig& proj,
                                                                     const EncoderConfig& enc, Readout readout) {
  return {
      {"proj_dim", std::to_string(proj.proj_dim)},      {"encoder", to_string(enc.kind)},
      {"num_layers", std::to_string(enc.num_layers)},   {"hidden_dim", std::to_string(enc.hidden_dim)},
      {"activation", to_string(enc.activation)},        {"fagcn_eps", num(enc.fagcn_eps)},
      {"readout", to_string(readout)},
  };
}

std::uint64_t architecture_fingerprint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, std::string>> rec;
  for (const char* k : {"proj_dim", "encoder", "num_layers", "hidden_dim", "activation", "fagcn_eps", "readout"}) {
    rec.emplace_back(k, ckpt.hyper_value(k));
  }
  return record_fingerprint(rec);
}

Checkpoint make_checkpoint(PretrainModel& model, const ProjectionConfig& proj, const PretrainConfig& cfg) {
  Checkpoint ckpt;
  for (auto& [k, v] : hyper_record(proj, model.encoder->config(), model.coords, cfg)) ckpt.set_hyper(k, v);
  for (Param* p : model.encoder->params()) ckpt.add(*p);
  for (Param* p : model.decoder.params()) ckpt.add(*p);
  ckpt.add(model.coords.features);
  return ckpt;
}

EncoderConfig encoder_config_from(const Checkpoint& ckpt) {
  EncoderConfig enc;
  enc.kind = parse_encoder_kind(ckpt.hyper_value("encoder"));
  enc.input_dim = static_cast<Index>(parse_num(ckpt.hyper_value("proj_dim"), "proj_dim"));
  enc.hidden_dim = static_cast<Index>(parse_num(ckpt.hyper_value("hidden_dim"), "hidden_dim"));
  enc.num_layers = static_cast<int>(parse_num(ckpt.hyper_value("num_layers"), "num_layers"));
  enc.activation = parse_activation(ckpt.hyper_value("activation"));
  enc.fagcn_eps = parse_num(ckpt.hyper_value("fagcn_eps"), "fagcn_eps");
  return enc;
}

std::unique_ptr<Encoder> load_encoder(const Checkpoint& ckpt) {
  Rng unused(0);
  auto enc = make_encoder(encoder_config_from(ckpt), unused);
  for (Param* p : enc->params()) ckpt.restore(*p);
  return enc;
}

PretrainSession::PretrainSession(const std::vector<GraphDataset>& graphs, const ProjectionConfig& proj,
                                 const CoordinatorConfig& coords, const EncoderConfig& enc, const PretrainConfig& cfg)
    : proj_(proj), cfg_(cfg) {
  if (graphs.empty()) fail(ErrorCode::EmptyDatasetList, "pretraining needs at least one source graph");
  proj_.validate();
  cfg_.validate();
  if (enc.input_dim != proj_.proj_dim) {
    fail(ErrorCode::DimensionMismatch, "encoder input dim " + std::to_string(enc.input_dim) +
                                           " differs from projection dim " + std::to_string(proj_.proj_dim));
  }
  const auto projected = project_all(graphs, proj_);

  Rng coord_rng(derive_seed(cfg_.seed, {1}));
  Rng enc_rng(derive_seed(cfg_.seed, {2}));
  Rng dec_rng(derive_seed(cfg_.seed, {3}));
  model_.coords = make_coordinators(static_cast<Index>(graphs.size()), proj_.proj_dim, coords, coord_rng);
  model_.encoder = make_encoder(enc, enc_rng);
  model_.decoder = MlpDecoder(enc.hidden_dim, cfg_.decoder_hidden, proj_.proj_dim, dec_rng);
  joint_ = build_joint_graph(graphs, projected, model_.coords);

  AdamConfig ac;
  ac.lr = cfg_.lr;
  adam_ = std::make_unique<Adam>(model_.params(), ac);
}

Index PretrainSession::steps_per_epoch() const {
  return (joint_.num_ordinary() + cfg_.batch_size - 1) / cfg_.batch_size;
}

LossReport PretrainSession::run_epoch() {
  if (model_.coords.count() > 0 && model_.coords.config.inter_mode.kind == InterMode::Kind::Dynamic) {
    joint_ = refresh_dynamic_edges(joint_, model_.coords);
  }
  const Index steps = steps_per_epoch();
  BatchOptions opts;
  opts.batch_size = cfg_.batch_size;
  opts.hops = cfg_.hops;
  opts.max_nodes = cfg_.max_sample_nodes;
  const std::uint64_t sample_seed = derive_seed(cfg_.seed, {4});

  double contrastive = 0.0, reconstruction = 0.0;
  for (Index s = 0; s < steps; ++s) {
    const auto global = static_cast<std::uint64_t>(epoch_) * static_cast<std::uint64_t>(steps) +
                        static_cast<std::uint64_t>(s);
    auto clean = sample_joint_batch(joint_, opts, sample_seed, global);
    Rng view_rng(derive_seed(cfg_.seed, {5, global}));
    const PretrainBatch batch = make_views(model_, joint_, std::move(clean), cfg_, view_rng);

    Tape tape;
    const StepLoss loss = pretrain_loss(tape, model_, joint_, batch, cfg_);
    if (!std::isfinite(loss.total.scalar())) {
      fail(ErrorCode::Diverged, "pretraining loss became non-finite at epoch " + std::to_string(epoch_ + 1));
    }
    tape.backward(loss.total);
    adam_->step();
    contrastive += loss.contrastive.scalar();
    reconstruction += loss.reconstruction.scalar();
  }
  ++epoch_;
  LossReport r;
  r.epoch = epoch_;
  r.contrastive = contrastive / static_cast<double>(steps);
  r.reconstruction = reconstruction / static_cast<double>(steps);
  r.total = r.contrastive + cfg_.lambda * r.reconstruction;
  return r;
}

PretrainResult pretrain(const std::vector<GraphDataset>& graphs, const ProjectionConfig& proj,
                        const CoordinatorConfig& coords, const EncoderConfig& enc, const PretrainConfig& cfg) {
  PretrainSession session(graphs, proj, coords, enc, cfg);
  PretrainResult out;
  constexpr std::size_t kWindow = 10;
  for (int e = 0; e < cfg.epochs; ++e) {
    out.history.push_back(session.run_epoch());
    if (cfg.early_stop_tol > 0.0 && out.history.size() > kWindow) {
      const double then = out.history[out.history.size() - 1 - kWindow].total;
      const double now = out.history.back().total;
      if (std::abs(now - then) <= cfg.early_stop_tol * std::max(std::abs(then), 1e-12)) break;
    }
  }
  out.checkpoint = session.checkpoint();
  out.joint = session.joint();
  return out;
}

}  // namespace gcope
